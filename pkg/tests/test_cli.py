import json
import math
from fractions import Fraction

import jsonschema
import pytest

from circlerenorm.circlemap import FourierAnnulusMap, rotation
from circlerenorm.cli import EXIT_DOMAIN, EXIT_NUMERICAL, EXIT_OK, main

GOLDEN = (math.sqrt(5) - 1) / 2

BRJUNO_SCHEMA = {
    "type": "object",
    "required": ["continued_fraction", "terminated", "brjuno_phi", "brjuno_phi0", "return_index"],
    "properties": {
        "continued_fraction": {
            "type": "object",
            "required": ["alpha_decimal", "partials", "convergents"],
            "properties": {
                "partials": {"type": "array", "items": {"type": "integer", "minimum": 1}},
                "convergents": {"type": "array", "items": {"type": "array", "minItems": 2, "maxItems": 2}},
            },
        },
        "terminated": {"type": "boolean"},
        "brjuno_phi": {
            "type": "object",
            "required": ["partial_sum", "terms", "truncation_depth"],
            "properties": {"partial_sum": {"type": "number"}, "terms": {"type": "array"}},
        },
        "brjuno_phi0": {"type": "number"},
        "return_index": {
            "type": ["object", "null"],
            "properties": {"n": {"type": "integer"}, "m": {"type": "integer"}, "l": {"type": "number"}},
        },
    },
}

MAP_SCHEMA = {
    "type": "object",
    "required": ["epsilon", "mean", "coeffs"],
}


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_brjuno_text(capsys):
    code, out, _ = run(capsys, "brjuno", "--alpha", "golden", "--depth", "40")
    assert code == EXIT_OK
    assert "1.2598289" in out
    assert "return index n = 89" in out


def test_brjuno_rational_notice(capsys):
    code, out, _ = run(capsys, "brjuno", "--alpha", "0.25")
    assert code == EXIT_OK
    assert "rational" in out


def test_brjuno_json_schema(capsys):
    code, out, _ = run(capsys, "brjuno", "--alpha", "0.3141592653", "--depth", "6", "--json")
    assert code == EXIT_OK
    payload = json.loads(out)
    jsonschema.validate(payload, BRJUNO_SCHEMA)
    # exact Gauss-map oracle
    x, oracle = Fraction("0.3141592653"), []
    for _ in range(6):
        oracle.append(int(1 / x))
        x = 1 / x - oracle[-1]
    assert payload["continued_fraction"]["partials"] == oracle


def test_brjuno_domain_error(capsys):
    code, _, err = run(capsys, "brjuno", "--alpha", "1.5")
    assert code == EXIT_DOMAIN
    assert "error" in err


def test_bad_alpha_string(capsys):
    code, _, _ = run(capsys, "brjuno", "--alpha", "not-a-number")
    assert code == EXIT_DOMAIN


def test_renormalize_rotation(capsys, tmp_path):
    out_file = tmp_path / "chain.json"
    code, _, _ = run(capsys, "renormalize", "--rotation", "golden", "--steps", "1", "--out", str(out_file))
    assert code == EXIT_OK
    chain = json.loads(out_file.read_text())
    jsonschema.validate(chain["output"], MAP_SCHEMA)
    assert chain["output"]["mean"][0] == pytest.approx(1 - GOLDEN, abs=1e-8)
    assert len(chain["steps"]) == 1


def test_renormalize_zero_steps_echoes_input(capsys):
    code, out, _ = run(capsys, "renormalize", "--rotation", "golden", "--steps", "0")
    assert code == EXIT_OK
    chain = json.loads(out)
    assert chain["output"] == chain["input"]


def test_renormalize_chart_failure_emits_partial_trace(capsys, tmp_path):
    far = FourierAnnulusMap(0.5, GOLDEN + 0.2, degree=2)
    path = tmp_path / "far.json"
    path.write_text(far.to_json())
    code, out, err = run(capsys, "renormalize", "--map", str(path), "--alpha-hint", "golden")
    assert code == EXIT_NUMERICAL
    chain = json.loads(out)
    assert chain["failure"]["step"] == 0
    assert chain["steps"] == []
    assert "numerical failure" in err


def test_renormalize_deterministic(capsys, tmp_path):
    outs = []
    for i in range(2):
        p = tmp_path / f"run{i}.json"
        assert main(["renormalize", "--rotation", "silver", "--steps", "1", "--out", str(p)]) == EXIT_OK
        outs.append(p.read_bytes())
    assert outs[0] == outs[1]


def test_rotation_number_subcommand(capsys):
    code, out, _ = run(capsys, "rotation-number", "--rotation", "0.3")
    assert code == EXIT_OK
    assert json.loads(out)["rotation_number"] == 0.3


def test_rotation_number_arnold_locked(capsys):
    code, out, _ = run(capsys, "rotation-number", "--arnold", "0.5", "0.2")
    assert code == EXIT_OK
    assert json.loads(out)["locked"] == [1, 2]


def test_rotation_number_requires_source(capsys):
    code, _, _ = run(capsys, "rotation-number")
    assert code == EXIT_DOMAIN


def test_linearize_map_file(capsys, tmp_path):
    path = tmp_path / "rot.json"
    path.write_text(rotation(GOLDEN, 0.5, 4).to_json())
    code, out, _ = run(capsys, "linearize", "--map", str(path), "--alpha", "golden")
    assert code == EXIT_OK
    assert json.loads(out)["steps"] == 0


def test_tongue_csv_rows(capsys):
    code, out, _ = run(capsys, "tongue", "--alpha", "golden", "--a-max", "0.05", "--grid", "3")
    assert code == EXIT_OK
    lines = out.strip().splitlines()
    assert lines[0] == "alpha,a,mu,rho_residual"
    assert len(lines) == 4
    alpha, a, mu, _ = lines[1].split(",")
    assert float(a) == 0 and mu == alpha


def test_tongue_rational_is_domain_error(capsys):
    code, _, _ = run(capsys, "tongue", "--alpha", "1/3", "--grid", "2")
    assert code == EXIT_DOMAIN


@pytest.mark.slow
def test_probe_hyperbolicity(capsys):
    code, out, _ = run(capsys, "probe-hyperbolicity", "--alpha", "golden", "--samples", "2", "--max-mode", "1")
    assert code == EXIT_OK
    rep = json.loads(out)
    assert rep["unstable_eigenvalue"] == pytest.approx(39603.0, rel=1e-6)
    assert rep["v0_ratio"] < 1


def test_config_file_override(capsys, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"rotation": {"iterations": 500}}))
    code, out, _ = run(capsys, "--config", str(cfg), "rotation-number", "--arnold", "0.3", "0.05")
    assert code == EXIT_OK
    from circlerenorm.config import get_config, reset_config

    assert get_config()["rotation"]["iterations"] == 500
    reset_config()


def test_config_unknown_key(capsys, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"nope": 1}))
    code, _, _ = run(capsys, "--config", str(cfg), "rotation-number", "--rotation", "0.3")
    assert code == EXIT_DOMAIN


@pytest.mark.slow
def test_renormalize_perturbed_map_two_steps(capsys, tmp_path):
    import numpy as np

    from circlerenorm.circlemap import distance
    from circlerenorm.cohom import tangent_family
    from circlerenorm.probes import random_v0

    v = random_v0(0.5, 8, np.random.default_rng(6))
    f = tangent_family(v, GOLDEN, 1e-3, degree=32)
    path = tmp_path / "f.json"
    path.write_text(f.to_json())
    code, out, _ = run(capsys, "renormalize", "--map", str(path), "--alpha-hint", "golden",
                       "--steps", "2", "--reanchor")
    assert code == EXIT_OK
    chain = json.loads(out)
    d0 = distance(f, rotation(GOLDEN, f.epsilon, 1))
    d1, d2 = (s["distance_to_rotation"] for s in chain["steps"])
    assert d1 < d0 and d2 < d1
