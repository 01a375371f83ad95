"""Command-line interface.

Exit codes: 0 success, 2 input or domain error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import cfrac
from .circlemap import DomainError, FourierAnnulusMap, NonConvergenceError, distance, rotation, rotation_number
from .config import get_config, set_config

EXIT_OK = 0
EXIT_DOMAIN = 2
EXIT_NUMERICAL = 3


class _PartialFailure(Exception):
    def __init__(self, payload, message):
        super().__init__(message)
        self.payload = payload


def _default(o):
    if isinstance(o, complex):
        return [o.real, o.imag]
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"cannot serialize {type(o).__name__}")


def dumps(obj) -> str:
    """JSON with sorted keys and shortest round-trip float formatting."""
    return json.dumps(obj, sort_keys=True, indent=2, default=_default, allow_nan=True)


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text if text.endswith("\n") else text + "\n")
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _alpha_arg(text: str):
    """Named constant or exact decimal string; returned unchanged for parse_alpha."""
    return text


def _alpha_float(text: str) -> float:
    return float(cfrac.parse_alpha(text)[0])


def _load_map(args) -> FourierAnnulusMap:
    if getattr(args, "map", None):
        data = json.loads(Path(args.map).read_text())
        degree = getattr(args, "degree", None)
        return FourierAnnulusMap.from_dict(data, degree)
    if getattr(args, "arnold", None):
        from .families import arnold

        mu, a = args.arnold
        return arnold(mu, a, args.epsilon)
    if getattr(args, "rotation", None) is not None:
        return rotation(_alpha_float(args.rotation), args.epsilon, getattr(args, "degree", None) or 8)
    raise DomainError("one of --map, --rotation or --arnold is required")


# ---------------------------------------------------------------------------
# subcommands


def cmd_brjuno(args) -> int:
    cf = cfrac.expand(args.alpha, args.depth, digits=args.digits)
    payload = {"continued_fraction": cf.to_dict(), "terminated": cf.terminated}
    if cf.terminated and cf.depth < args.depth:
        payload["notice"] = f"alpha is rational with {cf.depth} partial quotients; the Brjuno sums are undefined"
        payload["brjuno_phi"] = None
        payload["brjuno_phi0"] = None
    else:
        val = cfrac.brjuno_phi(cf, args.depth, args.bound)
        payload["brjuno_phi"] = val.to_dict()
        payload["brjuno_phi0"] = cfrac.brjuno_phi0(cf, args.depth)
        try:
            n, m, l = cfrac.return_index(cf)
            payload["return_index"] = {"n": n, "m": m, "l": l}
        except cfrac.NoReturnIndexError:
            payload["return_index"] = None
    if args.json:
        _emit(dumps(payload), None)
    else:
        lines = [f"partials: {list(cf.partials)}"]
        if payload.get("notice"):
            lines.append(payload["notice"])
        else:
            lines.append(f"Phi  (depth {args.depth}) = {payload['brjuno_phi']['partial_sum']:.15g}")
            lines.append(f"Phi0 (depth {args.depth}) = {payload['brjuno_phi0']:.15g}")
            if payload["return_index"]:
                ri = payload["return_index"]
                lines.append(f"return index n = {ri['n']} (m = {ri['m']}, l = {ri['l']:.12g})")
        _emit("\n".join(lines), None)
    return EXIT_OK


def cmd_renormalize(args) -> int:
    from .renorm import renormalize, renormalized_rotation

    f = _load_map(args)
    hint = args.alpha_hint or args.rotation
    if hint is None:
        raise DomainError("--alpha-hint is required with --map")
    alpha = hint
    chain = {"input": f.to_dict(), "steps": []}
    g = f
    for k in range(args.steps):
        a_float = float(cfrac.parse_alpha(alpha)[0]) if isinstance(alpha, str) else float(alpha)
        try:
            shift = 0j
            if args.reanchor and k > 0:
                from .probes import kam_linearize

                shift = kam_linearize(g, alpha, translate=True).translation
                g = FourierAnnulusMap(g.strip, g.mean + shift, np.array(g.coeffs), tail_energy=g.tail_energy)
            tr = renormalize(g, a_float, degree=args.degree, epsilon_out=args.epsilon_out)
        except (ArithmeticError, NonConvergenceError) as exc:
            chain["failure"] = {"step": k, "error": f"{type(exc).__name__}: {exc}"}
            raise _PartialFailure(chain, str(exc)) from exc
        step = tr.to_dict()
        alpha = renormalized_rotation(alpha if isinstance(alpha, str) else float(alpha))
        out = tr.output
        step["reanchor_shift"] = [shift.real, shift.imag]
        step["distance_to_rotation"] = distance(out, rotation(float(alpha), out.epsilon, 1))
        chain["steps"].append(step)
        g = out
    chain["output"] = g.to_dict()
    _emit(dumps(chain), args.out)
    return EXIT_OK


def cmd_linearize(args) -> int:
    from .probes import kam_linearize

    f = _load_map(args)
    alpha = args.alpha or args.rotation
    if alpha is None:
        raise DomainError("--alpha is required")
    res = kam_linearize(f, alpha, args.max_steps, tolerance=args.tolerance, epsilon=args.xi_epsilon)
    _emit(dumps(res.to_dict()), args.out)
    return EXIT_OK


def cmd_tongue(args) -> int:
    from .families import tongue_csv, tongue_curve

    grid = np.linspace(0.0, args.a_max, args.grid)
    rows = tongue_curve(args.alpha, grid, tolerance=args.tolerance, jobs=args.jobs, with_residuals=True)
    _emit(tongue_csv(args.alpha, rows), args.out)
    return EXIT_OK


def cmd_probe(args) -> int:
    from .probes import hyperbolicity_probe

    rep = hyperbolicity_probe(args.alpha, args.epsilon, args.samples, args.max_mode, args.seed,
                              check_eigenvalue=args.check_eigenvalue)
    _emit(dumps(rep), args.out)
    return EXIT_OK


def cmd_rotation_number(args) -> int:
    f = _load_map(args)
    rn = rotation_number(f, args.iterations, args.plain_iterations)
    payload = {"rotation_number": rn.value, "error": rn.error, "plain": rn.plain, "birkhoff": rn.birkhoff,
               "locked": list(rn.locked) if rn.locked else None}
    _emit(dumps(payload), args.out)
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    cfg = get_config()
    p = argparse.ArgumentParser(prog="circlerenorm", description="Renormalization of analytic circle maps near rotations.")
    p.add_argument("--config", help="JSON file overriding the packaged numerical defaults")
    sub = p.add_subparsers(dest="command", required=True)

    b = sub.add_parser("brjuno", help="continued fraction, Brjuno sums and return index")
    b.add_argument("--alpha", required=True, type=_alpha_arg)
    b.add_argument("--depth", type=int, default=40)
    b.add_argument("--digits", type=int, default=None, help="precision budget for named constants")
    b.add_argument("--bound", type=float, default=None, help="membership threshold C for B_C")
    b.add_argument("--json", action="store_true")
    b.set_defaults(func=cmd_brjuno)

    def map_source(sp, rotation_help="rigid rotation by this angle"):
        g = sp.add_mutually_exclusive_group()
        g.add_argument("--map", help="map JSON file")
        g.add_argument("--rotation", type=_alpha_arg, help=rotation_help)
        g.add_argument("--arnold", type=float, nargs=2, metavar=("MU", "A"))
        sp.add_argument("--epsilon", type=float, default=0.5)
        sp.add_argument("--out")

    r = sub.add_parser("renormalize", help="apply the renormalization operator")
    map_source(r)
    r.add_argument("--alpha-hint", type=_alpha_arg)
    r.add_argument("--steps", type=int, default=1)
    r.add_argument("--degree", type=int, default=cfg["renorm"]["degree"])
    r.add_argument("--epsilon-out", type=float, default=None)
    r.add_argument("--reanchor", action="store_true",
                   help="remove the rounding drift off the conjugacy class before each later step")
    r.set_defaults(func=cmd_renormalize)

    k = sub.add_parser("linearize", help="KAM linearization of a map conjugate to a rotation")
    map_source(k)
    k.add_argument("--alpha", type=_alpha_arg)
    k.add_argument("--max-steps", type=int, default=cfg["kam"]["max_iter"])
    k.add_argument("--tolerance", type=float, default=cfg["kam"]["tolerance"])
    k.add_argument("--xi-epsilon", type=float, default=None)
    k.add_argument("--degree", type=int, default=None)
    k.set_defaults(func=cmd_linearize)

    t = sub.add_parser("tongue", help="trace the Arnold tongue of an irrational rotation number")
    t.add_argument("--alpha", required=True, type=_alpha_arg)
    t.add_argument("--a-max", type=float, default=cfg["tongue"]["delta"])
    t.add_argument("--grid", type=int, default=11)
    t.add_argument("--tolerance", type=float, default=1e-12)
    t.add_argument("--jobs", type=int, default=1)
    t.add_argument("--out")
    t.set_defaults(func=cmd_tongue)

    h = sub.add_parser("probe-hyperbolicity", help="unstable eigenvalue and contraction on zero-mean fields")
    h.add_argument("--alpha", required=True, type=_alpha_arg)
    h.add_argument("--epsilon", type=float, default=2.0)
    h.add_argument("--samples", type=int, default=10)
    h.add_argument("--max-mode", type=int, default=3)
    h.add_argument("--seed", type=int, default=0)
    h.add_argument("--check-eigenvalue", action="store_true")
    h.add_argument("--out")
    h.set_defaults(func=cmd_probe)

    q = sub.add_parser("rotation-number", help="rotation number of a real circle map")
    map_source(q)
    q.add_argument("--iterations", type=int, default=cfg["rotation"]["iterations"])
    q.add_argument("--plain-iterations", type=int, default=None)
    q.add_argument("--degree", type=int, default=None)
    q.set_defaults(func=cmd_rotation_number)
    return p


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    try:
        if known.config:
            set_config(path=known.config)
        args = build_parser().parse_args(argv)
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    try:
        return args.func(args)
    except _PartialFailure as exc:
        _emit(dumps(exc.payload), getattr(args, "out", None))
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (DomainError, cfrac.DomainError, cfrac.TerminatedExpansionError, cfrac.NoReturnIndexError,
            ValueError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except ArithmeticError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
