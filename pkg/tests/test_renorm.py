import math
from fractions import Fraction

import mpmath
import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from circlerenorm.circlemap import DomainError, FourierAnnulusMap, TangentField, distance, rotation
from circlerenorm.renorm import (
    AdmissibilityError,
    build_chart,
    differential_on_V0,
    mode_response,
    renormalize,
    renormalized_rotation,
    rotation_data,
    unstable_eigenvalue,
)

GOLDEN = (math.sqrt(5) - 1) / 2
SILVER = math.sqrt(2) - 1


def perturbed(seed, size=1e-4, eps=0.5, K=4, alpha=GOLDEN):
    rng = np.random.default_rng(seed)
    coeffs = {}
    for k in range(1, K + 1):
        c = size * (rng.normal() + 1j * rng.normal()) / math.sqrt(2) * math.exp(-2 * math.pi * eps * k)
        coeffs[k] = c
        coeffs[-k] = np.conj(c)
    return FourierAnnulusMap(eps, alpha, coeffs, degree=K)


def test_rotation_data_golden():
    rot = rotation_data(GOLDEN)
    assert (rot.n, rot.m, rot.q_next) == (89, 10, 144)
    assert rot.l == pytest.approx(GOLDEN**11, rel=1e-12)
    assert rot.beta == pytest.approx(1 - GOLDEN, abs=1e-9)
    assert rot.derivative == pytest.approx(1 / rot.l**2, rel=1e-9)
    assert rotation_data(rot) is rot


def test_rotation_data_accepts_strings_and_fractions():
    assert rotation_data("golden").n == 89
    assert rotation_data(Fraction(GOLDEN)).n == 89


def test_renormalized_rotation_closed_form():
    with mpmath.workdps(50):
        g = (mpmath.sqrt(5) - 1) / 2
        assert abs(renormalized_rotation("golden") - (1 - g)) < mpmath.mpf(10) ** -40
        s = mpmath.sqrt(2) - 1
        b = renormalized_rotation("silver")
        # for the silver mean every alpha_n equals alpha; beta is a rational function of alpha
        rot = rotation_data(SILVER)
        expect = (rot.q_next * s - rot.p_next) / (rot.n * s - rot.p_m)
        assert abs(b - (expect - mpmath.floor(expect))) < mpmath.mpf(10) ** -40


def test_renormalize_golden_rotation():
    tr = renormalize(rotation(GOLDEN, 0.5, 4), GOLDEN)
    out = tr.output
    assert abs(out.mean.real - (1 - GOLDEN)) < 1e-8
    assert np.max(np.abs(out.coeffs)) < 1e-9
    assert tr.tail_energy < 1e-9
    # every sampled point returns after q_{m+1} = 144 iterates or 144 - 89
    assert set(tr.first_return_itinerary) <= {144, 55, 233}


def test_renormalize_silver_rotation():
    tr = renormalize(rotation(SILVER, 0.5, 4), SILVER)
    assert abs(tr.output.mean.real - tr.beta_rotation) < 1e-8


def test_chart_diagnostics_for_rotation():
    ch = build_chart(rotation(GOLDEN, 0.5, 4), GOLDEN)
    assert ch.n == 89
    assert ch.residual_conj < 1e-10
    assert ch.linear_defect < 1e-10
    assert ch.mu.norm_inf < 1e-12
    summary = ch.summary()
    assert summary["n"] == 89 and summary["m"] == 10


def test_chart_quadrilateral_closed():
    ch = build_chart(perturbed(1), GOLDEN, diagnostics=False)
    q = ch.quadrilateral(17)
    assert q[0] == q[-1]
    assert ch.quadrilateral_csv(5).startswith("re,im\n")


def test_psi_inverse_round_trip():
    ch = build_chart(perturbed(2), GOLDEN, diagnostics=False)
    w = np.linspace(0.05, 0.95, 7) + 0.3j
    assert np.max(np.abs(ch.psi(ch.psi_inv(w)) - w)) < 1e-10


def test_inadmissible_far_map():
    with pytest.raises(AdmissibilityError):
        build_chart(rotation(GOLDEN + 0.2, 0.5, 4), GOLDEN)


def test_output_strip_limit():
    with pytest.raises(DomainError):
        renormalize(rotation(GOLDEN, 0.5, 4), GOLDEN, epsilon_out=1.0)


@settings(max_examples=6, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(st.integers(0, 2**31))
def test_chart_functional_equation_property(seed):
    ch = build_chart(perturbed(seed), GOLDEN)
    assert ch.residual_conj < 1e-6


def test_linear_defect_scales_with_perturbation():
    small = build_chart(perturbed(3, size=1e-5), GOLDEN).linear_defect
    large = build_chart(perturbed(3, size=2e-5), GOLDEN).linear_defect
    assert 1.5 < large / small < 2.5


def test_renormalize_perturbation_is_real_symmetric():
    tr = renormalize(perturbed(4), GOLDEN)
    assert tr.output.is_real_symmetric(1e-8)
    assert abs(tr.output.mean.real - (1 - GOLDEN)) < 1e-2


def test_unstable_eigenvalue_closed_form():
    ev = unstable_eigenvalue(GOLDEN)
    assert ev.closed_form == pytest.approx(GOLDEN**-22, rel=1e-9)
    assert ev.closed_form == pytest.approx(39603.0, rel=1e-6)


@pytest.mark.slow
def test_unstable_eigenvalue_finite_difference():
    ev = unstable_eigenvalue(GOLDEN, check=True)
    assert ev.relative_error < 1e-3


@pytest.mark.slow
def test_mode_response_mean_vanishes():
    r, q = mode_response(GOLDEN, 1, 2.0, factored=True)
    scale = max(1.0, r.sup_norm())
    assert abs(r.mean) < 1e-6 * scale
    assert distance(r, q) < 1e-4 * scale


def test_differential_rejects_mean():
    with pytest.raises(DomainError):
        differential_on_V0(GOLDEN, TangentField(2.0, 0.1, {1: 1.0, -1: 1.0}))
