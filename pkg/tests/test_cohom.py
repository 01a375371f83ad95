import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from circlerenorm.circlemap import DomainError, TangentField, distance, rotation
from circlerenorm.cohom import (
    SmallDivisorError,
    apply_L,
    bound_constant,
    conjugate_rotation,
    small_divisors,
    solve_homological,
    tangent_family,
)

GOLDEN = (math.sqrt(5) - 1) / 2


def random_field(seed, eps=0.5, K=32):
    rng = np.random.default_rng(seed)
    a = np.zeros(2 * K + 1, dtype=complex)
    for k in range(1, K + 1):
        c = (rng.normal() + 1j * rng.normal()) * np.exp(-2 * np.pi * eps * k)
        a[K + k] = c
        a[K - k] = np.conj(c)
    return TangentField(eps, 0.0, a)


def residual(h, v, alpha, eps, n=256):
    x = np.arange(n) / n
    worst = 0.0
    for y in (-eps, 0.0, eps):
        z = x + 1j * y
        worst = max(worst, float(np.max(np.abs(h(z + alpha) - h(z) - v(z)))))
    return worst


def test_small_divisors_closed_form():
    d = small_divisors(GOLDEN, 3)
    for k in range(-3, 4):
        assert d[k + 3] == pytest.approx(np.exp(2j * np.pi * k * GOLDEN) - 1, abs=1e-15)


def test_golden_degree32_residual():
    eps = 0.5
    v = random_field(0, eps)
    h = solve_homological(v, GOLDEN)
    assert h.epsilon == pytest.approx(0.9 * eps)
    assert residual(h, v, GOLDEN, 0.9 * eps) < 1e-11


def test_normalization_h_at_zero():
    h = solve_homological(random_field(1), GOLDEN)
    assert abs(h(0.0)) < 1e-15


def test_nonzero_mean_rejected():
    v = TangentField(0.5, 0.1, {1: 0.1, -1: 0.1})
    with pytest.raises(DomainError):
        solve_homological(v, GOLDEN)


def test_target_wider_than_allowed_rejected():
    with pytest.raises(DomainError):
        solve_homological(random_field(2), GOLDEN, 0.49)


def test_rational_alpha_hits_divisor_floor():
    v = TangentField(0.5, 0.0, {4: 0.01, -4: 0.01}, degree=8)
    with pytest.raises(SmallDivisorError) as info:
        solve_homological(v, Fraction(1, 4))
    assert abs(info.value.k) == 4


def test_apply_L_inverts_solve():
    v = random_field(3, K=16)
    h = solve_homological(v, GOLDEN)
    Lh = apply_L(h, GOLDEN)
    assert np.max(np.abs(Lh.coeffs - v.coeffs)) < 1e-15


def test_report_growth_and_csv():
    _, rep = solve_homological(random_field(4), GOLDEN, report=True)
    assert rep.growth_violations == []
    assert rep.bound_c == pytest.approx(bound_constant(GOLDEN, 0.5, 32))
    lines = rep.to_csv().splitlines()
    assert lines[0] == "k,divisor,abs_a,abs_b"
    assert len(lines) == 1 + 64


def test_conjugate_rotation_zero_zeta_is_rotation():
    v = random_field(5, K=8)
    f = conjugate_rotation(solve_homological(v, GOLDEN), GOLDEN, 0.0)
    assert distance(f, rotation(GOLDEN, f.epsilon, f.degree)) == 0


def test_tangent_family_derivative_is_v():
    # d/dzeta f_zeta at zeta = 0 equals h(x + alpha) - h(x) = v(x)
    v = random_field(6, K=8)
    zeta = 1e-5
    fp = tangent_family(v, GOLDEN, zeta, epsilon=0.3, degree=16)
    fm = tangent_family(v, GOLDEN, -zeta, epsilon=0.3, degree=16)
    x = np.linspace(0, 1, 33)
    fd = (fp(x + 0j) - fm(x + 0j)) / (2 * zeta)
    assert np.max(np.abs(fd - v(x + 0j))) < 1e-6


def test_oversized_zeta_rejected():
    from circlerenorm.circlemap import NonConvergenceError

    v = random_field(7, K=8)
    with pytest.raises(NonConvergenceError):
        tangent_family(v, GOLDEN, 100.0)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([GOLDEN, math.sqrt(2) - 1, math.pi - 3, 1 / (2 + GOLDEN)]))
def test_residual_property(seed, alpha):
    v = random_field(seed, K=24)
    h = solve_homological(v, alpha)
    assert residual(h, v, alpha, 0.45) < 1e-10


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(-3, 3))
def test_linearity_property(seed, s):
    v = random_field(seed, K=12)
    w = random_field(seed + 1, K=12)
    lhs = solve_homological(v + w * s, GOLDEN)
    rhs = solve_homological(v, GOLDEN) + solve_homological(w, GOLDEN) * s
    assert np.max(np.abs(lhs.coeffs - rhs.coeffs)) < 1e-12 * (1 + abs(s))
    assert abs(lhs.mean - rhs.mean) < 1e-12 * (1 + abs(s))
