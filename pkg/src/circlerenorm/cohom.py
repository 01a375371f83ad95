"""Cohomological equation h(z+alpha) - h(z) = v(z) and conjugacy families.

``solve_homological`` is the operator M_alpha (v -> h), ``apply_L`` its
left inverse L_alpha (h -> h(.+alpha) - h).  ``tangent_family`` builds the
curve f_zeta = (id + zeta h) R_alpha (id + zeta h)^{-1} of maps conjugate to
the rotation, tangent to v at zeta = 0.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .circlemap import (
    TWO_PI,
    DomainError,
    FourierAnnulusMap,
    NonConvergenceError,
    StripDomain,
    TangentField,
    sample_fit,
)

__all__ = [
    "SmallDivisorError",
    "HomologicalReport",
    "small_divisors",
    "solve_homological",
    "apply_L",
    "apply_M",
    "bound_constant",
    "condition_qn",
    "tangent_family",
    "conjugate_rotation",
]

DIVISOR_FLOOR = 1e-300
SHRINK = 0.9


class SmallDivisorError(ArithmeticError):
    def __init__(self, k: int, value: float):
        super().__init__(f"small divisor |e^(2 pi i k alpha) - 1| = {value:.3g} below floor at k = {k}")
        self.k = k
        self.value = value


def _alpha_float(alpha) -> float:
    if isinstance(alpha, (float, int, np.floating)):
        return float(alpha)
    from .cfrac import parse_alpha

    value, _ = parse_alpha(alpha)
    return float(value)


def small_divisors(alpha, degree: int) -> np.ndarray:
    """e^{2 pi i k alpha} - 1 for k = -degree..degree (k = 0 entry is 0)."""
    ks = np.arange(-degree, degree + 1)
    phase = ks * _alpha_float(alpha)
    # reduce to the nearest integer so resonant k give an exact zero and
    # near-resonant ones keep full relative precision
    phase = phase - np.round(phase)
    return np.expm1(1j * TWO_PI * phase)


@dataclass
class HomologicalReport:
    alpha: float
    divisors: np.ndarray          # |e^{2 pi i k alpha} - 1|, index k + K
    source: np.ndarray            # |a_k|
    solution: np.ndarray          # |b_k|
    growth_violations: list = field(default_factory=list)
    bound_c: float = float("nan")

    def to_csv(self) -> str:
        K = (len(self.divisors) - 1) // 2
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["k", "divisor", "abs_a", "abs_b"])
        for i in range(len(self.divisors)):
            k = i - K
            if k == 0:
                continue
            w.writerow([k, f"{self.divisors[i]:.17g}", f"{self.source[i]:.17g}", f"{self.solution[i]:.17g}"])
        return buf.getvalue()


def bound_constant(alpha, epsilon: float, degree: int) -> float:
    """c(alpha, eps) = sum_k exp(-2 pi 0.1 eps |k|) / |e^{2 pi i k alpha} - 1| over retained modes."""
    d = np.abs(small_divisors(alpha, degree))
    ks = np.abs(np.arange(-degree, degree + 1))
    mask = ks != 0
    return float(np.sum(np.exp(-TWO_PI * 0.1 * epsilon * ks[mask]) / d[mask]))


def condition_qn(convergents, epsilon: float) -> bool:
    """log q_{k+1} / q_k < 2 pi 0.05 eps for every stored pair of denominators."""
    qs = [q for _, q in convergents]
    return all(np.log(q1) / q0 < TWO_PI * 0.05 * epsilon for q0, q1 in zip(qs, qs[1:]) if q0 > 0)


def solve_homological(v: TangentField, alpha, target_strip=None, *, mean_tol: float = 1e-14,
                      report: bool = False):
    """Solve h(z+alpha) - h(z) = v(z) with h(0) = 0.

    Mode by mode b_k = a_k / (e^{2 pi i k alpha} - 1).  The constant term is
    chosen so that h(0) = 0.  The result lives on ``target_strip`` (default
    0.9 of the source strip, the widest allowed).
    """
    eps = v.epsilon
    if target_strip is None:
        target = StripDomain(SHRINK * eps)
    else:
        target = target_strip if isinstance(target_strip, StripDomain) else StripDomain(float(target_strip))
    if target.epsilon > SHRINK * eps * (1 + 1e-12):
        raise DomainError("target strip must be at most 0.9 of the source strip")
    scale = max(1.0, float(np.max(np.abs(v.coeffs), initial=0.0)))
    if abs(v.mean) > mean_tol * scale:
        raise DomainError(f"v must have zero mean (got {v.mean:.3g})")
    K = v.degree
    div = small_divisors(alpha, K)
    a = np.array(v.coeffs)
    b = np.zeros_like(a)
    mags = np.abs(div)
    for i in np.nonzero(a)[0]:
        if mags[i] < DIVISOR_FLOOR:
            raise SmallDivisorError(i - K, float(mags[i]))
        b[i] = a[i] / div[i]
    h = TangentField(target, -np.sum(b), b)
    if not report:
        return h
    ks = np.abs(np.arange(-K, K + 1))
    with np.errstate(divide="ignore"):
        growth_ok = np.abs(b) <= np.abs(a) * np.exp(TWO_PI * ks * 0.09 * eps) * (1 + 1e-12)
    viol = [int(i - K) for i in np.nonzero(a)[0] if not growth_ok[i]]
    rep = HomologicalReport(_alpha_float(alpha), mags, np.abs(a), np.abs(b), viol,
                            bound_constant(alpha, eps, K))
    return h, rep


apply_M = solve_homological


def apply_L(h: TangentField, alpha) -> TangentField:
    """h(z+alpha) - h(z); the constant term drops out."""
    div = small_divisors(alpha, h.degree)
    return TangentField(h.strip, 0.0, np.array(h.coeffs) * div)


def conjugate_rotation(xi_field: TangentField, alpha, zeta=1.0, epsilon: float | None = None,
                       degree: int | None = None) -> FourierAnnulusMap:
    """(id + zeta h) o R_alpha o (id + zeta h)^{-1} as a FourierAnnulusMap."""
    alpha = _alpha_float(alpha)
    h = xi_field
    degree = degree or h.degree
    if zeta == 0:
        return FourierAnnulusMap(epsilon or h.epsilon, alpha, degree=degree)
    size = abs(zeta) * h.sup_on_boundary(include_mean=False)
    if epsilon is None:
        epsilon = h.epsilon - 1.05 * size - abs(zeta * h.mean.imag)
    if epsilon <= 0:
        raise NonConvergenceError("zeta too large: id + zeta h is not invertible on any strip")
    hd = abs(zeta) * float(np.max(np.abs(h.deriv(np.arange(256) / 256 + 1j * h.epsilon * np.array([[-1], [1]])))))
    if hd >= 1:
        raise NonConvergenceError(f"id + zeta h fails the univalence test (sup |zeta h'| = {hd:.3g})")

    def xi(z):
        return z + zeta * h(z, check=False)

    def xi_inv(w):
        z = w - zeta * h.mean
        tol = 1e-15 * max(1.0, float(np.max(np.abs(w))))
        for _ in range(60):
            r = xi(z) - w
            if np.max(np.abs(r)) < tol:
                break
            z = z - r / (1 + zeta * h.deriv(z))
        if np.max(np.abs(xi(z) - w)) > 1e3 * tol:
            raise NonConvergenceError("inversion of id + zeta h did not converge")
        if np.max(np.abs(z.imag)) > h.epsilon:
            raise NonConvergenceError("preimage leaves the strip of h")
        return z

    fit = sample_fit(lambda w: xi(xi_inv(w) + alpha) - w, epsilon, degree)
    return FourierAnnulusMap(epsilon, fit.mean, fit.coeffs, tail_energy=fit.tail_energy)


def tangent_family(v: TangentField, alpha, zeta, epsilon: float | None = None,
                   degree: int | None = None) -> FourierAnnulusMap:
    """f_zeta = (id + zeta h) R_alpha (id + zeta h)^{-1} with h = M_alpha v."""
    h = solve_homological(v, alpha)
    return conjugate_rotation(h, alpha, zeta, epsilon, degree)
