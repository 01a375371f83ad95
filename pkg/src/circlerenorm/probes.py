"""Numerical probes of the renormalization picture near rotations.

* ``kam_linearize``: Newton iteration for the conjugacy xi with f o xi = xi o R_alpha.
* ``renorm_convergence``: distances between R^k f and R^k R_alpha.
* ``invariant_circle``: the closure of the orbit of 0.
* ``leaf_tangent_functional``: first-order change of the rotation number along v.
* ``v0_contraction`` / ``hyperbolicity_probe``: expansion along rotations against
  the measured action of R' on zero-mean fields.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import mpmath
import numpy as np

from . import cfrac
from .circlemap import (
    DomainError,
    FourierAnnulusMap,
    NonConvergenceError,
    TangentField,
    _newton_invert,
    distance,
    fit_periodic,
    rotation,
    rotation_number,
)
from .cohom import small_divisors
from .config import get_config
from .renorm import differential_on_V0, renormalize, renormalized_rotation, rotation_data, unstable_eigenvalue

__all__ = [
    "KAMResult",
    "KAMNonConvergence",
    "kam_linearize",
    "ConvergenceReport",
    "renorm_convergence",
    "InvariantCircle",
    "invariant_circle",
    "LeafValue",
    "leaf_tangent_functional",
    "random_v0",
    "v0_contraction",
    "hyperbolicity_probe",
]


def _alpha_mp(alpha, digits: int = 40) -> mpmath.mpf:
    if isinstance(alpha, str) and alpha in cfrac.NAMED_CONSTANTS:
        return cfrac.named_alpha(alpha, digits)
    if isinstance(alpha, mpmath.mpf):
        return alpha
    value, _ = cfrac.parse_alpha(alpha)
    with mpmath.workdps(digits):
        return mpmath.mpf(value.numerator) / value.denominator


# ---------------------------------------------------------------------------
# KAM linearization


class KAMNonConvergence(NonConvergenceError):
    def __init__(self, message: str, history: list[float]):
        super().__init__(message)
        self.history = history


@dataclass
class KAMResult:
    xi: FourierAnnulusMap
    errors: list[float]
    obstructions: list[float]
    steps: int
    translation: complex = 0j

    @property
    def quadratic_constants(self) -> list[float]:
        """e_{k+1}/e_k^2 along the run."""
        e = self.errors
        return [e[i + 1] / e[i] ** 2 for i in range(len(e) - 1) if e[i] > 0]

    def to_dict(self) -> dict:
        return {"steps": self.steps, "errors": self.errors, "obstructions": self.obstructions,
                "translation": [self.translation.real, self.translation.imag],
                "quadratic_constants": self.quadratic_constants, "xi": self.xi.to_dict()}


def kam_linearize(f: FourierAnnulusMap, alpha, max_steps: int | None = None, *,
                  tolerance: float | None = None, epsilon: float | None = None,
                  degree: int | None = None, translate: bool = False) -> KAMResult:
    """Conjugacy xi (xi(0) = 0) with f o xi = xi o R_alpha, by Newton's method.

    With E = f o xi - xi o R_alpha, each step solves
    w(x + alpha) - w(x) = E(x) / xi'(x + alpha) (dropping the mean, which is
    the rotation-number obstruction) and updates xi <- xi + xi' w.

    With ``translate`` the obstruction is absorbed into a constant lam and the
    conjugacy solved is (f + lam) o xi = xi o R_alpha; lam is returned as
    ``translation``.
    """
    cfg = get_config()["kam"]
    max_steps = cfg["max_iter"] if max_steps is None else max_steps
    tol = cfg["tolerance"] if tolerance is None else tolerance
    K = degree or cfg["degree"]
    eps = 0.5 * f.epsilon if epsilon is None else float(epsilon)
    al = float(_alpha_mp(alpha))
    div = small_divisors(al, K)
    N = 4 * K
    x = np.arange(N) / N
    circles = [x - 1j * eps, x + 1j * eps]
    xi = FourierAnnulusMap(eps, 0.0, degree=K)
    lam = 0j
    errors: list[float] = []
    obstructions: list[float] = []
    for step in range(max_steps + 1):
        E_vals = []
        inv_d = []
        for z in circles:
            p = xi(z, check=False)
            if np.max(np.abs(p.imag)) > f.epsilon:
                raise KAMNonConvergence("conjugacy leaves the strip of f", errors)
            E_vals.append(f(p, check=False) + lam - xi(z + al, check=False))
            inv_d.append(1.0 / xi.deriv(z + al))
        err = float(max(np.max(np.abs(v)) for v in E_vals))
        errors.append(err)
        if err < tol:
            return KAMResult(xi, errors, obstructions, step, lam)
        if step == max_steps:
            break
        if not np.isfinite(err) or (len(errors) > 3 and err > 0.5 * errors[-4]):
            if err < 1e3 * tol:
                # stalled at the rounding floor of the composition
                return KAMResult(xi, errors, obstructions, step, lam)
            raise KAMNonConvergence(f"Newton iteration stalled at error {err:.3g}", errors)
        fit = fit_periodic(E_vals[0] * inv_d[0], E_vals[1] * inv_d[1], -eps, eps, K)
        obstructions.append(abs(fit.mean))
        if translate:
            weight = 0.5 * (np.mean(inv_d[0]) + np.mean(inv_d[1]))
            dlam = -fit.mean / weight
            lam += dlam
            fit = fit_periodic((E_vals[0] + dlam) * inv_d[0], (E_vals[1] + dlam) * inv_d[1], -eps, eps, K)
        w_coeffs = np.zeros_like(fit.coeffs)
        nz = np.arange(2 * K + 1) != K
        w_coeffs[nz] = fit.coeffs[nz] / div[nz]
        w = TangentField(eps, 0.0, w_coeffs)
        upd = fit_periodic(*(xi.deriv(z) * w(z, check=False) for z in circles), -eps, eps, K)
        mean = xi.mean + upd.mean
        coeffs = np.array(xi.coeffs) + upd.coeffs
        shift = mean + np.sum(coeffs)  # xi(0)
        xi = FourierAnnulusMap(eps, mean - shift, coeffs)
    raise KAMNonConvergence(f"no convergence in {max_steps} steps (error {errors[-1]:.3g})", errors)


# ---------------------------------------------------------------------------
# convergence of renormalizations


@dataclass
class ConvergenceReport:
    distances: list[float]
    betas: list[float]
    nonlinearity: list[float] = field(default_factory=list)
    shifts: list[float] = field(default_factory=list)
    complete: bool = True
    failure: str | None = None

    @property
    def ratios(self) -> list[float]:
        d = self.distances
        return [d[i + 1] / d[i] if d[i] > 0 else 0.0 for i in range(len(d) - 1)]

    def to_dict(self) -> dict:
        return {"distances": self.distances, "ratios": self.ratios, "betas": self.betas,
                "nonlinearity": self.nonlinearity, "shifts": self.shifts, "complete": self.complete,
                "failure": self.failure}


def _nonlinearity(xi: FourierAnnulusMap) -> float:
    """sup |xi''/xi'| on the strip of xi."""
    n = max(256, 8 * xi.degree)
    x = np.arange(n) / n
    return float(max(np.max(np.abs(xi.deriv(x + 1j * y, 2) / xi.deriv(x + 1j * y)))
                     for y in (-xi.epsilon, xi.epsilon)))


def renorm_convergence(f: FourierAnnulusMap, alpha, steps: int = 2, *, degree: int | None = None,
                       nonlinearity: bool = False, reanchor: bool = True, **chart_kw) -> ConvergenceReport:
    """d_k = dist(R^k f, R^k R_alpha) on the strip of f, k = 0..steps.

    The rotations R^k R_alpha are exact: their angles are iterated in high
    precision.  Rounding leaves each computed R^k f slightly off the
    conjugacy class, and the next step would expand that defect by
    |d beta/d alpha| >= 1e4.  With ``reanchor`` the defect is removed before
    each step: a KAM solve for (R^k f + lam) o xi = xi o R_{alpha_k} gives the
    translation lam, which is added to the map and recorded in ``shifts``.

    A chart failure ends the run; the partial report is returned with
    ``complete`` set to False.
    """
    a = _alpha_mp(alpha)
    eps = f.epsilon
    g = f
    report = ConvergenceReport([distance(g, rotation(float(a), eps, 1))], [float(a)])
    for k in range(steps + 1):
        if reanchor or nonlinearity:
            try:
                kam = kam_linearize(g, a, translate=True)
            except NonConvergenceError as exc:
                report.complete = False
                report.failure = f"{type(exc).__name__}: {exc}"
                break
            if nonlinearity:
                report.nonlinearity.append(_nonlinearity(kam.xi))
            if reanchor and k > 0:
                report.shifts.append(float(abs(kam.translation)))
                g = FourierAnnulusMap(g.strip, g.mean + kam.translation, np.array(g.coeffs),
                                      tail_energy=g.tail_energy)
        if k == steps:
            break
        try:
            tr = renormalize(g, float(a), chart_epsilon=eps, epsilon_out=eps, degree=degree, **chart_kw)
        except (ArithmeticError, DomainError) as exc:
            report.complete = False
            report.failure = f"{type(exc).__name__}: {exc}"
            break
        with mpmath.workdps(40):
            a = renormalized_rotation(a, 30)
        g = tr.output
        report.distances.append(distance(g, rotation(float(a), eps, 1)))
        report.betas.append(float(a))
    return report


# ---------------------------------------------------------------------------
# invariant circle


@dataclass
class InvariantCircle:
    points: np.ndarray      # orbit points sorted by conjugated angle
    angles: np.ndarray      # j * alpha mod 1 for the sorted points
    distance_to_circle: float

    def to_csv(self) -> str:
        rows = "".join(f"{t:.17g},{p.real:.17g},{p.imag:.17g}\n" for t, p in zip(self.angles, self.points))
        return "angle,re,im\n" + rows


def invariant_circle(f: FourierAnnulusMap, iterations: int = 1000, alpha=None) -> InvariantCircle:
    """Orbit of 0 under f and f^-1, ordered by the circular order of j*alpha."""
    if alpha is None:
        al = rotation_number(f).value
    else:
        al = float(_alpha_mp(alpha))
    fwd = np.empty(iterations + 1, dtype=complex)
    bwd = np.empty(iterations, dtype=complex)
    z = np.array([0j])
    fwd[0] = 0
    for j in range(1, iterations + 1):
        z = f(z, check=False)
        if abs(z[0].imag) > f.epsilon:
            raise NonConvergenceError("orbit of 0 leaves the strip")
        fwd[j] = z[0]
    z = np.array([0j])
    for j in range(iterations):
        z = _newton_invert(f, z)
        if abs(z[0].imag) > f.epsilon:
            raise NonConvergenceError("backward orbit of 0 leaves the strip")
        bwd[j] = z[0]
    idx = np.concatenate([np.arange(iterations + 1), -np.arange(1, iterations + 1)])
    pts = np.concatenate([fwd, bwd])
    pts = pts - np.floor(pts.real)
    with mpmath.workdps(30):
        a_mp = mpmath.mpf(al) if alpha is None else _alpha_mp(alpha)
        ang = np.array([float(mpmath.frac(int(j) * a_mp)) for j in idx])
    order = np.argsort(ang)
    return InvariantCircle(pts[order], ang[order], float(np.max(np.abs(pts.imag))))


# ---------------------------------------------------------------------------
# stable-leaf functional


@dataclass
class LeafValue:
    value: complex
    quadrature_error: float


def leaf_tangent_functional(f: FourierAnnulusMap, xi: FourierAnnulusMap, v: TangentField,
                            n: int = 512) -> LeafValue:
    """Integral over the circle of v(xi(x)) / (f'(xi(x)) xi'(x)) dx.

    This is the first-order change of the rotation number of f + t v; its
    kernel is the tangent space of the leaf through f.  The integrand is
    periodic and analytic, so the trapezoid rule converges geometrically; the
    error estimate compares n and n/2 nodes.
    """
    def trap(m):
        x = np.arange(m) / m + 0j
        p = xi(x, check=False)
        return complex(np.mean(v(p, check=False) / (f.deriv(p) * xi.deriv(x))))

    full = trap(n)
    return LeafValue(full, abs(full - trap(n // 2)))


# ---------------------------------------------------------------------------
# hyperbolicity


def random_v0(epsilon: float, max_mode: int, rng: np.random.Generator, degree: int | None = None) -> TangentField:
    """Zero-mean field with coefficients g_k exp(-2 pi |k| eps), g_k standard complex normal."""
    K = degree or max_mode
    coeffs = {}
    for k in range(-max_mode, max_mode + 1):
        if k == 0:
            continue
        g = (rng.standard_normal() + 1j * rng.standard_normal()) / math.sqrt(2)
        coeffs[k] = g * math.exp(-2 * math.pi * abs(k) * epsilon)
    return TangentField(epsilon, 0.0, coeffs, degree=K)


@dataclass
class ContractionSample:
    epsilon: float
    ratios_sup: list[float]
    ratios_2: list[float]
    means: list[float]
    discrepancies: list[float]

    @property
    def max_ratio(self) -> float:
        return max(self.ratios_sup)

    def to_dict(self) -> dict:
        return {"epsilon": self.epsilon, "max_ratio": self.max_ratio, "ratios_sup": self.ratios_sup,
                "ratios_2": self.ratios_2, "max_mean": max(self.means),
                "max_discrepancy": max(self.discrepancies)}


def v0_contraction(alpha, epsilons=(2.0, 4.0, 8.0), samples: int = 10, max_mode: int = 3,
                   seed: int = 0, degree: int = 16, zeta: float = 1e-3) -> list[ContractionSample]:
    """||R'v|| / ||v|| over random zero-mean v, for each strip half-width."""
    rot = rotation_data(alpha)
    out = []
    for eps in epsilons:
        rng = np.random.default_rng(seed)
        rs, r2, means, disc = [], [], [], []
        for _ in range(samples):
            v = random_v0(eps, max_mode, rng, degree)
            res = differential_on_V0(rot, v, zeta=zeta, degree=degree)
            rs.append(res.value.sup_on_boundary() / v.sup_on_boundary())
            r2.append(res.value.norm2() / v.norm2())
            means.append(abs(res.value.mean))
            disc.append(res.discrepancy)
        out.append(ContractionSample(eps, rs, r2, means, disc))
    return out


def hyperbolicity_probe(alpha, epsilon: float = 2.0, samples: int = 10, max_mode: int = 3,
                        seed: int = 0, check_eigenvalue: bool = False) -> dict:
    """Unstable eigenvalue along rotations and measured contraction on V0."""
    eig = unstable_eigenvalue(alpha, check=check_eigenvalue)
    (sample,) = v0_contraction(alpha, (epsilon,), samples, max_mode, seed)
    return {
        "alpha": rotation_data(alpha).alpha,
        "unstable_eigenvalue": eig.closed_form,
        "unstable_eigenvalue_fd": eig.finite_difference,
        "unstable_eigenvalue_rel_error": eig.relative_error,
        "l": eig.l,
        "v0": sample.to_dict(),
        "v0_ratio": sample.max_ratio,
        "splitting_product": abs(eig.closed_form) * sample.max_ratio,
    }


def report_json(obj) -> str:
    """Deterministic JSON for probe reports."""
    return json.dumps(obj, sort_keys=True, indent=2, default=_jsonable)


def _jsonable(o):
    if isinstance(o, complex):
        return [o.real, o.imag]
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"cannot serialize {type(o).__name__}")
