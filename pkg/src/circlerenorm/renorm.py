"""Renormalization of annulus maps close to rotations.

For f near R_alpha, with n = q_m the return index of alpha and
L = f^n(0) - p_m, the chart Psi(z) = F(H^{-1}(z/L)) conjugates the lift
f^n - p_m to the unit translation.  Here g(u) = (f^n(Lu) - p_m)/L,
H(t + is) = (1-t) is + t g(is) straightens the fundamental domain and F
solves the Beltrami equation for mu = H_zbar / H_z.

The first return to the fundamental domain, read in the quotient by f^n,
is z -> f^{q_{m+1}}(z) - p_{m+1}, so

    R f(w) = Psi(f^{q_{m+1}}(Psi^{-1}(w)) - p_{m+1})  (mod 1),

with Psi extended to the neighbouring fundamental domains by the dynamics.
"""
from __future__ import annotations

import functools
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction

import mpmath
import numpy as np

from . import cfrac
from .beltrami import BeltramiField, QCSolution, band_grid, solve_beltrami
from .circlemap import (
    TWO_PI,
    DomainError,
    FourierAnnulusMap,
    NonConvergenceError,
    TangentField,
    distance,
    fit_periodic,
    rotation,
)
from .cohom import apply_L, conjugate_rotation, solve_homological
from .config import get_config

__all__ = [
    "ChartError",
    "AdmissibilityError",
    "QuadrilateralError",
    "EscapeError",
    "RotationData",
    "rotation_data",
    "renormalized_rotation",
    "ChartAssembly",
    "RenormTrace",
    "build_chart",
    "renormalize",
    "UnstableEigenvalue",
    "unstable_eigenvalue",
    "DifferentialResult",
    "differential_on_V0",
    "mode_response",
    "q_operator",
    "nonlinearity_ratio",
]


class ChartError(ArithmeticError):
    """The chart could not be built."""


class AdmissibilityError(ChartError, DomainError):
    pass


class QuadrilateralError(ChartError):
    pass


class EscapeError(ChartError):
    pass


# ---------------------------------------------------------------------------
# arithmetic of the rotation


@dataclass(frozen=True)
class RotationData:
    alpha: float
    n: int          # q_m
    m: int
    p_m: int
    q_next: int     # q_{m+1}
    p_next: int
    l: float        # q_m alpha - p_m
    beta: float     # angle of the renormalized rotation in [0, 1)
    derivative: float   # d beta / d alpha

    @property
    def sign(self) -> int:
        return 1 if self.derivative > 0 else -1


def _cf_for(alpha) -> cfrac.ContinuedFraction:
    depth = 8
    while True:
        try:
            cf = cfrac.expand(alpha, depth)
        except cfrac.PrecisionError:
            raise
        try:
            cfrac.return_index(cf)
            return cf
        except cfrac.NoReturnIndexError:
            if cf.terminated:
                raise
            depth *= 2
            if depth > 512:
                raise


@functools.lru_cache(maxsize=256)
def _rotation_data_cached(key) -> RotationData:
    cf = _cf_for(key)
    n, m, _ = cfrac.return_index(cf)
    if m + 1 >= len(cf.convergents):
        cf = cfrac.expand(key, cf.depth + 4)
    p_m, q_m = cf.convergents[m]
    p1, q1 = cf.convergents[m + 1]
    a = cf.alpha
    l_exact = q_m * a - p_m
    beta_exact = (q1 * a - p1) / l_exact
    beta_exact -= math.floor(beta_exact)
    deriv = Fraction(q_m * p1 - q1 * p_m) / (l_exact * l_exact)
    return RotationData(float(a), q_m, m, p_m, q1, p1, float(l_exact), float(beta_exact), float(deriv))


def rotation_data(alpha) -> RotationData:
    """Return index, convergents and the renormalized angle for ``alpha``."""
    if isinstance(alpha, RotationData):
        return alpha
    if isinstance(alpha, float):
        # the exact binary value is the rotation actually iterated
        return _rotation_data_cached(Fraction(alpha))
    if isinstance(alpha, mpmath.mpf):
        return _rotation_data_cached(cfrac._mpf_to_fraction(alpha))
    if isinstance(alpha, str):
        value, _ = cfrac.parse_alpha(alpha)
        return _rotation_data_cached(value)
    return _rotation_data_cached(Fraction(alpha))


def renormalized_rotation(alpha, digits: int = 50) -> mpmath.mpf:
    """beta = (q_{m+1} alpha - p_{m+1}) / (q_m alpha - p_m) mod 1, in high precision."""
    if isinstance(alpha, str):
        alpha = cfrac.named_alpha(alpha, digits + 10) if alpha in cfrac.NAMED_CONSTANTS else mpmath.mpf(alpha)
    with mpmath.workdps(digits + 10):
        a = mpmath.mpf(alpha)
        cf = cfrac.expand(a, 40, digits=digits)
        _, m, _ = cfrac.return_index(cf)
        p_m, q_m = cf.convergents[m]
        p1, q1 = cf.convergents[m + 1]
        b = (q1 * a - p1) / (q_m * a - p_m)
        return +(b - mpmath.floor(b))


# ---------------------------------------------------------------------------
# chart


def _iterate(f: FourierAnnulusMap, z: np.ndarray, n: int, deriv: int = 0):
    """f^n(z) with escape check; with ``deriv`` also (f^n)' (and (f^n)'' if deriv == 2)."""
    z = np.asarray(z, dtype=complex)
    d1 = np.ones_like(z)
    d2 = np.zeros_like(z)
    lim = f.epsilon * (1 + 1e-9) + 1e-12
    for _ in range(n):
        if deriv:
            fp = f.deriv(z)
            if deriv > 1:
                d2 = f.deriv(z, 2) * d1 * d1 + fp * d2
            d1 = d1 * fp
        z = f(z, check=False)
        if np.max(np.abs(z.imag), initial=0.0) > lim:
            raise EscapeError("orbit leaves the strip of the map")
    if deriv > 1:
        return z, d1, d2
    return (z, d1) if deriv else z


_SEAM_SLACK = 1e-10


@dataclass
class ChartAssembly:
    """Chart Psi = F o H^{-1}(z/L) for a map close to a rotation."""

    f: FourierAnnulusMap
    rot: RotationData
    epsilon: float
    L: complex
    mu: BeltramiField
    F: QCSolution
    residual_conj: float = float("nan")
    linear_defect: float = float("nan")
    newton_tol: float = 1e-15
    seam: str = "matched"

    @property
    def n(self) -> int:
        return self.rot.n

    @property
    def l(self) -> float:
        return self.rot.l

    @property
    def H_grid(self) -> np.ndarray:
        return self.H(self.mu.x[None, :], self.mu.y[:, None])

    # lifted return map f^n - p_m and its inverse
    def fn(self, z, deriv: int = 0):
        out = _iterate(self.f, z, self.rot.n, deriv)
        if deriv:
            return (out[0] - self.rot.p_m,) + tuple(out[1:])
        return out - self.rot.p_m

    def fn_inv(self, z, maxit: int = 50):
        z = np.asarray(z, dtype=complex)
        y = z - self.L
        prev = np.inf
        for _ in range(maxit):
            v, d = self.fn(y, deriv=1)
            r = v - z
            res = float(np.max(np.abs(r), initial=0.0))
            if res < self.newton_tol * 4 or (res >= prev and res < 1e-10):
                break
            prev = min(prev, res)
            y = y - r / d
        if not res < 1e-10:
            raise NonConvergenceError(f"inverse of the return map did not converge (residual {res:.3g})")
        return y

    def g(self, u, deriv: int = 0):
        """g(u) = (f^n(Lu) - p_m)/L and, on request, g' and g''."""
        L = self.L
        out = self.fn(L * np.asarray(u), deriv=deriv)
        if deriv > 1:
            return out[0] / L, out[1], out[2] * L
        if deriv:
            return out[0] / L, out[1]
        return out / L

    def H_parts(self, t, s, need_cs: bool = True):
        """H(t + is) with its partial derivatives H_t, H_s.

        With seam="linear" H is the straight interpolation (1-t) is + t g(is).
        With seam="matched" a term t(1-t) c(s) is added so that the derivative
        of H at t = 1 is g' times the derivative at t = 0; the Beltrami
        coefficient is then continuous across the glued sides.
        """
        s = np.asarray(s, dtype=float)
        t = np.asarray(t, dtype=float)
        if self.seam == "linear":
            gv, gd = self.g(1j * s, deriv=1)
            D = gv - 1j * s
            H = 1j * s + t * D
            return H, D + 0 * t, 1j * (1 - t) + 1j * t * gd
        gv, gd, gdd = self.g(1j * s, deriv=2)
        D = gv - 1j * s
        r = (1 - gd) / (1 + gd)
        c = D * r
        Ds = 1j * gd - 1j
        cs = Ds * r + D * (-2j * gdd / (1 + gd) ** 2)
        w = t * (1 - t)
        H = 1j * s + t * D + w * c
        Ht = D + (1 - 2 * t) * c
        Hs = 1j + t * Ds + w * cs
        return H, Ht, Hs

    def H(self, t, s):
        return self.H_parts(t, s)[0]

    def H_inv(self, u, maxit: int = 60):
        """Real (t, s) with H(t + is) = u, by Newton on the 2x2 real system.

        Iterates until the step stalls at rounding level; g is a long
        composition, so the attainable residual is a few hundred ulps.
        """
        u = np.asarray(u, dtype=complex)
        t = u.real.copy()
        s = u.imag.copy()
        scale = max(1.0, float(np.max(np.abs(u), initial=0.0)))
        prev = np.inf
        for it in range(maxit):
            Hv, Ht, Hs = self.H_parts(t, s)
            r = Hv - u
            res = float(np.max(np.abs(r), initial=0.0))
            if res < self.newton_tol * scale or (res >= prev and res < 1e-10 * scale):
                break
            prev = min(prev, res)
            det = Ht.real * Hs.imag - Hs.real * Ht.imag
            dt = (r.real * Hs.imag - Hs.real * r.imag) / det
            ds = (Ht.real * r.imag - r.real * Ht.imag) / det
            t = t - dt
            s = s - ds
            if float(np.max(np.abs(dt) + np.abs(ds), initial=0.0)) < 1e-15 * scale:
                break
        if not res < 1e-10 * scale:
            raise NonConvergenceError(f"H^-1 Newton iteration did not converge (residual {res:.3g})")
        return t, s

    def psi(self, z, return_shifts: bool = False):
        """Psi(z), extended by the dynamics of f^n - p_m across the sides of R."""
        z = np.asarray(z, dtype=complex)
        shape = z.shape
        z = z.ravel().copy()
        offset = np.zeros(z.shape)
        shifts = np.zeros(z.shape, dtype=int)
        out = np.empty(z.shape, dtype=complex)
        todo = np.arange(z.size)
        for _ in range(6):
            if todo.size == 0:
                break
            t, s = self.H_inv(z[todo] / self.L)
            # F is periodic, so points within rounding of the seam need no shift
            left = t < -_SEAM_SLACK
            right = t > 1 + _SEAM_SLACK
            ok = ~(left | right)
            if np.any(ok):
                idx = todo[ok]
                out[idx] = self.F.evaluate(t[ok] + 1j * s[ok]) + offset[idx]
            if np.any(left):
                idx = todo[left]
                z[idx] = self.fn(z[idx])
                offset[idx] -= 1
                shifts[idx] += 1
            if np.any(right):
                idx = todo[right]
                z[idx] = self.fn_inv(z[idx])
                offset[idx] += 1
                shifts[idx] -= 1
            todo = todo[~ok]
        if todo.size:
            raise QuadrilateralError("points could not be brought into the fundamental domain")
        out = out.reshape(shape)
        return (out, shifts.reshape(shape)) if return_shifts else out

    def psi_inv(self, w):
        """Psi^{-1}(w) = L H(F^{-1}(w)), using the dynamics outside 0 <= Re <= 1."""
        w = np.asarray(w, dtype=complex)
        shape = w.shape
        w = w.ravel()
        p = self.F.inverse(w)
        k = np.floor(p.real).astype(int)
        p0 = self.F.inverse(w - k, z0=p - k)
        z = self.L * self.H(p0.real, p0.imag)
        for j in range(int(k.max(initial=0))):
            sel = k > j
            z[sel] = self.fn(z[sel])
        for j in range(int(-k.min(initial=0))):
            sel = k < -j
            z[sel] = self.fn_inv(z[sel])
        return z.reshape(shape)

    def conjugacy_residual(self, npts: int = 101) -> float:
        """sup over I of |Psi(f^n(z) - p_m) - Psi(z) - 1|."""
        s = np.linspace(-2 * self.epsilon, 2 * self.epsilon, npts)
        z = self.L * 1j * s
        a = self.psi(z)
        # f^n(I) is the right side of R; evaluate there without the dynamics shortcut
        t, ss = self.H_inv(self.fn(z) / self.L)
        b = self.F.evaluate(t + 1j * ss)
        return float(np.max(np.abs(b - a - 1)))

    def linear_deviation(self, npts: int = 32) -> float:
        """max over a mesh of R of |Psi(L z) - z|."""
        t = np.linspace(0, 1, npts, endpoint=False)
        s = np.linspace(-2 * self.epsilon, 2 * self.epsilon, npts)
        T, S = np.meshgrid(t, s)
        u = (T + 1j * S).ravel()
        return float(np.max(np.abs(self.psi(self.L * u) - u)))

    def quadrilateral(self, npts: int = 65) -> np.ndarray:
        """Closed boundary polyline of R: I, top segment, f^n(I) reversed, bottom segment."""
        s = np.linspace(-2 * self.epsilon, 2 * self.epsilon, npts)
        left = self.L * 1j * s
        right = self.L * self.g(1j * s)
        return np.concatenate([left, right[::-1], left[:1]])

    def quadrilateral_csv(self, npts: int = 65) -> str:
        pts = self.quadrilateral(npts)
        return "re,im\n" + "".join(f"{p.real:.17g},{p.imag:.17g}\n" for p in pts)

    def summary(self) -> dict:
        return {
            "n": self.n,
            "m": self.rot.m,
            "l": self.l,
            "L": [self.L.real, self.L.imag],
            "epsilon": self.epsilon,
            "mu_norm": self.mu.norm_inf,
            "beltrami_residual": self.F.residual,
            "beltrami_iterations": self.F.iterations,
            "residual_conj": self.residual_conj,
            "linear_defect": self.linear_defect,
        }


def build_chart(f: FourierAnnulusMap, alpha_hint, epsilon: float | None = None, *,
                nx: int | None = None, ny: int | None = None, tolerance: float | None = None,
                diagnostics: bool = True, admissible_distance: float | None = None,
                seam: str | None = None) -> ChartAssembly:
    """Chart Psi conjugating f^n - p_m to z -> z+1 on the quadrilateral R.

    ``epsilon`` is the half-height parameter of the chart (segment
    I = [-2 i eps L, 2 i eps L]); it defaults to the strip of f.
    """
    cfg = get_config()["renorm"]
    rot = alpha_hint if isinstance(alpha_hint, RotationData) else rotation_data(alpha_hint)
    if rot.l < cfg["min_l"]:
        raise AdmissibilityError(f"l = {rot.l:.3g} is below {cfg['min_l']}")
    eps = f.epsilon if epsilon is None else float(epsilon)
    adm = cfg["admissible_distance"] if admissible_distance is None else admissible_distance
    d0 = distance(f, rotation(rot.alpha, f.epsilon, 1))
    if d0 > adm:
        raise AdmissibilityError(f"map is {d0:.3g} away from R_alpha (admissible: {adm:.3g})")
    L = complex(_iterate(f, np.array([0j]), rot.n)[0] - rot.p_m)
    if abs(L - rot.l) > 0.5 * rot.l:
        raise AdmissibilityError("f^n(0) is not close to the return of the rotation")
    if 2 * eps * abs(L) * 1.2 >= f.epsilon:
        raise AdmissibilityError("the chart segment does not fit in the strip of the map")
    nx = nx or cfg["nx"]
    xg, yg = band_grid(eps, nx, ny)
    seam = seam or cfg["seam"]
    if seam not in ("linear", "matched"):
        raise ValueError(f"unknown seam treatment {seam!r}")
    chart = ChartAssembly(f, rot, eps, L, None, None, seam=seam)
    gv, gd = chart.g(1j * yg, deriv=1)
    # quadrilateral sanity: f^n(I) stays to the right of I and the strip is not folded
    if np.min(gv.real) <= 0.2 or np.max(np.abs(gd - 1)) >= 0.5:
        raise QuadrilateralError("boundary curves of the fundamental domain are degenerate")
    _, Ht, Hs = chart.H_parts(xg[None, :], yg[:, None])
    Hz = 0.5 * (Ht - 1j * Hs)
    Hzb = 0.5 * (Ht + 1j * Hs)
    if np.min(np.abs(Hz) ** 2 - np.abs(Hzb) ** 2) <= 0:
        raise QuadrilateralError("straightening map H is not orientation preserving")
    mu = BeltramiField(xg, yg, Hzb / Hz)
    if mu.norm_inf >= 0.5:
        raise QuadrilateralError(f"Beltrami coefficient too large ({mu.norm_inf:.3g})")
    F = solve_beltrami(mu, tolerance if tolerance is not None else cfg["beltrami_tolerance"],
                       cfg["beltrami_max_iter"])
    chart.mu = mu
    chart.F = F
    if diagnostics:
        chart.residual_conj = chart.conjugacy_residual()
        chart.linear_defect = chart.linear_deviation(16)
    return chart


# ---------------------------------------------------------------------------
# renormalization


@dataclass
class RenormTrace:
    input: FourierAnnulusMap
    chart: ChartAssembly
    first_return_itinerary: dict
    output: FourierAnnulusMap
    tail_energy: float
    beta_rotation: float

    def to_dict(self) -> dict:
        return {
            "input": self.input.to_dict(),
            "chart": self.chart.summary(),
            "itinerary": {str(k): int(v) for k, v in sorted(self.first_return_itinerary.items())},
            "output": self.output.to_dict(),
            "tail_energy": self.tail_energy,
            "beta_rotation": self.beta_rotation,
        }


def _return_samples(chart: ChartAssembly, w: np.ndarray):
    rot = chart.rot
    z = chart.psi_inv(w)
    z1 = _iterate(chart.f, z, rot.q_next) - rot.p_next
    val, shifts = chart.psi(z1, return_shifts=True)
    return val, rot.q_next + rot.n * shifts


def renormalize(f: FourierAnnulusMap, alpha_hint, *, epsilon_out: float | None = None,
                chart_epsilon: float | None = None, degree: int | None = None,
                chart: ChartAssembly | None = None, max_tail: float | None = None,
                **chart_kw) -> RenormTrace:
    """One renormalization step; the output is fitted on |Im w| <= epsilon_out."""
    cfg = get_config()["renorm"]
    if chart is None:
        chart = build_chart(f, alpha_hint, chart_epsilon, **chart_kw)
    eps_out = chart.epsilon if epsilon_out is None else float(epsilon_out)
    if eps_out > 1.5 * chart.epsilon * (1 + 1e-12):
        raise DomainError("output strip may be at most 1.5 times the chart height")
    K = degree or cfg["degree"]
    N = 4 * K
    x = np.arange(N) / N
    rot = chart.rot
    beta0 = ((rot.q_next * rot.alpha - rot.p_next) / rot.l) % 1.0
    vals = []
    counts: dict[int, int] = {}
    for y in (-eps_out, eps_out):
        w = x + 1j * y
        pw, steps = _return_samples(chart, w)
        d = pw - w
        d = d - np.round(d.real - beta0)
        vals.append(d)
        for c in steps.ravel():
            counts[int(c)] = counts.get(int(c), 0) + 1
    fit = fit_periodic(vals[0], vals[1], -eps_out, eps_out, K)
    out = FourierAnnulusMap(eps_out, fit.mean, fit.coeffs, tail_energy=fit.tail_energy)
    limit = cfg["max_tail"] if max_tail is None else max_tail
    if fit.tail_energy > limit:
        raise ChartError(f"output tail energy {fit.tail_energy:.3g} exceeds {limit:.3g}")
    return RenormTrace(f, chart, counts, out, fit.tail_energy, rot.beta)


# ---------------------------------------------------------------------------
# linearization at rotations


@dataclass
class UnstableEigenvalue:
    closed_form: float
    finite_difference: float | None
    relative_error: float | None
    l: float
    m: int


def unstable_eigenvalue(alpha, check: bool = False, delta: float | None = None,
                        epsilon: float = 0.5) -> UnstableEigenvalue:
    """d beta / d alpha = +-1/(q_m alpha - p_m)^2, optionally checked through ``renormalize``."""
    rot = rotation_data(alpha)
    closed = rot.derivative
    fd = rel = None
    if check:
        delta = delta if delta is not None else 1e-4 * rot.l ** 2
        betas = []
        for sgn in (1, -1):
            f = rotation(rot.alpha + sgn * delta, epsilon, 4)
            tr = renormalize(f, rot, degree=4, diagnostics=False)
            betas.append(tr.output.mean.real)
        db = betas[0] - betas[1]
        db -= round(db)
        fd = db / (2 * delta)
        rel = abs(fd - closed) / abs(closed)
    return UnstableEigenvalue(closed, fd, rel, rot.l, rot.m)


def _unit_mode(k: int, epsilon: float, degree: int) -> TangentField:
    return TangentField(epsilon, 0.0, {k: 1.0}, degree=degree)


def _work_strip(rot: RotationData, chart_eps: float) -> float:
    return 2.5 * chart_eps * rot.l + 0.1


@functools.lru_cache(maxsize=512)
def _mode_response_cached(rot: RotationData, k: int, chart_eps: float, zeta: float, degree: int,
                          factored: bool):
    work = _work_strip(rot, chart_eps)
    v = _unit_mode(k, work / 0.81, max(abs(k), 1) * 4)
    h = solve_homological(v, rot.alpha)
    # step so that the conjugacy moves points by about zeta on the working strip
    step = zeta / max(1.0, h.sup_on_boundary())
    fam = [conjugate_rotation(h, rot.alpha, sg * step, epsilon=work, degree=max(16, 4 * abs(k)))
           for sg in (1, -1)]
    traces = [renormalize(fz, rot, chart_epsilon=chart_eps, degree=degree, diagnostics=False, max_tail=1.0)
              for fz in fam]
    diff = (traces[0].output - traces[1].output) * (1.0 / (2 * step))
    if not factored:
        return diff, None, h
    qh = q_operator(rot, h, traces[0].chart, traces[1].chart, step, degree)
    return diff, qh, h


def mode_response(alpha, k: int, chart_eps: float, zeta: float = 1e-3, degree: int = 32,
                  factored: bool = False) -> tuple[TangentField, TangentField | None]:
    """R' applied to the unit mode e^{2 pi i k z} at R_alpha, on the strip of half-width chart_eps.

    Computed by central differences along the conjugacy family tangent to the
    mode; the map itself only needs to live on a thin strip around the real
    axis, which keeps the perturbation resolvable for wide output strips.
    """
    rot = rotation_data(alpha)
    diff, qh, _ = _mode_response_cached(rot, int(k), float(chart_eps), float(zeta), int(degree), bool(factored))
    return diff, (apply_L(qh, rot.beta) if qh is not None else None)


def q_operator(rot: RotationData, h: TangentField, chart_p: ChartAssembly, chart_m: ChartAssembly,
               zeta: float, degree: int) -> TangentField:
    """Q h(w) = d/dzeta Psi_zeta (l w) + h(l w)/l, with the zeta-derivative by central differences."""
    eps = chart_p.epsilon
    N = 4 * degree
    x = np.arange(N) / N
    vals = []
    for y in (-eps, eps):
        w = x + 1j * y
        z = rot.l * w
        dpsi = (chart_p.psi(z) - chart_m.psi(z)) / (2 * zeta)
        vals.append(dpsi + h(z, check=False) / rot.l)
    fit = fit_periodic(vals[0], vals[1], -eps, eps, degree)
    return TangentField(eps, fit.mean, fit.coeffs, tail_energy=fit.tail_energy)


@dataclass
class DifferentialResult:
    value: TangentField          # finite difference of renormalize along the family
    factored: TangentField | None  # L_beta Q M_alpha v
    discrepancy: float | None

    @property
    def mean(self) -> complex:
        return self.value.mean


def differential_on_V0(alpha, v: TangentField, *, zeta: float = 1e-3, degree: int = 32,
                       factored: bool = True) -> DifferentialResult:
    """R'v at R_alpha for zero-mean v on the strip of v.

    R' is linear, so it is assembled from its action on the unit modes of v;
    each mode response is a central difference of ``renormalize`` along the
    conjugacy family.  The factored form L_beta Q M_alpha v is computed from
    the same charts and its distance to the direct value is recorded.
    """
    if abs(v.mean) > 1e-14 * max(1.0, float(np.max(np.abs(v.coeffs), initial=0.0))):
        raise DomainError("v must have zero mean")
    rot = alpha if isinstance(alpha, RotationData) else rotation_data(alpha)
    eps = v.epsilon
    total = TangentField(eps, 0.0, degree=degree)
    total_q = TangentField(eps, 0.0, degree=degree) if factored else None
    for k, a in v.modes().items():
        r, q = mode_response(rot, k, eps, zeta, degree, factored)
        total = total + a * r
        if factored:
            total_q = total_q + a * q
    disc = distance(total, total_q) if factored else None
    return DifferentialResult(total, total_q, disc)


def nonlinearity_ratio(alpha, k: int, epsilon: float, zeta: float = 1e-3, degree: int = 32) -> float:
    """||(Q h)''|| / ||h''|| on Pi_{0.9 eps} for h = M_alpha of the unit mode k."""
    rot = rotation_data(alpha)
    _, qh, h = _mode_response_cached(rot, int(k), float(epsilon), float(zeta), int(degree), True)
    inner = 0.9 * epsilon
    h_wide = TangentField(inner, 0.0, np.array(h.coeffs))
    return qh.restrict(inner).norm2() / h_wide.norm2()
