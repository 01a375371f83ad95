"""Analytic maps of the annulus Pi_eps = {|Im z| < eps} commuting with z -> z+1.

A map is stored as ``f(z) = z + mean + sum_{0<|k|<=K} c_k exp(2 pi i k z)``.
Coefficients live in an array of length ``2K+1`` indexed by ``k + K``; the
middle slot is always zero (the constant term is ``mean``).

Fitting from samples uses two horizontal circles: positive modes are read
off the lower circle and negative modes off the upper one, where each of
them is largest, so round-off stays relative to the sampled values.
"""
from __future__ import annotations

import cmath
import json
import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

__all__ = [
    "StripDomain",
    "FourierAnnulusMap",
    "TangentField",
    "DomainError",
    "NonConvergenceError",
    "fit_periodic",
    "rotation",
    "identity",
    "compose",
    "invert",
    "distance",
    "rotation_number",
    "rotation_numbers",
    "RotationNumber",
]

TWO_PI = 2.0 * np.pi
DEFAULT_DEGREE = 64
# relative slack allowed when points sit exactly on the boundary circles
_EDGE = 1e-9


class DomainError(ValueError):
    pass


class NonConvergenceError(ArithmeticError):
    pass


@dataclass(frozen=True)
class StripDomain:
    epsilon: float

    def __post_init__(self):
        if not self.epsilon > 0:
            raise DomainError("strip half-width must be positive")

    def contains(self, z, slack: float = _EDGE) -> bool:
        return bool(np.all(np.abs(np.imag(z)) <= self.epsilon * (1 + slack) + 1e-12))


def _series(coeffs: np.ndarray, z) -> np.ndarray:
    """sum_k c_k exp(2 pi i k z) for coefficient array indexed by k+K."""
    z = np.asarray(z, dtype=complex)
    K = (len(coeffs) - 1) // 2
    out = np.zeros(z.shape, dtype=complex)
    ks = np.nonzero(coeffs)[0]
    if len(ks) == 0:
        return out
    # log form avoids overflow of exp(2 pi i k z) against tiny c_k on wide strips
    for idx in ks:
        k = idx - K
        out += np.exp(np.log(coeffs[idx]) + 1j * TWO_PI * k * z)
    return out


def _series_deriv(coeffs: np.ndarray, z, order: int = 1) -> np.ndarray:
    K = (len(coeffs) - 1) // 2
    ks = np.arange(-K, K + 1)
    return _series(coeffs * (1j * TWO_PI * ks) ** order, z)


class _FourierSeries:
    """Shared storage: a mean plus Fourier modes on a strip."""

    __slots__ = ("strip", "mean", "coeffs", "tail_energy")

    def __init__(self, epsilon, mean=0.0, coeffs=None, degree: int | None = None, tail_energy: float = 0.0):
        strip = epsilon if isinstance(epsilon, StripDomain) else StripDomain(float(epsilon))
        if coeffs is None:
            K = DEFAULT_DEGREE if degree is None else degree
            coeffs = np.zeros(2 * K + 1, dtype=complex)
        elif isinstance(coeffs, dict):
            K = max([abs(int(k)) for k in coeffs] + [0]) if degree is None else degree
            arr = np.zeros(2 * K + 1, dtype=complex)
            for k, c in coeffs.items():
                k = int(k)
                if k == 0:
                    raise DomainError("the constant mode belongs in `mean`")
                if abs(k) > K:
                    raise DomainError(f"mode {k} exceeds degree {K}")
                arr[k + K] = c
            coeffs = arr
        else:
            coeffs = np.array(coeffs, dtype=complex)
            if coeffs.ndim != 1 or len(coeffs) % 2 == 0:
                raise DomainError("coefficient array must have odd length 2K+1")
            if degree is not None and degree != (len(coeffs) - 1) // 2:
                coeffs = _resize(coeffs, degree)
            coeffs[(len(coeffs) - 1) // 2] = 0.0
        coeffs.setflags(write=False)
        object.__setattr__(self, "strip", strip)
        object.__setattr__(self, "mean", complex(mean))
        object.__setattr__(self, "coeffs", coeffs)
        object.__setattr__(self, "tail_energy", float(tail_energy))

    def __setattr__(self, name, value):
        raise AttributeError(f"{type(self).__name__} is immutable")

    @property
    def epsilon(self) -> float:
        return self.strip.epsilon

    @property
    def degree(self) -> int:
        return (len(self.coeffs) - 1) // 2

    def coeff(self, k: int) -> complex:
        if k == 0:
            return self.mean
        K = self.degree
        return complex(self.coeffs[k + K]) if abs(k) <= K else 0j

    def modes(self) -> dict[int, complex]:
        K = self.degree
        return {i - K: complex(c) for i, c in enumerate(self.coeffs) if c != 0}

    @property
    def real_symmetric(self) -> bool:
        return self.is_real_symmetric()

    def is_real_symmetric(self, tol: float = 1e-13) -> bool:
        scale = max(1.0, abs(self.mean), float(np.max(np.abs(self.coeffs), initial=0.0)))
        if abs(self.mean.imag) > tol * scale:
            return False
        return bool(np.all(np.abs(self.coeffs - np.conj(self.coeffs[::-1])) <= tol * scale))

    def periodic_part(self, z, check: bool = True) -> np.ndarray:
        """mean + series (the part of the map that is 1-periodic)."""
        if check and not self.strip.contains(z):
            raise DomainError(f"point outside the strip |Im z| < {self.epsilon}")
        return self.mean + _series(self.coeffs, z)

    def sup_on_boundary(self, n: int | None = None, include_mean: bool = True) -> float:
        n = n or max(256, 8 * self.degree)
        x = np.arange(n) / n
        eps = self.epsilon
        vals = [_series(self.coeffs, x + 1j * y) + (self.mean if include_mean else 0) for y in (-eps, eps)]
        return float(max(np.max(np.abs(v)) for v in vals))

    def decay_certificate(self, slack: float = 1.0 + 1e-9) -> tuple[bool, float]:
        """Check |c_k| <= sup|f - id| exp(-2 pi eps |k|) * slack; return (ok, worst ratio)."""
        bound = self.sup_on_boundary()
        if bound == 0:
            return True, 0.0
        K = self.degree
        ks = np.abs(np.arange(-K, K + 1))
        with np.errstate(over="ignore"):
            ratios = np.abs(self.coeffs) * np.exp(TWO_PI * self.epsilon * ks) / bound
        worst = float(np.max(ratios))
        return worst <= slack, worst

    def _payload(self) -> dict:
        K = self.degree
        return {
            "epsilon": self.epsilon,
            "mean": [self.mean.real, self.mean.imag],
            "coeffs": [[int(i - K), float(c.real), float(c.imag)] for i, c in enumerate(self.coeffs) if c != 0],
            "real_symmetric": self.real_symmetric,
        }

    @classmethod
    def from_dict(cls, data: dict, degree: int | None = None):
        coeffs = {int(k): complex(re, im) for k, re, im in data.get("coeffs", [])}
        K = degree if degree is not None else max([abs(k) for k in coeffs] + [1])
        mean = data.get("mean", [0.0, 0.0])
        if isinstance(mean, (int, float)):
            mean = [mean, 0.0]
        return cls(data["epsilon"], complex(mean[0], mean[1]), coeffs, degree=K)

    def to_json(self) -> str:
        return json.dumps(self._payload())

    @classmethod
    def from_json(cls, text: str, degree: int | None = None):
        return cls.from_dict(json.loads(text), degree)

    def with_degree(self, degree: int):
        return type(self)(self.strip, self.mean, _resize(np.array(self.coeffs), degree),
                          tail_energy=self.tail_energy)

    def restrict(self, epsilon: float):
        """Same series viewed on a different strip (no refit)."""
        return type(self)(epsilon, self.mean, np.array(self.coeffs), tail_energy=self.tail_energy)


def _resize(coeffs: np.ndarray, degree: int) -> np.ndarray:
    K = (len(coeffs) - 1) // 2
    out = np.zeros(2 * degree + 1, dtype=complex)
    m = min(K, degree)
    out[degree - m: degree + m + 1] = coeffs[K - m: K + m + 1]
    return out


class FourierAnnulusMap(_FourierSeries):
    """f(z) = z + mean + sum c_k e^{2 pi i k z} on the strip |Im z| < epsilon."""

    def __call__(self, z, check: bool = True):
        z = np.asarray(z, dtype=complex)
        out = z + self.periodic_part(z, check)
        return out if out.ndim else complex(out)

    def deriv(self, z, order: int = 1):
        z = np.asarray(z, dtype=complex)
        out = _series_deriv(self.coeffs, z, order)
        if order == 1:
            out = out + 1.0
        return out if out.ndim else complex(out)

    def iterate(self, z, n: int, check: bool = True):
        z = np.asarray(z, dtype=complex)
        for _ in range(n):
            z = self(z, check)
        return z

    def displacement(self) -> "TangentField":
        """f - id as a vector field."""
        return TangentField(self.strip, self.mean, np.array(self.coeffs))

    def __add__(self, other: "TangentField") -> "FourierAnnulusMap":
        if not isinstance(other, TangentField):
            return NotImplemented
        K = max(self.degree, other.degree)
        return FourierAnnulusMap(self.strip, self.mean + other.mean,
                                 _resize(np.array(self.coeffs), K) + _resize(np.array(other.coeffs), K))

    def __sub__(self, other):
        if isinstance(other, FourierAnnulusMap):
            K = max(self.degree, other.degree)
            return TangentField(self.strip, self.mean - other.mean,
                                _resize(np.array(self.coeffs), K) - _resize(np.array(other.coeffs), K))
        return NotImplemented

    def to_dict(self) -> dict:
        return self._payload()

    def __repr__(self):
        return (f"FourierAnnulusMap(eps={self.epsilon:g}, mean={self.mean:.6g}, degree={self.degree}, "
                f"modes={len(self.modes())})")


class TangentField(_FourierSeries):
    """Vector field v(z) = mean + sum a_k e^{2 pi i k z}."""

    def __call__(self, z, check: bool = True):
        out = self.periodic_part(z, check)
        return out if out.ndim else complex(out)

    def deriv(self, z, order: int = 1):
        out = _series_deriv(self.coeffs, np.asarray(z, dtype=complex), order)
        return out if out.ndim else complex(out)

    @property
    def in_V0(self) -> bool:
        return self.mean == 0

    @property
    def in_V1(self) -> bool:
        return not np.any(self.coeffs)

    def split(self) -> tuple["TangentField", "TangentField"]:
        """(V1 part, V0 part): the constant field and the zero-mean remainder."""
        v1 = TangentField(self.strip, self.mean, np.zeros_like(self.coeffs))
        v0 = TangentField(self.strip, 0.0, np.array(self.coeffs))
        return v1, v0

    def project_V0(self) -> "TangentField":
        return self.split()[1]

    def __add__(self, other):
        if not isinstance(other, TangentField):
            return NotImplemented
        K = max(self.degree, other.degree)
        return TangentField(self.strip, self.mean + other.mean,
                            _resize(np.array(self.coeffs), K) + _resize(np.array(other.coeffs), K))

    def __sub__(self, other):
        return self + (-1.0) * other

    def __mul__(self, s):
        return TangentField(self.strip, s * self.mean, s * np.array(self.coeffs), tail_energy=abs(s) * self.tail_energy)

    __rmul__ = __mul__

    def sup_norm(self, n: int | None = None) -> float:
        return self.sup_on_boundary(n)

    def norm2(self, n: int | None = None) -> float:
        """sup |v''| on the strip (attained on the boundary circles)."""
        n = n or max(256, 8 * self.degree)
        x = np.arange(n) / n
        return float(max(np.max(np.abs(self.deriv(x + 1j * y, 2))) for y in (-self.epsilon, self.epsilon)))

    def to_dict(self) -> dict:
        return self._payload()

    def __repr__(self):
        return f"TangentField(eps={self.epsilon:g}, mean={self.mean:.3g}, degree={self.degree})"


def rotation(alpha, epsilon: float = 0.5, degree: int = DEFAULT_DEGREE) -> FourierAnnulusMap:
    return FourierAnnulusMap(epsilon, float(alpha) if np.isreal(alpha) else alpha, degree=degree)


def identity(epsilon: float = 0.5, degree: int = DEFAULT_DEGREE) -> FourierAnnulusMap:
    return FourierAnnulusMap(epsilon, 0.0, degree=degree)


class Fit(NamedTuple):
    mean: complex
    coeffs: np.ndarray
    tail_energy: float


def fit_periodic(values_lo: np.ndarray, values_hi: np.ndarray | None, y_lo: float, y_hi: float | None,
                 degree: int) -> Fit:
    """Fourier coefficients of a 1-periodic analytic function from circle samples.

    ``values_lo`` are samples at ``x_j + i*y_lo`` (``x_j = j/N``), ``values_hi``
    at ``x_j + i*y_hi``.  With one circle only, pass ``None`` for the second.
    """
    N = len(values_lo)
    if N < 2 * degree + 2:
        raise DomainError(f"need at least {2 * degree + 2} samples for degree {degree}")
    spec_lo = np.fft.fft(values_lo) / N
    spec_hi = spec_lo if values_hi is None else np.fft.fft(values_hi) / N
    if values_hi is None:
        y_hi = y_lo
    freqs = np.fft.fftfreq(N, 1.0 / N).astype(int)
    coeffs = np.zeros(2 * degree + 1, dtype=complex)
    for k in range(1, degree + 1):
        coeffs[degree + k] = spec_lo[k] * np.exp(TWO_PI * k * y_lo)
        coeffs[degree - k] = spec_hi[-k] * np.exp(-TWO_PI * k * y_hi)
    if values_hi is None:
        mean = spec_lo[0] * 1.0
    else:
        mean = 0.5 * (spec_lo[0] + spec_hi[0])
    drop = np.abs(freqs) > degree
    tail = math.sqrt(max(float(np.sum(np.abs(spec_lo[drop]) ** 2)), float(np.sum(np.abs(spec_hi[drop]) ** 2))))
    return Fit(complex(mean), coeffs, tail)


def sample_fit(func: Callable, epsilon: float, degree: int, *, n: int | None = None,
               levels: tuple[float, float] | None = None, real_axis: bool = False) -> Fit:
    """Fit the periodic function ``func`` (acting on complex arrays) on a strip."""
    n = n or 4 * degree
    x = np.arange(n) / n
    if real_axis:
        return fit_periodic(np.asarray(func(x + 0j)), None, 0.0, None, degree)
    y_lo, y_hi = levels if levels is not None else (-epsilon, epsilon)
    return fit_periodic(np.asarray(func(x + 1j * y_lo)), np.asarray(func(x + 1j * y_hi)), y_lo, y_hi, degree)


def map_from_function(func: Callable, epsilon: float, degree: int = DEFAULT_DEGREE, **kw) -> FourierAnnulusMap:
    """Fit a lift ``func`` (with func(z+1) = func(z)+1) as a FourierAnnulusMap."""
    fit = sample_fit(lambda z: func(z) - z, epsilon, degree, **kw)
    return FourierAnnulusMap(epsilon, fit.mean, fit.coeffs, tail_energy=fit.tail_energy)


def field_from_function(func: Callable, epsilon: float, degree: int = DEFAULT_DEGREE, **kw) -> TangentField:
    fit = sample_fit(func, epsilon, degree, **kw)
    return TangentField(epsilon, fit.mean, fit.coeffs, tail_energy=fit.tail_energy)


def compose(f: FourierAnnulusMap, g: FourierAnnulusMap, *, epsilon: float | None = None,
            degree: int | None = None, real_axis: bool = False) -> FourierAnnulusMap:
    """f o g, refitted on the strip of half-width ``epsilon`` (default: g's)."""
    epsilon = g.epsilon if epsilon is None else epsilon
    degree = degree or max(f.degree, g.degree)

    def h(z):
        w = g(z, check=False)
        if np.max(np.abs(w.imag)) > f.epsilon * (1 + _EDGE) + 1e-12:
            raise DomainError("image of the sampling circle leaves the strip of the outer map")
        return f(w, check=False) - z

    fit = sample_fit(h, epsilon, degree, real_axis=real_axis)
    return FourierAnnulusMap(epsilon, fit.mean, fit.coeffs, tail_energy=fit.tail_energy)


def _newton_invert(f: FourierAnnulusMap, w: np.ndarray, tol: float = 1e-15, maxit: int = 60) -> np.ndarray:
    z = w - f.mean
    tol = tol * max(1.0, float(np.max(np.abs(w))))
    for _ in range(maxit):
        r = f(z, check=False) - w
        if np.max(np.abs(r)) < tol:
            break
        z = z - r / f.deriv(z)
    if np.max(np.abs(f(z, check=False) - w)) > 1e3 * tol:
        raise NonConvergenceError("Newton inversion did not converge")
    return z


def univalence_margin(f: FourierAnnulusMap, n: int = 512) -> float:
    """sup |f' - 1| on the boundary circles; < 1 certifies univalence on the strip."""
    x = np.arange(n) / n
    return float(max(np.max(np.abs(f.deriv(x + 1j * y) - 1)) for y in (-f.epsilon, f.epsilon)))


def invert(f: FourierAnnulusMap, target_strip: StripDomain | float | None = None,
           degree: int | None = None) -> FourierAnnulusMap:
    """Inverse map g with f(g(w)) = w on ``target_strip``."""
    if target_strip is None:
        # image of the strip contains the strip shrunk by the size of the wiggle
        wiggle = f.sup_on_boundary(include_mean=False) + abs(f.mean.imag)
        target_strip = f.epsilon - 1.01 * wiggle
        if target_strip <= 0:
            raise DomainError("map too far from a translation to pick a target strip")
    target = target_strip if isinstance(target_strip, StripDomain) else StripDomain(float(target_strip))
    margin = univalence_margin(f)
    if margin >= 1:
        raise NonConvergenceError(f"univalence heuristic fails: sup|f'-1| = {margin:.3g}")
    degree = degree or f.degree

    def h(w):
        z = _newton_invert(f, w)
        if np.max(np.abs(z.imag)) > f.epsilon * (1 + _EDGE) + 1e-12:
            raise DomainError("target strip is not inside the image of f")
        return z - w

    fit = sample_fit(h, target.epsilon, degree)
    return FourierAnnulusMap(target, fit.mean, fit.coeffs, tail_energy=fit.tail_energy)


def distance(f: _FourierSeries, g: _FourierSeries, n: int | None = None, epsilon: float | None = None) -> float:
    """Sup-distance on the common strip, with translations taken modulo 1."""
    eps = min(f.epsilon, g.epsilon) if epsilon is None else epsilon
    K = max(f.degree, g.degree)
    n = n or max(256, 8 * K)
    x = np.arange(n) / n
    best = 0.0
    for y in (-eps, eps):
        z = x + 1j * y
        d = f.periodic_part(z, check=False) - g.periodic_part(z, check=False)
        if isinstance(f, FourierAnnulusMap):
            d = d - np.round(np.mean(d.real))
        best = max(best, float(np.max(np.abs(d))))
    return best


# --------------------------------------------------------------------------
# rotation numbers


class RotationNumber(NamedTuple):
    value: float
    error: float
    plain: float
    birkhoff: float
    locked: tuple[int, int] | None


def _real_coeffs(f: FourierAnnulusMap) -> tuple[float, np.ndarray]:
    if not f.is_real_symmetric(1e-12):
        raise DomainError("rotation number needs a real-symmetric map")
    K = f.degree
    return f.mean.real, np.array(f.coeffs[K + 1:])


def _check_monotone(mean: float, pos: np.ndarray, n: int = 2048) -> None:
    x = np.arange(n) / n
    ks = np.arange(1, len(pos) + 1)
    E = np.exp(1j * TWO_PI * np.outer(x, ks))
    d = 1 + 2 * np.real(E @ (1j * TWO_PI * ks * pos))
    if np.min(d) <= 0:
        raise DomainError("map is not monotone on the circle")


def _orbit_batch(means: np.ndarray, pos: np.ndarray, n: int, x0: float = 0.0) -> np.ndarray:
    """Lift orbits of M real maps; pos has shape (M, K). Returns (n+1, M)."""
    M, K = pos.shape
    ks = np.arange(1, K + 1)
    out = np.empty((n + 1, M))
    x = np.full(M, x0, dtype=float)
    out[0] = x
    if K == 1:
        c1 = pos[:, 0]
        a, b = 2 * c1.real, -2 * c1.imag
        for j in range(1, n + 1):
            t = TWO_PI * x
            x = x + means + a * np.cos(t) + b * np.sin(t)
            out[j] = x
        return out
    for j in range(1, n + 1):
        E = np.exp(1j * TWO_PI * x)[:, None] ** ks
        x = x + means + 2 * np.einsum("mk,mk->m", E, pos).real
        out[j] = x
    return out


def _scalar_orbit_end(mean: float, pos: np.ndarray, n: int, x0: float = 0.0) -> float:
    """x_n for one real map, plain Python loop (fast for few modes)."""
    terms = [(k + 1, 2 * c.real, -2 * c.imag) for k, c in enumerate(pos) if c != 0]
    x = x0
    cos, sin = math.cos, math.sin
    if len(terms) == 1 and terms[0][0] == 1:
        _, a, b = terms[0]
        for _ in range(n):
            t = TWO_PI * x
            x = x + mean + a * cos(t) + b * sin(t)
        return x
    for _ in range(n):
        s = mean
        for k, a, b in terms:
            t = TWO_PI * k * x
            s += a * cos(t) + b * sin(t)
        x += s
    return x


def _bump_weights(n: int) -> np.ndarray:
    t = (np.arange(n) + 0.5) / n
    w = np.exp(-1.0 / (t * (1 - t)))
    return w / w.sum()


def _closest_returns(orbit: np.ndarray) -> list[tuple[int, int, float]]:
    """Successive record-closest returns (q, p, x_q - p) of a lift orbit from 0."""
    out = []
    best = math.inf
    for q in range(1, len(orbit)):
        p = int(np.floor(orbit[q] + 0.5))
        d = orbit[q] - orbit[0] - p
        if abs(d) < best:
            best = abs(d)
            out.append((q, p, float(d)))
    return out


def _accelerated(orbit: np.ndarray) -> tuple[float, tuple[int, int] | None, float]:
    cr = _closest_returns(orbit)
    n = len(orbit) - 1
    # mode locking: the orbit settles on a periodic cycle p/q
    for q, p, _ in reversed(cr):
        if q <= n // 4:
            tail = orbit[-1] - orbit[-1 - q] - p
            if abs(tail) < 1e-13:
                return p / q, (p, q), 0.0
            break
    # two consecutive closest returns with unimodular determinant
    pairs = []
    for (q, p, d), (q2, p2, d2) in zip(cr, cr[1:]):
        D = q2 * p - q * p2
        if abs(D) == 1 and d != d2:
            s = -(q2 * d - q * d2) / D
            if s != 0:
                pairs.append((p2 + d2 / s) / q2)
    if not pairs:
        return orbit[-1] / n, None, 1.0 / n
    err = abs(pairs[-1] - pairs[-2]) if len(pairs) > 1 else 1.0 / n
    return pairs[-1], None, err


def rotation_numbers(means, pos_coeffs, iterations: int = 20000) -> np.ndarray:
    """Weighted Birkhoff rotation numbers for a batch of real maps."""
    means = np.asarray(means, dtype=float)
    pos = np.atleast_2d(np.asarray(pos_coeffs, dtype=complex))
    orbit = _orbit_batch(means, pos, iterations)
    w = _bump_weights(iterations)
    return w @ np.diff(orbit, axis=0)


def rotation_number(f: FourierAnnulusMap, iterations: int = 20000, plain_iterations: int | None = None,
                    check: bool = True) -> RotationNumber:
    """Rotation number of a real-symmetric circle diffeomorphism.

    ``value`` comes from closest returns along the orbit of 0 (or the exact
    fraction when the orbit locks onto a cycle); ``birkhoff`` is a smoothly
    weighted orbit average used as an independent check; ``plain`` is
    ``x_N/N`` with ``N = plain_iterations`` (defaults to ``iterations``).
    """
    mean, pos = _real_coeffs(f)
    if check:
        _check_monotone(mean, pos)
    if not np.any(pos):
        return RotationNumber(mean, 0.0, mean, mean, None)
    orbit = _orbit_batch(np.array([mean]), pos[None, :], iterations)[:, 0]
    w = _bump_weights(iterations)
    birk = float(w @ np.diff(orbit))
    value, locked, err = _accelerated(orbit)
    err = max(err, abs(value - birk)) if locked is None else err
    if plain_iterations is None or plain_iterations == iterations:
        plain = orbit[-1] / iterations
    else:
        plain = _scalar_orbit_end(mean, pos, plain_iterations) / plain_iterations
    return RotationNumber(float(value), float(err), float(plain), birk, locked)
