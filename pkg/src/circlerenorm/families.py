"""The Arnold family F(z) = z + mu - (a/2pi) sin(2 pi z) and its Arnold tongues."""
from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction

import numpy as np

from . import cfrac
from .circlemap import DomainError, FourierAnnulusMap, rotation_number, rotation_numbers
from .config import get_config

__all__ = ["arnold", "tongue_point", "tongue_curve", "tongue_csv", "TongueError"]


class TongueError(DomainError):
    pass


_MAX_LOCKED_DENOMINATOR = 10**5


def arnold(mu: float, a: float, epsilon: float = 0.5) -> FourierAnnulusMap:
    """Exact two-mode representation of z + mu - (a/2pi) sin(2 pi z).

    Negative a is accepted: it is the same map conjugated by z -> z + 1/2.
    """
    if not abs(a) < 1:
        raise DomainError("the Arnold map is a circle diffeomorphism only for |a| < 1")
    c = 1j * a / (4 * math.pi)
    return FourierAnnulusMap(epsilon, float(mu), {1: c, -1: -c}, degree=1)


def _irrational_alpha(alpha) -> float:
    if isinstance(alpha, Fraction) or isinstance(alpha, int):
        raise TongueError("rational rotation numbers have tongues of positive width; refused")
    try:
        cf = cfrac.expand(alpha, 25)
    except cfrac.PrecisionError:
        # inexact input: refuse it when its uncertainty interval holds a
        # rational of small denominator, whose tongue is a plateau
        value, radius = cfrac.parse_alpha(alpha)
        near = cfrac.simplest_between(value - radius, value + radius)
        if near.denominator <= _MAX_LOCKED_DENOMINATOR:
            raise TongueError(f"alpha = {float(value)!r} is indistinguishable from {near}; refused")
        return float(value)
    if cf.terminated:
        raise TongueError(f"alpha = {cf.alpha} is rational; refused")
    return float(cf.alpha)


def _rho_batch(mus: np.ndarray, a: float, iterations: int) -> np.ndarray:
    c = 1j * a / (4 * math.pi)
    pos = np.full((len(mus), 1), c)
    return rotation_numbers(mus, pos, iterations)


def tongue_point(alpha, a: float, mu_bracket: tuple[float, float] | None = None, *,
                 tolerance: float = 1e-12, iterations: int | None = None, width: int = 16) -> float:
    """Parameter mu with rho(F_{mu,a}) = alpha, by batched bisection on mu.

    ``tolerance`` is the final width of the mu-bracket.  Each round evaluates
    ``width`` interior points at once and keeps the sub-bracket that straddles
    alpha, so the bracket shrinks by a factor width+1 per round.
    """
    al = _irrational_alpha(alpha)
    if a == 0:
        return al
    arnold(0.0, a)  # domain check
    cfg = get_config()["tongue"]
    iterations = iterations or cfg["iterations"]
    if mu_bracket is None:
        # |F - R_mu| <= |a|/(2 pi), hence |rho - mu| <= |a|/(2 pi)
        r = abs(a) / (2 * math.pi) * 1.01 + 1e-12
        mu_bracket = (al - r, al + r)
    lo, hi = map(float, mu_bracket)
    ends = _rho_batch(np.array([lo, hi]), a, iterations)
    if not (ends[0] <= al <= ends[1]):
        raise TongueError(f"bracket [{lo}, {hi}] does not straddle alpha (rho = {ends[0]}, {ends[1]})")
    for _ in range(200):
        if hi - lo <= tolerance:
            break
        grid = np.linspace(lo, hi, width + 2)
        rho = _rho_batch(grid[1:-1], a, iterations)
        below = np.nonzero(rho < al)[0]
        above = np.nonzero(rho >= al)[0]
        new_lo = grid[1 + below[-1]] if below.size else lo
        new_hi = grid[1 + above[0]] if above.size else hi
        if new_hi - new_lo >= hi - lo:
            break
        lo, hi = new_lo, new_hi
    return 0.5 * (lo + hi)


def rho_residual(alpha, a: float, mu: float) -> float:
    """|rho(F_{mu,a}) - alpha| from the closest-return estimate."""
    al = float(cfrac.parse_alpha(alpha)[0])
    return abs(rotation_number(arnold(mu, a)).value - al)


def _curve_job(args):
    alpha, a, tol = args
    mu = tongue_point(alpha, a, tolerance=tol)
    return a, mu, rho_residual(alpha, a, mu)


def tongue_curve(alpha, a_grid, *, tolerance: float = 1e-12, jobs: int = 1, with_residuals: bool = False):
    """Samples (a, mu(a)) of the tongue of alpha; optionally (a, mu, residual)."""
    delta = get_config()["tongue"]["delta"]
    grid = [float(a) for a in a_grid]
    if any(abs(a) > delta for a in grid):
        raise TongueError(f"tongue tracing is limited to |a| <= {delta}")
    work = [(alpha, a, tolerance) for a in grid]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            rows = list(ex.map(_curve_job, work))
    else:
        rows = [_curve_job(w) for w in work]
    if with_residuals:
        return rows
    return [(a, mu) for a, mu, _ in rows]


def tongue_csv(alpha, rows) -> str:
    al = float(cfrac.parse_alpha(alpha)[0])
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["alpha", "a", "mu", "rho_residual"])
    for a, mu, res in rows:
        w.writerow([f"{al:.17g}", f"{a:.17g}", f"{mu:.17g}", f"{res:.17g}"])
    return buf.getvalue()
