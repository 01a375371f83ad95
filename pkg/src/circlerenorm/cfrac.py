"""Continued fractions, Gauss-map orbits, Brjuno sums and the return index.

Numbers are handled as exact :class:`fractions.Fraction` values.  Inexact
inputs (floats, mpmath numbers, named irrationals) carry a precision budget:
the expansion is run on both ends of the uncertainty interval and partial
quotients are emitted only while the two expansions agree.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import NamedTuple, Sequence

import mpmath

__all__ = [
    "RETURN_THRESHOLD",
    "K_DENOMINATOR_BOUND",
    "ContinuedFraction",
    "BrjunoValue",
    "ReturnIndex",
    "DomainError",
    "PrecisionError",
    "TerminatedExpansionError",
    "NoReturnIndexError",
    "named_alpha",
    "parse_alpha",
    "expand",
    "brjuno_phi",
    "brjuno_phi0",
    "return_index",
    "locate_K_discontinuities",
    "simplest_between",
]

RETURN_THRESHOLD = Fraction(1, 100)
K_DENOMINATOR_BOUND = 100

# decimal digits used for named constants unless the caller asks otherwise
NAMED_DIGITS = 60


class DomainError(ValueError):
    """Argument outside the admissible range."""


class PrecisionError(ArithmeticError):
    """Requested expansion depth exceeds what the input precision supports."""


class TerminatedExpansionError(ValueError):
    """A rational number's expansion ended before the requested depth."""


class NoReturnIndexError(LookupError):
    """No stored convergent satisfies 0 < q*alpha - p < 0.01."""


def _named(name: str, digits: int) -> mpmath.mpf:
    with mpmath.workdps(digits + 10):
        if name in ("golden", "golden-mean"):
            value = (mpmath.sqrt(5) - 1) / 2
        elif name in ("silver", "silver-mean"):
            value = mpmath.sqrt(2) - 1
        elif name in ("onetwo", "[1,2]"):
            # [1, 2, 1, 2, ...] solves a^2 + 2a - 2 = 0
            value = mpmath.sqrt(3) - 1
        elif name in ("pi-3", "pi"):
            value = mpmath.pi - 3
        else:
            raise DomainError(f"unknown named constant {name!r}")
        return +value


NAMED_CONSTANTS = ("golden", "silver", "onetwo", "pi-3")


def named_alpha(name: str, digits: int = NAMED_DIGITS) -> mpmath.mpf:
    """High-precision value of a named rotation number."""
    return _named(name, digits)


def _mpf_to_fraction(x: mpmath.mpf) -> Fraction:
    man, exp = x.man_exp
    man = int(man)
    if exp >= 0:
        return Fraction(man << exp)
    return Fraction(man, 1 << -exp)


def parse_alpha(alpha, digits: int | None = None) -> tuple[Fraction, Fraction | None]:
    """Return ``(value, radius)``; ``radius`` is None for exact input.

    Accepted forms: ``Fraction``/``int``; decimal or ``p/q`` strings (exact);
    named constants (``"golden"``, ``"silver"``, ``"onetwo"``, ``"pi-3"``);
    floats (budget 15 digits by default); mpmath numbers (budget taken from
    the current working precision).
    """
    if isinstance(alpha, Fraction):
        return alpha, None
    if isinstance(alpha, int) and not isinstance(alpha, bool):
        return Fraction(alpha), None
    if isinstance(alpha, str):
        key = alpha.strip().lower()
        if key in ("golden", "golden-mean", "silver", "silver-mean", "onetwo", "[1,2]", "pi-3", "pi"):
            d = NAMED_DIGITS if digits is None else digits
            return _mpf_to_fraction(_named(key, d)), Fraction(1, 10**d)
        try:
            return Fraction(key), None
        except ValueError as exc:
            raise DomainError(f"cannot parse rotation number {alpha!r}") from exc
    if isinstance(alpha, float):
        if not math.isfinite(alpha):
            raise DomainError("alpha must be finite")
        d = 15 if digits is None else digits
        value = Fraction(alpha)
        return value, abs(value) * Fraction(1, 10**d) + Fraction(1, 10**(d + 2))
    if isinstance(alpha, mpmath.mpf):
        d = (mpmath.mp.dps - 2) if digits is None else digits
        value = _mpf_to_fraction(alpha)
        return value, abs(value) * Fraction(1, 10**d) + Fraction(1, 10**(d + 2))
    raise DomainError(f"unsupported rotation number type {type(alpha).__name__}")


def _gauss_step(x: Fraction) -> tuple[int, Fraction]:
    inv = 1 / x
    a = inv.numerator // inv.denominator
    return a, inv - a


@dataclass(frozen=True)
class ContinuedFraction:
    """Continued-fraction state of a rotation number ``alpha`` in (0, 1).

    ``partials[n]`` is ``a_n = [1/alpha_n]``; ``convergents[n]`` is
    ``(p_n, q_n)`` with ``p_n/q_n = [a_0, ..., a_{n-1}]`` (so ``convergents[0]
    == (0, 1)``); ``gauss_orbit`` holds ``alpha_{-1} = 1, alpha_0 = alpha,
    alpha_1, ...`` as exact rationals.
    """

    alpha: Fraction
    partials: tuple[int, ...]
    convergents: tuple[tuple[int, int], ...]
    gauss_orbit: tuple[Fraction, ...]
    terminated: bool
    radius: Fraction | None = None

    @property
    def depth(self) -> int:
        return len(self.partials)

    @property
    def exact(self) -> bool:
        return self.radius is None

    def alpha_n(self, n: int) -> Fraction:
        """Gauss iterate ``alpha_n`` (``n >= -1``)."""
        return self.gauss_orbit[n + 1]

    def error(self, n: int) -> Fraction:
        """Signed approximation error ``q_n*alpha - p_n``."""
        p, q = self.convergents[n]
        return q * self.alpha - p

    def to_json(self, digits: int = 40) -> str:
        return json.dumps(self.to_dict(digits))

    def to_dict(self, digits: int = 40) -> dict:
        with mpmath.workdps(digits + 5):
            dec = mpmath.nstr(mpmath.mpf(self.alpha.numerator) / self.alpha.denominator, digits)
        return {
            "alpha_decimal": dec,
            "partials": list(self.partials),
            "convergents": [[p, q] for p, q in self.convergents],
        }

    @classmethod
    def from_json(cls, text: str) -> "ContinuedFraction":
        data = json.loads(text)
        alpha = Fraction(data["alpha_decimal"])
        partials = tuple(int(a) for a in data["partials"])
        convergents = tuple((int(p), int(q)) for p, q in data["convergents"])
        _check_recurrence(partials, convergents)
        orbit = [Fraction(1), alpha]
        x = alpha
        for _ in partials:
            if x == 0:
                break
            _, x = _gauss_step(x)
            orbit.append(x)
        terminated = orbit[-1] == 0
        if terminated:
            orbit.pop()
        digits = len(data["alpha_decimal"].split(".")[-1])
        return cls(alpha, partials, convergents, tuple(orbit), terminated,
                   radius=Fraction(1, 10**digits))


def _convergents(partials: Sequence[int]) -> tuple[tuple[int, int], ...]:
    p_prev, q_prev = 1, 0
    p, q = 0, 1
    out = [(p, q)]
    for a in partials:
        p, p_prev = a * p + p_prev, p
        q, q_prev = a * q + q_prev, q
        out.append((p, q))
    return tuple(out)


def _check_recurrence(partials, convergents) -> None:
    if tuple(convergents[: len(partials) + 1]) != _convergents(partials)[: len(convergents)]:
        raise DomainError("convergents do not follow the partial quotients")


def expand(alpha, depth: int, digits: int | None = None) -> ContinuedFraction:
    """Continued-fraction expansion of ``alpha`` to ``depth`` partial quotients.

    Rational input terminates early; inexact input raises
    :class:`PrecisionError` when its precision budget cannot certify
    ``depth`` partial quotients.
    """
    if depth < 1:
        raise DomainError("depth must be >= 1")
    value, radius = parse_alpha(alpha, digits)
    if not (0 < value < 1):
        raise DomainError(f"alpha must lie in (0, 1), got {float(value)!r}")

    partials: list[int] = []
    orbit = [Fraction(1), value]
    x = value
    if radius is None:
        while len(partials) < depth and x != 0:
            a, x = _gauss_step(x)
            partials.append(a)
            orbit.append(x)
        terminated = x == 0
        if terminated:
            orbit.pop()
        return ContinuedFraction(value, tuple(partials), _convergents(partials),
                                 tuple(orbit), terminated, None)

    lo, hi = value - radius, value + radius
    if lo <= 0 or hi >= 1:
        raise DomainError("uncertainty interval of alpha leaves (0, 1)")
    while len(partials) < depth:
        if lo == 0 or hi == 0 or x == 0:
            break
        a_lo, lo_next = _gauss_step(lo)
        a_hi, hi_next = _gauss_step(hi)
        a, x_next = _gauss_step(x)
        if not (a_lo == a_hi == a):
            break
        # the Gauss map reverses orientation on each branch
        lo, hi = hi_next, lo_next
        x = x_next
        partials.append(a)
        orbit.append(x)
    if len(partials) < depth:
        raise PrecisionError(
            f"precision budget certifies only {len(partials)} partial quotients; "
            f"{depth} requested"
        )
    return ContinuedFraction(value, tuple(partials), _convergents(partials),
                             tuple(orbit), False, radius)


@dataclass(frozen=True)
class BrjunoValue:
    """Partial sum of the Yoccoz-Brjuno function.

    ``last_term`` is only a heuristic indicator of the tail; divergence is
    never certified.
    """

    partial_sum: float
    terms: tuple[float, ...]
    truncation_depth: int
    bound_C: float | None = None

    @property
    def last_term(self) -> float:
        return self.terms[-1] if self.terms else 0.0

    @property
    def in_B_C(self) -> bool | None:
        if self.bound_C is None:
            return None
        return self.partial_sum < self.bound_C

    def to_dict(self) -> dict:
        return {
            "partial_sum": self.partial_sum,
            "terms": list(self.terms),
            "truncation_depth": self.truncation_depth,
            "bound_C": self.bound_C,
            "last_term": self.last_term,
        }


def _require_depth(cf: ContinuedFraction, depth: int) -> None:
    if depth < 0:
        raise DomainError("depth must be >= 0")
    if depth > cf.depth:
        if cf.terminated:
            raise TerminatedExpansionError(
                f"alpha is rational with {cf.depth} partial quotients; the sum is undefined past them"
            )
        raise DomainError(f"only {cf.depth} partial quotients stored; expand deeper")


def brjuno_phi(cf: ContinuedFraction, depth: int, bound_C: float | None = None) -> BrjunoValue:
    """Partial sum of sum_n alpha_{-1}...alpha_{n-1} log(1/alpha_n), n < depth."""
    _require_depth(cf, depth)
    terms = []
    with mpmath.workdps(40):
        prod = mpmath.mpf(1)
        total = mpmath.mpf(0)
        for n in range(depth):
            an = cf.alpha_n(n)
            an_mp = mpmath.mpf(an.numerator) / an.denominator
            term = prod * mpmath.log(1 / an_mp)
            terms.append(float(term))
            total += term
            prod *= an_mp
        return BrjunoValue(float(total), tuple(terms), depth, bound_C)


def brjuno_phi0(cf: ContinuedFraction, depth: int) -> float:
    """Partial sum of the original Brjuno series sum_n log(q_{n+1})/q_n, n < depth."""
    _require_depth(cf, depth)
    with mpmath.workdps(40):
        total = mpmath.mpf(0)
        for n in range(depth):
            q_n = cf.convergents[n][1]
            q_next = cf.convergents[n + 1][1]
            total += mpmath.log(q_next) / q_n
        return float(total)


class ReturnIndex(NamedTuple):
    n: int
    m: int
    l: float


def _return_scan(cf: ContinuedFraction) -> tuple[int, Fraction]:
    for m in range(len(cf.convergents)):
        # convergent m needs alpha_m to be meaningful
        if m > cf.depth:
            break
        err = cf.error(m)
        if 0 < err < RETURN_THRESHOLD:
            return m, err
    raise NoReturnIndexError(
        f"no convergent with 0 < q*alpha - p < 0.01 among the first {cf.depth + 1}; expand deeper"
    )


def return_index(cf: ContinuedFraction) -> ReturnIndex:
    """``n(alpha) = q_m`` for the first convergent with ``0 < q_m alpha - p_m < 0.01``.

    Returns ``(n, m, l)`` with ``l = q_m alpha - p_m = {n alpha}``.
    """
    m, err = _return_scan(cf)
    return ReturnIndex(cf.convergents[m][1], m, float(err))


def return_error(cf: ContinuedFraction) -> Fraction:
    """Exact ``l = q_m alpha - p_m`` for the return index."""
    return _return_scan(cf)[1]


def _n_of(alpha: Fraction, max_steps: int = 200) -> int | None:
    """Return index of an exact rational, or None if its expansion ends first."""
    p_prev, q_prev, p, q = 1, 0, 0, 1
    x = alpha
    for _ in range(max_steps):
        err = q * alpha - p
        if 0 < err < RETURN_THRESHOLD:
            return q
        if x == 0:
            return None
        a, x = _gauss_step(x)
        p, p_prev = a * p + p_prev, p
        q, q_prev = a * q + q_prev, q
    return None


def simplest_between(a: Fraction, b: Fraction) -> Fraction:
    """Rational with the smallest denominator in the closed interval [a, b]."""
    if a > b:
        a, b = b, a
    fl = a.numerator // a.denominator
    if Fraction(fl) == a:
        return a
    if fl + 1 <= b:
        return Fraction(fl + 1)
    # a and b share the integer part fl; recurse on reciprocals of fractional parts
    return fl + 1 / simplest_between(1 / (b - fl), 1 / (a - fl))


# irrational-looking offset keeps grid nodes away from small-denominator rationals
_GRID_OFFSET = Fraction(3819660112501051, 10**16)


def locate_K_discontinuities(interval: tuple, resolution: int, bisection_steps: int = 80) -> list[Fraction]:
    """Rational jump points of ``n(alpha)`` inside ``interval``.

    ``n`` is sampled on ``resolution`` grid nodes; each change between
    neighbours is bisected in exact arithmetic and reported as the simplest
    rational of the final bracket.
    """
    lo, hi = (Fraction(str(v)) if isinstance(v, float) else Fraction(v) for v in interval)
    if not (0 < lo < hi < 1):
        raise DomainError("interval must lie inside (0, 1)")
    step = (hi - lo) / resolution
    nodes = [lo + (j + _GRID_OFFSET) * step for j in range(resolution)]
    values = [_n_of(x) for x in nodes]
    jumps: list[Fraction] = []
    for (a, na), (b, nb) in zip(zip(nodes, values), zip(nodes[1:], values[1:])):
        if na == nb:
            continue
        for _ in range(bisection_steps):
            mid = (a + b) / 2
            nm = _n_of(mid)
            if nm == na:
                a = mid
            else:
                b, nb = mid, nm
        jumps.append(simplest_between(a, b))
    return sorted(set(jumps))
