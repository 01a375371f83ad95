"""Periodic Beltrami equation F_zbar = mu F_z on a horizontal band.

mu lives on the cell [0,1) x [-Y, Y], is 1-periodic in x and vanishes for
|y| > Y.  We write F = z + phi with phi bounded and 1-periodic, and
omega = phi_zbar.  Per Fourier mode in x the equation phi_zbar = omega is an
ODE in y that we integrate exactly for piecewise-linear omega (bounded
solution, i.e. the Cauchy transform of the band).  Then phi_z = B omega with
(B omega)_k = 2 pi i k phi_k - omega_k, and the fixed point
omega = mu (1 + B omega) is found by Neumann iteration.

The same exact recursion is used to evaluate F, F_z, F_zbar at arbitrary
points, which keeps off-grid values consistent with the discrete solution.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .circlemap import TWO_PI, DomainError, NonConvergenceError

__all__ = ["BeltramiField", "QCSolution", "solve_beltrami", "band_grid", "affine_solution"]


def band_grid(epsilon: float, nx: int = 256, ny: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """x nodes j/nx and y nodes covering [-2 eps, 2 eps] (odd count, includes 0)."""
    if ny is None:
        ny = 256 * max(1, math.ceil(epsilon)) + 1
    if ny % 2 == 0:
        ny += 1
    x = np.arange(nx) / nx
    y = np.linspace(-2 * epsilon, 2 * epsilon, ny)
    return x, y


@dataclass
class BeltramiField:
    """mu sampled at (y_i, x_j); values has shape (ny, nx)."""

    x: np.ndarray
    y: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        if self.values.shape != (len(self.y), len(self.x)):
            raise DomainError("mu grid shape must be (len(y), len(x))")

    @property
    def norm_inf(self) -> float:
        return float(np.max(np.abs(self.values))) if self.values.size else 0.0

    @property
    def half_height(self) -> float:
        return float(self.y[-1])

    @classmethod
    def constant(cls, c: complex, epsilon: float, nx: int = 256, ny: int | None = None):
        x, y = band_grid(epsilon, nx, ny)
        return cls(x, y, np.full((len(y), len(x)), complex(c)))

    @classmethod
    def from_function(cls, func, epsilon: float, nx: int = 256, ny: int | None = None):
        x, y = band_grid(epsilon, nx, ny)
        Z = x[None, :] + 1j * y[:, None]
        return cls(x, y, np.broadcast_to(func(Z), Z.shape).astype(complex))


class _ModeIntegrator:
    """Exact per-mode integration of phi_k' = -2i omega_k - 2 pi k phi_k."""

    def __init__(self, nx: int, y: np.ndarray):
        self.nx = nx
        self.y = y
        self.h = float(y[1] - y[0])
        self.k = np.fft.fftfreq(nx, 1.0 / nx)
        self.pos = self.k > 0
        self.neg = self.k < 0
        self.E, self.w0, self.w1 = self._weights(self.h)

    def _weights(self, h):
        """Step weights for exp(-a h) decay with linear omega over a step of length h.

        h may be an array (broadcast against the mode axis)."""
        a = TWO_PI * np.abs(self.k)
        h = np.asarray(h, dtype=float)[..., None] if np.ndim(h) else h
        with np.errstate(divide="ignore", invalid="ignore"):
            x = a * h
            om = -np.expm1(-x)                      # 1 - E
            E = 1.0 - om
            # w1 = 1/a - (1-E)/(a^2 h); series for small a h
            w1 = np.where(x > 1e-4, (1.0 - om / np.where(x > 0, x, 1.0)) / np.where(a > 0, a, 1.0),
                          h * (0.5 - x / 6.0 + x * x / 24.0))
            w0 = np.where(x > 1e-4, om / np.where(a > 0, a, 1.0), h * (1 - x / 2 + x * x / 6)) - w1
        return E, w0, w1

    def phi(self, omega_hat: np.ndarray) -> np.ndarray:
        """Bounded solution on the grid; omega_hat has shape (ny, nx) in mode space."""
        ny = omega_hat.shape[0]
        out = np.zeros_like(omega_hat)
        E, w0, w1 = self.E, self.w0, self.w1
        p = self.pos
        acc = np.zeros(int(p.sum()), dtype=complex)
        Ep, w0p, w1p = E[p], w0[p], w1[p]
        om = omega_hat[:, p]
        for i in range(1, ny):
            acc = Ep * acc + w0p * om[i - 1] + w1p * om[i]
            out[i, p] = acc
        out[:, p] *= -2j
        q = self.neg
        acc = np.zeros(int(q.sum()), dtype=complex)
        Eq, w0q, w1q = E[q], w0[q], w1[q]
        om = omega_hat[:, q]
        for i in range(ny - 2, -1, -1):
            acc = Eq * acc + w0q * om[i + 1] + w1q * om[i]
            out[i, q] = acc
        out[:, q] *= 2j
        o0 = omega_hat[:, 0]
        cum = np.concatenate([[0.0], np.cumsum(0.5 * self.h * (o0[1:] + o0[:-1]))])
        out[:, 0] = -2j * cum
        return out

    def beurling(self, phi_hat, omega_hat):
        return 1j * TWO_PI * self.k * phi_hat - omega_hat


@dataclass
class QCSolution:
    """Discrete solution F = z + phi of F_zbar = mu F_z on the band.

    ``phi_hat``/``omega_hat``/``dz_hat`` hold per-row Fourier modes in x of
    phi, F_zbar and F_z - 1 on the y grid.
    """

    x: np.ndarray
    y: np.ndarray
    phi_hat: np.ndarray
    omega_hat: np.ndarray
    dz_hat: np.ndarray
    residual: float
    normalization_error: float
    iterations: int
    update_history: list = field(default_factory=list)

    @property
    def values(self) -> np.ndarray:
        """F - id on the grid, shape (ny, nx)."""
        return np.fft.ifft(self.phi_hat, axis=1)

    def grid_points(self) -> np.ndarray:
        return self.x[None, :] + 1j * self.y[:, None]

    # -- off-grid evaluation ------------------------------------------------
    def _integ(self) -> _ModeIntegrator:
        integ = self.__dict__.get("_integ_cache")
        if integ is None:
            integ = _ModeIntegrator(len(self.x), self.y)
            self.__dict__["_integ_cache"] = integ
        return integ

    def _modes_at(self, yq: np.ndarray):
        """(phi_k(y), omega_k(y)) for query heights; arrays of shape (M, nx)."""
        integ = self._integ()
        y = self.y
        ny = len(y)
        h = integ.h
        M = len(yq)
        nx = len(self.x)
        phi = np.zeros((M, nx), dtype=complex)
        om = np.zeros((M, nx), dtype=complex)
        below = yq <= y[0]
        above = yq >= y[-1]
        inside = ~(below | above)
        p, q = integ.pos, integ.neg
        a = TWO_PI * np.abs(integ.k)
        # outside the band omega = 0 and the modes decay or stay constant
        if np.any(below):
            d = (y[0] - yq[below])[:, None]
            phi[below] = 0.0
            phi[np.ix_(below, q)] = self.phi_hat[0, q][None, :] * np.exp(-a[q] * d)
            phi[np.ix_(below, [0])] = self.phi_hat[0, 0]
        if np.any(above):
            d = (yq[above] - y[-1])[:, None]
            phi[np.ix_(above, p)] = self.phi_hat[-1, p][None, :] * np.exp(-a[p] * d)
            phi[np.ix_(above, [0])] = self.phi_hat[-1, 0]
        if np.any(inside):
            yi = yq[inside]
            j = np.clip(np.floor((yi - y[0]) / h).astype(int), 0, ny - 2)
            s = yi - y[j]                     # distance from node j (upwards)
            lam = (s / h)[:, None]
            oj, oj1 = self.omega_hat[j], self.omega_hat[j + 1]
            ov = (1 - lam) * oj + lam * oj1
            om[inside] = ov
            # k > 0: march up from node j over length s
            E, w0, w1 = integ._weights(s)
            rows = np.nonzero(inside)[0]
            vals = np.zeros((len(yi), nx), dtype=complex)
            vals[:, p] = E[:, p] * self.phi_hat[j][:, p] - 2j * (w0[:, p] * oj[:, p] + w1[:, p] * ov[:, p])
            # k < 0: march down from node j+1 over length h - s
            E2, w02, w12 = integ._weights(h - s)
            vals[:, q] = E2[:, q] * self.phi_hat[j + 1][:, q] + 2j * (w02[:, q] * oj1[:, q] + w12[:, q] * ov[:, q])
            vals[:, 0] = self.phi_hat[j, 0] - 2j * 0.5 * s * (oj[:, 0] + ov[:, 0])
            phi[rows] = vals
        return phi, om

    def evaluate(self, z, derivatives: bool = False):
        """F(z) (and optionally F_z, F_zbar) at arbitrary complex points."""
        z = np.asarray(z, dtype=complex)
        shape = z.shape
        zf = z.ravel()
        phi, om = self._modes_at(zf.imag)
        nx = len(self.x)
        k = self._integ().k
        E = np.exp(1j * TWO_PI * np.outer(zf.real, k)) / nx
        F = zf + np.sum(phi * E, axis=1)
        if not derivatives:
            return F.reshape(shape)
        dz = 1j * TWO_PI * k * phi - om
        Fz = 1.0 + np.sum(dz * E, axis=1)
        Fzb = np.sum(om * E, axis=1)
        return F.reshape(shape), Fz.reshape(shape), Fzb.reshape(shape)

    __call__ = evaluate

    def inverse(self, w, z0=None, tol: float = 1e-14, maxit: int = 50) -> np.ndarray:
        """Solve F(z) = w by Newton with the real Jacobian of F."""
        w = np.asarray(w, dtype=complex)
        z = w.copy() if z0 is None else np.asarray(z0, dtype=complex).copy()
        for _ in range(maxit):
            F, Fz, Fzb = self.evaluate(z, derivatives=True)
            r = w - F
            if np.max(np.abs(r), initial=0.0) < tol:
                break
            z = z + (np.conj(Fz) * r - Fzb * np.conj(r)) / (np.abs(Fz) ** 2 - np.abs(Fzb) ** 2)
        else:
            raise NonConvergenceError("inverse of the quasiconformal map did not converge")
        return z

    def periodicity_defect(self, n: int = 64) -> float:
        ys = np.linspace(self.y[0], self.y[-1], n)
        a = self.evaluate(1j * ys)
        b = self.evaluate(1.0 + 1j * ys)
        return float(np.max(np.abs(b - a - 1)))

    def distortion(self) -> float:
        """max |F - id| over the grid."""
        return float(np.max(np.abs(self.values)))

    def to_csv(self) -> str:
        vals = self.values
        lines = ["x,y,re,im"]
        for i, yy in enumerate(self.y):
            for j, xx in enumerate(self.x):
                v = vals[i, j]
                lines.append(f"{xx:.17g},{yy:.17g},{v.real:.17g},{v.imag:.17g}")
        return "\n".join(lines) + "\n"


def solve_beltrami(mu: BeltramiField, tolerance: float = 1e-13, max_iter: int = 200) -> QCSolution:
    """Normalized solution F of F_zbar = mu F_z with F(z+1) = F(z) + 1, F(0) = 0, F(1) = 1."""
    norm = mu.norm_inf
    if not np.isfinite(norm) or norm >= 1:
        raise DomainError(f"Beltrami coefficient must satisfy |mu| < 1 (got {norm:.3g})")
    nx, ny = len(mu.x), len(mu.y)
    if ny < 3 or not np.allclose(np.diff(mu.y), mu.y[1] - mu.y[0]):
        raise DomainError("y grid must be uniform")
    if not np.allclose(mu.x, np.arange(nx) / nx):
        raise DomainError("x grid must be j/nx")
    integ = _ModeIntegrator(nx, mu.y)
    m = mu.values
    omega = m.copy()
    history = []
    it = 0
    if norm == 0:
        omega_hat = np.zeros((ny, nx), dtype=complex)
        phi_hat = np.zeros_like(omega_hat)
        dz_hat = np.zeros_like(omega_hat)
    else:
        for it in range(1, max_iter + 1):
            omega_hat = np.fft.fft(omega, axis=1)
            phi_hat = integ.phi(omega_hat)
            dz_hat = integ.beurling(phi_hat, omega_hat)
            dz = np.fft.ifft(dz_hat, axis=1)
            new = m * (1.0 + dz)
            upd = float(np.max(np.abs(new - omega)))
            history.append(upd)
            omega = new
            if not np.isfinite(upd) or (it > 5 and upd > 10 * history[0]):
                raise NonConvergenceError("Neumann iteration diverges")
            if upd < tolerance:
                break
        else:
            raise NonConvergenceError(f"Neumann iteration not converged after {max_iter} steps "
                                      f"(last update {history[-1]:.3g})")
        omega_hat = np.fft.fft(omega, axis=1)
        phi_hat = integ.phi(omega_hat)
        dz_hat = integ.beurling(phi_hat, omega_hat)
    # residual of F_zbar - mu F_z on the grid
    dz = np.fft.ifft(dz_hat, axis=1)
    resid = float(np.max(np.abs(omega - m * (1.0 + dz)))) if ny else 0.0
    sol = QCSolution(mu.x, mu.y, phi_hat, omega_hat, dz_hat, resid, 0.0, it, history)
    # substitute for F(infinity) = infinity: phi bounded; then F(0) = 0 by a shift
    F0 = complex(sol.evaluate(np.array([0j]))[0])
    sol.phi_hat[:, 0] -= F0 * nx
    # F(1) = F(0) + 1 holds by periodicity, so no rescaling is needed
    F0 = complex(sol.evaluate(np.array([0j]))[0])
    F1 = complex(sol.evaluate(np.array([1 + 0j]))[0])
    sol.normalization_error = abs(F0) + abs(F1 - 1)
    return sol


def affine_solution(c: complex, z):
    """(z + c zbar) / (1 + c): solves F_zbar = c F_z with F(0) = 0, F(1) = 1."""
    z = np.asarray(z, dtype=complex)
    return (z + c * np.conj(z)) / (1 + c)
