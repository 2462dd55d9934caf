"""Soft-thresholding and the prox operator under an identity-minus-rank-one metric.

For ``H = sigma*I - u u^T`` the scaled prox

    x = argmin_x  1/2 ||x - xc||_H^2 + lam ||x||_1

reduces to a scalar search: with ``x(mu) = shrink(xc + mu*u, lam/sigma)``
the multiplier solves ``u^T x(mu) - sigma*mu = u^T xc``. The left side is
continuous, piecewise linear and strictly decreasing in ``mu``, with kinks
at two breakpoints per coordinate where ``u_i != 0``.
"""

from dataclasses import dataclass

import numpy as np

from . import _backend
from .errors import DimensionError, NonFiniteError

__all__ = [
    "shrink",
    "RankOneMetric",
    "Breakpoint",
    "ProxResult",
    "breakpoints",
    "multiplier_lhs",
    "prox_imro",
    "kkt_residual",
    "model_objective",
]


def shrink(y, threshold):
    """Componentwise ``sgn(y) * max(|y| - threshold, 0)``."""
    if threshold < 0:
        raise ValueError("threshold must be nonnegative")
    y = np.asarray(y, dtype=float)
    return np.sign(y) * np.maximum(np.abs(y) - threshold, 0.0)


class RankOneMetric:
    """The positive definite matrix ``H = sigma*I - u u^T`` (requires ``sigma > ||u||^2``)."""

    __slots__ = ("sigma", "u", "unorm2")

    def __init__(self, sigma, u):
        u = np.ascontiguousarray(u, dtype=float)
        sigma = float(sigma)
        if u.ndim != 1:
            raise ValueError("u must be a vector")
        if not (np.isfinite(sigma) and np.all(np.isfinite(u))):
            raise NonFiniteError("metric has non-finite entries")
        unorm2 = float(u @ u)
        if not sigma > unorm2:
            raise ValueError(f"metric not positive definite: sigma={sigma!r} <= ||u||^2={unorm2!r}")
        self.sigma = sigma
        self.u = u
        self.unorm2 = unorm2

    @classmethod
    def scaled_identity(cls, sigma, n):
        return cls(sigma, np.zeros(n))

    @property
    def n(self):
        return self.u.size

    @property
    def gap(self):
        """Smallest eigenvalue ``sigma - ||u||^2``."""
        return self.sigma - self.unorm2

    def apply(self, x):
        return self.sigma * x - self.u * (self.u @ x)

    def solve(self, g):
        """``H^{-1} g`` via ``(sigma I - uu^T)^{-1} = I/sigma - uu^T / (sigma (||u||^2 - sigma))``."""
        if self.unorm2 == 0.0:
            return g / self.sigma
        return g / self.sigma - self.u * ((self.u @ g) / (self.sigma * (self.unorm2 - self.sigma)))

    def quad(self, x):
        """``x^T H x``."""
        ux = self.u @ x
        return self.sigma * (x @ x) - ux * ux

    def norm(self, x):
        return float(np.sqrt(max(self.quad(x), 0.0)))

    def dense(self):
        return self.sigma * np.eye(self.n) - np.outer(self.u, self.u)

    def __repr__(self):
        return f"RankOneMetric(sigma={self.sigma:.6g}, ||u||^2={self.unorm2:.6g}, n={self.n})"


@dataclass(frozen=True)
class Breakpoint:
    """A kink of the multiplier equation.

    ``signed_index`` is ``+(i+1)`` for ``(lam/sigma - xc_i)/u_i`` and
    ``-(i+1)`` for ``(-lam/sigma - xc_i)/u_i``.
    """

    value: float
    signed_index: int

    @property
    def coordinate(self):
        return abs(self.signed_index) - 1


@dataclass(frozen=True)
class ProxResult:
    x: np.ndarray
    mu: float
    pieces_visited: int
    work: int = 0
    method: str = "sorted"


def _check_inputs(metric, xc, lam):
    xc = np.ascontiguousarray(xc, dtype=float)
    if xc.shape != (metric.n,):
        raise DimensionError("prox center", metric.n, xc.size)
    if not np.all(np.isfinite(xc)):
        raise NonFiniteError("prox center has non-finite entries")
    if not (np.isfinite(lam) and lam >= 0):
        raise ValueError(f"lam must be finite and nonnegative, got {lam!r}")
    return xc


def breakpoints(metric, xc, lam):
    """All breakpoints, ordered by value then signed index."""
    xc = _check_inputs(metric, xc, lam)
    thr = lam / metric.sigma
    out = []
    for i in np.flatnonzero(metric.u):
        ui = metric.u[i]
        out.append(Breakpoint((thr - xc[i]) / ui, int(i) + 1))
        out.append(Breakpoint((-thr - xc[i]) / ui, -(int(i) + 1)))
    out.sort(key=lambda b: (b.value, b.signed_index))
    return out


def multiplier_lhs(metric, xc, lam, mu):
    """Evaluate ``u^T x(mu) - sigma*mu`` directly."""
    x = shrink(xc + mu * metric.u, lam / metric.sigma)
    return float(metric.u @ x) - metric.sigma * mu


def prox_imro(metric, xc, lam, method="sorted", backend=None):
    """Scaled prox of ``lam*||.||_1`` under ``H = sigma*I - u u^T``.

    Parameters
    ----------
    metric : RankOneMetric
    xc : ndarray
        Prox center.
    lam : float
        Regularization weight; ``0`` is accepted and returns ``xc``.
    method : {"sorted", "median"}
        ``sorted`` sweeps all breakpoints in order, O(n log n).
        ``median`` discards half of the remaining breakpoints per round
        using linear-time selection, O(n).
    backend : {"cython", "python"}, optional
        Kernel implementation; defaults to the active one.
    """
    xc = _check_inputs(metric, xc, lam)
    thr = lam / metric.sigma
    if metric.unorm2 == 0.0:
        return ProxResult(shrink(xc, thr), 0.0, 0, 0, method)
    k = _backend.get(backend)
    if method == "sorted":
        mu, pieces = k.prox_sorted(metric.sigma, metric.u, xc, thr)
        work = pieces
    elif method == "median":
        mu, pieces, work = k.prox_median(metric.sigma, metric.u, xc, thr)
    else:
        raise ValueError(f"unknown prox method {method!r}")
    x = shrink(xc + mu * metric.u, thr)
    return ProxResult(x, float(mu), int(pieces), int(work), method)


def kkt_residual(metric, xc, lam, x):
    """Return ``(residual_inf, max_free_subgradient)`` for the optimality system.

    ``residual_inf`` is ``||H(x - xc) + lam*xi||_inf`` with ``xi_i = sgn(x_i)``
    on the support and the best admissible choice elsewhere;
    ``max_free_subgradient`` is the largest ``|xi_i|`` needed off the support
    (must be at most 1 for optimality).
    """
    r = metric.apply(x - xc)
    nz = x != 0
    res = np.zeros_like(r)
    res[nz] = r[nz] + lam * np.sign(x[nz])
    free = ~nz
    if lam > 0:
        xi = -r[free] / lam
        need = float(np.max(np.abs(xi), initial=0.0))
        res[free] = r[free] + lam * np.clip(xi, -1.0, 1.0)
    else:
        need = 0.0
        res[free] = r[free]
    return float(np.max(np.abs(res), initial=0.0)), need


def model_objective(metric, xc, lam, x):
    d = x - xc
    return 0.5 * metric.quad(d) + lam * float(np.abs(x).sum())
