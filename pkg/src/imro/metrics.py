"""Per-iteration construction of ``H = sigma*I - u u^T``.

``metric_1d`` makes the quadratic model agree with ``f(x) = 1/2||Ax - b||^2``
along one direction while majorizing it everywhere. ``metric_2d`` makes the
model agree with ``f`` on the plane spanned by the gradient and the last step.
"""

from dataclasses import dataclass

import numpy as np

from .errors import InvariantViolation
from .linops import operator_norm
from .prox import RankOneMetric

__all__ = [
    "EPS_SING",
    "EPS_DEG",
    "EPS_BUMP",
    "CLAIM_TOL",
    "DegenerateDirection",
    "CurvatureSnapshot2D",
    "metric_1d",
    "metric_2d",
]

EPS_SING = 1e-10  # relative to sigma: v counts as a dominant singular vector below this
EPS_DEG = 1e-12  # eta1 / relative eta3 below this means grad and d are parallel
EPS_BUMP = 1e-8  # relative sigma increase when H would be singular
CLAIM_TOL = 1e-9


class DegenerateDirection(ValueError):
    """A zero direction was passed where a nonzero one is required."""


def _bump_if_singular(sigma, u):
    if sigma - float(u @ u) <= EPS_SING * sigma:
        sigma = sigma * (1.0 + EPS_BUMP)
    return RankOneMetric(sigma, u)


def metric_1d(A, norm_a, v, Av=None):
    """IMRO-1D metric: ``sigma = norm_a**2`` and ``u`` chosen so that ``Hv = A^T A v``.

    Parameters
    ----------
    A : LinearOperator
    norm_a : float
        Upper estimate of ``||A||``.
    v : ndarray
        Matching direction, normalized internally.
    Av : ndarray, optional
        Precomputed ``A @ v`` for the *unnormalized* ``v``; saves one apply.

    Costs one adjoint, plus one apply if ``Av`` is not supplied. When the
    resulting ``H`` would be singular (``A v = 0``), sigma is inflated by
    ``EPS_BUMP`` so that ``H`` stays positive definite and still majorizes.
    """
    v = np.asarray(v, dtype=float)
    nv = float(np.linalg.norm(v))
    if nv == 0.0:
        raise DegenerateDirection("metric_1d needs a nonzero direction")
    v = v / nv
    Av = A.apply(v) if Av is None else np.asarray(Av, dtype=float) / nv
    sigma = float(norm_a) ** 2
    AtAv = A.adjoint(Av)
    gap = sigma - float(Av @ Av)
    if gap > EPS_SING * sigma:
        u = (sigma * v - AtAv) / np.sqrt(gap)
    else:
        u = np.zeros_like(v)
    return _bump_if_singular(sigma, u)


@dataclass(frozen=True)
class CurvatureSnapshot2D:
    """Quantities behind one IMRO-2D metric.

    ``S`` is the 2x2 Gram matrix of ``A grad`` and ``A d`` after both
    directions are normalized, ``eps`` their inner product, and
    ``eta1..eta3`` the coefficients of the quadratic in sigma.
    ``fallback`` names the repair used for a degenerate pair, else ``None``.
    """

    S: np.ndarray
    eps: float
    eta1: float
    eta2: float
    eta3: float
    disc: float
    sigma: float
    unorm2: float
    fallback: str | None = None

    def claim_violations(self, tol=CLAIM_TOL):
        """List failed validity conditions (empty when all hold)."""
        S = self.S
        scale = max(S[0, 0] + S[1, 1], 1e-300)
        out = []
        if S[0, 0] < -tol * scale or S[1, 1] < -tol * scale:
            out.append("S has a negative diagonal entry")
        if self.eta3 < -tol * scale**2:
            out.append(f"det(S) = {self.eta3:.3e} < 0")
        if self.eta1 < -tol:
            out.append(f"eta1 = {self.eta1:.3e} < 0")
        if self.eta2 > tol * scale:
            out.append(f"eta2 = {self.eta2:.3e} > 0")
        direct = self.eta2**2 - 4 * self.eta1 * self.eta3
        if direct < -tol * max(self.eta2**2, 1e-300):
            out.append(f"discriminant {direct:.3e} < 0")
        if self.fallback == "1d":
            return out
        s = self.sigma
        if s < S[0, 0] - tol * s or s < S[1, 1] - tol * s:
            out.append(f"sigma {s:.6e} below max(S11, S22) = {max(S[0, 0], S[1, 1]):.6e}")
        if s < self.unorm2 - tol * s:
            out.append(f"sigma {s:.6e} below ||u||^2 = {self.unorm2:.6e}")
        if self.fallback is None and self.eta1 > 0:
            predicted = np.sqrt(self.disc) / self.eta1
            if abs(self.unorm2 - predicted) > 1e-8 * s:
                out.append(f"||u||^2 = {self.unorm2:.12e} but sqrt(disc)/eta1 = {predicted:.12e}")
        return out


def metric_2d(A, grad, d, A_grad=None, A_d=None, norm_a=None, strict=True):
    """IMRO-2D metric matching ``A^T A`` on ``span{grad, d}``.

    Parameters
    ----------
    A : LinearOperator
    grad, d : ndarray
        Gradient and previous step; both nonzero.
    A_grad, A_d : ndarray, optional
        Precomputed images under ``A`` (unnormalized). Each one missing costs
        an apply. No adjoint is needed.
    norm_a : float, optional
        ``||A||`` estimate, only used by the parallel-direction fallback.
    strict : bool
        Raise :class:`InvariantViolation` if a validity claim fails.

    Returns
    -------
    metric : RankOneMetric
    snapshot : CurvatureSnapshot2D
    """
    grad = np.asarray(grad, dtype=float)
    d = np.asarray(d, dtype=float)
    ng = float(np.linalg.norm(grad))
    nd = float(np.linalg.norm(d))
    if ng == 0.0 or nd == 0.0:
        raise DegenerateDirection("metric_2d needs nonzero grad and d")
    A_grad = A.apply(grad) if A_grad is None else np.asarray(A_grad, dtype=float)
    A_d = A.apply(d) if A_d is None else np.asarray(A_d, dtype=float)
    g = grad / ng
    dn = d / nd
    ag = A_grad / ng
    ad = A_d / nd

    s11 = float(ag @ ag)
    s22 = float(ad @ ad)
    s12 = float(ag @ ad)
    S = np.array([[s11, s12], [s12, s22]])
    eps = float(np.clip(g @ dn, -1.0, 1.0))
    eta1 = 1.0 - eps * eps
    eta2 = -s11 - s22 + 2.0 * eps * s12
    eta3 = s11 * s22 - s12 * s12
    # sum-of-squares form of eta2^2 - 4 eta1 eta3; never negative in floating point
    disc = (eps * s11 + eps * s22 - 2.0 * s12) ** 2 + eta1 * (s11 - s22) ** 2
    scale = max(s11 + s22, 1e-300)

    if eta1 <= EPS_DEG:
        if norm_a is None:
            norm_a = operator_norm(A).value
        m1 = metric_1d(A, norm_a, grad, Av=A_grad)
        metric = RankOneMetric(m1.sigma * (1.0 + EPS_BUMP), m1.u)
        snap = CurvatureSnapshot2D(S, eps, eta1, eta2, eta3, disc, metric.sigma, metric.unorm2, "1d")
    else:
        root = np.sqrt(disc)
        sigma = (-eta2 + root) / (2.0 * eta1)
        r1 = np.sqrt(max(sigma - s11, 0.0))
        r2 = np.sqrt(max(sigma - s22, 0.0)) * (1.0 if eps * sigma - s12 >= 0 else -1.0)
        tau = (r1 - eps * r2) / eta1
        rho = (r2 - eps * r1) / eta1
        u = tau * g + rho * dn
        unorm2 = float(u @ u)
        fallback = None
        if eta3 <= EPS_DEG * scale**2 or sigma - unorm2 <= EPS_SING * sigma:
            sigma = sigma * (1.0 + EPS_BUMP)
            fallback = "bump"
        metric = RankOneMetric(sigma, u)
        snap = CurvatureSnapshot2D(S, eps, eta1, eta2, eta3, disc, sigma, unorm2, fallback)

    if strict:
        bad = snap.claim_violations()
        if bad:
            raise InvariantViolation("IMRO-2D validity: " + "; ".join(bad))
    return metric, snap
