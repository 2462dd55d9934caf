"""First-order comparison methods: ISTA, FISTA and normal-equations CG."""

import math
import time
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError
from .prox import shrink
from .solver import subgradient_norm
from .trace import SolverTrace, Status, TraceRecord

__all__ = ["ista_step", "ista", "FistaState", "fista_step", "fista", "linear_cg"]


def _start(problem, x0):
    n = problem.A.shape[1]
    if x0 is None:
        return np.zeros(n), "zeros"
    x = np.array(x0, dtype=float)
    if x.shape != (n,):
        raise DimensionError("x0", n, x.size)
    return x, "given"


def ista_step(problem, x, alpha=None):
    """One shrinkage of a gradient step; one apply and one adjoint."""
    alpha = 1.0 / problem.lipschitz if alpha is None else alpha
    g = problem.A.adjoint(problem.A.apply(x) - problem.b)
    return shrink(x - alpha * g, problem.lam * alpha)


class _Recorder:
    def __init__(self, problem, name, meta):
        self.problem = problem
        self.base = problem.A.counter.total
        self.trace = SolverTrace(name, meta=meta)
        self.t0 = time.perf_counter()

    @property
    def used(self):
        return self.problem.A.counter.total - self.base

    def __call__(self, k, x, F, xi):
        p = self.problem
        res = float(np.linalg.norm(x - p.x_star)) if p.x_star is not None else None
        self.trace.append(TraceRecord(k, self.used, F, xi, time.perf_counter() - self.t0, res))


def _stop(rec, k, F, xi, tol, target, max_iters, max_ops, per_iter):
    if xi <= tol or (target is not None and F <= target):
        return Status.CONVERGED
    if k >= max_iters:
        return Status.ITER_BUDGET
    if max_ops is not None and rec.used + per_iter > max_ops:
        return Status.OP_BUDGET
    return None


def ista(problem, tol=1e-6, max_iters=10_000, max_ops=None, alpha=None, x0=None, target_objective=None):
    """ISTA with fixed step ``alpha`` (default ``1/L``); two operator calls per iteration.

    ``F`` and the subgradient at ``x^k`` come for free from the gradient
    evaluation the next step needs anyway.
    """
    A, b, lam = problem.A, problem.b, problem.lam
    alpha = 1.0 / problem.lipschitz if alpha is None else float(alpha)
    x, desc = _start(problem, x0)
    rec = _Recorder(problem, "ista", {"x0": desc, "tol": tol, "alpha": repr(float(alpha)), "lam": repr(float(lam))})
    k = 0
    while True:
        r = A.apply(x) - b
        g = A.adjoint(r)
        F = 0.5 * float(r @ r) + lam * float(np.abs(x).sum())
        xi = subgradient_norm(problem, x, g)
        rec(k, x, F, xi)
        status = _stop(rec, k, F, xi, tol, target_objective, max_iters, max_ops, 2)
        if status is not None:
            rec.trace.status = status
            return x, rec.trace
        x = shrink(x - alpha * g, lam * alpha)
        k += 1


@dataclass
class FistaState:
    """FISTA iterate ``x``, extrapolated point ``y`` and momentum scalar ``t``."""

    x: np.ndarray
    y: np.ndarray
    t: float = 1.0

    @classmethod
    def start(cls, x0):
        x0 = np.asarray(x0, dtype=float)
        return cls(x0.copy(), x0.copy(), 1.0)


def fista_step(state, problem, alpha=None):
    """One FISTA update; one apply and one adjoint."""
    alpha = 1.0 / problem.lipschitz if alpha is None else alpha
    g = problem.A.adjoint(problem.A.apply(state.y) - problem.b)
    x_new = shrink(state.y - alpha * g, problem.lam * alpha)
    t_new = (1.0 + math.sqrt(1.0 + 4.0 * state.t * state.t)) / 2.0
    y_new = x_new + ((state.t - 1.0) / t_new) * (x_new - state.x)
    return FistaState(x_new, y_new, t_new)


def fista(
    problem,
    tol=1e-6,
    max_iters=10_000,
    max_ops=None,
    alpha=None,
    x0=None,
    target_objective=None,
    record=True,
):
    """FISTA at two operator calls per iteration.

    The gradient is affine, so with ``y+ = (1+c) x+ - c x`` the gradient at
    ``y+`` is the same combination of the gradients at ``x+`` and ``x``;
    only ``A x+`` and ``A^T (A x+ - b)`` are ever computed. Those also give the
    exact objective and subgradient at ``x+`` for the trace. Set
    ``record=False`` for long oracle runs; the trace then holds only the
    first and last records.
    """
    A, b, lam = problem.A, problem.b, problem.lam
    alpha = 1.0 / problem.lipschitz if alpha is None else float(alpha)
    x, desc = _start(problem, x0)
    rec = _Recorder(problem, "fista", {"x0": desc, "tol": tol, "alpha": repr(float(alpha)), "lam": repr(float(lam))})

    ax = A.apply(x)
    gx = A.adjoint(ax - b)
    y, gy, t = x, gx, 1.0
    k = 0
    while True:
        r = ax - b
        F = 0.5 * float(r @ r) + lam * float(np.abs(x).sum())
        xi = subgradient_norm(problem, x, gx)
        status = _stop(rec, k, F, xi, tol, target_objective, max_iters, max_ops, 2)
        if record or k == 0 or status is not None:
            rec(k, x, F, xi)
        if status is not None:
            rec.trace.status = status
            return x, rec.trace
        x_new = shrink(y - alpha * gy, lam * alpha)
        ax_new = A.apply(x_new)
        gx_new = A.adjoint(ax_new - b)
        t_new = (1.0 + math.sqrt(1.0 + 4.0 * t * t)) / 2.0
        c = (t - 1.0) / t_new
        y = (1 + c) * x_new - c * x
        gy = (1 + c) * gx_new - c * gx
        x, ax, gx, t = x_new, ax_new, gx_new, t_new
        k += 1


def linear_cg(A, b, x0=None, iters=20):
    """CG on ``A^T A x = A^T b``; returns ``[x^0, x^1, ...]``.

    Two operator calls per iteration plus one adjoint and one apply to set
    up. Stops early, returning the prefix, when the residual vanishes or a
    direction has zero curvature.
    """
    m, n = A.shape
    b = np.asarray(b, dtype=float)
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    r = A.adjoint(b - A.apply(x))
    p = r.copy()
    rr = float(r @ r)
    out = [x.copy()]
    scale = max(rr, 1e-300)
    for _ in range(iters):
        if rr <= 1e-30 * scale:
            break
        ap = A.apply(p)
        curv = float(ap @ ap)
        if curv <= 0.0:
            break
        a = rr / curv
        x = x + a * p
        r = r - a * A.adjoint(ap)
        rr_new = float(r @ r)
        p = r + (rr_new / rr) * p
        rr = rr_new
        out.append(x.copy())
    return out
