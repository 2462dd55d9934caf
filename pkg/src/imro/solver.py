"""IMRO main loop for ``min 1/2||Ax - b||^2 + lam ||x||_1``."""

import logging
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DimensionError, NonFiniteError
from .linops import LinearOperator, operator_norm
from .metrics import metric_1d, metric_2d
from .prox import RankOneMetric, prox_imro
from .trace import SolverTrace, Status, TraceRecord

__all__ = [
    "BpdnProblem",
    "SolverConfig",
    "IterationInfo",
    "objective",
    "subgradient_norm",
    "min_norm_subgradient",
    "solve",
    "imro1d",
    "imro2d",
]

log = logging.getLogger(__name__)

_EPS = np.finfo(float).eps
# relative cancellation error we tolerate when forming A d as a difference of stored products
_REUSE_RTOL = 1e-10


@dataclass
class BpdnProblem:
    """``min 1/2||Ax - b||^2 + lam ||x||_1``.

    ``x_star`` is a reference minimizer used only for residual reporting;
    ``x_hat`` is the generating signal when the instance is synthetic.
    ``norm_seed`` seeds the power iteration behind ``norm_a``.
    """

    A: LinearOperator
    b: np.ndarray
    lam: float
    x_star: np.ndarray | None = None
    x_hat: np.ndarray | None = None
    meta: dict = field(default_factory=dict)
    norm_seed: int = 0
    _norm: object = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.b = np.asarray(self.b, dtype=float)
        m, n = self.A.shape
        if self.b.shape != (m,):
            raise DimensionError("observation b", m, self.b.size)
        if not (np.isfinite(self.lam) and self.lam >= 0):
            raise ValueError(f"lam must be finite and nonnegative, got {self.lam!r}")
        self.lam = float(self.lam)
        for name in ("x_star", "x_hat"):
            v = getattr(self, name)
            if v is not None:
                v = np.asarray(v, dtype=float)
                if v.shape != (n,):
                    raise DimensionError(name, n, v.size)
                setattr(self, name, v)

    @property
    def shape(self):
        return self.A.shape

    def norm_estimate(self):
        """Cached power-iteration estimate of ``||A||``; its operator calls are setup cost."""
        if self._norm is None:
            est = operator_norm(self.A, max_iter=5000, seed=self.norm_seed)
            if not est.converged:
                log.warning("power iteration did not converge; inflating ||A|| estimate by 1e-3")
                est = type(est)(est.value * 1.001, False, est.iterations, est.rayleigh)
            self._norm = est
        return self._norm

    def set_norm(self, value):
        """Supply ``||A||`` (must not underestimate) and skip power iteration."""
        from .linops import NormEstimate

        self._norm = NormEstimate(float(value), True, 0, float(value) ** 2)

    @property
    def norm_a(self):
        return self.norm_estimate().value

    @property
    def lipschitz(self):
        return self.norm_a**2


@dataclass
class SolverConfig:
    """Settings for :func:`solve`.

    ``first_step`` picks the metric of iteration 0: ``"lipschitz"`` uses
    ``sigma = ||A||^2``; ``"rayleigh"`` uses ``sigma = ||A g||^2/||g||^2``, the
    exact minimizer of ``f`` along the gradient. ``None`` means lipschitz for
    imro1d and rayleigh for imro2d. ``direction`` optionally overrides the
    IMRO-1D matching direction; it is called as ``direction(x, x_prev)``.
    """

    variant: str = "imro2d"
    tol: float = 1e-6
    max_iters: int = 10_000
    max_ops: int | None = None
    prox_method: str = "sorted"
    check_invariants: bool = True
    target_objective: float | None = None
    first_step: str | None = None
    direction: Callable | None = None
    reuse_products: bool = True

    def __post_init__(self):
        if self.variant not in ("imro1d", "imro2d"):
            raise ValueError(f"unknown variant {self.variant!r}")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be positive")
        if self.max_ops is not None and self.max_ops < 2:
            raise ValueError("max_ops must allow the initial gradient (2 operator calls)")
        if self.prox_method not in ("sorted", "median"):
            raise ValueError(f"unknown prox method {self.prox_method!r}")
        if self.first_step not in (None, "lipschitz", "rayleigh"):
            raise ValueError(f"unknown first_step {self.first_step!r}")

    @property
    def first_step_rule(self):
        if self.first_step is not None:
            return self.first_step
        return "rayleigh" if self.variant == "imro2d" else "lipschitz"


@dataclass
class IterationInfo:
    """Everything one accepted step used; handed to the solve callback."""

    k: int
    x: np.ndarray
    x_new: np.ndarray
    grad: np.ndarray
    metric: RankOneMetric
    xc: np.ndarray
    objective: float
    objective_new: float
    snapshot: object = None
    mu: float = 0.0

    @property
    def scaled_gradient(self):
        return self.metric.apply(self.x - self.x_new)


def objective(problem, x):
    """``F(x)``; one apply."""
    r = problem.A.apply(x) - problem.b
    return 0.5 * float(r @ r) + problem.lam * float(np.abs(x).sum())


def min_norm_subgradient(x, grad_f, lam):
    """Smallest element of ``grad_f + lam * d||x||_1`` (componentwise)."""
    xi = grad_f + lam * np.sign(x)
    zero = x == 0
    gz = grad_f[zero]
    xi[zero] = np.sign(gz) * np.maximum(np.abs(gz) - lam, 0.0)
    return xi


def subgradient_norm(problem, x, grad_f):
    """Norm of the minimal subgradient of ``F`` at ``x``. No operator calls."""
    return float(np.linalg.norm(min_norm_subgradient(x, grad_f, problem.lam)))


def _difference_ok(ax, ax_prev, diff, norm_a, x, x_prev):
    if not np.isfinite(norm_a):
        return False
    err = 8 * _EPS * norm_a * (np.linalg.norm(x) + np.linalg.norm(x_prev))
    return err <= _REUSE_RTOL * np.linalg.norm(diff)


def solve(problem, config=None, x0=None, callback=None):
    """Run IMRO-1D or IMRO-2D.

    Iteration 0 is a prox-gradient step with ``u = 0``. Later iterations
    build the metric from the previous step ``d = x^k - x^{k-1}``, form
    ``xc = x^k - H^{-1} grad`` and take the scaled prox without line search.
    Stops when the minimal subgradient norm drops to ``config.tol``, the
    objective reaches ``config.target_objective``, or a budget binds.

    Returns
    -------
    x : ndarray
    trace : SolverTrace
        ``a_calls`` counts operator calls made by this solve only; the
        one-time ``||A||`` estimate is taken before counting starts.
    """
    cfg = config or SolverConfig()
    A, b, lam = problem.A, problem.b, problem.lam
    m, n = A.shape
    norm_a = problem.norm_a
    L = norm_a**2
    if x0 is None:
        x = np.zeros(n)
        x0_desc = "zeros"
    else:
        x = np.array(x0, dtype=float)
        if x.shape != (n,):
            raise DimensionError("x0", n, x.size)
        if not np.all(np.isfinite(x)):
            raise NonFiniteError("x0 has non-finite entries")
        x0_desc = "given"

    base = A.counter.total
    trace = SolverTrace(
        cfg.variant,
        meta={
            "x0": x0_desc,
            "tol": cfg.tol,
            "prox_method": cfg.prox_method,
            "norm_a": repr(float(norm_a)),
            "first_step": cfg.first_step_rule,
            "lam": repr(float(lam)),
        },
    )
    t0 = time.perf_counter()

    def record(k, xk, F, xi):
        res = float(np.linalg.norm(xk - problem.x_star)) if problem.x_star is not None else None
        trace.append(TraceRecord(k, A.counter.total - base, F, xi, time.perf_counter() - t0, res))

    Ax = A.apply(x)
    r = Ax - b
    g = A.adjoint(r)
    F = 0.5 * float(r @ r) + lam * float(np.abs(x).sum())
    xi = subgradient_norm(problem, x, g)
    record(0, x, F, xi)

    x_prev = ax_prev = None
    descent_violations = 0
    k = 0
    while True:
        if xi <= cfg.tol or (cfg.target_objective is not None and F <= cfg.target_objective):
            trace.status = Status.CONVERGED
            break
        if k >= cfg.max_iters:
            trace.status = Status.ITER_BUDGET
            break
        if cfg.max_ops is not None and A.counter.total - base + 4 > cfg.max_ops:
            trace.status = Status.OP_BUDGET
            break

        snap = None
        d = None if x_prev is None else x - x_prev
        if d is None or not np.any(d):
            if cfg.first_step_rule == "rayleigh":
                ag = A.apply(g)
                gg = float(g @ g)
                sig = float(ag @ ag) / gg if gg > 0 else 0.0
                metric = RankOneMetric.scaled_identity(sig if sig > 0 else L, n)
            else:
                metric = RankOneMetric.scaled_identity(L, n)
        else:
            ad = None
            if cfg.reuse_products:
                diff = Ax - ax_prev
                if _difference_ok(Ax, ax_prev, diff, norm_a, x, x_prev):
                    ad = diff
            if cfg.variant == "imro1d":
                if cfg.direction is not None:
                    v = np.asarray(cfg.direction(x, x_prev), dtype=float)
                    metric = metric_1d(A, norm_a, v) if np.any(v) else RankOneMetric.scaled_identity(L, n)
                else:
                    metric = metric_1d(A, norm_a, d, Av=ad)
            else:
                metric, snap = metric_2d(A, g, d, A_d=ad, norm_a=norm_a)

        xc = x - metric.solve(g)
        pr = prox_imro(metric, xc, lam, method=cfg.prox_method)
        x_new = pr.x
        Ax_new = A.apply(x_new)
        r_new = Ax_new - b
        g_new = A.adjoint(r_new)
        F_new = 0.5 * float(r_new @ r_new) + lam * float(np.abs(x_new).sum())

        if cfg.check_invariants:
            if F_new > F + 1e-12 * (1 + abs(F)):
                if cfg.variant == "imro1d":
                    msg = f"iter {k + 1}: descent violated, F rose by {F_new - F:.3e}"
                    trace.violations.append(msg)
                    log.warning(msg)
                else:
                    descent_violations += 1
                    log.info("iter %d: imro2d objective rose by %.3e", k + 1, F_new - F)
            if cfg.variant == "imro1d" or metric.unorm2 == 0.0 and metric.sigma >= L:
                gh = metric.apply(x - x_new)
                bound = F - float(gh @ gh) / (2 * metric.sigma) + 1e-10
                if F_new > bound:
                    msg = f"iter {k + 1}: sufficient decrease violated by {F_new - bound:.3e}"
                    trace.violations.append(msg)
                    log.warning(msg)

        if callback is not None:
            callback(IterationInfo(k, x, x_new, g, metric, xc, F, F_new, snap, pr.mu))

        x_prev, ax_prev = x, Ax
        x, Ax, g, F = x_new, Ax_new, g_new, F_new
        xi = subgradient_norm(problem, x, g)
        k += 1
        record(k, x, F, xi)

    trace.meta["descent_violations"] = descent_violations
    return x, trace


def imro1d(problem, **kwargs):
    x0 = kwargs.pop("x0", None)
    callback = kwargs.pop("callback", None)
    return solve(problem, SolverConfig(variant="imro1d", **kwargs), x0=x0, callback=callback)


def imro2d(problem, **kwargs):
    x0 = kwargs.pop("x0", None)
    callback = kwargs.pop("callback", None)
    return solve(problem, SolverConfig(variant="imro2d", **kwargs), x0=x0, callback=callback)
