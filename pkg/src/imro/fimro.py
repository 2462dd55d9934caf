"""Estimate-sequence acceleration of IMRO-1D.

Each step extrapolates ``y = alpha z + (1 - alpha) x``, builds an IMRO-1D
metric at ``y`` and takes the scaled prox from there. The scalars
``gamma``, ``lambda`` and the estimate-function minimum ``phi_bar`` are
carried along so the accelerated bounds can be checked on the run itself.
"""

import logging
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DimensionError, InvariantViolation
from .metrics import metric_1d
from .prox import RankOneMetric, prox_imro
from .solver import _difference_ok, subgradient_norm
from .trace import SolverTrace, Status, TraceRecord

__all__ = ["FimroState", "FimroStep", "extrapolation_weight", "lambda_bound", "fimro_step", "fimro"]

log = logging.getLogger(__name__)


def extrapolation_weight(sigma, gamma):
    """Positive root of ``sigma a^2 + gamma a - gamma = 0``, without cancellation."""
    return 2.0 * gamma / (gamma + math.sqrt(gamma * gamma + 4.0 * sigma * gamma))


def lambda_bound(k, sigma, gamma0):
    """Upper bound ``4 sigma / (2 sqrt(sigma) + k sqrt(gamma0))^2`` on ``lambda^k``."""
    return 4.0 * sigma / (2.0 * math.sqrt(sigma) + k * math.sqrt(gamma0)) ** 2


@dataclass
class FimroState:
    """Iterate ``x``, estimate center ``z`` and the scalar sequences.

    ``ax`` caches ``A x``; ``x_prev``/``ax_prev`` hold the previous iterate
    for the metric direction.
    """

    x: np.ndarray
    z: np.ndarray
    gamma: float
    lambda_seq: float
    phi_bar: float
    objective: float
    ax: np.ndarray
    x_prev: np.ndarray | None = None
    ax_prev: np.ndarray | None = None

    @classmethod
    def start(cls, problem, x0=None, gamma0=None):
        """``z = x0``, ``lambda = 1`` and ``phi_bar = F(x0)``; one apply."""
        n = problem.A.shape[1]
        x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
        if x.shape != (n,):
            raise DimensionError("x0", n, x.size)
        gamma0 = problem.lipschitz if gamma0 is None else float(gamma0)
        ax = problem.A.apply(x)
        r = ax - problem.b
        F = 0.5 * float(r @ r) + problem.lam * float(np.abs(x).sum())
        return cls(x, x.copy(), gamma0, 1.0, F, F, ax)


@dataclass
class FimroStep:
    """Diagnostics of one accelerated step."""

    alpha: float
    y: np.ndarray
    metric: RankOneMetric
    g_h: np.ndarray
    grad_x: np.ndarray = field(repr=False)


def fimro_step(state, problem, direction=None):
    """Advance one accelerated step.

    ``direction(state)`` may override the metric direction (default
    ``x^k - x^{k-1}``; none on the first step, giving ``u = 0``).
    Costs five operator calls: ``A y``, the gradient at ``y``, the metric
    curvature product, ``A x+`` and the gradient at ``x+`` used for the
    subgradient norm (``A v`` is recovered from stored products when the
    difference is numerically safe).

    Returns
    -------
    new_state : FimroState
    step : FimroStep
    """
    A, b, lam = problem.A, problem.b, problem.lam
    norm_a = problem.norm_a
    sigma_ref = norm_a**2
    gamma = state.gamma
    alpha = extrapolation_weight(sigma_ref, gamma)
    if not 0.0 < alpha < 1.0:
        raise InvariantViolation(f"extrapolation weight {alpha!r} outside (0, 1) for gamma={gamma!r}")
    gamma_new = sigma_ref * alpha * alpha

    y = alpha * state.z + (1.0 - alpha) * state.x
    ay = A.apply(y)
    gy = A.adjoint(ay - b)

    v = direction(state) if direction is not None else (None if state.x_prev is None else state.x - state.x_prev)
    if v is None or not np.any(v):
        metric = RankOneMetric.scaled_identity(sigma_ref, y.size)
    else:
        av = None
        if direction is None:
            diff = state.ax - state.ax_prev
            if _difference_ok(state.ax, state.ax_prev, diff, norm_a, state.x, state.x_prev):
                av = diff
        metric = metric_1d(A, norm_a, v, Av=av)

    x_new = prox_imro(metric, y - metric.solve(gy), lam).x
    ax_new = A.apply(x_new)
    r = ax_new - b
    F_new = 0.5 * float(r @ r) + lam * float(np.abs(x_new).sum())
    grad_new = A.adjoint(r)

    g_h = metric.apply(y - x_new)
    gg = float(g_h @ g_h)
    phi_bar = (
        (1.0 - alpha) * state.phi_bar
        + alpha * F_new
        + (alpha / (2.0 * metric.sigma) - alpha * alpha / (2.0 * gamma_new)) * gg
        + alpha * float(g_h @ (state.z - y))
    )
    z_new = state.z - (alpha / gamma_new) * g_h
    new = replace(
        state,
        x=x_new,
        z=z_new,
        gamma=gamma_new,
        lambda_seq=(1.0 - alpha) * state.lambda_seq,
        phi_bar=phi_bar,
        objective=F_new,
        ax=ax_new,
        x_prev=state.x,
        ax_prev=state.ax,
    )
    return new, FimroStep(alpha, y, metric, g_h, grad_new)


def fimro(problem, tol=1e-6, max_iters=10_000, max_ops=None, x0=None, gamma0=None, check_invariants=True):
    """Run the accelerated method; returns ``(x, trace)``.

    ``trace.meta`` gets ``lambda_seq`` and ``gamma_seq`` (one entry per
    record) for a-posteriori bound checks. Objective values need not
    decrease monotonically. With ``check_invariants`` every step verifies
    ``F(x^k) <= phi_bar^k`` and ``gamma0 lambda^k <= gamma^k``; failures go
    to ``trace.violations``.
    """
    A = problem.A
    base = A.counter.total
    t0 = time.perf_counter()
    state = FimroState.start(problem, x0, gamma0)
    g0 = A.adjoint(state.ax - problem.b)
    sigma = problem.lipschitz
    gamma_init = state.gamma
    if gamma_init < sigma * (1 - 1e-12):
        log.warning("gamma0 %.6g is below ||A||^2 %.6g; the accelerated bound does not apply", gamma_init, sigma)
    trace = SolverTrace(
        "fimro",
        meta={
            "x0": "zeros" if x0 is None else "given",
            "tol": tol,
            "gamma0": repr(float(gamma_init)),
            "sigma": repr(float(sigma)),
            "lam": repr(float(problem.lam)),
        },
    )
    lam_seq, gam_seq = [1.0], [gamma_init]

    def record(k, x, F, xi):
        res = float(np.linalg.norm(x - problem.x_star)) if problem.x_star is not None else None
        trace.append(TraceRecord(k, A.counter.total - base, F, xi, time.perf_counter() - t0, res))

    xi = subgradient_norm(problem, state.x, g0)
    record(0, state.x, state.objective, xi)
    k = 0
    while True:
        if xi <= tol:
            trace.status = Status.CONVERGED
            break
        if k >= max_iters:
            trace.status = Status.ITER_BUDGET
            break
        if max_ops is not None and A.counter.total - base + 5 > max_ops:
            trace.status = Status.OP_BUDGET
            break
        state, step = fimro_step(state, problem)
        k += 1
        xi = subgradient_norm(problem, state.x, step.grad_x)
        record(k, state.x, state.objective, xi)
        lam_seq.append(state.lambda_seq)
        gam_seq.append(state.gamma)
        if check_invariants:
            slack = 1e-9 * (1.0 + abs(state.phi_bar))
            if state.objective > state.phi_bar + slack:
                msg = f"iter {k}: F exceeds phi_bar by {state.objective - state.phi_bar:.3e}"
                trace.violations.append(msg)
                log.warning(msg)
            if gamma_init * state.lambda_seq > state.gamma * (1 + 1e-12):
                msg = f"iter {k}: gamma0*lambda exceeds gamma"
                trace.violations.append(msg)
                log.warning(msg)
    trace.meta["lambda_seq"] = lam_seq
    trace.meta["gamma_seq"] = gam_seq
    return state.x, trace
