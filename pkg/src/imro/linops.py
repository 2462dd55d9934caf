"""Matrix-free linear operators with adjoints and exact call counting."""

import threading
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError
from . import _backend

__all__ = [
    "CallCounter",
    "LinearOperator",
    "DenseOperator",
    "IdentityOperator",
    "HeavisideOperator",
    "ConvolutionOperator",
    "NormEstimate",
    "operator_norm",
    "heaviside_operator",
    "convolution_operator",
    "check_adjoint",
]


class CallCounter:
    """Lock-guarded tally of forward and adjoint applications."""

    def __init__(self):
        self._lock = threading.Lock()
        self._applies = 0
        self._adjoints = 0

    def _bump(self, forward):
        with self._lock:
            if forward:
                self._applies += 1
            else:
                self._adjoints += 1

    @property
    def applies(self):
        return self._applies

    @property
    def adjoints(self):
        return self._adjoints

    @property
    def total(self):
        with self._lock:
            return self._applies + self._adjoints

    def snapshot(self):
        with self._lock:
            return self._applies, self._adjoints

    def reset(self):
        with self._lock:
            self._applies = 0
            self._adjoints = 0

    def restore(self, snapshot):
        """Set the tallies back to a value returned by :meth:`snapshot`."""
        with self._lock:
            self._applies, self._adjoints = snapshot

    def __repr__(self):
        return f"CallCounter(applies={self._applies}, adjoints={self._adjoints})"


class LinearOperator:
    """Base class for a real linear map ``A: R^n -> R^m``.

    Subclasses implement ``_matvec`` and ``_rmatvec``. The public ``apply`` and
    ``adjoint`` methods validate shapes and bump the call counter; they never
    modify their input.
    """

    def __init__(self, shape):
        m, n = (int(s) for s in shape)
        if m < 1 or n < 1:
            raise ValueError(f"operator shape must be positive, got {shape}")
        self.shape = (m, n)
        self.counter = CallCounter()

    def _matvec(self, x):
        raise NotImplementedError

    def _rmatvec(self, y):
        raise NotImplementedError

    def apply(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape != (self.shape[1],):
            raise DimensionError("apply", self.shape[1], x.shape[0] if x.ndim == 1 else x.shape)
        self.counter._bump(True)
        return self._matvec(x)

    def adjoint(self, y):
        y = np.asarray(y, dtype=float)
        if y.shape != (self.shape[0],):
            raise DimensionError("adjoint", self.shape[0], y.shape[0] if y.ndim == 1 else y.shape)
        self.counter._bump(False)
        return self._rmatvec(y)

    __call__ = apply

    @property
    def calls(self):
        return self.counter.total

    def to_dense(self):
        """Materialize the matrix column by column (uncounted; for tests and oracles)."""
        m, n = self.shape
        out = np.empty((m, n))
        e = np.zeros(n)
        for j in range(n):
            e[j] = 1.0
            out[:, j] = self._matvec(e)
            e[j] = 0.0
        return out

    def __repr__(self):
        return f"{type(self).__name__}(shape={self.shape})"


class DenseOperator(LinearOperator):
    def __init__(self, matrix):
        matrix = np.ascontiguousarray(matrix, dtype=float)
        if matrix.ndim != 2:
            raise ValueError("DenseOperator needs a 2-D array")
        super().__init__(matrix.shape)
        self.matrix = matrix
        self.matrix.setflags(write=False)

    def _matvec(self, x):
        return self.matrix @ x

    def _rmatvec(self, y):
        return self.matrix.T @ y

    def to_dense(self):
        return np.array(self.matrix)


class IdentityOperator(LinearOperator):
    def __init__(self, n):
        super().__init__((n, n))

    def _matvec(self, x):
        return x.copy()

    def _rmatvec(self, y):
        return y.copy()


class HeavisideOperator(LinearOperator):
    """Lower-triangular all-ones matrix: a running sum. Adjoint is the reverse running sum."""

    def __init__(self, n):
        super().__init__((n, n))

    def _matvec(self, x):
        return np.cumsum(x)

    def _rmatvec(self, y):
        return np.cumsum(y[::-1])[::-1]


class ConvolutionOperator(LinearOperator):
    """Circular convolution with a fixed kernel, evaluated directly in O(n^2)."""

    def __init__(self, kernel):
        kernel = np.ascontiguousarray(kernel, dtype=float)
        if kernel.ndim != 1 or kernel.size < 1:
            raise ValueError("kernel must be a non-empty 1-D array")
        n = kernel.size
        super().__init__((n, n))
        self.kernel = kernel
        self.kernel.setflags(write=False)

    def _matvec(self, x):
        return _backend.kernels.circ_conv(self.kernel, x)

    def _rmatvec(self, y):
        return _backend.kernels.circ_corr(self.kernel, y)


def heaviside_operator(n):
    return HeavisideOperator(n)


def convolution_operator(kernel):
    return ConvolutionOperator(kernel)


@dataclass(frozen=True)
class NormEstimate:
    """Spectral-norm estimate from power iteration.

    ``value`` is already inflated by ``1 + 10*tol`` when ``converged`` is true.
    """

    value: float
    converged: bool
    iterations: int
    rayleigh: float

    def __float__(self):
        return self.value


def operator_norm(op, tol=1e-8, max_iter=500, seed=0):
    """Estimate ``||A||`` by power iteration on ``A^T A``.

    Each iteration costs one apply and one adjoint. Iteration stops once an
    Aitken-style extrapolation of the remaining error in the Rayleigh
    quotient falls below ``tol``; the power method converges to ``||A||^2``
    from below, so the plain step size underestimates the error whenever the
    top two singular values are close.

    Returns
    -------
    NormEstimate
        ``value`` is ``sqrt(rayleigh) * (1 + 10*tol)`` on convergence, or the
        raw best estimate with ``converged=False`` when ``max_iter`` runs out.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    rng = np.random.default_rng(seed)
    q = rng.standard_normal(op.shape[1])
    q /= np.linalg.norm(q)
    theta_prev = None
    step_prev = None
    theta = 0.0
    for it in range(1, max_iter + 1):
        w = op.apply(q)
        theta = float(w @ w)
        z = op.adjoint(w)
        nz = np.linalg.norm(z)
        if nz == 0.0:
            # q lies in the null space; A is zero along every direction tried
            return NormEstimate(0.0, True, it, 0.0)
        q = z / nz
        if theta_prev is not None:
            step = theta - theta_prev
            if abs(step) <= 4 * np.finfo(float).eps * theta:
                return NormEstimate(np.sqrt(theta) * (1 + 10 * tol), True, it, theta)
            if step_prev is not None and step_prev > 0:
                ratio = step / step_prev
                if 0 <= ratio < 1:
                    remaining = step * ratio / (1 - ratio)
                    if remaining <= tol * theta and step <= tol * theta:
                        return NormEstimate(np.sqrt(theta) * (1 + 10 * tol), True, it, theta)
            step_prev = step
        theta_prev = theta
    return NormEstimate(float(np.sqrt(theta)), False, max_iter, theta)


def check_adjoint(op, trials=100, seed=0):
    """Largest scaled violation of <Ax, y> = <x, A^T y> over random pairs (uncounted)."""
    rng = np.random.default_rng(seed)
    m, n = op.shape
    worst = 0.0
    for _ in range(trials):
        x = rng.standard_normal(n)
        y = rng.standard_normal(m)
        ax = op._matvec(x)
        aty = op._rmatvec(y)
        scale = np.linalg.norm(ax) * np.linalg.norm(y) + 1.0
        worst = max(worst, abs(ax @ y - x @ aty) / scale)
    return worst
