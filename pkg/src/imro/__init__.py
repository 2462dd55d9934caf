"""Identity-minus-rank-one proximal quasi-Newton solvers for l1-regularized least squares."""

from ._backend import kernels as _kernels
from .baselines import fista, ista, linear_cg
from .errors import DimensionError, InvariantViolation, NonFiniteError
from .fimro import fimro
from .linops import (
    ConvolutionOperator,
    DenseOperator,
    HeavisideOperator,
    IdentityOperator,
    LinearOperator,
    convolution_operator,
    heaviside_operator,
    operator_norm,
)
from .metrics import metric_1d, metric_2d
from .problems import load_problem, save_problem
from .prox import RankOneMetric, prox_imro, shrink
from .solver import BpdnProblem, SolverConfig, objective, solve, subgradient_norm
from .trace import SolverTrace, Status, read_trace, write_trace

__version__ = "0.1.0"
KERNEL_BACKEND = _kernels.NAME

__all__ = [
    "BpdnProblem",
    "ConvolutionOperator",
    "DenseOperator",
    "DimensionError",
    "HeavisideOperator",
    "IdentityOperator",
    "InvariantViolation",
    "KERNEL_BACKEND",
    "LinearOperator",
    "NonFiniteError",
    "RankOneMetric",
    "SolverConfig",
    "SolverTrace",
    "Status",
    "convolution_operator",
    "fimro",
    "fista",
    "heaviside_operator",
    "ista",
    "linear_cg",
    "load_problem",
    "metric_1d",
    "metric_2d",
    "objective",
    "operator_norm",
    "prox_imro",
    "read_trace",
    "save_problem",
    "shrink",
    "solve",
    "subgradient_norm",
    "write_trace",
]
