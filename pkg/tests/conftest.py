import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from imro import _backend
from imro.linops import DenseOperator
from imro.solver import BpdnProblem

settings.register_profile(
    "repo",
    deadline=None,
    derandomize=True,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("repo")

BACKENDS = _backend.available()


@pytest.fixture(params=BACKENDS)
def backend(request):
    return request.param


def gaussian_problem(m, n, lam, seed=0, k=None):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((m, n))
    x = np.zeros(n)
    k = max(1, n // 20) if k is None else k
    x[rng.choice(n, k, replace=False)] = rng.standard_normal(k)
    b = A @ x + 1e-3 * rng.standard_normal(m)
    return BpdnProblem(DenseOperator(A), b, lam)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is not None and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in mod.RESULTS:
            terminalreporter.write_line(line)
