import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import prox_by_ista, random_metric

from imro.errors import DimensionError, NonFiniteError
from imro.prox import (
    RankOneMetric,
    breakpoints,
    kkt_residual,
    model_objective,
    multiplier_lhs,
    prox_imro,
    shrink,
)

METHODS = ["sorted", "median"]


def test_shrink_examples():
    np.testing.assert_array_equal(shrink(np.array([2.0, 0.5, -3.0]), 1.0), [1.0, 0.0, -2.0])
    y = np.array([0.3, -7.0, 0.0])
    np.testing.assert_array_equal(shrink(y, 0.0), y)
    np.testing.assert_array_equal(shrink(np.array([-1.0, 1.0]), 1.0), [0.0, 0.0])


def test_shrink_rejects_negative_threshold():
    with pytest.raises(ValueError):
        shrink(np.ones(2), -1.0)


def test_metric_rejects_indefinite():
    with pytest.raises(ValueError):
        RankOneMetric(1.0, np.array([1.0]))
    with pytest.raises(ValueError):
        RankOneMetric(0.5, np.array([0.6, 0.5]))
    with pytest.raises(NonFiniteError):
        RankOneMetric(np.inf, np.zeros(2))


@given(st.integers(0, 10_000))
def test_metric_norm_nonnegative(seed):
    rng = np.random.default_rng(seed)
    sigma, u = random_metric(rng, 8)
    H = RankOneMetric(sigma, u)
    for x in rng.standard_normal((20, 8)):
        assert H.quad(x) >= -1e-12 * sigma * (x @ x)


def test_metric_inverse_formula():
    rng = np.random.default_rng(0)
    sigma, u = random_metric(rng, 6)
    H = RankOneMetric(sigma, u)
    g = rng.standard_normal(6)
    np.testing.assert_allclose(H.solve(g), np.linalg.solve(H.dense(), g), rtol=1e-9)
    np.testing.assert_allclose(H.apply(g), H.dense() @ g, rtol=1e-12)


@pytest.mark.parametrize("method", METHODS)
def test_zero_u_reduces_to_shrink(method, backend):
    H = RankOneMetric.scaled_identity(1.0, 2)
    r = prox_imro(H, np.array([2.0, -0.5]), 1.0, method=method, backend=backend)
    np.testing.assert_array_equal(r.x, [1.0, 0.0])
    assert r.mu == 0.0


@pytest.mark.parametrize("method", METHODS)
def test_scalar_case(method, backend):
    # H = 2 - 1 = 1, so the prox is plain soft-thresholding of 3 by 1
    r = prox_imro(RankOneMetric(2.0, np.array([1.0])), np.array([3.0]), 1.0, method=method, backend=backend)
    assert r.x[0] == pytest.approx(2.0, abs=1e-14)


@pytest.mark.parametrize("method", METHODS)
def test_five_dim_against_model_ista(method, backend):
    rng = np.random.default_rng(42)
    sigma, u = random_metric(rng, 5, gap=0.2)
    xc = 2.0 * rng.standard_normal(5)
    H = RankOneMetric(sigma, u)
    r = prox_imro(H, xc, 0.3, method=method, backend=backend)
    np.testing.assert_allclose(r.x, prox_by_ista(sigma, u, xc, 0.3), atol=1e-8)


def test_lambda_zero_returns_center(backend):
    rng = np.random.default_rng(1)
    sigma, u = random_metric(rng, 7)
    xc = rng.standard_normal(7)
    for method in METHODS:
        r = prox_imro(RankOneMetric(sigma, u), xc, 0.0, method=method, backend=backend)
        np.testing.assert_allclose(r.x, xc, atol=1e-12)


def test_input_validation():
    H = RankOneMetric(2.0, np.array([1.0, 0.0]))
    with pytest.raises(DimensionError):
        prox_imro(H, np.ones(3), 1.0)
    with pytest.raises(NonFiniteError):
        prox_imro(H, np.array([np.nan, 0.0]), 1.0)
    with pytest.raises(ValueError):
        prox_imro(H, np.ones(2), -1.0)
    with pytest.raises(ValueError):
        prox_imro(H, np.ones(2), 1.0, method="bisect")


def test_breakpoint_values_and_order():
    H = RankOneMetric(4.0, np.array([1.0, -1.0, 0.0]))
    xc = np.array([0.5, 0.25, 9.0])
    bps = breakpoints(H, xc, 2.0)
    assert len(bps) == 4  # the u_i = 0 coordinate has none
    values = [b.value for b in bps]
    assert values == sorted(values)
    thr = 0.5
    for b in bps:
        i = b.coordinate
        sign = 1.0 if b.signed_index > 0 else -1.0
        assert b.value == pytest.approx((sign * thr - xc[i]) / H.u[i])


@given(st.integers(0, 2**31), st.integers(2, 40), st.floats(1e-3, 10.0))
@settings(max_examples=60)
def test_lhs_nonincreasing_through_breakpoints(seed, n, lam):
    rng = np.random.default_rng(seed)
    sigma, u = random_metric(rng, n)
    H = RankOneMetric(sigma, u)
    xc = 3 * rng.standard_normal(n)
    values = [b.value for b in breakpoints(H, xc, lam)]
    lhs = [multiplier_lhs(H, xc, lam, v) for v in values]
    scale = sigma * (1 + np.max(np.abs(values)))
    assert all(b <= a + 1e-12 * scale for a, b in zip(lhs, lhs[1:]))


@given(st.integers(0, 2**31), st.integers(1, 60), st.floats(1e-3, 10.0), st.sampled_from(METHODS))
@settings(max_examples=100)
def test_kkt_and_multiplier_consistency(seed, n, lam, method):
    rng = np.random.default_rng(seed)
    sigma, u = random_metric(rng, n, zero_frac=0.2)
    H = RankOneMetric(sigma, u)
    xc = 3 * rng.standard_normal(n)
    r = prox_imro(H, xc, lam, method=method)
    res, need = kkt_residual(H, xc, lam, r.x)
    assert res <= 1e-8 * (sigma * np.linalg.norm(xc) + lam)
    assert need <= 1 + 1e-9
    assert abs(u @ (r.x - xc) - r.mu * sigma) <= 1e-9 * sigma * (1 + abs(r.mu))


@given(st.integers(0, 2**31), st.integers(1, 30), st.floats(1e-3, 10.0))
@settings(max_examples=40)
def test_perturbations_do_not_improve_model(seed, n, lam):
    rng = np.random.default_rng(seed)
    sigma, u = random_metric(rng, n)
    H = RankOneMetric(sigma, u)
    xc = 3 * rng.standard_normal(n)
    x = prox_imro(H, xc, lam).x
    base = model_objective(H, xc, lam, x)
    for d in rng.standard_normal((50, n)):
        for t in (1e-3, 1e-2):
            assert model_objective(H, xc, lam, x + t * d) >= base - 1e-12 * (1 + abs(base))


def test_tiny_u_entries_push_breakpoints_far():
    # u_i around 1e-28 puts breakpoints near 1e27; the sweep must not lose the root
    rng = np.random.default_rng(7)
    u = rng.standard_normal(40)
    u[::3] *= 1e-28
    u[1::5] = 0.0
    sigma = 1.3 * float(u @ u)
    xc = rng.standard_normal(40)
    H = RankOneMetric(sigma, u)
    for method in METHODS:
        r = prox_imro(H, xc, 0.1, method=method)
        assert kkt_residual(H, xc, 0.1, r.x)[0] <= 1e-10


@given(st.integers(0, 2**31), st.integers(1, 80))
@settings(max_examples=60)
def test_backends_agree(seed, n):
    from imro import _backend

    if len(_backend.available()) < 2:
        pytest.skip("compiled kernels not built")
    rng = np.random.default_rng(seed)
    sigma, u = random_metric(rng, n, zero_frac=0.1)
    xc = rng.standard_normal(n)
    H = RankOneMetric(sigma, u)
    for method in METHODS:
        a = prox_imro(H, xc, 0.4, method=method, backend="cython").x
        b = prox_imro(H, xc, 0.4, method=method, backend="python").x
        np.testing.assert_allclose(a, b, atol=1e-10)


def test_median_work_linear(backend):
    rng = np.random.default_rng(0)
    sizes = [2**p for p in range(8, 15)]
    work = []
    for n in sizes:
        sigma, u = random_metric(rng, n, gap=0.3)
        r = prox_imro(RankOneMetric(sigma, u), 3 * rng.standard_normal(n), 0.5, method="median", backend=backend)
        work.append(r.work)
    slope = np.polyfit(np.log(sizes), np.log(work), 1)[0]
    assert 0.8 <= slope <= 1.2
    assert max(w / n for w, n in zip(work, sizes)) <= 60
