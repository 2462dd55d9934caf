import json

import numpy as np
import pytest

from imro import problems
from imro.problems import (
    compute_oracle,
    gen_conditioned,
    gen_convolution,
    gen_gaussian,
    gen_heaviside,
    gen_orthonormal,
    load_problem,
    save_problem,
)
from imro.prox import RankOneMetric, prox_imro


def test_gaussian_shape_and_sparsity():
    p = gen_gaussian(25, 100, 7, 0.5, seed=1)
    assert p.shape == (25, 100)
    assert np.count_nonzero(p.x_hat) == 7
    assert p.meta["generator"] == "gaussian" and p.meta["seed"] == 1
    assert p.A.counter.total == 0


def test_large_table_shape_is_constructible():
    p = gen_gaussian(2500, 10000, 250, 0.5, seed=0)
    assert p.shape == (2500, 10000) and p.lam == 0.5


def test_zero_sparsity_is_pure_noise():
    p = gen_gaussian(30, 60, 0, 10.0, seed=2, noise=0.01)
    assert not np.any(p.x_hat)
    M = p.A.to_dense()
    # lam above ||A^T b||_inf makes zero the exact minimizer
    assert np.max(np.abs(M.T @ p.b)) < p.lam


def test_dynamic_range():
    p = gen_gaussian(20, 400, 200, 0.1, x_type="dynamic", decades=3, seed=3)
    mags = np.abs(p.x_hat[p.x_hat != 0])
    assert mags.min() >= 1.0 and mags.max() <= 1e3
    assert mags.max() / mags.min() > 100


def test_determinism():
    a = gen_gaussian(20, 50, 5, 0.1, seed=9)
    b = gen_gaussian(20, 50, 5, 0.1, seed=9)
    np.testing.assert_array_equal(a.A.to_dense(), b.A.to_dense())
    np.testing.assert_array_equal(a.b, b.b)
    c = gen_gaussian(20, 50, 5, 0.1, seed=10)
    assert not np.array_equal(a.b, c.b)


def test_errors():
    with pytest.raises(ValueError):
        gen_gaussian(10, 20, 21, 0.1)
    with pytest.raises(ValueError):
        gen_orthonormal(30, 20, 2, 0.1)
    with pytest.raises(ValueError):
        gen_conditioned(10, 20, 0.5, 2, 0.1)
    with pytest.raises(ValueError):
        problems.generate("sparco5")


def test_orthonormal_rows():
    p = gen_orthonormal(50, 200, 5, 0.1, seed=4)
    M = p.A.to_dense()
    np.testing.assert_allclose(M @ M.T, np.eye(50), atol=1e-10)
    np.testing.assert_allclose(np.linalg.norm(M, axis=1), 1.0, atol=1e-12)


def test_orthonormal_one_prox_step_solves():
    p = gen_orthonormal(40, 40, 5, 0.2, seed=5, noise=0.0)
    M = p.A.to_dense()
    # square orthonormal A: f(x) = 1/2||x - A^T b||^2 + const, so one prox step from anywhere is exact
    x0 = np.random.default_rng(0).standard_normal(40)
    xc = x0 - M.T @ (M @ x0 - p.b)
    x1 = prox_imro(RankOneMetric.scaled_identity(1.0, 40), xc, 0.2).x
    g = M.T @ (M @ x1 - p.b)
    assert np.all(np.abs(g[x1 == 0]) <= 0.2 + 1e-12)
    np.testing.assert_allclose(g[x1 != 0], -0.2 * np.sign(x1[x1 != 0]), atol=1e-12)


@pytest.mark.parametrize("cond", [1.0, 1e3])
def test_conditioned_spectrum(cond):
    p = gen_conditioned(60, 120, cond, 5, 0.1, seed=6)
    s = np.linalg.svd(p.A.to_dense(), compute_uv=False)
    assert s[0] / s[-1] == pytest.approx(cond, rel=0.01)


def test_conditioned_tall():
    p = gen_conditioned(40, 30, 50, 3, 0.0, seed=1)
    s = np.linalg.svd(p.A.to_dense(), compute_uv=False)
    assert s.size == 30 and s[0] / s[-1] == pytest.approx(50, rel=1e-6)


def test_implicit_operators():
    h = gen_heaviside(64, 4, 0.1, seed=1)
    np.testing.assert_allclose(h.A.to_dense(), np.tril(np.ones((64, 64))))
    c = gen_convolution(64, 4, 0.1, width=2.0, seed=1)
    assert c.A.kernel.sum() == pytest.approx(1.0)


def test_metadata_complete():
    p = gen_conditioned(20, 40, 10, 3, 0.25, x_type="dynamic", seed=8)
    params = p.meta["params"]
    for key in ("m", "n", "cond", "k", "x_type", "decades", "noise"):
        assert key in params
    assert p.lam == 0.25


def test_roundtrip_dense_with_oracle(tmp_path):
    p = gen_gaussian(20, 50, 4, 0.1, seed=11)
    compute_oracle(p, iters=20_000)
    path = save_problem(p, tmp_path / "inst")
    assert path.suffix == ".json"
    q = load_problem(path)
    np.testing.assert_array_equal(q.A.to_dense(), p.A.to_dense())
    np.testing.assert_array_equal(q.b, p.b)
    np.testing.assert_array_equal(q.x_hat, p.x_hat)
    np.testing.assert_array_equal(q.x_star, p.x_star)
    assert q.lam == p.lam and q.meta["params"] == p.meta["params"]


def test_payload_layout(tmp_path):
    p = gen_gaussian(3, 4, 1, 0.1, seed=0)
    path = save_problem(p, tmp_path / "tiny.json")
    man = json.loads(path.read_text())
    raw = (tmp_path / man["payloads"]["A"]["path"]).read_bytes()
    assert len(raw) == 12 * 8
    np.testing.assert_array_equal(np.frombuffer(raw, dtype="<f8").reshape(3, 4), p.A.to_dense())


@pytest.mark.parametrize("make", [lambda: gen_heaviside(32, 3, 0.1, seed=2), lambda: gen_convolution(32, 3, 0.1, seed=2)])
def test_roundtrip_implicit(tmp_path, make):
    p = make()
    q = load_problem(save_problem(p, tmp_path / "imp.json"))
    assert "A" not in json.loads((tmp_path / "imp.json").read_text())["payloads"]
    np.testing.assert_array_equal(q.A.to_dense(), p.A.to_dense())


def test_serialization_byte_identical(tmp_path):
    for d in ("a", "b"):
        save_problem(gen_gaussian(10, 30, 3, 0.1, seed=4), tmp_path / d / "p.json")
    for name in ("p.json", "p.A.f64", "p.b.f64", "p.x_hat.f64"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_load_rejects_truncated_payload(tmp_path):
    path = save_problem(gen_gaussian(5, 8, 1, 0.1), tmp_path / "t.json")
    (tmp_path / "t.b.f64").write_bytes(b"\0" * 8)
    with pytest.raises(ValueError):
        load_problem(path)


def test_oracle_leaves_counter_untouched():
    p = gen_gaussian(10, 30, 2, 0.1, seed=3)
    p.A.apply(np.zeros(30))
    compute_oracle(p, iters=500)
    assert p.A.counter.snapshot() == (1, 0)
