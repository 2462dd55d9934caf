"""Seeded BPDN instance families and the manifest + raw payload file format.

A problem on disk is a JSON manifest (``*.json``) plus flat little-endian
float64 payload files next to it: ``A`` (dense row-major, dense operators
only), ``b``, ``x_hat`` and optionally ``x_oracle``. Implicit operators keep
only their parameters in the manifest.
"""

import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .baselines import fista
from .linops import ConvolutionOperator, DenseOperator, HeavisideOperator
from .solver import BpdnProblem

__all__ = [
    "FORMAT",
    "gen_gaussian",
    "gen_orthonormal",
    "gen_conditioned",
    "gen_heaviside",
    "gen_convolution",
    "generate",
    "FAMILIES",
    "compute_oracle",
    "save_problem",
    "load_problem",
]

FORMAT = "imro-problem/1"
_LE = np.dtype("<f8")


def _sparse_signal(rng, n, k, x_type, decades):
    if not 0 <= k <= n:
        raise ValueError(f"sparsity k={k} must lie in [0, n={n}]")
    x = np.zeros(n)
    support = np.sort(rng.choice(n, size=k, replace=False))
    if x_type == "gaussian":
        x[support] = rng.standard_normal(k)
    elif x_type == "dynamic":
        mags = 10.0 ** rng.uniform(0.0, decades, size=k)
        x[support] = mags * rng.choice((-1.0, 1.0), size=k)
    else:
        raise ValueError(f"unknown signal type {x_type!r}")
    return x


def _observe(rng, Ax, noise):
    m = Ax.size
    level = 1e-3 * np.linalg.norm(Ax) / np.sqrt(m) if noise is None else float(noise)
    if level < 0:
        raise ValueError("noise level must be nonnegative")
    return Ax + level * rng.standard_normal(m), level


def _check_dims(m, n):
    if m < 1 or n < 1:
        raise ValueError(f"dimensions must be positive, got m={m}, n={n}")


def _finish(gen, op, seed, params, rng, lam, k, x_type, decades, noise):
    n = op.shape[1]
    x_hat = _sparse_signal(rng, n, k, x_type, decades)
    b, level = _observe(rng, op.apply(x_hat), noise)
    op.counter.reset()
    meta = {"generator": gen, "seed": int(seed), "params": dict(params, k=k, x_type=x_type, decades=decades)}
    meta["params"]["noise"] = level
    return BpdnProblem(op, b, lam, x_hat=x_hat, meta=meta)


def gen_gaussian(m, n, k, lam, x_type="gaussian", decades=3.0, seed=0, noise=None, normalize_columns=False):
    """i.i.d. standard normal ``A`` with a ``k``-sparse ground truth.

    ``x_type="dynamic"`` draws magnitudes log-uniform over
    ``[1, 10**decades]`` with random signs. ``noise`` is the standard
    deviation of additive Gaussian noise; default ``1e-3 ||A x_hat|| / sqrt(m)``.
    """
    _check_dims(m, n)
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((m, n))
    if normalize_columns:
        A /= np.linalg.norm(A, axis=0)
    params = {"m": m, "n": n, "normalize_columns": bool(normalize_columns)}
    return _finish("gaussian", DenseOperator(A), seed, params, rng, lam, k, x_type, decades, noise)


def gen_orthonormal(m, n, k, lam, x_type="gaussian", decades=3.0, seed=0, noise=None):
    """``A`` with orthonormal rows (``A A^T = I``), from a QR factor of a Gaussian matrix."""
    _check_dims(m, n)
    if m > n:
        raise ValueError(f"orthonormal rows need m <= n, got m={m}, n={n}")
    rng = np.random.default_rng(seed)
    q, r = np.linalg.qr(rng.standard_normal((n, m)))
    q *= np.sign(np.diag(r))
    A = np.ascontiguousarray(q.T)
    return _finish("orthonormal", DenseOperator(A), seed, {"m": m, "n": n}, rng, lam, k, x_type, decades, noise)


def _orthonormal_columns(rng, rows, cols):
    q, r = np.linalg.qr(rng.standard_normal((rows, cols)))
    return q * np.sign(np.diag(r))


def gen_conditioned(m, n, cond, k, lam, x_type="gaussian", decades=3.0, seed=0, noise=None):
    """``A = U diag(s) V^T`` with ``min(m, n)`` singular values log-spaced so ``s_max / s_min = cond``.

    ``s_max = sqrt(m) + sqrt(n)``, the typical top singular value of a
    Gaussian matrix of the same shape.
    """
    _check_dims(m, n)
    if not cond >= 1:
        raise ValueError(f"condition number must be >= 1, got {cond}")
    rng = np.random.default_rng(seed)
    r = min(m, n)
    U = _orthonormal_columns(rng, m, r)
    V = _orthonormal_columns(rng, n, r)
    smax = np.sqrt(m) + np.sqrt(n)
    s = smax * np.logspace(0.0, -np.log10(cond), r)
    A = np.ascontiguousarray((U * s) @ V.T)
    params = {"m": m, "n": n, "cond": float(cond)}
    return _finish("conditioned", DenseOperator(A), seed, params, rng, lam, k, x_type, decades, noise)


def gen_heaviside(n, k, lam, x_type="gaussian", decades=3.0, seed=0, noise=None):
    """Cumulative-sum operator with a sparse jump signal (piecewise-constant observation)."""
    _check_dims(n, n)
    rng = np.random.default_rng(seed)
    op = HeavisideOperator(n)
    return _finish("heaviside", op, seed, {"m": n, "n": n}, rng, lam, k, x_type, decades, noise)


def gen_convolution(n, k, lam, width=3.0, x_type="gaussian", decades=3.0, seed=0, noise=None):
    """Circular blur by a unit-sum Gaussian kernel of standard deviation ``width`` samples."""
    _check_dims(n, n)
    if not width > 0:
        raise ValueError("kernel width must be positive")
    rng = np.random.default_rng(seed)
    offsets = np.minimum(np.arange(n), n - np.arange(n))
    kernel = np.exp(-0.5 * (offsets / width) ** 2)
    kernel[kernel < 1e-12] = 0.0
    kernel /= kernel.sum()
    op = ConvolutionOperator(kernel)
    params = {"m": n, "n": n, "width": float(width)}
    return _finish("convolution", op, seed, params, rng, lam, k, x_type, decades, noise)


FAMILIES = {
    "gaussian": gen_gaussian,
    "orthonormal": gen_orthonormal,
    "conditioned": gen_conditioned,
    "heaviside": gen_heaviside,
    "convolution": gen_convolution,
}


def generate(family, **kwargs):
    try:
        gen = FAMILIES[family]
    except KeyError:
        raise ValueError(f"unknown family {family!r}; choose from {sorted(FAMILIES)}") from None
    return gen(**kwargs)


def compute_oracle(problem, iters=100_000, tol=1e-12):
    """Reference minimizer from a long FISTA run; stored as ``problem.x_star``.

    Operator calls are undone from the counter so later solves start clean.
    """
    before = problem.A.counter.snapshot()
    x, trace = fista(problem, tol=tol, max_iters=iters, record=False)
    problem.A.counter.restore(before)
    problem.x_star = x
    problem.meta["oracle"] = {"method": "fista", "iterations": trace.iterations, "subgrad_norm": trace.final.subgrad_norm}
    return x


def _atomic_write(path, data):
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _operator_entry(op):
    if isinstance(op, DenseOperator):
        return {"kind": "dense"}
    if isinstance(op, HeavisideOperator):
        return {"kind": "heaviside"}
    if isinstance(op, ConvolutionOperator):
        return {"kind": "convolution", "kernel": [float(v) for v in op.kernel]}
    raise TypeError(f"cannot serialize operator {type(op).__name__}")


def save_problem(problem, path):
    """Write manifest ``path`` and its payloads; returns the manifest path.

    Identical problems serialize to byte-identical files.
    """
    path = Path(path)
    if path.suffix != ".json":
        path = path.with_suffix(".json")
    path.parent.mkdir(parents=True, exist_ok=True)
    stem = path.stem
    m, n = problem.shape
    arrays = {"b": problem.b}
    op = _operator_entry(problem.A)
    if op["kind"] == "dense":
        arrays["A"] = problem.A.to_dense()
    if problem.x_hat is not None:
        arrays["x_hat"] = problem.x_hat
    if problem.x_star is not None:
        arrays["x_oracle"] = problem.x_star
    payloads = {}
    for name, arr in arrays.items():
        fname = f"{stem}.{name}.f64"
        flat = np.ascontiguousarray(arr, dtype=_LE).ravel()
        _atomic_write(path.parent / fname, flat.tobytes())
        payloads[name] = {"path": fname, "length": int(flat.size)}
    meta = {k: v for k, v in problem.meta.items() if k not in ("generator", "seed", "params")}
    manifest = {
        "format": FORMAT,
        "m": m,
        "n": n,
        "lambda": problem.lam,
        "generator": problem.meta.get("generator"),
        "seed": problem.meta.get("seed"),
        "params": problem.meta.get("params", {}),
        "operator": op,
        "payloads": payloads,
        "meta": meta,
    }
    text = json.dumps(manifest, indent=2, sort_keys=True) + "\n"
    _atomic_write(path, text.encode())
    return path


def _read_payload(base, entry, expected):
    data = np.fromfile(base / entry["path"], dtype=_LE)
    if data.size != entry["length"] or data.size != expected:
        raise ValueError(f"payload {entry['path']} has {data.size} values, expected {expected}")
    return data.astype(float)


def load_problem(path):
    """Inverse of :func:`save_problem`; ``x_oracle`` becomes ``x_star``."""
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        man = json.load(fh)
    if man.get("format") != FORMAT:
        raise ValueError(f"{path}: not an {FORMAT} manifest")
    m, n = int(man["m"]), int(man["n"])
    base = path.parent
    pl = man["payloads"]
    kind = man["operator"]["kind"]
    if kind == "dense":
        op = DenseOperator(_read_payload(base, pl["A"], m * n).reshape(m, n))
    elif kind == "heaviside":
        op = HeavisideOperator(n)
    elif kind == "convolution":
        op = ConvolutionOperator(np.array(man["operator"]["kernel"], dtype=float))
    else:
        raise ValueError(f"{path}: unknown operator kind {kind!r}")
    if op.shape != (m, n):
        raise ValueError(f"{path}: operator shape {op.shape} disagrees with manifest ({m}, {n})")
    b = _read_payload(base, pl["b"], m)
    x_hat = _read_payload(base, pl["x_hat"], n) if "x_hat" in pl else None
    x_star = _read_payload(base, pl["x_oracle"], n) if "x_oracle" in pl else None
    meta = dict(man.get("meta", {}))
    meta.update(generator=man.get("generator"), seed=man.get("seed"), params=man.get("params", {}))
    return BpdnProblem(op, b, man["lambda"], x_star=x_star, x_hat=x_hat, meta=meta)
