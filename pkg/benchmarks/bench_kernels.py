"""Time the compiled kernels against the numpy fallback.

Usage: python benchmarks/bench_kernels.py [--sizes 256,4096,65536] [--repeat 5]
"""

import argparse
import timeit

import numpy as np

from imro import _backend


def prox_case(rng, n):
    u = rng.standard_normal(n)
    sigma = 1.5 * float(u @ u)
    return sigma, u, 3.0 * rng.standard_normal(n), 0.5


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", default="256,4096,65536")
    ap.add_argument("--conv-sizes", default="256,1024,4096")
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    backends = _backend.available()
    if "cython" not in backends:
        print("compiled kernels not built; timing the numpy fallback only")
    rng = np.random.default_rng(args.seed)
    print(f"{'kernel':<12} {'n':>7} " + " ".join(f"{b + ' ms':>12}" for b in backends) + "   speedup")

    def row(name, n, fn):
        times = []
        for b in backends:
            mod = _backend.get(b)
            times.append(min(timeit.repeat(lambda: fn(mod), number=1, repeat=args.repeat)) * 1e3)
        speed = f"{times[1] / times[0]:8.1f}x" if len(times) == 2 else ""
        print(f"{name:<12} {n:>7} " + " ".join(f"{t:12.3f}" for t in times) + "  " + speed)

    for n in map(int, args.sizes.split(",")):
        sigma, u, xc, thr = prox_case(rng, n)
        row("prox_sorted", n, lambda m: m.prox_sorted(sigma, u, xc, thr))
        row("prox_median", n, lambda m: m.prox_median(sigma, u, xc, thr))
    for n in map(int, args.conv_sizes.split(",")):
        kernel = np.zeros(n)
        kernel[:7] = rng.random(7)
        x = rng.standard_normal(n)
        row("circ_conv", n, lambda m: m.circ_conv(kernel, x))
        dense = rng.random(n)
        row("conv_dense", n, lambda m: m.circ_conv(dense, x))


if __name__ == "__main__":
    main()
