"""Command-line front end: ``gen``, ``solve``, ``bench`` and ``check``.

Exit codes: 0 success, 2 usage error, 3 runtime failure.
"""

import argparse
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import problems
from .baselines import fista, ista
from .fimro import fimro
from .solver import SolverConfig, solve
from .trace import Status, write_trace

log = logging.getLogger("imro")

EXIT_OK, EXIT_USAGE, EXIT_FAIL = 0, 2, 3
SOLVERS = ("imro1d", "imro2d", "fimro", "ista", "fista")


class UsageError(Exception):
    pass


def run_solver(name, problem, tol=1e-6, max_iters=10_000, max_ops=None, prox_method="sorted", target=None):
    """Dispatch to one solver by name; returns ``(x, trace)``."""
    if name in ("imro1d", "imro2d"):
        cfg = SolverConfig(
            variant=name,
            tol=tol,
            max_iters=max_iters,
            max_ops=max_ops,
            prox_method=prox_method,
            target_objective=target,
        )
        return solve(problem, cfg)
    if name == "fimro":
        if target is not None:
            raise UsageError("fimro does not support objective-matching stops")
        return fimro(problem, tol=tol, max_iters=max_iters, max_ops=max_ops)
    if name == "ista":
        return ista(problem, tol=tol, max_iters=max_iters, max_ops=max_ops, target_objective=target)
    if name == "fista":
        return fista(problem, tol=tol, max_iters=max_iters, max_ops=max_ops, target_objective=target)
    raise UsageError(f"unknown solver {name!r}")


def _load(path, seed):
    problem = problems.load_problem(path)
    problem.norm_seed = seed
    return problem


def cmd_gen(args):
    if args.family in ("gaussian", "orthonormal", "conditioned") and args.m is None:
        raise UsageError(f"--m is required for family {args.family}")
    if args.family == "conditioned" and args.cond is None:
        raise UsageError("--cond is required for family conditioned")
    kw = dict(k=args.k, lam=args.lam, x_type=args.x_type, decades=args.decades, seed=args.seed, noise=args.noise)
    if args.family in ("gaussian", "orthonormal", "conditioned"):
        kw.update(m=args.m, n=args.n)
    else:
        kw.update(n=args.n)
    if args.family == "gaussian":
        kw["normalize_columns"] = args.normalize_columns
    if args.family == "conditioned":
        kw["cond"] = args.cond
    if args.family == "convolution":
        kw["width"] = args.width
    try:
        problem = problems.generate(args.family, **kw)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if args.oracle:
        problems.compute_oracle(problem, iters=args.oracle_iters)
    out = args.out or Path(f"{args.family}-{problem.shape[0]}x{problem.shape[1]}-s{args.seed}.json")
    path = problems.save_problem(problem, out)
    print(path)
    return EXIT_OK


def cmd_solve(args):
    problem = _load(args.manifest, args.seed)
    x, trace = run_solver(
        args.solver,
        problem,
        tol=args.tol,
        max_iters=args.max_iters,
        max_ops=args.max_ops,
        prox_method=args.prox_method,
        target=args.target_objective,
    )
    trace_path = args.trace or Path(args.manifest).with_suffix(f".{args.solver}.trace.csv")
    write_trace(trace, trace_path, timing=not args.no_timing)
    for v in trace.violations:
        log.warning("%s", v)
    print(trace.summary())
    return EXIT_OK


def _bench_row(instance, name, trace=None, x=None, problem=None, error=None):
    row = {"instance": instance, "solver": name}
    if trace is None:
        row.update(status="DNC", iters="-", a_calls="DNC", final_F="-", err="-", note=error or "")
        return row
    done = trace.status is Status.CONVERGED
    row.update(
        status=trace.status.value,
        iters=trace.iterations,
        a_calls=trace.a_calls if done else "DNC",
        final_F=f"{trace.final.objective:.10g}",
        err=f"{np.linalg.norm(x - problem.x_star):.2e}" if problem.x_star is not None else "-",
        note="",
    )
    return row


def _bench_one(manifest, name, seed, tol, target, max_iters, prox_method):
    label = Path(manifest).stem
    try:
        problem = _load(manifest, seed)
        x, trace = run_solver(name, problem, tol=tol, max_iters=max_iters, prox_method=prox_method, target=target)
        return _bench_row(label, name, trace, x, problem), trace
    except Exception as exc:  # a failing solver is a DNC cell, not a failed benchmark
        log.warning("%s on %s failed: %s", name, label, exc)
        return _bench_row(label, name, error=f"{type(exc).__name__}: {exc}"), None


def bench(manifests, solvers, seed=0, tol=1e-6, dnc_factor=5, max_iters=None, prox_method="sorted", jobs=1):
    """Objective-matching comparison; returns ``(rows, traces)``.

    IMRO-2D runs first on each instance to ``tol``; its final objective is
    the target every other solver must reach within ``dnc_factor`` times
    the reference iteration count (or ``max_iters`` when given).
    """
    rows, traces = [], {}
    pending = []
    for manifest in manifests:
        ref_row, ref = _bench_one(manifest, "imro2d", seed, tol, None, max_iters or 100_000, prox_method)
        rows.append(ref_row)
        traces[(ref_row["instance"], "imro2d")] = ref
        if ref is None or ref.status is not Status.CONVERGED:
            for name in solvers:
                if name != "imro2d":
                    rows.append(_bench_row(ref_row["instance"], name, error="no reference objective"))
            continue
        target = ref.final.objective
        budget = max_iters or max(dnc_factor * ref.iterations, 1)
        for name in solvers:
            if name == "fimro":
                # not monotone, so it stops on its own subgradient test instead of the target
                pending.append((manifest, name, seed, tol, None, budget, prox_method))
            elif name != "imro2d":
                pending.append((manifest, name, seed, tol, target, budget, prox_method))
    with ThreadPoolExecutor(max_workers=max(jobs, 1)) as pool:
        results = list(pool.map(lambda a: _bench_one(*a), pending))
    for (row, trace) in results:
        rows.append(row)
        traces[(row["instance"], row["solver"])] = trace
    order = {Path(m).stem: i for i, m in enumerate(manifests)}
    rank = {"imro2d": -1, **{s: i for i, s in enumerate(solvers)}}
    rows.sort(key=lambda r: (order[r["instance"]], rank.get(r["solver"], 99)))
    return rows, traces


_COLUMNS = ("instance", "solver", "status", "iters", "a_calls", "final_F", "err")


def format_table(rows):
    cells = [[str(r[c]) for c in _COLUMNS] for r in rows]
    widths = [max(len(c), *(len(row[i]) for row in cells)) for i, c in enumerate(_COLUMNS)]
    lines = ["  ".join(c.ljust(w) for c, w in zip(_COLUMNS, widths))]
    lines.append("  ".join("-" * w for w in widths))
    lines += ["  ".join(v.ljust(w) for v, w in zip(row, widths)) for row in cells]
    return "\n".join(lines)


def cmd_bench(args):
    solvers = args.solvers.split(",")
    bad = [s for s in solvers if s not in SOLVERS]
    if bad:
        raise UsageError(f"unknown solver(s): {', '.join(bad)}")
    rows, traces = bench(
        args.manifests,
        solvers,
        seed=args.seed,
        tol=args.tol,
        dnc_factor=args.dnc_factor,
        max_iters=args.max_iters,
        prox_method=args.prox_method,
        jobs=args.jobs,
    )
    if args.trace_dir:
        d = Path(args.trace_dir)
        d.mkdir(parents=True, exist_ok=True)
        for (inst, name), tr in traces.items():
            if tr is not None:
                write_trace(tr, d / f"{inst}.{name}.trace.csv", timing=not args.no_timing)
    print(format_table(rows))
    return EXIT_OK


def cmd_check(args):
    """Invariant spot checks on one instance; nonzero exit if any fails."""
    from .linops import check_adjoint

    problem = _load(args.manifest, args.seed)
    A = problem.A
    results = []
    adj = check_adjoint(A, trials=100, seed=args.seed)
    results.append(("adjoint identity", adj))

    est = problem.norm_estimate()
    rng = np.random.default_rng(args.seed)
    rq = max(float(np.linalg.norm(A.apply(x)) ** 2 / (x @ x)) for x in rng.standard_normal((20, A.shape[1])))
    results.append(("norm estimate bounds Rayleigh quotients", est.converged and rq <= est.value**2))

    def on_1d(info):
        H = info.metric
        v = info.x - info.x_new
        if np.any(v):
            Av = A.apply(v)
            ok = H.quad(v) >= float(Av @ Av) * (1 - 1e-10)
            checks_1d.append(ok)

    checks_1d = []
    _, tr1 = solve(problem, SolverConfig(variant="imro1d", max_iters=args.iters, tol=args.tol), callback=on_1d)
    results.append(("imro1d majorization on steps", all(checks_1d)))
    results.append(("imro1d descent and sufficient decrease", not tr1.violations))

    claims = []

    def on_2d(info):
        if info.snapshot is not None:
            claims.append(not info.snapshot.claim_violations())

    solve(problem, SolverConfig(variant="imro2d", max_iters=args.iters, tol=args.tol), callback=on_2d)
    results.append(("imro2d curvature claims", all(claims)))

    ok = True
    for name, passed in results:
        ok &= bool(passed)
        print(f"{'PASS' if passed else 'FAIL'}  {name}")
    return EXIT_OK if ok else EXIT_FAIL


def build_parser():
    p = argparse.ArgumentParser(prog="imro", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a problem instance")
    g.add_argument("--family", choices=sorted(problems.FAMILIES), default="gaussian")
    g.add_argument("--m", type=int)
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--k", type=int, required=True, help="number of nonzeros in the ground truth")
    g.add_argument("--lambda", dest="lam", type=float, required=True)
    g.add_argument("--x-type", choices=("gaussian", "dynamic"), default="gaussian")
    g.add_argument("--decades", type=float, default=3.0, help="dynamic range (log10) for --x-type dynamic")
    g.add_argument("--cond", type=float, help="target condition number (conditioned family)")
    g.add_argument("--width", type=float, default=3.0, help="blur width in samples (convolution family)")
    g.add_argument("--noise", type=float, help="noise standard deviation")
    g.add_argument("--normalize-columns", action="store_true")
    g.add_argument("--oracle", action="store_true", help="also store a long-run FISTA reference minimizer")
    g.add_argument("--oracle-iters", type=int, default=100_000)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", type=Path)
    g.set_defaults(func=cmd_gen)

    def common(q):
        q.add_argument("--tol", type=float, default=1e-6)
        q.add_argument("--prox-method", choices=("sorted", "median"), default="sorted")
        q.add_argument("--seed", type=int, default=0, help="seed for the norm estimate")
        q.add_argument("--no-timing", action="store_true", help="write zero seconds for reproducible traces")

    s = sub.add_parser("solve", help="run one solver on a manifest")
    s.add_argument("manifest", type=Path)
    s.add_argument("--solver", choices=SOLVERS, default="imro2d")
    s.add_argument("--max-iters", type=int, default=10_000)
    s.add_argument("--max-ops", type=int)
    s.add_argument("--target-objective", type=float)
    s.add_argument("--trace", type=Path)
    common(s)
    s.set_defaults(func=cmd_solve)

    b = sub.add_parser("bench", help="objective-matched comparison table")
    b.add_argument("manifests", nargs="+", type=Path)
    b.add_argument("--solvers", default="imro2d,imro1d,fista,ista")
    b.add_argument("--dnc-factor", type=float, default=5, help="budget as a multiple of the reference iterations")
    b.add_argument("--max-iters", type=int)
    b.add_argument("--jobs", type=int, default=1)
    b.add_argument("--trace-dir", type=Path)
    common(b)
    b.set_defaults(func=cmd_bench)

    c = sub.add_parser("check", help="invariant checks on a manifest")
    c.add_argument("manifest", type=Path)
    c.add_argument("--iters", type=int, default=200)
    c.add_argument("--tol", type=float, default=1e-6)
    c.add_argument("--seed", type=int, default=0)
    c.set_defaults(func=cmd_check)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.WARNING - 10 * args.verbose, format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "max_ops", None) is not None and args.max_ops < 1:
        parser.print_usage(sys.stderr)
        print("imro: error: --max-ops must be positive", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"imro: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, ValueError, RuntimeError) as exc:
        print(f"imro: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
