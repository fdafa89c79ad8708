"""Command-line interface: solve, verify, bench, and tune subcommands.

Exit codes: 0 success, 1 verification failure, 2 usage error.

Default variant flags follow the best-found settings of the tuning
study: non-blocking pivot pre-send over the first quarter of the
iterations, exact allreduce row reduction, block-broadcast gather with
blocking factor 128, and (ml, el) = (2, 75).
"""

import argparse
import sys
import time

import numpy as np

from .autotune import TuneSpace, make_counter_runner, tune
from .densecore import accuracy, check_symmetric, frank_eigenvalues, frank_matrix, load_matrix_file
from .hit import HitVariant
from .report import build_report, save_report
from .sept import MemsParams
from .solver import SolveConfig, solve
from .trd import TrdVariant

# verification thresholds (relative to the matrix scale)
REL_EIG_TOL = 1e-10  # vs the analytic spectrum, scaled by the largest eigenvalue
ORTH_TOL = 1e-9
REL_RESID_TOL = 1e-8  # scaled by ||A||_F


def _add_common(p):
    p.add_argument("--n", type=int, help="matrix order (required for --matrix frank/random)")
    p.add_argument("--matrix", choices=("frank", "file", "random"), default="frank")
    p.add_argument("--input", help="matrix file (first line n, then n rows of n values)")
    p.add_argument("--px", type=int, default=1, help="process rows")
    p.add_argument("--py", type=int, default=1, help="process columns")
    p.add_argument("--trd-reduce", choices=("tree", "allreduce"), default="allreduce")
    p.add_argument("--trd-pivot", choices=("blocking", "nonblocking"), default="nonblocking")
    p.add_argument("--presend-frac", type=float, default=0.25)
    p.add_argument("--hit-gather", choices=("bcast", "isend", "block-bcast"), default="block-bcast")
    p.add_argument("--mblk", type=int, default=128)
    p.add_argument("--ml", type=int, default=2)
    p.add_argument("--el", type=int, default=75)
    p.add_argument("--tol", type=float, default=None, help="absolute eigenvalue tolerance")
    p.add_argument("--report", help="write a JSON run report to this path")
    p.add_argument("--seed", type=int, default=0, help="seed for --matrix random")
    # test hook: perturb the computed spectrum before verification
    p.add_argument("--inject-eigenvalue-error", type=float, default=0.0, help=argparse.SUPPRESS)


def _build_parser():
    ap = argparse.ArgumentParser(
        prog="smalleig",
        description="Distributed-memory symmetric eigensolver over a simulated process grid.",
    )
    sub = ap.add_subparsers(dest="command", required=True)
    ps = sub.add_parser("solve", help="run the eigensolver and print the spectrum")
    ps.add_argument("--verify", action="store_true", help="also check accuracy; exit 1 on failure")
    pv = sub.add_parser("verify", help="run the eigensolver and check accuracy")
    pb = sub.add_parser("bench", help="run once per gather variant and compare counters")
    pt = sub.add_parser("tune", help="search the communication-variant space")
    pt.add_argument("--metric", choices=("messages", "bytes", "time"), default="messages")
    for p in (ps, pv, pb, pt):
        _add_common(p)
    return ap


def _load_matrix(args, ap):
    if args.matrix == "file":
        if not args.input:
            ap.error("--matrix file requires --input")
        a = load_matrix_file(args.input)
        check_symmetric(a)
        args.n = a.shape[0]
        return a
    if args.n is None or args.n < 1:
        ap.error("--n (positive) is required unless --matrix file is used")
    if args.matrix == "frank":
        return frank_matrix(args.n)
    rng = np.random.default_rng(args.seed)
    m = rng.standard_normal((args.n, args.n))
    return (m + m.T) / 2.0


def _config(args, ap):
    try:
        return SolveConfig(
            n=args.n,
            p_x=args.px,
            p_y=args.py,
            trd_variant=TrdVariant(args.trd_pivot, args.presend_frac, args.trd_reduce),
            hit_variant=HitVariant(args.hit_gather, args.mblk),
            mems=MemsParams(ml=args.ml, el=args.el, tol=args.tol),
        )
    except ValueError as exc:
        ap.error(str(exc))


def _run(config, a):
    t0 = time.perf_counter()
    result = solve(config, a)
    return result, time.perf_counter() - t0


def _verify(args, a, result):
    """Accuracy gate; returns a list of failure descriptions."""
    lam = result.eigenvalues + args.inject_eigenvalue_error
    acc = accuracy(a, lam, result.x)
    failures = []
    if args.matrix == "frank":
        ref = frank_eigenvalues(args.n)
        err = float(np.abs(lam - ref).max())
        limit = REL_EIG_TOL * float(ref[0])
        line = f"eigenvalue error vs analytic spectrum: {err:.3e} (limit {limit:.3e})"
        if err > limit:
            failures.append(line)
        print(("FAIL " if err > limit else "ok   ") + line)
    line = f"orthogonality deviation: {acc.max_orth_dev:.3e} (limit {ORTH_TOL:.1e})"
    if not acc.orth_ok(ORTH_TOL):
        failures.append(line)
    print(("FAIL " if not acc.orth_ok(ORTH_TOL) else "ok   ") + line)
    limit = REL_RESID_TOL * acc.norm_a_fro
    line = f"residual: {acc.max_residual:.3e} (limit {limit:.3e})"
    if not acc.residual_ok(REL_RESID_TOL):
        failures.append(line)
    print(("FAIL " if not acc.residual_ok(REL_RESID_TOL) else "ok   ") + line)
    return failures


def _maybe_report(args, config, result, wall, acc=None):
    if args.report:
        doc = build_report(
            config, result.stats, accuracy_report=acc, eigenvalues=result.eigenvalues, wall_time_s=wall
        )
        save_report(doc, args.report)
        print(f"report written to {args.report}")


def _print_summary(config, result, wall):
    lam = result.eigenvalues
    print(
        f"n={config.n} grid={config.p_x}x{config.p_y} "
        f"messages={result.stats.total('msgs')} bytes={result.stats.total('bytes')} "
        f"wall={wall:.3f}s"
    )
    head = ", ".join(f"{v:.12g}" for v in lam[: min(5, len(lam))])
    print(f"largest eigenvalues: {head}")
    print(f"smallest eigenvalue: {lam[-1]:.12g}")


def main(argv=None):
    ap = _build_parser()
    args = ap.parse_args(argv)

    if args.command in ("solve", "verify"):
        a = _load_matrix(args, ap)
        config = _config(args, ap)
        result, wall = _run(config, a)
        _print_summary(config, result, wall)
        failures = []
        if args.command == "verify" or args.verify:
            failures = _verify(args, a, result)
        acc = accuracy(a, result.eigenvalues, result.x)
        _maybe_report(args, config, result, wall, acc)
        return 1 if failures else 0

    if args.command == "bench":
        a = _load_matrix(args, ap)
        rows = []
        for gather in ("bcast", "isend", "block-bcast"):
            args.hit_gather = gather
            config = _config(args, ap)
            result, wall = _run(config, a)
            g = result.stats.by_category.get("hit:Send Piv")
            rows.append((gather, result.stats.total("msgs"), g.calls if g else 0, wall))
        print(f"{'gather':>12} {'total msgs':>11} {'gather calls':>13} {'wall s':>8}")
        for gather, msgs, calls, wall in rows:
            print(f"{gather:>12} {msgs:>11} {calls:>13} {wall:>8.3f}")
        return 0

    # tune
    a = _load_matrix(args, ap)
    config = _config(args, ap)
    runner = make_counter_runner(
        args.n, args.px, args.py, a=a, mems=config.mems, cost_metric=args.metric
    )
    res = tune(TuneSpace(), runner, cost_metric=args.metric)
    print(f"evaluations: {res.evaluations} (reduction stage {len(res.trd_trace)}, back-transform stage {len(res.hit_trace)})")
    b = res.best
    print(
        f"best: pivot={b.trd.pivot_send} presend_frac={b.trd.presend_frac} "
        f"reduce={b.trd.reduce_impl} gather={b.hit.gather} mblk={b.hit.mblk}"
    )
    for cfg, cost in res.hit_trace:
        print(f"  gather={cfg.hit.gather:<11} mblk={cfg.hit.mblk:<3} cost={cost}")
    return 0


def entry():
    sys.exit(main())


if __name__ == "__main__":
    sys.exit(main())
