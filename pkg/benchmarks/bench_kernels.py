#!/usr/bin/env python3
"""Micro-benchmark comparing the compiled and pure-Python kernel backends.

Times the hot inner-loop kernels (exact dot, per-row exact expansions,
Sturm counts, plain dot) on sizes representative of the solver's workloads
and prints a speedup table.  The exact kernels are correctly rounded, so
both backends must also agree bitwise; this is checked before timing.

Usage: python3 benchmarks/bench_kernels.py [--n 256] [--repeats 30]
"""

import argparse
import time

import numpy as np

from smalleig.kernels import get_backend


def _time(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=256, help="vector/matrix dimension")
    ap.add_argument("--repeats", type=int, default=30, help="timing repeats (best-of)")
    args = ap.parse_args()

    try:
        c = get_backend("c")
    except ImportError:
        raise SystemExit("compiled backend not available; build it first (pip install -e .)")
    py = get_backend("python")

    rng = np.random.default_rng(42)
    n = args.n
    x = rng.standard_normal(n)
    y = rng.standard_normal(n)
    a = rng.standard_normal((n // 2, n))
    d = rng.standard_normal(n) * 4
    e2 = rng.standard_normal(n - 1) ** 2
    sigmas = np.linspace(d.min() - 1, d.max() + 1, 64)
    pivmin = 1e-300

    # cross-backend agreement on the correctly rounded kernels
    assert c.exact_dot(x, y) == py.exact_dot(x, y)
    cf, cl = c.dot_expansions(a, y)
    pf, pl = py.dot_expansions(a, y)
    assert np.array_equal(cf, pf) and np.array_equal(cl, pl)
    assert np.array_equal(c.sturm_counts(d, e2, sigmas, pivmin), py.sturm_counts(d, e2, sigmas, pivmin))

    cases = [
        ("exact_dot", lambda b: b.exact_dot(x, y)),
        ("dot_expansions", lambda b: b.dot_expansions(a, y)),
        ("sturm_counts", lambda b: b.sturm_counts(d, e2, sigmas, pivmin)),
        ("dot_plain", lambda b: b.dot_plain(x, y)),
    ]

    print(f"kernel backends, n={n} (best of {args.repeats})")
    print(f"{'kernel':<16} {'python (us)':>12} {'c (us)':>12} {'speedup':>9}")
    for name, fn in cases:
        tp = _time(lambda: fn(py), args.repeats) * 1e6
        tc = _time(lambda: fn(c), args.repeats) * 1e6
        print(f"{name:<16} {tp:>12.2f} {tc:>12.2f} {tp / tc:>8.1f}x")


if __name__ == "__main__":
    main()
