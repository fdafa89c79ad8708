"""Pure-Python/numpy kernel backend.

Reference implementations of the hot inner loops.  The Cython backend in
``_kernels.pyx`` must agree with these:

* ``exact_dot`` and the expansion kernels are *correctly rounded*, so both
  backends return identical bits by uniqueness of the rounded value.
* ``sturm_counts`` performs the same IEEE operation sequence per recurrence
  step, so the integer counts match exactly.
* ``dot_plain`` is only guaranteed deterministic within one backend (the
  fallback delegates to BLAS, whose summation order differs from the
  ascending loop of the compiled kernel).
"""

import math

import numpy as np

BACKEND = "python"


def _grow_expansion(partials, x):
    """Add one float to a list of non-overlapping partials (Shewchuk).

    Error-free: the partials always sum *exactly* to the running total.
    """
    i = 0
    for y in partials:
        if abs(x) < abs(y):
            x, y = y, x
        hi = x + y
        lo = y - (hi - x)
        if lo:
            partials[i] = lo
            i += 1
        x = hi
    partials[i:] = [x]
    return partials


def expansion_of(addends):
    """Exact expansion (non-overlapping floats) of sum(addends)."""
    partials = []
    for x in addends:
        _grow_expansion(partials, float(x))
    return np.array(partials if partials else [0.0], dtype=np.float64)


def exact_dot(x, y):
    """Correctly rounded sum of the rounded elementwise products x[i]*y[i]."""
    if len(x) == 0:
        return 0.0
    return math.fsum(np.multiply(x, y))


def dot_expansions(a, t):
    """Per-row exact expansions of sum_j fl(a[r, j] * t[j]).

    Returns (flat, lens): the concatenated expansion components and the
    per-row component counts.  Rows with no columns yield a single 0.0.
    """
    a = np.asarray(a, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)
    chunks = []
    lens = np.empty(a.shape[0], dtype=np.int64)
    for r in range(a.shape[0]):
        e = expansion_of(a[r] * t) if a.shape[1] else np.zeros(1)
        chunks.append(e)
        lens[r] = len(e)
    flat = np.concatenate(chunks) if chunks else np.zeros(0)
    return flat, lens


def sturm_counts(d, e2, sigmas, pivmin):
    """Number of eigenvalues of the tridiagonal (d, e) below each shift.

    Shifted LDL^T sign count; pivots smaller than pivmin in magnitude are
    replaced by -pivmin (standard zero-pivot perturbation).  Vectorized
    over the shift batch.
    """
    sigmas = np.atleast_1d(np.asarray(sigmas, dtype=np.float64))
    q = d[0] - sigmas
    q = np.where(np.abs(q) < pivmin, -pivmin, q)
    counts = (q < 0.0).astype(np.int64)
    for i in range(1, len(d)):
        q = d[i] - e2[i - 1] / q - sigmas
        q = np.where(np.abs(q) < pivmin, -pivmin, q)
        counts += q < 0.0
    return counts


def dot_plain(x, y):
    """Ordinary dot product; deterministic for fixed operands."""
    return float(np.dot(x, y))
