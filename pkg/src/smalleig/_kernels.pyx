# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernel backend.

Semantics must match ``_kernels_py`` exactly; see the notes there on which
kernels are bitwise-portable across backends.  No fast-math flags: the
expansion arithmetic (two-sum) relies on strict IEEE rounding.
"""

from libc.math cimport fabs
from libc.stdlib cimport free, malloc, realloc

import numpy as np
from math import fsum as _fsum

BACKEND = "c"


cdef struct Expansion:
    double *p
    Py_ssize_t n
    Py_ssize_t cap


cdef inline int _exp_init(Expansion *e, Py_ssize_t cap) except -1:
    e.p = <double *> malloc(cap * sizeof(double))
    if e.p == NULL:
        raise MemoryError()
    e.n = 0
    e.cap = cap
    return 0


cdef inline int _exp_grow(Expansion *e, double x) except -1:
    # Shewchuk grow-expansion: error-free accumulation of x into e.
    cdef Py_ssize_t i = 0, j
    cdef double y, hi, lo, tmp
    for j in range(e.n):
        y = e.p[j]
        if fabs(x) < fabs(y):
            tmp = x
            x = y
            y = tmp
        hi = x + y
        lo = y - (hi - x)
        if lo != 0.0:
            e.p[i] = lo
            i += 1
        x = hi
    if i >= e.cap:
        e.cap *= 2
        e.p = <double *> realloc(e.p, e.cap * sizeof(double))
        if e.p == NULL:
            raise MemoryError()
    e.p[i] = x
    e.n = i + 1
    return 0


cdef object _exp_round(Expansion *e):
    # Correctly rounded value; delegate the tie handling to math.fsum.
    cdef list comps = []
    cdef Py_ssize_t j
    for j in range(e.n):
        comps.append(e.p[j])
    return _fsum(comps)


def expansion_of(addends):
    """Exact expansion (non-overlapping floats) of sum(addends)."""
    cdef double[::1] a = np.ascontiguousarray(addends, dtype=np.float64)
    cdef Expansion e
    cdef Py_ssize_t j
    _exp_init(&e, 16)
    try:
        for j in range(a.shape[0]):
            _exp_grow(&e, a[j])
        if e.n == 0:
            return np.zeros(1)
        out = np.empty(e.n)
        for j in range(e.n):
            out[j] = e.p[j]
        return out
    finally:
        free(e.p)


def exact_dot(x, y):
    """Correctly rounded sum of the rounded elementwise products x[i]*y[i]."""
    cdef double[:] xv = np.asarray(x, dtype=np.float64)
    cdef double[:] yv = np.asarray(y, dtype=np.float64)
    cdef Expansion e
    cdef Py_ssize_t j
    if xv.shape[0] == 0:
        return 0.0
    _exp_init(&e, 16)
    try:
        for j in range(xv.shape[0]):
            _exp_grow(&e, xv[j] * yv[j])
        return _exp_round(&e)
    finally:
        free(e.p)


def dot_expansions(a, t):
    """Per-row exact expansions of sum_j fl(a[r, j] * t[j])."""
    cdef double[:, :] av = np.ascontiguousarray(a, dtype=np.float64)
    cdef double[::1] tv = np.ascontiguousarray(t, dtype=np.float64)
    cdef Py_ssize_t nrows = av.shape[0], ncols = av.shape[1]
    cdef Py_ssize_t r, j, pos
    lens = np.empty(nrows, dtype=np.int64)
    cdef long long[::1] lv = lens
    cdef Expansion e
    chunks = np.empty(max(nrows * 4, 1), dtype=np.float64)
    pos = 0
    _exp_init(&e, 16)
    try:
        for r in range(nrows):
            e.n = 0
            for j in range(ncols):
                _exp_grow(&e, av[r, j] * tv[j])
            if e.n == 0:
                e.p[0] = 0.0
                e.n = 1
            if pos + e.n > chunks.shape[0]:
                chunks = np.concatenate([chunks, np.empty(chunks.shape[0] + e.n)])
            for j in range(e.n):
                chunks[pos + j] = e.p[j]
            pos += e.n
            lv[r] = e.n
    finally:
        free(e.p)
    return chunks[:pos].copy(), lens


def sturm_counts(d, e2, sigmas, double pivmin):
    """Number of eigenvalues of the tridiagonal (d, e) below each shift."""
    cdef double[::1] dv = np.ascontiguousarray(d, dtype=np.float64)
    cdef double[::1] ev = np.ascontiguousarray(e2, dtype=np.float64)
    sig = np.atleast_1d(np.asarray(sigmas, dtype=np.float64))
    cdef double[::1] sv = np.ascontiguousarray(sig)
    out = np.zeros(sv.shape[0], dtype=np.int64)
    cdef long long[::1] ov = out
    cdef Py_ssize_t s, i
    cdef double q, sigma
    cdef long long c
    for s in range(sv.shape[0]):
        sigma = sv[s]
        q = dv[0] - sigma
        if fabs(q) < pivmin:
            q = -pivmin
        c = 1 if q < 0.0 else 0
        for i in range(1, dv.shape[0]):
            q = dv[i] - ev[i - 1] / q - sigma
            if fabs(q) < pivmin:
                q = -pivmin
            if q < 0.0:
                c += 1
        ov[s] = c
    return out


def dot_plain(x, y):
    """Ascending-index dot product; deterministic for fixed operands."""
    cdef double[:] xv = x
    cdef double[:] yv = y
    cdef double acc = 0.0
    cdef Py_ssize_t j
    for j in range(xv.shape[0]):
        acc = acc + xv[j] * yv[j]
    return acc
