"""Sequential dense kernels: test matrices, tridiagonalization, back-transform.

These are the single-process reference implementations.  The distributed
routines are required to reproduce them bitwise (see the module docs of
``trd`` and ``hit``), which pins down a few conventions here:

* row sums in the reflection and matrix-vector steps are *correctly
  rounded* (``exact_dot``), so their value does not depend on how the
  addends were partitioned across processes;
* the reflection scalars come from the shared ``reflection_from_moments``
  helper, fed only by bitwise-reproducible inputs;
* the symmetric rank-2 update is written as two separate subtractions of
  outer products, elementwise, in a fixed order.
"""

import math
from dataclasses import dataclass

import numpy as np

from .kernels import dot_plain, exact_dot


def frank_matrix(n):
    """The n x n matrix with a_ij = n - max(i, j) + 1 (1-based indices)."""
    if n < 1:
        raise ValueError("matrix order must be positive")
    idx = np.arange(1, n + 1)
    return (n - np.maximum.outer(idx, idx) + 1).astype(np.float64)


def frank_eigenvalues(n):
    """Closed-form spectrum of frank_matrix(n), descending."""
    k = np.arange(1, n + 1)
    return 1.0 / (2.0 * (1.0 - np.cos((2 * k - 1) * np.pi / (2 * n + 1))))


def check_symmetric(a, tol=None):
    """Validate symmetry; names the worst offending entry pair on failure."""
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if a.shape[0] == 0:
        raise ValueError("matrix order must be positive")
    if tol is None:
        tol = 1e-12 * max(np.abs(a).max(), 1.0)
    dev = np.abs(a - a.T)
    worst = dev.max()
    if worst > tol:
        i, j = np.unravel_index(np.argmax(dev), dev.shape)
        raise ValueError(
            f"matrix is not symmetric: |a[{i + 1},{j + 1}] - a[{j + 1},{i + 1}]| = {worst:.3e} "
            f"exceeds tolerance {tol:.3e}"
        )
    return a


def load_matrix_file(path):
    """Read a dense matrix: first line n, then n rows of n values."""
    with open(path) as fh:
        first = fh.readline().split()
        if len(first) != 1:
            raise ValueError(f"{path}: first line must contain the matrix order only")
        n = int(first[0])
        rows = []
        for line in fh:
            if line.strip():
                rows.append([float(v) for v in line.split()])
    if len(rows) != n or any(len(r) != n for r in rows):
        raise ValueError(f"{path}: expected {n} rows of {n} values")
    return np.array(rows, dtype=np.float64)


def reflection_from_moments(x1, tailsq):
    """Reflection scalars from the pivot head x1 and exact tail square sum.

    For x = (x1, tail) this determines the reflector with v scaled so its
    first component is 1: returns (beta, tau, c) with beta the resulting
    subdiagonal value, tau the reflection coefficient, and c = x1 - beta
    the divisor normalizing the tail of v.  tau == 0 (no-op reflection)
    exactly when the tail square sum is zero.
    """
    x1 = float(x1)
    tailsq = float(tailsq)
    if tailsq == 0.0:
        return x1, 0.0, 1.0
    beta = -math.copysign(math.sqrt(x1 * x1 + tailsq), x1)
    tau = (beta - x1) / beta
    return beta, tau, x1 - beta


def householder_reflect(x):
    """Reflector (v, beta, tau) zeroing x below its first entry; v[0] = 1."""
    x = np.asarray(x, dtype=np.float64)
    tail = x[1:]
    beta, tau, c = reflection_from_moments(x[0] if len(x) else 0.0, exact_dot(tail, tail))
    v = np.zeros(len(x))
    if len(x):
        v[0] = 1.0
    if tau != 0.0:
        v[1:] = tail / c
    return v, beta, tau


@dataclass
class TridiagonalMatrix:
    """Symmetric tridiagonal: main diagonal d (n) and subdiagonal e (n-1)."""

    d: np.ndarray
    e: np.ndarray

    @property
    def n(self):
        return len(self.d)

    def norm_inf(self):
        n = len(self.d)
        pad = np.concatenate([[0.0], np.abs(self.e), [0.0]])
        return float((np.abs(self.d) + pad[:n] + pad[1:]).max()) if n else 0.0

    def gershgorin(self):
        """Interval certainly containing the whole spectrum."""
        n = len(self.d)
        pad = np.concatenate([[0.0], np.abs(self.e), [0.0]])
        radius = pad[:n] + pad[1:]
        return float((self.d - radius).min()), float((self.d + radius).max())

    def to_dense(self):
        return np.diag(self.d) + np.diag(self.e, -1) + np.diag(self.e, 1)


@dataclass
class HouseholderFactors:
    """The reflectors produced by tridiagonalization.

    vs[k] spans trailing rows k+2..n (1-based) with leading component 1;
    taus[k] is the matching coefficient (0 for a no-op reflection).
    """

    vs: list
    taus: np.ndarray

    @property
    def n(self):
        return len(self.taus) + 2 if len(self.taus) else None


def trd_sequential(a):
    """Householder tridiagonalization A = Q T Q^T of a symmetric matrix.

    Returns (TridiagonalMatrix, HouseholderFactors).  Reflector k is built
    from the subdiagonal part of column k; the trailing block is updated
    by the symmetric rank-2 form A <- A - v w^T - w v^T with
    w = y - (mu/2) v, y = A t, t = tau v, mu = tau (y^T v).
    """
    a = np.asarray(a, dtype=np.float64)
    n = a.shape[0]
    work = a.copy()
    d = np.empty(n)
    e = np.empty(max(n - 1, 0))
    vs = []
    taus = np.zeros(max(n - 2, 0))

    for k in range(n - 2):
        x1 = work[k + 1, k]
        tail = work[k + 2 :, k]
        beta, tau, c = reflection_from_moments(x1, exact_dot(tail, tail))
        d[k] = work[k, k]
        e[k] = beta
        taus[k] = tau
        m = n - k - 1
        v = np.zeros(m)
        v[0] = 1.0
        if tau != 0.0:
            v[1:] = tail / c
        vs.append(v)
        if tau != 0.0:
            t = tau * v
            block = work[k + 1 :, k + 1 :]
            y = np.array([exact_dot(block[i], t) for i in range(m)])
            mu = tau * exact_dot(y, v)
            w = y - (mu / 2.0) * v
            block -= np.outer(v, w)
            block -= np.outer(w, v)

    if n >= 2:
        d[n - 2] = work[n - 2, n - 2]
        e[n - 2] = work[n - 1, n - 2]
    d[n - 1] = work[n - 1, n - 1]
    return TridiagonalMatrix(d=d, e=e), HouseholderFactors(vs=vs, taus=taus)


def hit_sequential(factors, v_cols):
    """Back-transform tridiagonal eigenvectors: X = Q V.

    Applies the stored reflectors to every column, last reflector first.
    Column-major storage and a plain ascending dot are part of the bitwise
    contract with the distributed implementation.
    """
    x = np.asfortranarray(np.asarray(v_cols, dtype=np.float64).copy())
    n = x.shape[0]
    for k in range(n - 3, -1, -1):
        v = factors.vs[k]
        tau = factors.taus[k]
        for c in range(x.shape[1]):
            sigma = tau * dot_plain(v, x[k + 1 :, c])
            x[k + 1 :, c] -= sigma * v
    return x


@dataclass
class AccuracyReport:
    """Residual/orthogonality summary of a computed eigendecomposition."""

    max_residual: float  # max_k || A x_k - lambda_k x_k ||_2
    max_orth_dev: float  # max_ij | (X^T X - I)_ij |
    norm_a_fro: float

    def residual_ok(self, rel_tol):
        return self.max_residual <= rel_tol * max(self.norm_a_fro, 1e-300)

    def orth_ok(self, abs_tol):
        return self.max_orth_dev <= abs_tol


def accuracy(a, eigvals, x):
    """Measure residual and orthogonality of (eigvals, x) against a."""
    a = np.asarray(a, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    eigvals = np.asarray(eigvals, dtype=np.float64)
    resid = a @ x - x * eigvals[np.newaxis, :]
    max_resid = float(np.sqrt((resid * resid).sum(axis=0)).max()) if x.size else 0.0
    gram = x.T @ x - np.eye(x.shape[1])
    max_orth = float(np.abs(gram).max()) if x.size else 0.0
    return AccuracyReport(
        max_residual=max_resid,
        max_orth_dev=max_orth,
        norm_a_fro=float(np.linalg.norm(a)),
    )
