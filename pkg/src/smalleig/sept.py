"""Tridiagonal eigensolver: multi-section bisection plus inverse iteration.

The tridiagonal matrix is replicated on every rank after the reduction
step, so this stage is communication-free: each rank refines the full
spectrum (identical bits everywhere, since the arithmetic is replicated)
and computes eigenvectors only for the columns it owns under the 1D
cyclic distribution.

Eigenvalue refinement uses Sturm sign counts with two batching knobs:

* ml  -- interior section points placed per interval and sweep (plain
         bisection is ml=1);
* el  -- intervals refined per sweep, batching their Sturm evaluations.

Each interval is refined independently, so el changes batching only and
never any result bit; different ml values land on different final
brackets but every returned value is within tol of the true eigenvalue,
hence any two ml choices agree within 2*tol.

Eigenvalues are numbered descending: index 1 is the largest.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import lapack as _lapack

from .kernels import sturm_counts as _sturm_kernel
from .procgrid import owned_cols_1d

_EPS = np.finfo(np.float64).eps
_TINY = np.finfo(np.float64).tiny

# eigenvalues closer than this (relative to ||T||) are treated as a
# cluster and their inverse-iteration vectors reorthogonalized
_CLUSTER_RELGAP = 1e-3

_MAX_INVIT_SWEEPS = 8
_SEED_BASE = 0x5EED


@dataclass(frozen=True)
class MemsParams:
    """Multi-section refinement parameters (ml section points, el batch)."""

    ml: int = 2
    el: int = 75
    tol: float = None  # absolute; None -> 1e-13 * ||T||_inf

    def __post_init__(self):
        if self.ml < 1 or self.el < 1:
            raise ValueError("ml and el must be positive")

    def tolerance(self, tri):
        if self.tol is not None:
            return self.tol
        return 1e-13 * max(tri.norm_inf(), 1.0)


@dataclass
class EigenPairsLocal:
    """One rank's share of the spectrum under the 1D cyclic distribution.

    eigenvalues holds the full replicated descending spectrum; indices
    are the owned 1-based descending eigenvalue numbers and vectors the
    matching tridiagonal eigenvectors, one column each.
    """

    eigenvalues: np.ndarray
    indices: np.ndarray
    vectors: np.ndarray  # shape (n, len(indices)), Fortran order


def _pivmin(e2):
    scale = float(e2.max()) if len(e2) else 1.0
    return max(_TINY, _EPS * _EPS * max(scale, 1.0))


def sturm_count(tri, sigma):
    """Number of eigenvalues of tri strictly below sigma (batch-capable)."""
    e2 = tri.e * tri.e
    return _sturm_kernel(tri.d, e2, sigma, _pivmin(e2))


def _initial_bracket(tri, e2, pivmin):
    """[lo, hi) with Sturm counts exactly 0 and n."""
    n = tri.n
    glo, ghi = tri.gershgorin()
    margin = max(_EPS * max(abs(glo), abs(ghi), 1.0), 2 * pivmin)
    lo, hi = glo - margin, ghi + margin
    for _ in range(64):
        clo, chi = _sturm_kernel(tri.d, e2, np.array([lo, hi]), pivmin)
        if clo == 0 and chi == n:
            return lo, hi, int(clo), int(chi)
        margin *= 2.0
        lo, hi = glo - margin, ghi + margin
    raise RuntimeError("could not establish an enclosing spectral bracket")


def mems_eigenvalues(tri, params=MemsParams()):
    """All eigenvalues of the tridiagonal matrix, descending.

    Multi-section refinement: every active interval knows which
    eigenvalue indices it encloses (from its boundary Sturm counts) and
    is subdivided at ml interior points per sweep until its width drops
    below the tolerance; the estimate is the final bracket midpoint.
    """
    n = tri.n
    if n == 1:
        return np.array([float(tri.d[0])])
    e2 = tri.e * tri.e
    pivmin = _pivmin(e2)
    tol = params.tolerance(tri)
    lo, hi, clo, chi = _initial_bracket(tri, e2, pivmin)

    out = np.empty(n)
    queue = [(lo, hi, clo, chi)]
    while queue:
        batch = queue[: params.el]
        del queue[: params.el]
        refine = []
        sigmas = []
        for lo, hi, clo, chi in batch:
            pts = np.linspace(lo, hi, params.ml + 2)[1:-1]
            pts = np.unique(pts[(pts > lo) & (pts < hi)])
            if hi - lo <= tol or len(pts) == 0:
                out[clo:chi] = (lo + hi) / 2.0
                continue
            refine.append((lo, hi, clo, chi, pts))
            sigmas.extend(pts)
        if not refine:
            continue
        counts = _sturm_kernel(tri.d, e2, np.array(sigmas), pivmin)
        pos = 0
        for lo, hi, clo, chi, pts in refine:
            cuts = np.concatenate([[lo], pts, [hi]])
            cnts = np.concatenate([[clo], counts[pos : pos + len(pts)], [chi]])
            pos += len(pts)
            for i in range(len(cuts) - 1):
                c0, c1 = int(cnts[i]), int(cnts[i + 1])
                c0 = min(max(c0, clo), chi)  # clamp non-monotone counts
                c1 = min(max(c1, c0), chi)
                if c1 > c0:
                    queue.append((float(cuts[i]), float(cuts[i + 1]), c0, c1))
    return out[::-1].copy()  # descending


def _solve_shifted(d, e, lam, b):
    """One inverse-iteration solve (T - lam I) x = b; None if singular."""
    dd = d - lam
    if len(d) == 1:
        if dd[0] == 0.0:
            return None
        return b / dd[0]
    _, _, _, x, info = _lapack.dgtsv(e.copy(), dd, e.copy(), b.reshape(-1, 1))
    if info != 0:
        return None
    return x[:, 0]


def inverse_iteration(tri, lam, eig_index):
    """Eigenvector of the tridiagonal for the given eigenvalue estimate.

    Deterministic: the starting vector is seeded by the (0-based,
    ascending) eigenvalue index.  Exactly singular shifted systems are
    retried with a slightly perturbed shift.  The sign is fixed by
    making the largest-magnitude component positive.
    """
    n = tri.n
    if n == 1:
        return np.array([1.0])
    rng = np.random.default_rng(_SEED_BASE + eig_index)
    b = rng.standard_normal(n)
    b /= np.linalg.norm(b)
    nrm = max(tri.norm_inf(), _TINY)
    shift = lam
    v = b
    for sweep in range(_MAX_INVIT_SWEEPS):
        x = _solve_shifted(tri.d, tri.e, shift, v)
        if x is None:
            shift = lam + (sweep + 1) * _EPS * nrm
            continue
        growth = np.linalg.norm(x)
        v = x / growth
        if growth >= 1.0 / (np.sqrt(n) * _EPS * max(nrm, 1.0)):
            break
    imax = int(np.argmax(np.abs(v)))
    if v[imax] < 0.0:
        v = -v
    return v


def tridiagonal_eigenvectors(tri, lams_desc):
    """All eigenvectors of the tridiagonal for the given descending spectrum.

    Column j belongs to lams_desc[j].  Vectors of clustered eigenvalues
    (consecutive gap below 1e-3 * ||T||) are reorthogonalized by modified
    Gram-Schmidt in ascending spectral order; without it, inverse
    iteration cannot separate close eigenpairs.  Fully deterministic.
    """
    n = tri.n
    lams_asc = lams_desc[::-1]
    vecs = np.zeros((n, n), order="F")  # ascending order while building
    nrm = max(tri.norm_inf(), _TINY)
    cluster_start = 0
    for m in range(n):
        v = inverse_iteration(tri, float(lams_asc[m]), m)
        if m > 0 and abs(lams_asc[m] - lams_asc[m - 1]) > _CLUSTER_RELGAP * nrm:
            cluster_start = m
        for i in range(cluster_start, m):
            v = v - np.dot(vecs[:, i], v) * vecs[:, i]
        vn = np.linalg.norm(v)
        if vn > 0.0:
            v = v / vn
        vecs[:, m] = v
    return np.asfortranarray(vecs[:, ::-1])  # descending, matching lams_desc


def sept_distributed(comm, tri, params=MemsParams()):
    """Communication-free spectral step on the replicated tridiagonal.

    Every rank redundantly refines the full spectrum and computes the
    full eigenvector set (replicated arithmetic, so identical bits on
    all ranks — cheaper than communicating at this problem scale), then
    keeps only its owned columns of the 1D cyclic distribution.
    """
    n = tri.n
    # simulator-level check, not a message: T must be replicated
    comm.assert_uniform(np.concatenate([tri.d, tri.e]), what="replicated tridiagonal")
    lams = mems_eigenvalues(tri, params)  # descending
    allvecs = tridiagonal_eigenvectors(tri, lams)
    owned = owned_cols_1d(comm.pos, comm.size, n).values  # 1-based descending numbers
    vecs = np.asfortranarray(allvecs[:, owned - 1])
    return EigenPairsLocal(eigenvalues=lams, indices=owned.copy(), vectors=vecs)
