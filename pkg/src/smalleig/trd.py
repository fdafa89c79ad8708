"""Distributed Householder tridiagonalization over a 2D cyclic grid.

Every rank holds the block A[Pi, Gamma] of the symmetric input.  Each
iteration k runs the phase sequence

1. pivot column distribution along the row communicator ("Send Piv";
   blocking send, or a non-blocking pre-send issued during the previous
   iteration's update for the first K iterations);
2. reflection-scalar assembly (diagonal entry, pivot head, exact tail
   square sum) over the column communicator;
3. assembly of the full reflection vector v from its row segments
   ("Send yt");
4. local partial matrix-vector product over owned columns ("Matvec");
5. row reduction of the partials ("MatVec Reduce"; exact allreduce or a
   binary combining tree);
6. assembly of the full product vector y ("Send xt");
7. reduction of the scalar mu = tau (y^T v) ("Other");
8. symmetric rank-2 update of the owned trailing block ("Update").

Bitwise contract: with the exact allreduce, every distribution-dependent
sum is correctly rounded, so T is bitwise identical to trd_sequential on
any grid.  The tree reduction rounds per-rank partials first and agrees
only to roughly 1e-13 * ||A||.  The pivot-send choice never changes any
numeric bit (sends are buffered); it only reschedules the same messages.

Message counts are a pure function of (n, grid, variant): no phase is
conditioned on matrix values.
"""

from dataclasses import dataclass
from math import fsum

import numpy as np

from .densecore import TridiagonalMatrix, reflection_from_moments
from .kernels import dot_expansions, expansion_of
from .procgrid import build_grid, owned_cols, owned_rows

PIVOT_BLOCKING = "blocking"
PIVOT_NONBLOCKING = "nonblocking"
REDUCE_ALLREDUCE = "allreduce"
REDUCE_TREE = "tree"


@dataclass(frozen=True)
class TrdVariant:
    """Communication-variant selection for the tridiagonalization."""

    pivot_send: str = PIVOT_BLOCKING
    presend_frac: float = 0.25
    reduce_impl: str = REDUCE_ALLREDUCE

    def __post_init__(self):
        if self.pivot_send not in (PIVOT_BLOCKING, PIVOT_NONBLOCKING):
            raise ValueError(f"unknown pivot_send {self.pivot_send!r}")
        if self.reduce_impl not in (REDUCE_ALLREDUCE, REDUCE_TREE):
            raise ValueError(f"unknown reduce_impl {self.reduce_impl!r}")
        if not 0.0 <= self.presend_frac <= 1.0:
            raise ValueError("presend_frac must be in [0, 1]")

    def presend_limit(self, n):
        """Last 1-based iteration for which the next pivot is pre-sent."""
        if self.pivot_send != PIVOT_NONBLOCKING:
            return 0
        return int(self.presend_frac * max(n - 2, 0))


REFERENCE_VARIANT = TrdVariant()


@dataclass
class TrdFactorsLocal:
    """This rank's share of the reflectors.

    v_slices[k] holds the components of reflector k at this rank's owned
    rows >= k+2 (1-based); the leading component (global row k+2) is 1.
    Slices are redundant along each row communicator by construction.
    """

    taus: np.ndarray
    v_slices: list


def distribute_matrix(comm, grid, a, n):
    """Scatter the n x n matrix from world rank 0 into cyclic blocks."""
    if comm.pos == 0:
        a = np.asarray(a, dtype=np.float64)
        block = None
        for r in range(comm.size):
            g = build_grid(grid.p_total, grid.p_x, grid.p_y, r)
            rows = owned_rows(g, n).values - 1
            cols = owned_cols(g, n).values - 1
            part = a[np.ix_(rows, cols)]
            if r == 0:
                block = part.copy()
            else:
                comm.send(r, part.ravel(), category="distribute")
        return block
    rows = owned_rows(grid, n).values
    cols = owned_cols(grid, n).values
    flat = comm.recv(0)
    return flat.reshape(len(rows), len(cols))


def gather_matrix(comm, grid, a_local, n):
    """Reassemble the full matrix at world rank 0 (None elsewhere)."""
    if comm.pos != 0:
        comm.send(0, np.asarray(a_local, dtype=np.float64).ravel(), category="gather")
        return None
    out = np.zeros((n, n))
    for r in range(comm.size):
        g = build_grid(grid.p_total, grid.p_x, grid.p_y, r)
        rows = owned_rows(g, n).values - 1
        cols = owned_cols(g, n).values - 1
        part = np.asarray(a_local) if r == 0 else comm.recv(r).reshape(len(rows), len(cols))
        out[np.ix_(rows, cols)] = part
    return out


def _segment_rows(first, n, residue, stride):
    """Global 0-based rows >= first, < n, congruent to residue mod stride."""
    start = first + (residue - first) % stride
    return np.arange(start, n, stride, dtype=np.int64)


def _assemble_full(col_comm, grid, local_slice, first, n, category):
    """Gather the row segments of a vector over rows first..n-1 to all ranks.

    One broadcast per process-row segment, rooted at that segment's owner
    within each column communicator.
    """
    full = np.zeros(n - first)
    for root_x in range(grid.p_x):
        payload = local_slice if root_x == grid.my_x else None
        got = col_comm.bcast(root_x, payload, category=category)
        rows = _segment_rows(first, n, root_x, grid.p_x)
        full[rows - first] = got
    return full


def trd_distributed(comm, grid, a_local, n, variant=REFERENCE_VARIANT):
    """Collective tridiagonalization; returns (TridiagonalMatrix, factors).

    T is replicated bitwise-identically on every rank; the factors hold
    this rank's row slices of the reflectors for the back-transformation.
    """
    row_comm, col_comm = comm.split_grid(grid)
    pi = owned_rows(grid, n).values - 1  # 0-based owned rows, ascending
    ga = owned_cols(grid, n).values - 1
    a = np.array(a_local, dtype=np.float64, copy=True)
    if a.shape != (len(pi), len(ga)):
        raise ValueError(f"local block shape {a.shape} does not match owned sets")

    d = np.empty(n)
    e = np.empty(max(n - 1, 0))
    taus = np.zeros(max(n - 2, 0))
    v_slices = []
    k_limit = variant.presend_limit(n)
    presend_done = False

    for kk in range(n - 2):
        pi_k = int(np.searchsorted(pi, kk))  # first owned row >= k
        pi_a = int(np.searchsorted(pi, kk + 1))  # first owned row >= k+1
        ga_a = int(np.searchsorted(ga, kk + 1))
        pivot_mine = kk % grid.p_y == grid.my_y

        # -- phase 1: pivot column distribution along the row communicator
        if pivot_mine:
            piv = a[pi_k:, int(np.searchsorted(ga, kk))].copy()
            if not presend_done:
                for pos in range(grid.p_y):
                    if pos != grid.my_y:
                        row_comm.send(pos, piv, category="trd:Send Piv")
        else:
            piv = row_comm.recv(kk % grid.p_y)
        presend_done = False
        rows = pi[pi_k:]  # global rows of piv (shared by the row communicator)

        # -- phase 2: reflection scalars [d_k, x1, tail square sum]
        c_d = [float(piv[0])] if rows.size and rows[0] == kk else [0.0]
        ix1 = int(np.searchsorted(rows, kk + 1))
        c_x1 = [float(piv[ix1])] if ix1 < len(rows) and rows[ix1] == kk + 1 else [0.0]
        it = int(np.searchsorted(rows, kk + 2))
        c_sq = expansion_of(piv[it:] * piv[it:]) if it < len(rows) else np.array([0.0])
        flat = np.concatenate([c_d, c_x1, c_sq])
        lens = np.array([1, 1, len(c_sq)], dtype=np.int64)
        d_k, x1, tailsq = col_comm.allreduce_exact(flat, lens, category="trd:Other")
        beta, tau, c = reflection_from_moments(x1, tailsq)
        d[kk] = d_k
        e[kk] = beta
        taus[kk] = tau

        # local v slice over owned rows >= k+1 (leading component is 1)
        vrows = pi[pi_a:]
        piv_a = piv[int(np.searchsorted(rows, kk + 1)) :]
        v_pi = np.zeros(len(vrows))
        if tau != 0.0:
            v_pi[:] = piv_a / c
        if vrows.size and vrows[0] == kk + 1:
            v_pi[0] = 1.0
        v_slices.append(v_pi.copy())

        # -- phase 3: assemble the full reflection vector
        v_full = _assemble_full(col_comm, grid, v_pi, kk + 1, n, "trd:Send yt")
        t_full = tau * v_full

        # -- phases 4-5: partial matvec over owned columns, row reduction
        t_g = t_full[ga[ga_a:] - (kk + 1)]
        mv_flat, mv_lens = dot_expansions(a[pi_a:, ga_a:], t_g)
        if variant.reduce_impl == REDUCE_ALLREDUCE:
            y_pi = row_comm.allreduce_exact(mv_flat, mv_lens, category="trd:MatVec Reduce")
        else:
            bounds = np.cumsum(mv_lens)[:-1] if len(mv_lens) else []
            part = np.array([fsum(chunk) for chunk in np.split(mv_flat, bounds)]) if len(mv_lens) else np.zeros(0)
            y_pi = row_comm.reduce_binary_tree(part, category="trd:MatVec Reduce")

        # -- phase 6: assemble the full product vector
        y_full = _assemble_full(col_comm, grid, y_pi, kk + 1, n, "trd:Send xt")

        # -- phase 7: mu = tau (y^T v), reduced over owned columns
        yg = y_full[ga[ga_a:] - (kk + 1)]
        vg = v_full[ga[ga_a:] - (kk + 1)]
        mu_exp = expansion_of(yg * vg) if len(yg) else np.array([0.0])
        dot_yv = row_comm.allreduce_exact(mu_exp, np.array([len(mu_exp)]), category="trd:Other")[0]
        mu = tau * dot_yv

        # -- phase 8: rank-2 update A <- A - v w^T - w v^T on the owned block
        presend_owner = (
            variant.pivot_send == PIVOT_NONBLOCKING
            and kk + 1 <= k_limit
            and kk < n - 3
            and (kk + 1) % grid.p_y == grid.my_y
        )
        block = a[pi_a:, ga_a:]
        if tau != 0.0:
            w_full = y_full - (mu / 2.0) * v_full
            w_p = w_full[vrows - (kk + 1)]
            w_g = w_full[ga[ga_a:] - (kk + 1)]
            if presend_owner:
                # next pivot column first, so it can be dispatched early
                block[:, 0] -= v_pi * w_g[0]
                block[:, 0] -= w_p * vg[0]
        pendings = []
        if presend_owner:
            piv_next = block[:, 0].copy()
            for pos in range(grid.p_y):
                if pos != grid.my_y:
                    pendings.append(row_comm.isend(pos, piv_next, category="trd:Send Piv"))
            presend_done = True
        if tau != 0.0:
            rest = 1 if presend_owner else 0
            block[:, rest:] -= np.outer(v_pi, w_g[rest:])
            block[:, rest:] -= np.outer(w_p, vg[rest:])
        for p in pendings:
            row_comm.wait(p)

    # -- trailing 2x2 block: replicate via a one-hot exact reduction
    def _one_hot(i, j):
        if i % grid.p_x == grid.my_x and j % grid.p_y == grid.my_y:
            return float(a[int(np.searchsorted(pi, i)), int(np.searchsorted(ga, j))])
        return 0.0

    if n == 1:
        tail_elems = [(0, 0)]
    else:
        tail_elems = [(n - 2, n - 2), (n - 1, n - 2), (n - 1, n - 1)]
    flat = np.array([_one_hot(i, j) for i, j in tail_elems])
    out = comm.allreduce_exact(flat, np.ones(len(flat), dtype=np.int64), category="trd:Other")
    if n == 1:
        d[0] = out[0]
    else:
        d[n - 2], e[n - 2], d[n - 1] = out

    return TridiagonalMatrix(d=d, e=e), TrdFactorsLocal(taus=taus, v_slices=v_slices)
