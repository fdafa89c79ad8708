"""Distributed Householder back-transformation X = Q V.

Each rank holds full-length tridiagonal eigenvector columns under the 1D
cyclic distribution and the row slices of the reflectors left behind by
the tridiagonalization (redundant along each row communicator).  The
reflectors are applied last-to-first in blocks of mblk: per block the
full reflection vectors are first assembled from their P_x row segments
(the gather variant decides how), then every owned column is updated.

Gather variants (numerics are identical; only messages differ):

* per-vector broadcast -- one broadcast per reflector and row segment:
  (n-2) * P_x invocations;
* block broadcast      -- one broadcast per block and row segment:
  ceil((n-2)/mblk) * P_x invocations;
* non-blocking sends   -- the segment root isends to each peer.

Segment payloads carry a [reflector, segment, length] header ahead of
the values, so total delivered bytes agree across all three variants.
Ranks that already hold a segment redundantly verify the received copy
bitwise against their own.

Bitwise contract: column-major X and the shared plain dot kernel make
every owned column identical to the sequential back-transformation.
"""

from dataclasses import dataclass

import numpy as np

from .kernels import dot_plain
from .msgnet import ProtocolError
from .procgrid import owned_rows

GATHER_BCAST = "bcast"
GATHER_ISEND = "isend"
GATHER_BLOCK_BCAST = "block-bcast"

_GATHERS = (GATHER_BCAST, GATHER_ISEND, GATHER_BLOCK_BCAST)


@dataclass(frozen=True)
class HitVariant:
    """Gather strategy and reflector blocking factor."""

    gather: str = GATHER_BLOCK_BCAST
    mblk: int = 128

    def __post_init__(self):
        if self.gather not in _GATHERS:
            raise ValueError(f"unknown gather {self.gather!r}; expected one of {_GATHERS}")
        if self.mblk < 1:
            raise ValueError("mblk must be positive")


REFERENCE_VARIANT = HitVariant()


def _segment_rows(first, n, residue, stride):
    start = first + (residue - first) % stride
    return np.arange(start, n, stride, dtype=np.int64)


def _pack(k, root_x, values):
    return np.concatenate([[float(k), float(root_x), float(len(values))], values])


def _gather_block(comm, grid, factors, ks, n, variant):
    """Assemble the full reflection vectors for a descending index block."""
    full = {k: np.zeros(n - 1 - k) for k in ks}
    pi = owned_rows(grid, n).values - 1

    def place(k, root_x, vals):
        rows = _segment_rows(k + 1, n, root_x, grid.p_x)
        if len(vals) != len(rows):
            raise ProtocolError(f"reflector {k} segment {root_x}: bad length {len(vals)}")
        if root_x == grid.my_x:
            mine = factors.v_slices[k]
            if not np.array_equal(vals, mine):
                raise ProtocolError(f"reflector {k} segment {root_x}: redundant copy differs")
        full[k][rows - (k + 1)] = vals

    def my_slice(k):
        return factors.v_slices[k]

    if variant.gather == GATHER_BCAST:
        for k in ks:
            for root_x in range(grid.p_x):
                payload = _pack(k, root_x, my_slice(k)) if grid.my_x == root_x else None
                got = comm.bcast(root_x, payload, category="hit:Send Piv")
                _parse_records(got, [k], root_x, place)
    elif variant.gather == GATHER_BLOCK_BCAST:
        for root_x in range(grid.p_x):
            if grid.my_x == root_x:
                payload = np.concatenate([_pack(k, root_x, my_slice(k)) for k in ks])
            else:
                payload = None
            got = comm.bcast(root_x, payload, category="hit:Send Piv")
            _parse_records(got, ks, root_x, place)
    else:  # non-blocking point-to-point from each segment root
        pendings = []
        for k in ks:
            for root_x in range(grid.p_x):
                tag = k * grid.p_x + root_x
                if comm.pos == root_x:
                    rec = _pack(k, root_x, my_slice(k))
                    for dest in range(comm.size):
                        if dest != comm.pos:
                            pendings.append(comm.isend(dest, rec, tag=tag, category="hit:Send Piv"))
                    _parse_records(rec, [k], root_x, place)
                else:
                    got = comm.recv(root_x, tag=tag)
                    _parse_records(got, [k], root_x, place)
        for p in pendings:
            comm.wait(p)
    return full


def _parse_records(payload, expect_ks, root_x, place):
    pos = 0
    for k in expect_ks:
        if pos + 3 > len(payload):
            raise ProtocolError("truncated reflector-segment payload")
        got_k, got_root, ln = (int(payload[pos]), int(payload[pos + 1]), int(payload[pos + 2]))
        if got_k != k or got_root != root_x:
            raise ProtocolError(
                f"reflector segment mismatch: got (k={got_k}, seg={got_root}), "
                f"expected (k={k}, seg={root_x})"
            )
        place(k, root_x, payload[pos + 3 : pos + 3 + ln])
        pos += 3 + ln
    if pos != len(payload):
        raise ProtocolError("trailing bytes in reflector-segment payload")


def hit_distributed(comm, grid, factors, pairs, n, variant=REFERENCE_VARIANT):
    """Back-transform this rank's owned eigenvector columns.

    All reflectors are applied to every owned column, last reflector
    first, descending through blocks of variant.mblk.  Returns the
    updated columns (n rows, one column per owned eigenvalue, F order).
    """
    x = np.asfortranarray(np.array(pairs.vectors, dtype=np.float64, copy=True))
    if x.shape[0] != n:
        raise ValueError(f"eigenvector columns have {x.shape[0]} rows, expected {n}")
    for blk_hi in range(n - 3, -1, -variant.mblk):
        ks = list(range(blk_hi, max(blk_hi - variant.mblk, -1), -1))
        full = _gather_block(comm, grid, factors, ks, n, variant)
        for k in ks:
            v = full[k]
            tau = factors.taus[k]
            for c in range(x.shape[1]):
                sigma = tau * dot_plain(v, x[k + 1 :, c])
                x[k + 1 :, c] -= sigma * v
    return x
