"""Process-grid construction and cyclic index arithmetic.

A grid of P = P_x * P_y logical processes owns the rows and columns of an
n x n matrix cyclically with blocking factor 1: global row i (1-based)
belongs to row coordinate (i-1) mod P_x, column j to (j-1) mod P_y.
Eigenvector/eigenvalue columns use the same cyclic rule over all P
processes (the 1D distribution).

Rank linearization is column-major and fixed: rank r has coordinates
(my_x, my_y) = (r mod P_x, r div P_x).

All indices at this API boundary are 1-based.
"""

from dataclasses import dataclass

import numpy as np


class GridConfigError(ValueError):
    """Inconsistent grid dimensions."""


@dataclass(frozen=True)
class ProcessGrid:
    p_total: int
    p_x: int
    p_y: int
    my_x: int
    my_y: int

    @property
    def rank(self):
        return self.my_x + self.my_y * self.p_x


@dataclass(frozen=True)
class IndexSet:
    """Ordered set of 1-based global indices of one cyclic residue class."""

    values: np.ndarray  # strictly increasing, 1-based
    stride: int
    offset: int

    def __len__(self):
        return len(self.values)

    def __contains__(self, idx):
        if len(self.values) == 0 or idx < 1 or idx > self.values[-1]:
            return False
        return (idx - 1) % self.stride == self.offset

    def position(self, idx):
        """1-based position of a member; raises KeyError for non-members."""
        if idx not in self:
            raise KeyError(f"index {idx} not in cyclic set (stride={self.stride}, offset={self.offset})")
        return int((idx - 1 - self.offset) // self.stride) + 1

    def tail_from(self, min_index):
        """0-based local position of the first member >= min_index.

        Realizes set shrinking as a moving active-start cursor; the
        underlying set is never physically modified.
        """
        return int(np.searchsorted(self.values, min_index))


def _cyclic_set(n, stride, offset):
    return IndexSet(values=np.arange(offset + 1, n + 1, stride, dtype=np.int64), stride=stride, offset=offset)


def build_grid(p_total, p_x, p_y, rank):
    """Grid descriptor for one rank of a P_x x P_y grid."""
    if p_x < 1 or p_y < 1 or p_x * p_y != p_total:
        raise GridConfigError(f"grid {p_x}x{p_y} does not match {p_total} processes")
    if not 0 <= rank < p_total:
        raise GridConfigError(f"rank {rank} out of range for {p_total} processes")
    return ProcessGrid(p_total=p_total, p_x=p_x, p_y=p_y, my_x=rank % p_x, my_y=rank // p_x)


def owned_rows(grid, n):
    """Global row indices owned by this rank (the set Pi)."""
    return _cyclic_set(n, grid.p_x, grid.my_x)


def owned_cols(grid, n):
    """Global column indices owned by this rank (the set Gamma)."""
    return _cyclic_set(n, grid.p_y, grid.my_y)


def owned_cols_1d(rank, p_total, n):
    """Cyclic column set of the 1D distribution of V, X and the spectrum."""
    if not 0 <= rank < p_total:
        raise GridConfigError(f"rank {rank} out of range for {p_total} processes")
    return _cyclic_set(n, p_total, rank)


def owner_of(i, j, grid):
    """Grid coordinates of the rank owning element (i, j)."""
    if i < 1 or j < 1:
        raise IndexError(f"matrix indices are 1-based, got ({i}, {j})")
    return ((i - 1) % grid.p_x, (j - 1) % grid.p_y)


def global_to_local(idx, index_set):
    """1-based position of a global index within its owning set."""
    return index_set.position(idx)
