"""Full eigensolve pipeline over the simulated process grid.

solve() spawns a P_x * P_y process world, scatters the input matrix from
rank 0, and runs the three stages on every rank: tridiagonalization,
spectral step on the replicated tridiagonal, back-transformation of the
owned eigenvector columns.  solve_embedded() is the collective body for
callers that already run inside an SPMD world.

Eigenvalues come out replicated and descending (index 1 is the largest);
eigenvectors are distributed cyclically by column and can be reassembled
with gather_eigenvectors().
"""

from dataclasses import dataclass, field

import numpy as np

from .hit import HitVariant, hit_distributed
from .hit import REFERENCE_VARIANT as HIT_REFERENCE
from .msgnet import spawn_spmd
from .procgrid import build_grid
from .sept import MemsParams, sept_distributed
from .trd import REFERENCE_VARIANT as TRD_REFERENCE
from .trd import TrdVariant, distribute_matrix, trd_distributed


@dataclass(frozen=True)
class SolveConfig:
    n: int
    p_x: int = 1
    p_y: int = 1
    trd_variant: TrdVariant = TRD_REFERENCE
    hit_variant: HitVariant = HIT_REFERENCE
    mems: MemsParams = field(default_factory=MemsParams)

    @property
    def p_total(self):
        return self.p_x * self.p_y


@dataclass
class RankResult:
    """One rank's share of a finished solve."""

    eigenvalues: np.ndarray  # full replicated spectrum, descending
    indices: np.ndarray  # owned 1-based eigenvalue numbers
    x_local: np.ndarray  # (n, len(indices)) back-transformed columns
    tridiagonal: object


@dataclass
class SolveResult:
    eigenvalues: np.ndarray
    x: np.ndarray  # full (n, n) eigenvector matrix
    stats: object
    ranks: list


def solve_embedded(comm, config, a_root=None):
    """Collective solve body; a_root is consumed at world rank 0 only."""
    grid = build_grid(config.p_total, config.p_x, config.p_y, comm.pos)
    a_local = distribute_matrix(comm, grid, a_root, config.n)
    tri, factors = trd_distributed(comm, grid, a_local, config.n, config.trd_variant)
    pairs = sept_distributed(comm, tri, config.mems)
    x_local = hit_distributed(comm, grid, factors, pairs, config.n, config.hit_variant)
    return RankResult(
        eigenvalues=pairs.eigenvalues,
        indices=pairs.indices,
        x_local=x_local,
        tridiagonal=tri,
    )


def gather_eigenvectors(rank_results, n):
    """Assemble the full eigenvector matrix from per-rank column shards."""
    x = np.zeros((n, n), order="F")
    for rr in rank_results:
        for j, ell in enumerate(rr.indices):
            x[:, int(ell) - 1] = rr.x_local[:, j]
    return x


def solve(config, a):
    """Run the whole pipeline in a fresh SPMD world; see SolveResult."""
    a = np.asarray(a, dtype=np.float64)
    if a.shape != (config.n, config.n):
        raise ValueError(f"matrix shape {a.shape} does not match n={config.n}")

    def program(comm):
        return solve_embedded(comm, config, a if comm.pos == 0 else None)

    ranks, stats = spawn_spmd(config.p_total, program)
    return SolveResult(
        eigenvalues=ranks[0].eigenvalues.copy(),
        x=gather_eigenvectors(ranks, config.n),
        stats=stats,
        ranks=ranks,
    )
