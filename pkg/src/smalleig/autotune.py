"""Auto-tuning search over the communication variants.

The search is staged rather than exhaustive:

* reduction step: sweep the row-reduction implementations (pivot send
  fixed to blocking), then sweep the pivot-send candidates at the best
  reduction; the configuration shared between the two sweeps is taken
  from the cost cache instead of being re-run.
* back-transform step: sweep all 14 blocking factors with the block
  broadcast gather, then sweep the three gather implementations at the
  winning blocking factor (always 14 + 3 = 17 evaluations).

Ties break toward the earlier-listed candidate.  Costs come from a
caller-supplied runner, normally a full counted solve (see
make_counter_runner); the default metric is the total message count.
"""

import time
from dataclasses import dataclass, field

from .hit import GATHER_BCAST, GATHER_BLOCK_BCAST, GATHER_ISEND, HitVariant
from .solver import SolveConfig, solve
from .trd import (
    PIVOT_BLOCKING,
    PIVOT_NONBLOCKING,
    REDUCE_ALLREDUCE,
    REDUCE_TREE,
    TrdVariant,
)

MBLK_CANDIDATES = (1, 2, 4, 8, 12, 16, 32, 48, 56, 64, 80, 96, 112, 128)
COST_METRICS = ("messages", "bytes", "time")


@dataclass(frozen=True)
class TuneSpace:
    trd_reduce: tuple = (REDUCE_TREE, REDUCE_ALLREDUCE)
    trd_pivot: tuple = (
        (PIVOT_BLOCKING, 0.0),
        (PIVOT_NONBLOCKING, 0.25),
        (PIVOT_NONBLOCKING, 0.5),
        (PIVOT_NONBLOCKING, 1.0),
    )
    hit_gather: tuple = (GATHER_BCAST, GATHER_ISEND, GATHER_BLOCK_BCAST)
    mblk: tuple = MBLK_CANDIDATES

    def __post_init__(self):
        if not (self.trd_reduce and self.trd_pivot and self.hit_gather and self.mblk):
            raise ValueError("all candidate lists must be non-empty")


@dataclass(frozen=True)
class VariantConfig:
    trd: TrdVariant
    hit: HitVariant


@dataclass
class TuneResult:
    best: VariantConfig
    costs: dict  # VariantConfig -> cost, every evaluated point
    trd_trace: list = field(default_factory=list)  # (VariantConfig, cost), in order
    hit_trace: list = field(default_factory=list)

    @property
    def evaluations(self):
        return len(self.trd_trace) + len(self.hit_trace)


def _argmin(pairs):
    """Index of the minimum cost; first wins on ties."""
    best = 0
    for i in range(1, len(pairs)):
        if pairs[i][1] < pairs[best][1]:
            best = i
    return best


def tune(space, runner, cost_metric="messages"):
    """Staged variant search; runner(trd_variant, hit_variant) -> cost."""
    if cost_metric not in COST_METRICS:
        raise ValueError(f"unknown cost metric {cost_metric!r}")
    costs = {}

    def run(trd, hit):
        cfg = VariantConfig(trd=trd, hit=hit)
        cost = runner(trd, hit)
        costs[cfg] = cost
        return cfg, cost

    # --- reduction stage (probe back-transform variant held fixed) -------
    hit_probe = HitVariant()
    trd_trace = []
    sweep = []
    for reduce_impl in space.trd_reduce:
        cfg, cost = run(TrdVariant(PIVOT_BLOCKING, 0.0, reduce_impl), hit_probe)
        trd_trace.append((cfg, cost))
        sweep.append((cfg.trd, cost))
    best_reduce = sweep[_argmin(sweep)][0].reduce_impl

    sweep = []
    for pivot_send, frac in space.trd_pivot:
        trd = TrdVariant(pivot_send, frac, best_reduce)
        cfg = VariantConfig(trd=trd, hit=hit_probe)
        if cfg in costs:  # shared point: reuse the cached cost
            sweep.append((trd, costs[cfg]))
            continue
        cfg, cost = run(trd, hit_probe)
        trd_trace.append((cfg, cost))
        sweep.append((trd, cost))
    best_trd = sweep[_argmin(sweep)][0]

    # --- back-transform stage: blocking factor, then gather --------------
    hit_trace = []
    sweep = []
    for mblk in space.mblk:
        cfg, cost = run(best_trd, HitVariant(GATHER_BLOCK_BCAST, mblk))
        hit_trace.append((cfg, cost))
        sweep.append((cfg.hit, cost))
    best_mblk = sweep[_argmin(sweep)][0].mblk

    sweep = []
    for gather in space.hit_gather:
        cfg, cost = run(best_trd, HitVariant(gather, best_mblk))
        hit_trace.append((cfg, cost))
        sweep.append((cfg.hit, cost))
    best_hit = sweep[_argmin(sweep)][0]

    return TuneResult(
        best=VariantConfig(trd=best_trd, hit=best_hit),
        costs=costs,
        trd_trace=trd_trace,
        hit_trace=hit_trace,
    )


def make_counter_runner(n, p_x, p_y, a=None, mems=None, cost_metric="messages"):
    """Runner evaluating a full counted solve of the given problem."""
    from .densecore import frank_matrix
    from .sept import MemsParams

    if a is None:
        a = frank_matrix(n)
    mems = mems if mems is not None else MemsParams()

    def runner(trd_variant, hit_variant):
        cfg = SolveConfig(
            n=n, p_x=p_x, p_y=p_y, trd_variant=trd_variant, hit_variant=hit_variant, mems=mems
        )
        t0 = time.perf_counter()
        result = solve(cfg, a)
        wall = time.perf_counter() - t0
        if cost_metric == "messages":
            return result.stats.total("msgs")
        if cost_metric == "bytes":
            return result.stats.total("bytes")
        return wall

    return runner
