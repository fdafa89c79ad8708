"""Deterministic in-process message-passing fabric.

Runs P logical SPMD processes (one thread each) against a shared fabric
providing point-to-point, non-blocking, and collective operations with
full message/byte accounting.

Determinism contract: for a fixed program, process count, and inputs, all
numeric results and all counters are identical across runs regardless of
physical thread scheduling.  This holds because

* sends are buffered (copy-on-initiate), so no operation's value depends
  on timing;
* every collective combines its contributions in a fixed position order
  (or exactly, for ``allreduce_exact``), computed once at the rendezvous;
* counters are incremented exactly once per operation with values that
  are pure functions of the call.

Deadlock is detected by quiescence: when every live process is blocked
and no blocked call can make progress, all of them abort with a
diagnostic naming each blocked call site.
"""

import itertools
import threading
import time
from collections import deque
from dataclasses import dataclass, field
from math import fsum

import numpy as np

_STALL_LIMIT_S = 120.0


class SpmdError(RuntimeError):
    pass


class DeadlockError(SpmdError):
    pass


class ProtocolError(SpmdError):
    pass


class SpmdAborted(SpmdError):
    """Raised in peer processes after another process failed."""


@dataclass
class _Cat:
    calls: int = 0
    msgs: int = 0
    bytes: int = 0
    delivered_bytes: int = 0


class CommStats:
    """Per-category invocation/message/byte counters.

    ``by_category`` is keyed by the label a call site passes (defaulting
    to the operation kind); ``by_kind`` always rolls up by operation kind
    (p2p_send, bcast, allreduce, ...).
    """

    def __init__(self):
        self.by_category = {}
        self.by_kind = {}

    def _add(self, table, key, calls, msgs, nbytes, delivered):
        c = table.setdefault(key, _Cat())
        c.calls += calls
        c.msgs += msgs
        c.bytes += nbytes
        c.delivered_bytes += delivered

    def add(self, category, kind, calls, msgs, nbytes, delivered):
        self._add(self.by_category, category, calls, msgs, nbytes, delivered)
        self._add(self.by_kind, kind, calls, msgs, nbytes, delivered)

    def category(self, name):
        return self.by_category.get(name, _Cat())

    def total(self, metric="msgs"):
        return sum(getattr(c, metric) for c in self.by_kind.values())

    def snapshot(self):
        """Category -> (calls, msgs, bytes) mapping; values are copies."""
        return {
            k: {"calls": c.calls, "msgs": c.msgs, "bytes": c.bytes, "delivered_bytes": c.delivered_bytes}
            for k, c in sorted(self.by_category.items())
        }


@dataclass
class PendingSend:
    """Handle of an in-flight non-blocking send; complete exactly once."""

    _fabric: "Fabric"
    _id: int
    _completed: bool = False


def _as_payload(data):
    arr = np.array(data, dtype=np.float64, ndmin=1, copy=True)
    if arr.ndim != 1:
        raise ValueError("payloads must be 1-D numeric vectors")
    if arr.size and not np.all(np.isfinite(arr)):
        raise ValueError("payload contains non-finite values")
    return arr


class Fabric:
    def __init__(self, p):
        self.p = p
        self.stats = CommStats()
        self._cond = threading.Condition()
        self._queues = {}
        self._collectives = {}
        self._blocked = {}
        self._finished = set()
        self._abort = None
        self._abort_is_deadlock = False
        self._pending_ids = itertools.count()
        self._open_pendings = set()
        self.sent_bytes = 0
        self.received_bytes = 0

    # -- blocking machinery -------------------------------------------------

    def _wait_for(self, world_rank, desc, predicate):
        """Block until predicate() holds; participates in deadlock detection."""
        with self._cond:
            deadline = time.monotonic() + _STALL_LIMIT_S
            while True:
                if self._abort is not None:
                    self._raise_abort()
                if predicate():
                    return
                self._blocked[world_rank] = (desc, predicate)
                self._check_stuck()
                self._cond.wait(timeout=5.0)
                self._blocked.pop(world_rank, None)
                if time.monotonic() > deadline:
                    raise SpmdError(f"fabric stalled beyond {_STALL_LIMIT_S}s at {desc}")

    def _check_stuck(self):
        # Called with the lock held.  Deadlocked iff every process is
        # finished or blocked and no blocked predicate is satisfiable.
        if self._abort is not None:
            return  # already failing for another reason
        if len(self._blocked) + len(self._finished) < self.p:
            return
        if any(pred() for _, pred in self._blocked.values()):
            return
        sites = [f"rank {r}: blocked at {desc}" for r, (desc, _) in sorted(self._blocked.items())]
        diag = "deadlock: all live processes blocked with no matching partner\n  " + "\n  ".join(sites)
        self._abort = diag
        self._abort_is_deadlock = True
        self._cond.notify_all()
        raise DeadlockError(diag)

    def _raise_abort(self):
        if self._abort_is_deadlock:
            raise DeadlockError(self._abort)
        raise SpmdAborted(self._abort)

    def abort_from(self, world_rank, exc):
        with self._cond:
            if self._abort is None:
                self._abort = f"rank {world_rank} failed: {exc!r}"
            self._cond.notify_all()

    def mark_finished(self, world_rank):
        with self._cond:
            self._finished.add(world_rank)
            self._blocked.pop(world_rank, None)
            try:
                self._check_stuck()
            except DeadlockError:
                pass  # surfaced in the still-blocked ranks
            self._cond.notify_all()

    # -- point to point -----------------------------------------------------

    def post_message(self, comm, src_pos, dest_pos, tag, payload, category, pending=False):
        arr = _as_payload(payload)
        nbytes = arr.nbytes
        with self._cond:
            if self._abort is not None:
                self._raise_abort()
            self._queues.setdefault((comm.comm_id, src_pos, dest_pos, tag), deque()).append(arr)
            self.stats.add(category or "p2p_send", "p2p_send", 1, 1, nbytes, nbytes)
            self.sent_bytes += nbytes
            if pending:
                pid = next(self._pending_ids)
                self._open_pendings.add(pid)
            self._cond.notify_all()
        return PendingSend(self, pid) if pending else None

    def fetch_message(self, comm, src_pos, dest_pos, tag):
        key = (comm.comm_id, src_pos, dest_pos, tag)

        def ready():
            q = self._queues.get(key)
            return bool(q)

        self._wait_for(
            comm.world_rank,
            f"recv(src={src_pos}, tag={tag}) on comm {comm.comm_id!r}",
            ready,
        )
        with self._cond:
            arr = self._queues[key].popleft()
            self.received_bytes += arr.nbytes
        return arr

    def complete_pending(self, pending):
        with self._cond:
            if pending._completed:
                raise ProtocolError("wait() called twice on one PendingSend")
            pending._completed = True
            self._open_pendings.discard(pending._id)

    # -- collectives --------------------------------------------------------

    def run_collective(self, comm, seq, op, root, payload, category, reducer, counted=True):
        """Generic rendezvous: all members contribute, last arrival reduces."""
        key = (comm.comm_id, seq)
        size = comm.size
        with self._cond:
            if self._abort is not None:
                self._raise_abort()
            state = self._collectives.setdefault(
                key, {"op": op, "root": root, "payloads": {}, "result": None, "done": False, "fetched": 0}
            )
            if state["op"] != op or state["root"] != root:
                self._abort = (
                    f"collective mismatch on comm {comm.comm_id!r} (call #{seq}): "
                    f"{state['op']}/root={state['root']} vs {op}/root={root}"
                )
                self._cond.notify_all()
                raise ProtocolError(self._abort)
            if comm.pos in state["payloads"]:
                raise ProtocolError(f"rank called collective #{seq} twice on comm {comm.comm_id!r}")
            state["payloads"][comm.pos] = payload
            if len(state["payloads"]) == size:
                result, nbytes = reducer(state["payloads"])
                state["result"] = result
                state["done"] = True
                if counted:
                    rbytes = result.nbytes if hasattr(result, "nbytes") else 0
                    self.stats.add(category or op, op, 1, size - 1, nbytes, (size - 1) * rbytes)
                self._cond.notify_all()

        def settled():
            st = self._collectives.get(key)
            return st is None or st["done"] or self._abort is not None

        self._wait_for(comm.world_rank, f"{op}(root={root}) #{seq} on comm {comm.comm_id!r}", settled)
        with self._cond:
            if self._abort is not None and not self._collectives[key]["done"]:
                self._raise_abort()
            state = self._collectives[key]
            result = state["result"]
            state["fetched"] += 1
            if state["fetched"] == size:
                del self._collectives[key]
        return result

    # -- teardown -----------------------------------------------------------

    def check_clean_exit(self):
        orphans = [(k, len(q)) for k, q in self._queues.items() if q]
        if orphans:
            desc = ", ".join(f"{k}: {c} message(s)" for k, c in orphans)
            raise SpmdError(f"orphan messages at exit: {desc}")
        if self._open_pendings:
            raise SpmdError(f"{len(self._open_pendings)} non-blocking send(s) never completed via wait()")
        if self.sent_bytes != self.received_bytes:
            raise SpmdError(
                f"byte conservation violated: sent {self.sent_bytes}, received {self.received_bytes}"
            )


class Communicator:
    """One logical process's endpoint into a process group.

    Owned by exactly one logical process; all cross-process interaction
    flows through the shared fabric.  Ranks in all operations are
    positions within this communicator's group.
    """

    def __init__(self, fabric, comm_id, world_members, pos, world_rank):
        self.fabric = fabric
        self.comm_id = comm_id
        self.world_members = tuple(world_members)
        self.pos = pos
        self.world_rank = world_rank
        self._seq = itertools.count()
        self._tree_seq = itertools.count()

    @property
    def size(self):
        return len(self.world_members)

    @property
    def rank(self):
        return self.pos

    def _check_peer(self, peer):
        if not 0 <= peer < self.size:
            raise ProtocolError(f"rank {peer} not in group of size {self.size}")

    # -- point to point ----------------------------------------------------

    def send(self, dest, payload, tag=0, category=None):
        """Blocking send (buffered: completes immediately)."""
        self._check_peer(dest)
        self.fabric.post_message(self, self.pos, dest, tag, payload, category)

    def isend(self, dest, payload, tag=0, category=None):
        """Non-blocking send; buffered at initiation, complete via wait()."""
        self._check_peer(dest)
        return self.fabric.post_message(self, self.pos, dest, tag, payload, category, pending=True)

    def wait(self, pending):
        self.fabric.complete_pending(pending)

    def recv(self, src, tag=0):
        self._check_peer(src)
        return self.fabric.fetch_message(self, src, self.pos, tag)

    # -- collectives -------------------------------------------------------

    def bcast(self, root, payload=None, category=None):
        """Broadcast root's payload to the whole group."""
        self._check_peer(root)
        if self.pos == root:
            payload = _as_payload(payload)

        def reducer(payloads):
            res = payloads[root]
            return res, self.size * res.nbytes

        out = self.fabric.run_collective(self, next(self._seq), "bcast", root, payload, category, reducer)
        return out.copy()

    def allreduce_sum(self, payload, category=None):
        """Elementwise sum, left-folded in ascending group-rank order."""
        payload = _as_payload(payload)

        def reducer(payloads):
            lengths = {len(p) for p in payloads.values()}
            if len(lengths) != 1:
                raise ProtocolError(f"allreduce payload length mismatch: {sorted(lengths)}")
            acc = payloads[0].copy()
            for pos in range(1, self.size):
                acc = acc + payloads[pos]
            return acc, self.size * payload.nbytes

        out = self.fabric.run_collective(self, next(self._seq), "allreduce", None, payload, category, reducer)
        return out.copy()

    def allreduce_exact(self, flat, lens, category=None):
        """Exact elementwise sum of per-member expansion contributions.

        Each member passes, per result element, a short float vector whose
        exact (error-free) sum is its contribution; every member receives
        the correctly rounded total, so the result is independent of how
        the addends were partitioned across members.
        """
        flat = np.asarray(flat, dtype=np.float64)
        lens = np.asarray(lens, dtype=np.int64)
        splits = np.split(flat, np.cumsum(lens)[:-1]) if len(lens) else []

        def reducer(payloads):
            counts = {len(p) for p in payloads.values()}
            if len(counts) != 1:
                raise ProtocolError(f"exact allreduce element-count mismatch: {sorted(counts)}")
            nelem = len(payloads[0])
            out = np.empty(nelem)
            for e in range(nelem):
                comps = []
                for pos in range(self.size):
                    comps.extend(payloads[pos][e])
                out[e] = fsum(comps)
            # byte accounting uses the logical payload (one rounded value
            # per element per member), keeping counters data-independent
            return out, self.size * out.nbytes

        out = self.fabric.run_collective(self, next(self._seq), "allreduce", None, splits, category, reducer)
        return out.copy()

    def reduce_binary_tree(self, payload, tag=None, category=None):
        """All-ranks sum via an explicit binary combining tree + broadcast.

        Combination order is the tree's: at each round a surviving rank
        adds the received partial onto its own (own + received).  Bits may
        therefore differ from allreduce_sum's left fold.
        """
        if tag is None:
            tag = ("__tree__", next(self._tree_seq))
        acc = _as_payload(payload)
        d = 1
        while d < self.size:
            if self.pos & d:
                self.send(self.pos - d, acc, tag=tag, category=category)
                break
            if self.pos + d < self.size:
                other = self.recv(self.pos + d, tag=tag)
                acc = acc + other
            d *= 2
        return self.bcast(0, acc if self.pos == 0 else None, category=category)

    def assert_uniform(self, values, what="replicated data"):
        """Uncounted debug rendezvous checking bitwise agreement.

        Simulator-level assertion (no messages are accounted): verifies
        that every member holds identical bits, e.g. the replicated T.
        """
        payload = _as_payload(values)

        def reducer(payloads):
            ref = payloads[0]
            for pos in range(1, self.size):
                if len(payloads[pos]) != len(ref) or not np.array_equal(
                    payloads[pos], ref, equal_nan=True
                ):
                    raise ProtocolError(f"{what} differs between group ranks 0 and {pos}")
            return np.zeros(0), 0

        self.fabric.run_collective(
            self, next(self._seq), "debug_check", None, payload, None, reducer, counted=False
        )

    # -- subgroups ---------------------------------------------------------

    def split_grid(self, grid):
        """(row communicator sharing Pi, column communicator sharing Gamma).

        The row communicator groups the P_y ranks with equal my_x (ordered
        by my_y); the column communicator groups the P_x ranks with equal
        my_y (ordered by my_x).
        """
        if self.size != grid.p_total:
            raise ProtocolError("split requires a communicator spanning the full grid")
        row_members = tuple(grid.my_x + y * grid.p_x for y in range(grid.p_y))
        col_members = tuple(x + grid.my_y * grid.p_x for x in range(grid.p_x))
        row = Communicator(
            self.fabric, f"{self.comm_id}.row{grid.my_x}", row_members, grid.my_y, self.world_rank
        )
        col = Communicator(
            self.fabric, f"{self.comm_id}.col{grid.my_y}", col_members, grid.my_x, self.world_rank
        )
        return row, col


def spawn_spmd(p, program, *args):
    """Run ``program(comm, *args)`` on P logical processes to completion.

    Returns (per-rank results list, merged CommStats).  Deterministic for
    fixed inputs; raises the failing rank's error (deadlocks first) after
    all processes have stopped.
    """
    if p < 1:
        raise ValueError("need at least one process")
    fabric = Fabric(p)
    results = [None] * p
    errors = [None] * p

    def runner(r):
        comm = Communicator(fabric, "world", tuple(range(p)), r, r)
        try:
            results[r] = program(comm, *args)
        except BaseException as exc:  # propagate to peers, re-raised below
            errors[r] = exc
            fabric.abort_from(r, exc)
        finally:
            fabric.mark_finished(r)

    threads = [threading.Thread(target=runner, args=(r,), name=f"spmd-{r}") for r in range(p)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()

    for exc in errors:
        if isinstance(exc, DeadlockError):
            raise exc
    for exc in errors:
        if exc is not None and not isinstance(exc, SpmdAborted):
            raise exc
    for exc in errors:
        if exc is not None:
            raise exc
    fabric.check_clean_exit()
    return results, fabric.stats
