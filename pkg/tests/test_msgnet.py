"""Message fabric: semantics, accounting, failure detection."""

import math

import numpy as np
import pytest

from smalleig.msgnet import (
    DeadlockError,
    ProtocolError,
    SpmdError,
    spawn_spmd,
)
from smalleig.procgrid import build_grid


class TestPointToPoint:
    def test_send_recv_roundtrip(self):
        def prog(comm):
            if comm.pos == 0:
                comm.send(1, [1.5, -2.0])
                return None
            return comm.recv(0)

        results, stats = spawn_spmd(2, prog)
        assert list(results[1]) == [1.5, -2.0]
        assert stats.total("msgs") == 1
        assert stats.total("bytes") == 16

    def test_fifo_per_channel(self):
        def prog(comm):
            if comm.pos == 0:
                for v in (1.0, 2.0, 3.0):
                    comm.send(1, [v])
                return None
            return [comm.recv(0)[0] for _ in range(3)]

        results, _ = spawn_spmd(2, prog)
        assert results[1] == [1.0, 2.0, 3.0]

    def test_tags_are_separate_channels(self):
        def prog(comm):
            if comm.pos == 0:
                comm.send(1, [10.0], tag=0)
                comm.send(1, [20.0], tag=7)
                return None
            late = comm.recv(0, tag=7)
            early = comm.recv(0, tag=0)
            return (early[0], late[0])

        results, _ = spawn_spmd(2, prog)
        assert results[1] == (10.0, 20.0)

    def test_isend_requires_wait(self):
        def prog(comm):
            if comm.pos == 0:
                comm.isend(1, [1.0])  # never waited
            else:
                comm.recv(0)

        with pytest.raises(SpmdError, match="never completed"):
            spawn_spmd(2, prog)

    def test_unreceived_message_is_an_error(self):
        def prog(comm):
            if comm.pos == 0:
                comm.send(1, [1.0])

        with pytest.raises(SpmdError, match="orphan"):
            spawn_spmd(2, prog)


class TestCollectives:
    def test_bcast(self):
        def prog(comm):
            payload = [4.0, 5.0] if comm.pos == 2 else None
            return comm.bcast(2, payload)

        results, stats = spawn_spmd(4, prog)
        assert all(list(r) == [4.0, 5.0] for r in results)
        assert stats.by_kind["bcast"].calls == 1
        assert stats.by_kind["bcast"].msgs == 3
        assert stats.by_kind["bcast"].bytes == 4 * 16  # group * payload
        assert stats.by_kind["bcast"].delivered_bytes == 3 * 16

    def test_allreduce_sum_left_fold_order(self):
        # result must equal ((x0 + x1) + x2): a fixed fold, not pairwise
        xs = [1e16, 1.0, -1e16]

        def prog(comm):
            return comm.allreduce_sum([xs[comm.pos]])[0]

        results, _ = spawn_spmd(3, prog)
        expect = (xs[0] + xs[1]) + xs[2]
        assert all(r == expect for r in results)

    def test_allreduce_exact_is_partition_independent(self):
        rng = np.random.default_rng(0)
        vals = rng.standard_normal(30) * 10.0 ** rng.integers(-6, 7, 30)
        want = math.fsum(vals)

        def prog(comm, cut):
            from smalleig.kernels import expansion_of

            lo, hi = cut[comm.pos], cut[comm.pos + 1]
            exp = expansion_of(vals[lo:hi])
            out = comm.allreduce_exact(exp, [len(exp)])
            return out[0]

        for cuts in ([0, 10, 20, 30], [0, 1, 29, 30], [0, 0, 15, 30]):
            results, _ = spawn_spmd(3, prog, cuts)
            assert all(r == want for r in results), cuts

    def test_reduce_binary_tree_totals(self):
        def prog(comm):
            return comm.reduce_binary_tree([float(comm.pos)])[0]

        for p in (1, 2, 3, 4, 7, 8):
            results, _ = spawn_spmd(p, prog)
            assert all(r == float(sum(range(p))) for r in results)

    def test_collective_op_mismatch_detected(self):
        def prog(comm):
            if comm.pos == 0:
                comm.bcast(0, [1.0])
            else:
                comm.allreduce_sum([1.0])

        with pytest.raises((ProtocolError, SpmdError)):
            spawn_spmd(2, prog)

    def test_assert_uniform_passes_and_counts_nothing(self):
        def prog(comm):
            comm.assert_uniform([3.0, 4.0])

        _, stats = spawn_spmd(3, prog)
        assert stats.total("calls") == 0
        assert stats.total("msgs") == 0

    def test_assert_uniform_catches_divergence(self):
        def prog(comm):
            comm.assert_uniform([float(comm.pos)])

        with pytest.raises((ProtocolError, SpmdError)):
            spawn_spmd(2, prog)


class TestSplit:
    def test_grid_split_routing(self):
        def prog(comm):
            grid = build_grid(6, 2, 3, comm.pos)
            row, col = comm.split_grid(grid)
            # row communicator shares my_x; broadcast my_x from its rank 0
            got_x = row.bcast(0, [float(grid.my_x)] if row.pos == 0 else None)[0]
            got_y = col.bcast(0, [float(grid.my_y)] if col.pos == 0 else None)[0]
            return (row.size, col.size, got_x == grid.my_x, got_y == grid.my_y)

        results, _ = spawn_spmd(6, prog)
        assert all(r == (3, 2, True, True) for r in results)


class TestFailureModes:
    def test_deadlock_detection(self):
        def prog(comm):
            comm.recv(1 - comm.pos)  # both wait forever

        with pytest.raises(DeadlockError, match="blocked at recv"):
            spawn_spmd(2, prog)

    def test_exception_propagates_from_failing_rank(self):
        def prog(comm):
            if comm.pos == 1:
                raise ValueError("boom")
            comm.recv(1)

        with pytest.raises(ValueError, match="boom"):
            spawn_spmd(2, prog)

    def test_nonfinite_payload_rejected(self):
        def prog(comm):
            if comm.pos == 0:
                comm.send(1, [np.nan])
            else:
                comm.recv(0)

        with pytest.raises(ValueError, match="non-finite"):
            spawn_spmd(2, prog)


class TestDeterminism:
    def test_counters_and_results_stable(self):
        def prog(comm):
            acc = comm.allreduce_sum(np.full(5, comm.pos + 1.0))
            comm.bcast(0, acc if comm.pos == 0 else None)
            if comm.pos == 0:
                comm.send(1, acc, category="extra")
            elif comm.pos == 1:
                comm.recv(0)
            return acc

        r1, s1 = spawn_spmd(3, prog)
        r2, s2 = spawn_spmd(3, prog)
        assert all(np.array_equal(a, b) for a, b in zip(r1, r2))
        assert s1.snapshot() == s2.snapshot()

    def test_category_accounting(self):
        def prog(comm):
            if comm.pos == 0:
                comm.send(1, np.arange(3.0), category="phase A")
            elif comm.pos == 1:
                comm.recv(0)
            comm.allreduce_sum([1.0], category="phase B")

        _, stats = spawn_spmd(2, prog)
        assert stats.category("phase A").msgs == 1
        assert stats.category("phase A").bytes == 24
        assert stats.category("phase B").calls == 1
        assert stats.by_kind["p2p_send"].msgs == 1
