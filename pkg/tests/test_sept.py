"""Tridiagonal eigensolver: Sturm counts, multi-section, inverse iteration."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from smalleig.densecore import TridiagonalMatrix, frank_eigenvalues, frank_matrix, trd_sequential
from smalleig.msgnet import spawn_spmd
from smalleig.sept import (
    MemsParams,
    inverse_iteration,
    mems_eigenvalues,
    sept_distributed,
    sturm_count,
    tridiagonal_eigenvectors,
)


def random_tridiagonal(n, seed):
    rng = np.random.default_rng(seed)
    return TridiagonalMatrix(d=rng.standard_normal(n), e=rng.standard_normal(max(n - 1, 0)))


@pytest.fixture(scope="module")
def frank_tri():
    return trd_sequential(frank_matrix(100))[0]


class TestSturm:
    @given(st.integers(1, 25), st.integers(0, 10**6))
    @settings(max_examples=80, deadline=None)
    def test_count_is_monotone_staircase(self, n, seed):
        tri = random_tridiagonal(n, seed)
        lo, hi = tri.gershgorin()
        sigmas = np.linspace(lo - 1.0, hi + 1.0, 40)
        counts = sturm_count(tri, sigmas)
        assert np.all(np.diff(counts) >= 0)
        assert counts[0] == 0 and counts[-1] == n

    def test_counts_locate_known_spectrum(self):
        tri = random_tridiagonal(12, 5)
        ev = np.linalg.eigvalsh(tri.to_dense())
        mids = (ev[:-1] + ev[1:]) / 2
        assert list(sturm_count(tri, mids)) == list(range(1, 12))


class TestMems:
    @pytest.mark.parametrize("n", [1, 2, 3, 10, 60])
    def test_matches_dense_solver(self, n):
        tri = random_tridiagonal(n, n)
        lam = mems_eigenvalues(tri)
        ref = np.linalg.eigvalsh(tri.to_dense())[::-1]
        assert np.abs(lam - ref).max() <= 10 * MemsParams().tolerance(tri)

    def test_descending_order(self):
        lam = mems_eigenvalues(random_tridiagonal(30, 9))
        assert np.all(np.diff(lam) <= 0)

    @pytest.mark.parametrize("ml", [1, 2, 4])
    def test_el_never_changes_bits(self, frank_tri, ml):
        a = mems_eigenvalues(frank_tri, MemsParams(ml=ml, el=1))
        b = mems_eigenvalues(frank_tri, MemsParams(ml=ml, el=8))
        c = mems_eigenvalues(frank_tri, MemsParams(ml=ml, el=75))
        assert np.array_equal(a, b) and np.array_equal(b, c)

    def test_ml_variants_agree_within_twice_tol(self, frank_tri):
        tol = MemsParams().tolerance(frank_tri)
        results = [
            mems_eigenvalues(frank_tri, MemsParams(ml=ml, el=el))
            for ml in (1, 2, 4)
            for el in (1, 8, 75)
        ]
        for a in results:
            for b in results:
                assert np.abs(a - b).max() <= 2 * tol

    def test_explicit_tolerance_respected(self):
        tri = random_tridiagonal(20, 3)
        ref = np.linalg.eigvalsh(tri.to_dense())[::-1]
        lam = mems_eigenvalues(tri, MemsParams(tol=1e-6))
        assert np.abs(lam - ref).max() <= 1e-5

    def test_multiple_eigenvalue(self):
        tri = TridiagonalMatrix(d=np.array([2.0, 2.0, 2.0]), e=np.zeros(2))
        assert np.allclose(mems_eigenvalues(tri), 2.0, atol=1e-12)


class TestInverseIteration:
    @pytest.mark.parametrize("n", [1, 2, 8, 40])
    def test_produces_unit_eigenvectors(self, n):
        tri = random_tridiagonal(n, 100 + n)
        lam = mems_eigenvalues(tri)
        t = tri.to_dense()
        for m, ell in [(0, n), (n - 1, 1), (n // 2, n - n // 2)]:
            v = inverse_iteration(tri, lam[ell - 1], m)
            assert np.isclose(np.linalg.norm(v), 1.0)
            resid = np.linalg.norm(t @ v - lam[ell - 1] * v)
            assert resid <= 1e-10 * max(tri.norm_inf(), 1.0)

    def test_deterministic_and_sign_fixed(self):
        tri = random_tridiagonal(15, 7)
        lam = mems_eigenvalues(tri)
        a = inverse_iteration(tri, lam[3], 11)
        b = inverse_iteration(tri, lam[3], 11)
        assert np.array_equal(a, b)
        assert a[np.argmax(np.abs(a))] > 0

    def test_exact_eigenvalue_shift_survives(self):
        # shifting by an exactly representable eigenvalue must not blow up
        tri = TridiagonalMatrix(d=np.array([1.0, 2.0, 3.0]), e=np.zeros(2))
        v = inverse_iteration(tri, 2.0, 1)
        assert np.isclose(np.linalg.norm(v), 1.0)


class TestEigenvectorSet:
    def test_clustered_spectrum_stays_orthogonal(self):
        # near-multiple eigenvalues: plain inverse iteration would give
        # nearly parallel vectors without the cluster handling
        d = np.array([1.0, 1.0 + 1e-12, 1.0 + 2e-12, 5.0])
        tri = TridiagonalMatrix(d=d, e=np.full(3, 1e-13))
        lam = mems_eigenvalues(tri)
        v = tridiagonal_eigenvectors(tri, lam)
        assert np.abs(v.T @ v - np.eye(4)).max() <= 1e-12

    def test_frank_vectors(self, frank_tri):
        lam = mems_eigenvalues(frank_tri)
        v = tridiagonal_eigenvectors(frank_tri, lam)
        t = frank_tri.to_dense()
        assert np.abs(t @ v - v * lam[None, :]).max() <= 1e-9
        assert np.abs(v.T @ v - np.eye(100)).max() <= 1e-12


class TestDistributed:
    @pytest.mark.parametrize("p", [1, 2, 4, 8])
    def test_zero_messages_and_owned_columns(self, p):
        tri = trd_sequential(frank_matrix(17))[0]
        results, stats = spawn_spmd(p, lambda comm: sept_distributed(comm, tri))
        assert stats.total("msgs") == 0
        assert stats.total("calls") == 0
        owned = np.concatenate([r.indices for r in results])
        assert sorted(owned.tolist()) == list(range(1, 18))
        for r in results:
            assert np.array_equal(r.eigenvalues, results[0].eigenvalues)

    def test_replication_check_fires_on_divergent_input(self):
        def prog(comm):
            tri = TridiagonalMatrix(d=np.array([1.0, float(comm.pos)]), e=np.array([0.5]))
            return sept_distributed(comm, tri)

        with pytest.raises(Exception, match="replicated tridiagonal"):
            spawn_spmd(2, prog)

    def test_frank_spectrum_end_to_end(self):
        n = 100
        tri = trd_sequential(frank_matrix(n))[0]
        results, _ = spawn_spmd(4, lambda comm: sept_distributed(comm, tri))
        ref = frank_eigenvalues(n)
        assert np.abs(results[0].eigenvalues - ref).max() <= 1e-10 * ref[0]
