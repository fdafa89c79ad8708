"""Kernel backends: exactness properties and cross-backend agreement."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from smalleig.kernels import get_backend

floats = st.floats(
    min_value=-1e12, max_value=1e12, allow_nan=False, allow_infinity=False
)
float_lists = st.lists(floats, min_size=0, max_size=40)


def backends():
    mods = [get_backend("python")]
    try:
        mods.append(get_backend("c"))
    except ImportError:
        pass
    return mods


@pytest.fixture(params=backends(), ids=lambda m: m.BACKEND)
def kern(request):
    return request.param


class TestExpansion:
    @given(float_lists)
    @settings(max_examples=200, deadline=None)
    def test_expansion_sums_exactly(self, xs):
        # the defining property: components sum exactly to the true sum
        for mod in backends():
            exp = mod.expansion_of(xs)
            assert math.fsum(exp) == math.fsum(xs)

    def test_expansion_captures_cancellation(self, kern):
        # 1e16 + 1 - 1e16 loses the 1 in plain float addition
        exp = kern.expansion_of([1e16, 1.0, -1e16])
        assert math.fsum(exp) == 1.0

    def test_empty(self, kern):
        assert math.fsum(kern.expansion_of([])) == 0.0

    @given(float_lists)
    @settings(max_examples=100, deadline=None)
    def test_backends_round_identically(self, xs):
        vals = {math.fsum(mod.expansion_of(xs)) for mod in backends()}
        assert len(vals) == 1


class TestExactDot:
    @given(st.integers(0, 30), st.integers(0, 2**32 - 1))
    @settings(max_examples=150, deadline=None)
    def test_matches_fsum_of_products(self, n, seed):
        rng = np.random.default_rng(seed)
        x = rng.standard_normal(n) * 10.0 ** rng.integers(-8, 8, size=n)
        y = rng.standard_normal(n)
        want = math.fsum(np.multiply(x, y))
        for mod in backends():
            assert mod.exact_dot(x, y) == want

    def test_order_independent(self, kern):
        rng = np.random.default_rng(3)
        x, y = rng.standard_normal(25), rng.standard_normal(25)
        perm = rng.permutation(25)
        assert kern.exact_dot(x, y) == kern.exact_dot(x[perm], y[perm])


class TestDotExpansions:
    @pytest.mark.parametrize("shape", [(0, 5), (4, 0), (7, 9), (1, 1)])
    def test_rows_round_to_exact_dot(self, kern, shape):
        rng = np.random.default_rng(11)
        a = rng.standard_normal(shape)
        t = rng.standard_normal(shape[1])
        flat, lens = kern.dot_expansions(a, t)
        assert len(lens) == shape[0]
        assert lens.sum() == len(flat)
        pos = 0
        for r in range(shape[0]):
            chunk = flat[pos : pos + lens[r]]
            pos += lens[r]
            assert math.fsum(chunk) == kern.exact_dot(a[r], t)

    def test_partition_invariance(self, kern):
        # splitting the columns across "ranks" must not change the
        # correctly rounded row sums - this is what makes the distributed
        # reduction bitwise-reproducible
        rng = np.random.default_rng(5)
        a = rng.standard_normal((6, 12))
        t = rng.standard_normal(12)
        whole, wl = kern.dot_expansions(a, t)
        parts = []
        for cols in (slice(0, 5), slice(5, 12)):
            f, l = kern.dot_expansions(a[:, cols], t[cols])
            pos = 0
            chunks = []
            for n in l:
                chunks.append(f[pos : pos + n])
                pos += n
            parts.append(chunks)
        pos = 0
        for r in range(6):
            merged = np.concatenate([parts[0][r], parts[1][r]])
            chunk = whole[pos : pos + wl[r]]
            pos += wl[r]
            assert math.fsum(merged) == math.fsum(chunk)


class TestSturmCounts:
    @pytest.mark.parametrize("n", [1, 2, 5, 20])
    def test_counts_match_dense_spectrum(self, kern, n):
        rng = np.random.default_rng(n)
        d = rng.standard_normal(n)
        e = rng.standard_normal(max(n - 1, 0))
        dense = np.diag(d) + np.diag(e, 1) + np.diag(e, -1)
        ev = np.linalg.eigvalsh(dense)
        sigmas = np.concatenate([[ev.min() - 1.0], (ev[:-1] + ev[1:]) / 2, [ev.max() + 1.0]])
        got = kern.sturm_counts(d, e * e, sigmas, 1e-30)
        assert list(got) == list(range(n + 1))

    def test_backends_agree(self):
        rng = np.random.default_rng(42)
        d = rng.standard_normal(30)
        e = rng.standard_normal(29)
        sig = rng.standard_normal(50)
        res = [list(mod.sturm_counts(d, e * e, sig, 1e-30)) for mod in backends()]
        assert all(r == res[0] for r in res)


def test_dot_plain_deterministic(kern):
    rng = np.random.default_rng(1)
    x, y = rng.standard_normal(100), rng.standard_normal(100)
    assert kern.dot_plain(x, y) == kern.dot_plain(x, y)
    assert np.isclose(kern.dot_plain(x, y), float(np.dot(x, y)), rtol=1e-12)
