"""Backend agreement: the numba kernels and their numpy fallbacks must
compute the same quantities (to roundoff) on the same inputs."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from biasaudit import _kernels as K


def _brute_ks(a, b):
    pooled = np.concatenate([a, b])
    fa = np.array([(a <= x).mean() for x in pooled])
    fb = np.array([(b <= x).mean() for x in pooled])
    return float(np.max(np.abs(fa - fb)))


def _brute_kde(values, grid, h):
    out = np.zeros_like(grid)
    for i, g in enumerate(grid):
        out[i] = np.exp(-0.5 * ((g - values) / h) ** 2).sum()
    return out / (len(values) * h * np.sqrt(2 * np.pi))


class TestRank:
    def test_simple(self):
        assert K.rank_midtie_values(np.array([10.0, 20.0, 30.0])).tolist() == [1.0, 2.0, 3.0]

    def test_ties(self):
        assert K.rank_midtie_values(np.array([5.0, 1.0, 5.0])).tolist() == [2.5, 1.0, 2.5]

    @given(st.lists(st.integers(-5, 5), min_size=1, max_size=60))
    @settings(max_examples=200, deadline=None)
    def test_rank_sum_and_backend_agreement(self, xs):
        values = np.array(xs, dtype=np.float64)
        n = len(values)
        np_ranks = K._rank_midtie_np(values)
        assert np_ranks.sum() == pytest.approx(n * (n + 1) / 2)
        if K._HAVE_NUMBA:
            nb_ranks = K._rank_midtie_nb(values)
            assert np.array_equal(np_ranks, nb_ranks)


class TestKsDistance:
    @given(
        st.lists(st.floats(-5, 5, allow_nan=False), min_size=1, max_size=40),
        st.lists(st.floats(-5, 5, allow_nan=False), min_size=1, max_size=40),
    )
    @settings(max_examples=200, deadline=None)
    def test_matches_brute_force(self, xs, ys):
        a = np.sort(np.array(xs))
        b = np.sort(np.array(ys))
        expected = _brute_ks(a, b)
        assert K._ks_distance_np(a, b) == pytest.approx(expected, abs=1e-12)
        if K._HAVE_NUMBA:
            assert K._ks_distance_nb(a, b) == pytest.approx(expected, abs=1e-12)

    def test_disjoint(self):
        assert K.ks_distance(np.array([1.0, 2.0]), np.array([3.0, 4.0])) == 1.0


class TestKdeEval:
    def test_matches_dense_sum(self):
        rng = np.random.default_rng(5)
        values = np.sort(rng.normal(0, 1, 400))
        h = 0.3
        grid = np.linspace(values[0] - 4 * h, values[-1] + 4 * h, 101)
        expected = _brute_kde(values, grid, h)
        assert np.allclose(K._kde_eval_np(values, grid, h), expected, atol=1e-12)
        if K._HAVE_NUMBA:
            got = K._kde_eval_nb(values, grid, h, K.KDE_CUTOFF_BW * h)
            assert np.allclose(got, expected, atol=1e-12)

    def test_backends_agree(self):
        rng = np.random.default_rng(6)
        values = np.sort(rng.normal(10, 2, 1000))
        h = 0.5
        grid = np.linspace(0, 20, 333)
        a = K._kde_eval_np(values, grid, h)
        if K._HAVE_NUMBA:
            b = K._kde_eval_nb(values, grid, h, K.KDE_CUTOFF_BW * h)
            assert np.allclose(a, b, rtol=1e-12, atol=1e-14)

    def test_far_grid_is_zero(self):
        values = np.array([0.0])
        grid = np.array([100.0])
        assert K.kde_evaluate(values, grid, 1.0)[0] == 0.0
