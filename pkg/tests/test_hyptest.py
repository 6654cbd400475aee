import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats as sps

from biasaudit.errors import DataError, DegenerateDataError
from biasaudit.hyptest import (
    benjamini_yekutieli,
    conover_iman,
    kruskal_wallis,
    ks_two_sample,
    levene,
    rank_midtie,
    shapiro_wilk,
)
from biasaudit import numerics as nm

from reference_impls import (
    by_adjust_reference,
    conover_reference,
    permutation_pvalue_levene,
)


class TestRankMidtie:
    def test_examples(self):
        assert rank_midtie([10, 20, 30]).tolist() == [1, 2, 3]
        assert rank_midtie([1, 1]).tolist() == [1.5, 1.5]
        assert rank_midtie([5, 1, 5]).tolist() == [2.5, 1, 2.5]

    def test_nan_rejected(self):
        with pytest.raises(DataError):
            rank_midtie([1.0, float("nan")])

    def test_empty_rejected(self):
        with pytest.raises(DataError):
            rank_midtie([])

    def test_matches_scipy_rankdata(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            x = np.round(rng.normal(0, 1, 50), 1)
            assert np.allclose(rank_midtie(x), sps.rankdata(x))


class TestShapiroWilk:
    def test_perfect_normal_shape(self):
        n = 100
        x = nm.normal_ppf((np.arange(1, n + 1) - 0.5) / n)
        res = shapiro_wilk(x)
        assert res.statistic > 0.99

    def test_extreme_outlier_rejected(self):
        rng = np.random.default_rng(0)
        x = np.concatenate([rng.normal(0, 0.01, 99), [100.0]])
        assert shapiro_wilk(x).p_value < 0.001

    def test_against_scipy_reference(self):
        rng = np.random.default_rng(42)
        for n in (10, 25, 50, 126, 1000):
            x = rng.normal(0, 1, n)
            ours = shapiro_wilk(x)
            ref = sps.shapiro(x)
            assert abs(ours.statistic - ref.statistic) <= 1e-4
            assert abs(ours.p_value - ref.pvalue) <= 1e-3

    def test_skewed_against_scipy(self):
        rng = np.random.default_rng(7)
        x = rng.exponential(1.0, 200)
        ours = shapiro_wilk(x)
        ref = sps.shapiro(x)
        assert abs(ours.p_value - ref.pvalue) <= 1e-3

    @given(st.floats(0.1, 10), st.floats(-100, 100))
    @settings(max_examples=60, deadline=None)
    def test_affine_invariance(self, a, b):
        rng = np.random.default_rng(11)
        x = rng.normal(0, 1, 40)
        base = shapiro_wilk(x)
        moved = shapiro_wilk(a * x + b)
        assert moved.statistic == pytest.approx(base.statistic, abs=1e-9)
        assert moved.p_value == pytest.approx(base.p_value, abs=1e-9)

    def test_too_small(self):
        with pytest.raises(DataError):
            shapiro_wilk([1.0, 2.0])

    def test_constant_sample(self):
        with pytest.raises(DegenerateDataError):
            shapiro_wilk([3.0] * 10)

    def test_subsampling_above_validity_cap(self):
        rng = np.random.default_rng(3)
        x = rng.normal(0, 1, 6001)
        res = shapiro_wilk(x, subsample_seed=5)
        assert res.extras["subsampled"] is True
        assert res.extras["n"] == 5000
        assert res.extras["n_input"] == 6001
        again = shapiro_wilk(x, subsample_seed=5)
        assert again.statistic == res.statistic
        other = shapiro_wilk(x, subsample_seed=6)
        assert other.statistic != res.statistic

    def test_n3(self):
        res = shapiro_wilk([1.0, 2.0, 10.0])
        ref = sps.shapiro([1.0, 2.0, 10.0])
        assert res.statistic == pytest.approx(ref.statistic, abs=1e-6)
        assert res.p_value == pytest.approx(ref.pvalue, abs=1e-6)


class TestLevene:
    def test_identical_groups(self):
        g = [1.0, 2.0, 3.0, 4.0]
        res = levene([g, g])
        assert res.statistic == pytest.approx(0.0, abs=1e-12)
        assert res.p_value == pytest.approx(1.0)

    def test_per_group_shift_invariance(self):
        rng = np.random.default_rng(1)
        groups = [rng.normal(0, s, 20) for s in (1.0, 2.0, 1.5)]
        base = levene(groups)
        shifted = [g + c for g, c in zip(groups, (5.0, -3.0, 100.0))]
        moved = levene(shifted)
        assert moved.statistic == pytest.approx(base.statistic, rel=1e-10)
        assert moved.p_value == pytest.approx(base.p_value, rel=1e-10)

    def test_global_scale_invariance_mean_centered(self):
        rng = np.random.default_rng(2)
        groups = [rng.normal(0, s, 25) for s in (1.0, 3.0)]
        base = levene(groups, centering="mean")
        scaled = levene([g * 7.5 for g in groups], centering="mean")
        assert scaled.statistic == pytest.approx(base.statistic, rel=1e-10)

    def test_detects_variance_difference_with_permutation_oracle(self):
        rng = np.random.default_rng(3)
        groups = [rng.normal(0, 1, 50), rng.normal(0, 3, 50)]
        res = levene(groups, centering="mean")
        assert res.p_value < 0.01
        perm = permutation_pvalue_levene(groups, "mean", nperm=4000, seed=0)
        assert perm < 0.01

    def test_matches_scipy_both_centerings(self):
        rng = np.random.default_rng(4)
        groups = [rng.normal(0, 1, 30), rng.normal(0.5, 2, 25), rng.normal(0, 1.5, 40)]
        for centering in ("mean", "median"):
            ours = levene(groups, centering=centering)
            ref = sps.levene(*groups, center=centering)
            assert ours.statistic == pytest.approx(ref.statistic, rel=1e-12)
            assert ours.p_value == pytest.approx(ref.pvalue, rel=1e-10)

    def test_errors(self):
        with pytest.raises(DataError):
            levene([[1.0, 2.0]])
        with pytest.raises(DataError):
            levene([[1.0], [2.0]])
        with pytest.raises(DegenerateDataError):
            levene([[1.0, 1.0], [2.0, 2.0]])
        with pytest.raises(DataError):
            levene([[1.0, 2.0], [3.0, 4.0]], centering="mode")


class TestKruskalWallis:
    def test_hand_case(self):
        res = kruskal_wallis([[1, 2, 3], [4, 5, 6], [7, 8, 9]])
        assert res.statistic == pytest.approx(7.2, abs=1e-9)
        assert res.p_value == pytest.approx(math.exp(-3.6), abs=1e-9)

    def test_identical_multisets(self):
        res = kruskal_wallis([[3, 1, 2], [1, 2, 3]])
        assert res.statistic == pytest.approx(0.0, abs=1e-12)
        assert res.p_value == pytest.approx(1.0)

    def test_rank_invariance_bit_identical(self):
        rng = np.random.default_rng(5)
        groups = [rng.normal(0, 1, 15) for _ in range(3)]
        base = kruskal_wallis(groups)
        transformed = kruskal_wallis([np.exp(g) for g in groups])
        assert transformed.statistic == base.statistic
        assert transformed.p_value == base.p_value

    def test_matches_scipy_with_ties(self):
        rng = np.random.default_rng(6)
        groups = [np.round(rng.normal(0, 1, 20), 1) for _ in range(4)]
        ours = kruskal_wallis(groups)
        ref = sps.kruskal(*groups)
        assert ours.statistic == pytest.approx(ref.statistic, rel=1e-12)
        assert ours.p_value == pytest.approx(ref.pvalue, rel=1e-10)

    def test_errors(self):
        with pytest.raises(DataError):
            kruskal_wallis([[1.0, 2.0, 3.0]])
        with pytest.raises(DataError):
            kruskal_wallis([[1.0, 2.0], []])
        with pytest.raises(DegenerateDataError):
            kruskal_wallis([[2.0, 2.0], [2.0, 2.0]])


class TestConoverIman:
    def test_equal_mean_ranks(self):
        res = conover_iman([[1, 4, 2, 3], [1, 2, 3, 4]])
        assert res.t_matrix[0, 1] == pytest.approx(0.0, abs=1e-12)
        assert res.p_matrix[0, 1] == pytest.approx(1.0)

    def test_matrix_structure(self):
        res = conover_iman([[1, 2, 3], [4, 5, 6], [7, 8, 9]])
        assert np.allclose(res.p_matrix, res.p_matrix.T)
        assert np.allclose(np.diag(res.p_matrix), 1.0)
        assert np.allclose(res.t_matrix, -res.t_matrix.T)
        assert np.allclose(np.diag(res.t_matrix), 0.0)

    def test_against_reference_implementation(self):
        rng = np.random.default_rng(7)
        datasets = [
            [[1, 2, 3], [4, 5, 6], [7, 8, 9]],
            [rng.normal(0, 1, 12), rng.normal(0.6, 1, 9), rng.normal(0, 2, 15)],
            [np.round(rng.normal(0, 1, 20), 1) for _ in range(4)],
            [rng.normal(0, 1, 30), rng.normal(1.5, 1, 8)],
        ]
        for groups in datasets:
            groups = [np.asarray(g, dtype=float) for g in groups]
            ours = conover_iman(groups)
            ref = conover_reference(groups)
            assert np.max(np.abs(ours.p_matrix - ref)) <= 1e-6

    def test_degenerate_separation_flagged(self):
        res = conover_iman([[1.0, 1.0, 1.0], [2.0, 2.0, 2.0]])
        assert res.degenerate is True
        assert res.p_matrix[0, 1] == 0.0
        assert res.t_matrix[0, 1] == 0.0

    def test_omnibus_override_changes_df(self):
        groups = [[1.0, 2.0, 5.0, 7.0], [3.0, 4.0, 8.0, 9.0]]
        default = conover_iman(groups)
        h6 = kruskal_wallis(groups).statistic
        reused = conover_iman(groups, omnibus=(h6, 4))
        assert default.df == 8 - 2
        assert reused.df == 8 - 4
        assert reused.method == "conover_iman_reused_omnibus"


class TestKsTwoSample:
    def test_identical(self):
        res = ks_two_sample([1, 2, 3], [1, 2, 3])
        assert res.statistic == 0.0
        assert res.p_value == 1.0

    def test_disjoint(self):
        assert ks_two_sample([1, 2], [3, 4]).statistic == 1.0

    def test_hand_walked_merge(self):
        res = ks_two_sample([1, 2, 3, 4], [1.5, 2.5, 3.5, 4.5])
        assert res.statistic == 0.25

    def test_asymptotic_tail_formula(self):
        rng = np.random.default_rng(8)
        a = rng.normal(0, 1, 126)
        b = rng.normal(0.4, 1, 200)
        res = ks_two_sample(a, b)
        en = math.sqrt(126 * 200 / 326)
        assert res.p_value == pytest.approx(nm.kolmogorov_sf(en * res.statistic), rel=1e-12)
        # D itself matches the reference implementation exactly
        assert res.statistic == pytest.approx(sps.ks_2samp(a, b).statistic, abs=1e-14)

    def test_rank_invariance_bit_identical(self):
        rng = np.random.default_rng(9)
        a = rng.normal(0, 1, 20)
        b = rng.normal(0.3, 1, 25)
        base = ks_two_sample(a, b)
        moved = ks_two_sample(np.exp(a), np.exp(b))
        assert moved.statistic == base.statistic
        assert moved.p_value == base.p_value

    def test_empty_rejected(self):
        with pytest.raises(DataError):
            ks_two_sample([], [1.0])


class TestBenjaminiYekutieli:
    def test_single(self):
        assert benjamini_yekutieli([0.37]) == [0.37]

    def test_hand_case_all_equal(self):
        adj = benjamini_yekutieli([0.01, 0.02, 0.03, 0.04])
        for v in adj:
            assert v == pytest.approx(1.0 / 12.0, abs=1e-12)

    def test_against_statsmodels(self):
        rng = np.random.default_rng(10)
        for _ in range(10):
            ps = rng.uniform(0, 1, 20).tolist()
            ours = benjamini_yekutieli(ps)
            ref = by_adjust_reference(ps)
            assert np.allclose(ours, ref, atol=1e-12)

    @given(st.lists(st.floats(0, 1), min_size=1, max_size=40))
    @settings(max_examples=150, deadline=None)
    def test_dominates_input_and_clamped(self, ps):
        adj = benjamini_yekutieli(ps)
        for raw, a in zip(ps, adj):
            assert a >= raw - 1e-15
            assert a <= 1.0

    @given(st.lists(st.floats(0, 1), min_size=2, max_size=40))
    @settings(max_examples=150, deadline=None)
    def test_monotone_in_sorted_order(self, ps):
        adj = np.asarray(benjamini_yekutieli(ps))
        order = np.argsort(ps, kind="stable")
        sorted_adj = adj[order]
        assert np.all(np.diff(sorted_adj) >= -1e-15)

    def test_domain(self):
        with pytest.raises(DataError):
            benjamini_yekutieli([1.5])
        with pytest.raises(DataError):
            benjamini_yekutieli([])


class TestNullUniformity:
    """Null p-value distributions are approximately uniform at audit sizes."""

    N_SIMS = 2000

    def test_kruskal_wallis_null_rate(self):
        rng = np.random.default_rng(123)
        hits = sum(
            kruskal_wallis([rng.normal(0, 1, 126) for _ in range(6)]).p_value < 0.05
            for _ in range(self.N_SIMS)
        )
        assert 0.035 <= hits / self.N_SIMS <= 0.065

    def test_levene_null_rate(self):
        rng = np.random.default_rng(124)
        hits = sum(
            levene([rng.normal(0, 1, 126) for _ in range(6)], centering="mean").p_value < 0.05
            for _ in range(self.N_SIMS)
        )
        assert 0.035 <= hits / self.N_SIMS <= 0.065

    def test_ks_null_rate(self):
        rng = np.random.default_rng(125)
        hits = sum(
            ks_two_sample(rng.normal(0, 1, 378), rng.normal(0, 1, 378)).p_value < 0.05
            for _ in range(self.N_SIMS)
        )
        assert 0.035 <= hits / self.N_SIMS <= 0.065
