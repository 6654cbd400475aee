import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from biasaudit.errors import ConfigError, DataError, DegenerateDataError
from biasaudit.featspace import (
    AgeBracketing,
    bracket_ages,
    equal_width_brackets,
    feature_shift_tests,
    kde,
    pca_fit,
    pca_project,
)


class TestPcaFit:
    def test_rank_one_line(self):
        X = np.array([[t, 2.0 * t] for t in range(1, 11)])
        model = pca_fit(X, 2)
        direction = model.components[0]
        assert np.allclose(np.abs(direction), np.array([1.0, 2.0]) / np.sqrt(5.0), atol=1e-12)
        assert model.explained_variance[1] == pytest.approx(0.0, abs=1e-12)

    def test_two_point_hand_case(self):
        X = np.array([[0.0, 0.0], [2.0, 0.0]])
        model = pca_fit(X, 1)
        assert np.allclose(model.mean, [1.0, 0.0])
        assert np.allclose(model.components[0], [1.0, 0.0])
        assert model.explained_variance[0] == pytest.approx(2.0)

    def test_full_rank_reconstruction_and_eigh_oracle(self):
        rng = np.random.default_rng(0)
        X = rng.normal(0, 1, (100, 10))
        model = pca_fit(X, 10)
        scores = pca_project(model, X)
        recon = scores @ model.components + model.mean
        assert np.max(np.abs(recon - X)) < 1e-8
        # independent eigendecomposition oracle
        cov = np.cov(X.T, ddof=1)
        ref = np.sort(np.linalg.eigvalsh(cov))[::-1]
        assert np.allclose(model.explained_variance, ref[:10], atol=1e-10)
        col_var = X.var(axis=0, ddof=1).sum()
        assert model.explained_variance.sum() == pytest.approx(col_var, abs=1e-8)

    def test_gram_path_matches_covariance_path(self):
        rng = np.random.default_rng(1)
        X = rng.normal(0, 1, (12, 40))  # d > n triggers the Gram route
        model = pca_fit(X, 4)
        Xc = X - X.mean(axis=0)
        ref = np.sort(np.linalg.eigvalsh(Xc.T @ Xc / 11))[::-1][:4]
        assert np.allclose(model.explained_variance, ref, atol=1e-10)
        assert np.allclose(model.components @ model.components.T, np.eye(4), atol=1e-8)

    def test_sign_convention_deterministic(self):
        rng = np.random.default_rng(2)
        X = rng.normal(0, 1, (50, 6))
        a = pca_fit(X, 4)
        b = pca_fit(X, 4)
        assert np.array_equal(a.components, b.components)
        for row in a.components:
            assert row[np.argmax(np.abs(row))] > 0

    @given(st.integers(0, 10_000))
    @settings(max_examples=40, deadline=None)
    def test_orthonormal_descending_properties(self, seed):
        rng = np.random.default_rng(seed)
        n, d = int(rng.integers(5, 40)), int(rng.integers(2, 12))
        X = rng.normal(0, rng.uniform(0.5, 3.0), (n, d))
        k = min(n - 1, d)
        model = pca_fit(X, k)
        assert np.allclose(model.components @ model.components.T, np.eye(k), atol=1e-8)
        assert np.all(np.diff(model.explained_variance) <= 1e-10)
        assert np.all(model.explained_variance >= 0)

    def test_invalid_k(self):
        X = np.random.default_rng(0).normal(0, 1, (10, 3))
        with pytest.raises(ConfigError):
            pca_fit(X, 0)
        with pytest.raises(ConfigError):
            pca_fit(X, 4)

    def test_zero_variance(self):
        with pytest.raises(DegenerateDataError):
            pca_fit(np.ones((5, 3)), 1)


class TestPcaProject:
    def test_mean_row_maps_to_zero(self):
        rng = np.random.default_rng(3)
        X = rng.normal(0, 1, (30, 5))
        model = pca_fit(X, 3)
        assert np.allclose(pca_project(model, model.mean), np.zeros(3), atol=1e-12)

    def test_score_variance_equals_explained(self):
        rng = np.random.default_rng(4)
        X = rng.normal(0, 2, (60, 8))
        model = pca_fit(X, 5)
        scores = pca_project(model, X)
        assert np.allclose(scores.var(axis=0, ddof=1), model.explained_variance, atol=1e-8)

    def test_heldout_row_dot_product(self):
        rng = np.random.default_rng(5)
        X = rng.normal(0, 1, (25, 4))
        model = pca_fit(X, 2)
        row = rng.normal(0, 1, 4)
        expected = np.array([(row - model.mean) @ c for c in model.components])
        assert np.allclose(pca_project(model, row), expected, atol=1e-12)

    def test_dimension_mismatch(self):
        model = pca_fit(np.random.default_rng(6).normal(0, 1, (10, 4)), 2)
        with pytest.raises(DataError):
            pca_project(model, np.zeros((3, 5)))


class TestKde:
    def test_symmetric(self):
        curve = kde([-1.0, 1.0], 257, 1.0)
        assert np.allclose(curve.density, curve.density[::-1], atol=1e-12)

    def test_integral_close_to_one(self):
        rng = np.random.default_rng(7)
        for sample in (rng.normal(0, 1, 200), rng.exponential(2, 500)):
            curve = kde(sample, 512, "scott")
            integral = np.trapezoid(curve.density, curve.grid)
            assert abs(integral - 1.0) < 0.01

    def test_single_kernel_peak(self):
        curve = kde([0.0], 801, 1.0)
        assert curve.density[np.argmin(np.abs(curve.grid))] == pytest.approx(
            1.0 / np.sqrt(2 * np.pi), abs=1e-6
        )

    def test_bandwidth_rules(self):
        rng = np.random.default_rng(8)
        x = rng.normal(0, 2, 300)
        scott = kde(x, 64, "scott")
        silverman = kde(x, 64, "silverman")
        n = len(x)
        assert scott.bandwidth == pytest.approx(x.std(ddof=1) * n ** -0.2)
        q75, q25 = np.percentile(x, [75, 25])
        expected = 0.9 * min(x.std(ddof=1), (q75 - q25) / 1.34) * n ** -0.2
        assert silverman.bandwidth == pytest.approx(expected)

    def test_zero_variance_automatic_rejected(self):
        with pytest.raises(DegenerateDataError):
            kde([2.0, 2.0, 2.0], 64, "scott")

    def test_bad_rule(self):
        with pytest.raises(ConfigError):
            kde([1.0, 2.0], 64, "bogus")

    def test_density_nonnegative(self):
        curve = kde(np.random.default_rng(9).normal(0, 1, 100), 128, "silverman")
        assert np.all(curve.density >= 0)


class TestBrackets:
    def test_assignment_rules(self):
        br = AgeBracketing(edges=(40.0, 60.0, 90.0))
        assert bracket_ages([59.9], br) == ["[40,60)"]
        assert bracket_ages([60.0], br) == ["[60,90)"]
        br5 = AgeBracketing(edges=(44.0, 52.0, 60.0, 68.0, 76.0, 84.0))
        assert bracket_ages([44.0], br5) == ["[44,52)"]

    def test_out_of_range_names_subject(self):
        br = AgeBracketing(edges=(40.0, 60.0, 90.0))
        with pytest.raises(DataError, match="SUBJ7"):
            bracket_ages([50.0, 95.0], br, ids=["SUBJ1", "SUBJ7"])

    def test_edges_validation(self):
        with pytest.raises(ConfigError):
            AgeBracketing(edges=(40.0,))
        with pytest.raises(ConfigError):
            AgeBracketing(edges=(40.0, 40.0))

    def test_equal_width_covers_extremes(self):
        ages = [44.0, 50.0, 61.2, 82.0]
        br = equal_width_brackets(ages, 5)
        labels = bracket_ages(ages, br)
        assert len(br.labels) == 5
        assert labels[0] == br.labels[0]
        assert labels[-1] == br.labels[-1]


class TestFeatureShiftTests:
    def _comparisons(self, n):
        half = np.arange(n // 2)
        other = np.arange(n // 2, n)
        return [("A/B", half, other)]

    def test_identical_sides_all_p_one(self):
        rng = np.random.default_rng(10)
        col = rng.normal(0, 1, 40)
        scores = np.column_stack([np.concatenate([col[:20], col[:20]])] * 2)
        idx = np.arange(20)
        table = feature_shift_tests(scores, [("same", idx, idx + 20)])
        for row in table.rows:
            assert row.result.statistic == 0.0
            assert row.adjusted_p == 1.0

    def test_family_shape_four_by_five(self):
        rng = np.random.default_rng(11)
        scores = rng.normal(0, 1, (100, 4))
        comps = [(f"c{i}", np.arange(50), np.arange(50, 100)) for i in range(5)]
        table = feature_shift_tests(scores, comps, modes=[1, 2, 3, 4])
        assert len(table.rows) == 20
        assert table.family_size == 20
        assert table.comparisons == ("c0", "c1", "c2", "c3", "c4")

    def test_small_side_skipped_with_flag(self):
        rng = np.random.default_rng(12)
        scores = rng.normal(0, 1, (10, 2))
        table = feature_shift_tests(
            scores, [("tiny", np.array([0]), np.arange(1, 10))], modes=[1]
        )
        row = table.rows[0]
        assert row.skipped_reason == "insufficient_data"
        assert row.result is None
        assert table.family_size == 0

    def test_adjusted_dominates_raw(self):
        rng = np.random.default_rng(13)
        scores = rng.normal(0, 1, (60, 3))
        comps = [("x", np.arange(30), np.arange(30, 60))]
        table = feature_shift_tests(scores, comps)
        for row in table.rows:
            assert row.adjusted_p >= row.result.p_value - 1e-15

    def test_invalid_mode(self):
        with pytest.raises(ConfigError):
            feature_shift_tests(np.zeros((4, 2)), [], modes=[3])
