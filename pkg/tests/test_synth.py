import math

import numpy as np
import pytest

from biasaudit.cohort import partition, save_cohort_csv, save_features_binary
from biasaudit.errors import ConfigError
from biasaudit.synth import (
    CohortSpec,
    FeatureSpec,
    GroupSpec,
    age_loading_direction,
    default_cohort_spec,
    folded_normal_mean,
    generate_cohort,
    null_cohort_spec,
    spec_from_json,
    spec_to_json,
)

# frozen quadrature oracle values (mpmath, 40 digits)
E_ABS_N_1_2 = 1.7911862296052241184
E_ABS_N_0_2 = 1.5957691216057307118


class TestFoldedNormal:
    def test_oracle_values(self):
        assert folded_normal_mean(1.0, 2.0) == pytest.approx(E_ABS_N_1_2, abs=1e-12)
        assert folded_normal_mean(0.0, 2.0) == pytest.approx(E_ABS_N_0_2, abs=1e-12)

    def test_live_quadrature(self):
        from scipy.integrate import quad

        for mu, sd in [(0.5, 1.0), (2.0, 0.7), (0.0, 3.0)]:
            val, _ = quad(
                lambda t: abs(t) * math.exp(-((t - mu) ** 2) / (2 * sd * sd)) / (sd * math.sqrt(2 * math.pi)),
                -60, 60,
            )
            assert folded_normal_mean(mu, sd) == pytest.approx(val, abs=1e-9)

    def test_zero_sd_limit_large_bias(self):
        # with bias far above sd the folded mean approaches the bias
        assert folded_normal_mean(50.0, 1.0) == pytest.approx(50.0, abs=1e-6)


class TestGenerateCohort:
    def test_determinism_in_memory(self):
        spec = null_cohort_spec(n_per_group=40, seed=11, dim=5)
        r1, f1 = generate_cohort(spec)
        r2, f2 = generate_cohort(spec)
        assert r1 == r2
        assert np.array_equal(f1.X, f2.X)

    def test_determinism_on_disk(self, tmp_path):
        spec = null_cohort_spec(n_per_group=25, seed=7, dim=4)
        digests = []
        for run in ("a", "b"):
            records, features = generate_cohort(spec)
            save_cohort_csv(records, tmp_path / f"{run}.csv")
            save_features_binary(features, tmp_path / f"{run}.bin", tmp_path / f"{run}.ids")
            digests.append((
                (tmp_path / f"{run}.csv").read_bytes(),
                (tmp_path / f"{run}.bin").read_bytes(),
                (tmp_path / f"{run}.ids").read_bytes(),
            ))
        assert digests[0] == digests[1]

    def test_age_bounds_exact(self):
        spec = null_cohort_spec(n_per_group=500, seed=3, dim=None)
        records, _ = generate_cohort(spec)
        ages = np.array([r.age for r in records])
        assert ages.min() >= 44.0
        assert ages.max() <= 82.0

    def test_error_mean_converges(self):
        # law of large numbers at n = 1e5: sample mean within 3 sd/sqrt(n)
        n = 100_000
        spec = CohortSpec(
            groups=(GroupSpec(race_label="White", sex="Female", count=n,
                              error_bias=1.25, error_sd=2.0),),
            features=None,
            seed=21,
        )
        records, _ = generate_cohort(spec)
        errs = np.array([r.predicted_age - r.age for r in records])
        assert abs(errs.mean() - 1.25) < 3.0 * 2.0 / math.sqrt(n)

    def test_bias_shifts_population_mae(self):
        # the folded-normal bridge: one biased subgroup's MAE sits near
        # E|N(1,2)| while unbiased subgroups sit near E|N(0,2)|
        spec = null_cohort_spec(
            n_per_group=20_000, seed=5, dim=None, error_sd=2.0,
            biases={("Black", "Male"): 1.0},
        )
        records, _ = generate_cohort(spec)
        part = partition(records)
        maes = {k.label: np.mean([abs(r.age - r.predicted_age) for r in g])
                for k, g in part.iter_groups()}
        assert maes["Black male"] == pytest.approx(E_ABS_N_1_2, abs=0.05)
        assert maes["White female"] == pytest.approx(E_ABS_N_0_2, abs=0.05)

    def test_feature_offset_along_loading(self):
        spec = null_cohort_spec(
            n_per_group=4000, seed=9, dim=6, age_loading_scale=0.0,
            offsets={("Asian", "Female"): 2.5},
        )
        records, features = generate_cohort(spec)
        u = age_loading_direction(spec)
        part = partition(records)
        rows = {k.label: [r.feature_row for r in g] for k, g in part.iter_groups()}
        proj = features.X @ u
        shifted = proj[rows["Asian female"]].mean()
        baseline = proj[rows["White male"]].mean()
        assert shifted - baseline == pytest.approx(2.5, abs=0.1)

    def test_exchangeable_when_null(self):
        spec = null_cohort_spec(n_per_group=5000, seed=13, dim=4, age_loading_scale=0.0)
        records, features = generate_cohort(spec)
        part = partition(records)
        means = []
        for _, group in part.iter_groups():
            rows = [r.feature_row for r in group]
            means.append(features.X[rows].mean(axis=0))
        spread = np.max(np.abs(np.diff(np.vstack(means), axis=0)))
        assert spread < 0.1  # ~ 3.5 sigma of a mean over 5000 draws

    def test_validation(self):
        with pytest.raises(ConfigError):
            GroupSpec(race_label="White", sex="Female", count=-1).validate()
        with pytest.raises(ConfigError):
            GroupSpec(race_label="White", sex="Female", count=1, age_sd=0.0).validate()
        with pytest.raises(ConfigError):
            GroupSpec(race_label="White", sex="Female", count=1, age_min=80, age_max=50).validate()
        with pytest.raises(ConfigError):
            GroupSpec(race_label="White", sex="robot", count=1).validate()
        with pytest.raises(ConfigError):
            CohortSpec(groups=(), features=None, seed=0).validate()
        with pytest.raises(ConfigError):
            FeatureSpec(dim=0).validate()

    def test_offset_vector_length_checked(self):
        spec = CohortSpec(
            groups=(GroupSpec(race_label="White", sex="Female", count=3,
                              feature_offset=(1.0, 2.0)),),
            features=FeatureSpec(dim=3),
            seed=0,
        )
        with pytest.raises(ConfigError, match="feature_offset"):
            generate_cohort(spec)


class TestSpecJson:
    def test_round_trip(self):
        spec = null_cohort_spec(n_per_group=10, seed=4, dim=5)
        assert spec_from_json(spec_to_json(spec)) == spec

    def test_default_spec_mirrors_imbalanced_composition(self):
        spec = default_cohort_spec(seed=1)
        by_label: dict[str, int] = {}
        for g in spec.groups:
            by_label[g.race_label] = by_label.get(g.race_label, 0) + g.count
        assert by_label["White"] == 41_417
        assert by_label["Black"] == 286
        assert by_label["Asian"] == 454
        assert by_label["Chinese"] == 122
        assert by_label["Other"] == 507
        # smallest audited subgroup is the Black female group at 126
        black_female = [g.count for g in spec.groups
                        if g.race_label == "Black" and g.sex == "Female"]
        assert black_female == [126]

    def test_invalid_json(self):
        with pytest.raises(ConfigError):
            spec_from_json("{broken")
        with pytest.raises(ConfigError):
            spec_from_json("{}")


def test_default_cohort_partitions_to_expected_subgroups():
    # full-size default cohort: smallest audited subgroup is Black female
    # at 126, Chinese rows fold into Asian, Other rows are excluded
    spec = default_cohort_spec(seed=5, with_features=False)
    records, _ = generate_cohort(spec)
    part = partition(records)
    counts = {k.label: v for k, v in part.counts().items()}
    assert part.min_group_size() == 126
    assert counts["Black female"] == 126
    assert counts["Asian female"] == 227 + 61
    assert counts["Asian male"] == 227 + 61
    assert len(part.excluded) == 507
    assert part.total_included() + len(part.excluded) == len(records)
