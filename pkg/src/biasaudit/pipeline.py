"""End-to-end audit orchestration and the structured report.

Two independent arms:

* performance arm: per-subgroup normality tests, homogeneity and
  rank-based location tests on absolute prediction errors, run on the
  full cohort and again on a balanced equal-size sample, plus the
  repeated-sampling MAE summary;
* feature arm: PCA fit on all included subjects' features, per-mode KDE
  curves split by age/race/sex, and the BY-adjusted family of per-mode
  distribution-shift tests (all-subjects and equal-size variants).

The assumption gate is recorded, never silently acted on: whatever the
normality and homogeneity tests say, the non-parametric battery runs, and
the trace states which of the four gate outcomes applied.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, asdict
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import hyptest
from ._kernels import USING_NUMBA
from ._parallel import ordered_map
from ._rng import derive_seed
from .cohort import SUBGROUP_ORDER, Race, Sex, SubgroupKey, SubgroupPartition, absolute_error
from .errors import AuditError, ConfigError, DataError
from .featspace import (
    AgeBracketing,
    FeatureMatrix,
    KdeCurve,
    ShiftTable,
    equal_width_brackets,
    feature_shift_tests,
    kde,
    pca_fit,
    pca_project,
)
from .hyptest import PairwiseResults, TestResult
from .resample import RepeatedMaeSummary, balanced_sample, repeated_subgroup_mae, sampled_errors
from ._rng import make_rng, sample_without_replacement

_STREAM_SW_FULL = 0x100
_STREAM_SW_BALANCED = 0x200
_STREAM_BALANCED_DRAW = 0x300
_STREAM_MAE = 0x400
_STREAM_EQUAL_SHIFT = 0x500

RACE_LEVELS = (Race.WHITE, Race.BLACK, Race.ASIAN)
SEX_LEVELS = (Sex.FEMALE, Sex.MALE)
# paper-style comparison columns: one age pair, the three race pairs, one sex pair
RACE_PAIRS = ((Race.ASIAN, Race.WHITE), (Race.BLACK, Race.ASIAN), (Race.WHITE, Race.BLACK))


@dataclass(frozen=True)
class AuditConfig:
    alpha: float = 0.05
    sample_size: Optional[int] = None  # None -> size of the smallest subgroup
    repeats: int = 10
    modes: int = 4
    seed: int = 0
    levene_centering: str = "median"
    bandwidth_rule: str | float = "scott"
    bracket_edges: tuple[float, ...] = (40.0, 60.0, 90.0)
    viz_brackets: int = 5
    grid_points: int = 256
    posthoc_adjust: bool = False
    reuse_sixgroup_ranks: bool = False
    run_full_pass: bool = True
    run_balanced_pass: bool = True

    def validate(self) -> None:
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError(f"alpha must be in (0, 1), got {self.alpha}")
        if self.repeats < 2:
            raise ConfigError(f"repeats must be >= 2, got {self.repeats}")
        if self.modes < 1:
            raise ConfigError(f"modes must be >= 1, got {self.modes}")
        if self.sample_size is not None and self.sample_size < 1:
            raise ConfigError(f"sample_size must be >= 1, got {self.sample_size}")
        if self.viz_brackets < 1:
            raise ConfigError(f"viz_brackets must be >= 1, got {self.viz_brackets}")
        if self.grid_points < 2:
            raise ConfigError(f"grid_points must be >= 2, got {self.grid_points}")
        if len(self.bracket_edges) < 2:
            raise ConfigError("bracket_edges needs at least two edges")
        if self.levene_centering not in {"mean", "median"}:
            raise ConfigError(f"levene_centering must be mean or median, got {self.levene_centering!r}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["bracket_edges"] = list(self.bracket_edges)
        return d


@dataclass(frozen=True)
class GateTrace:
    """Which ANOVA assumptions failed, and therefore why the rank test ran."""

    outcome: str  # parametric_admissible | normality_rejected | homogeneity_rejected | both_rejected
    normality_rejected: bool
    homogeneity_rejected: bool
    alpha: float
    min_shapiro_p: float
    levene_p: float


@dataclass(frozen=True)
class TestBattery:
    label: str
    group_sizes: dict[str, int]
    shapiro: dict[str, TestResult]
    levene: TestResult
    kruskal: TestResult
    conover_race: PairwiseResults
    conover_sex: PairwiseResults
    gate: GateTrace
    posthoc_adjusted: Optional[dict[str, list[list[float]]]] = None


@dataclass(frozen=True)
class SubgroupErrorSummary:
    count: int
    mae: float
    sd: float


@dataclass(frozen=True)
class PerformanceArm:
    full: Optional[TestBattery]
    balanced: Optional[TestBattery]
    balanced_sample_size: int
    mae_summary: Optional[RepeatedMaeSummary]
    error_summary: dict[str, SubgroupErrorSummary]
    figure_data: dict


@dataclass(frozen=True)
class FeatureArm:
    n_subjects: int
    n_missing_features: int
    dim: int
    modes_requested: int
    modes_used: int
    explained_variance: tuple[float, ...]
    total_variance: float
    kde_bundles: dict[str, dict[int, list[tuple[str, Optional[KdeCurve]]]]]
    shift_all: ShiftTable
    shift_equal: Optional[ShiftTable]
    equal_sample_size: Optional[int]
    age_viz_labels: tuple[str, ...]
    age_test_labels: tuple[str, ...]
    age_outside_test_brackets: int
    # per-subject mode scores; exported on request, never serialized in the report
    score_ids: tuple[str, ...] = ()
    scores: Optional[np.ndarray] = None

    def score_matrix(self) -> FeatureMatrix:
        """Mode scores as a FeatureMatrix, writable in the binary layout."""
        if self.scores is None:
            raise DataError("this feature arm retained no scores")
        return FeatureMatrix(ids=self.score_ids, X=self.scores)


@dataclass(frozen=True)
class AuditReport:
    performance: Optional[PerformanceArm]
    feature: Optional[FeatureArm]
    provenance: dict


# ---------------------------------------------------------------------------
# performance arm


def _subgroup_errors(partition: SubgroupPartition) -> dict[SubgroupKey, np.ndarray]:
    return {
        key: np.array([absolute_error(r) for r in group], dtype=np.float64)
        for key, group in partition.iter_groups()
    }


def _gate(shapiro: dict[str, TestResult], levene_res: TestResult, alpha: float) -> GateTrace:
    min_p = min(r.p_value for r in shapiro.values())
    normality_rejected = any(r.p_value < alpha for r in shapiro.values())
    homogeneity_rejected = levene_res.p_value < alpha
    if normality_rejected and homogeneity_rejected:
        outcome = "both_rejected"
    elif normality_rejected:
        outcome = "normality_rejected"
    elif homogeneity_rejected:
        outcome = "homogeneity_rejected"
    else:
        outcome = "parametric_admissible"
    return GateTrace(
        outcome=outcome,
        normality_rejected=normality_rejected,
        homogeneity_rejected=homogeneity_rejected,
        alpha=alpha,
        min_shapiro_p=float(min_p),
        levene_p=float(levene_res.p_value),
    )


def _adjust_pairwise(res: PairwiseResults) -> list[list[float]]:
    m = len(res.labels)
    pairs = [(i, j) for i in range(m) for j in range(i + 1, m)]
    adjusted = hyptest.benjamini_yekutieli([float(res.p_matrix[i, j]) for i, j in pairs])
    out = np.eye(m)
    for (i, j), p in zip(pairs, adjusted):
        out[i, j] = p
        out[j, i] = p
    return [[float(v) for v in row] for row in out]


def _battery(
    errors: dict[SubgroupKey, np.ndarray],
    config: AuditConfig,
    sw_stream: int,
    label: str,
) -> TestBattery:
    groups = [errors[key] for key in SUBGROUP_ORDER]
    shapiro: dict[str, TestResult] = {}
    for ordinal, key in enumerate(SUBGROUP_ORDER):
        try:
            shapiro[key.label] = hyptest.shapiro_wilk(
                errors[key], subsample_seed=derive_seed(config.seed, sw_stream + ordinal)
            )
        except AuditError as exc:
            raise type(exc)(f"{label} pass, subgroup {key.label}: {exc}") from exc
    try:
        levene_res = hyptest.levene(groups, centering=config.levene_centering)
        kruskal_res = hyptest.kruskal_wallis(groups)
        race_groups = [
            np.concatenate([errors[SubgroupKey(race, sex)] for sex in SEX_LEVELS])
            for race in RACE_LEVELS
        ]
        sex_groups = [
            np.concatenate([errors[SubgroupKey(race, sex)] for race in RACE_LEVELS])
            for sex in SEX_LEVELS
        ]
        omnibus = (kruskal_res.statistic, len(SUBGROUP_ORDER)) if config.reuse_sixgroup_ranks else None
        conover_race = hyptest.conover_iman(
            race_groups, labels=[r.value for r in RACE_LEVELS], omnibus=omnibus
        )
        conover_sex = hyptest.conover_iman(
            sex_groups, labels=[s.value for s in SEX_LEVELS], omnibus=omnibus
        )
    except AuditError as exc:
        raise type(exc)(f"{label} pass: {exc}") from exc

    posthoc_adjusted = None
    if config.posthoc_adjust:
        posthoc_adjusted = {
            "race": _adjust_pairwise(conover_race),
            "sex": _adjust_pairwise(conover_sex),
        }
    return TestBattery(
        label=label,
        group_sizes={key.label: int(errors[key].size) for key in SUBGROUP_ORDER},
        shapiro=shapiro,
        levene=levene_res,
        kruskal=kruskal_res,
        conover_race=conover_race,
        conover_sex=conover_sex,
        gate=_gate(shapiro, levene_res, config.alpha),
        posthoc_adjusted=posthoc_adjusted,
    )


def _freedman_diaconis_edges(values: np.ndarray, max_bins: int = 200) -> np.ndarray:
    lo, hi = float(values.min()), float(values.max())
    if hi <= lo:
        hi = lo + 1.0
    q75, q25 = np.percentile(values, [75.0, 25.0])
    iqr = float(q75 - q25)
    width = 2.0 * iqr * values.size ** (-1.0 / 3.0)
    if width <= 0.0:
        nbins = 10
    else:
        nbins = int(np.clip(np.ceil((hi - lo) / width), 1, max_bins))
    return np.linspace(lo, hi, nbins + 1)


def _age_distribution_figure(partition: SubgroupPartition, config: AuditConfig) -> dict:
    all_ages = np.concatenate([
        np.array([r.age for r in group]) for _, group in partition.iter_groups() if group
    ])
    edges = _freedman_diaconis_edges(all_ages)
    panels = []

    def panel(title: str, members_by_sex: dict[str, np.ndarray]) -> dict:
        series = []
        for sex_label, ages in members_by_sex.items():
            if ages.size == 0:
                continue
            hist, _ = np.histogram(ages, bins=edges, density=True)
            curve = None
            if ages.size >= 2 and ages.std(ddof=1) > 0:
                c = kde(ages, config.grid_points, config.bandwidth_rule)
                curve = {"grid": c.grid.tolist(), "density": c.density.tolist()}
            series.append({
                "label": sex_label,
                "count": int(ages.size),
                "density": hist.tolist(),
                "kde": curve,
            })
        return {"title": title, "series": series}

    panels.append(panel("All subjects", {
        sex.value: np.concatenate([
            np.array([r.age for r in partition.groups[SubgroupKey(race, sex)]], dtype=np.float64)
            for race in RACE_LEVELS
        ])
        for sex in SEX_LEVELS
    }))
    for race in RACE_LEVELS:
        panels.append(panel(race.value, {
            sex.value: np.array(
                [r.age for r in partition.groups[SubgroupKey(race, sex)]], dtype=np.float64
            )
            for sex in SEX_LEVELS
        }))
    return {"bin_edges": edges.tolist(), "panels": panels}


def _error_histogram_figure(errors: dict[SubgroupKey, np.ndarray],
                            shapiro: dict[str, TestResult]) -> dict:
    pooled = np.concatenate([errors[key] for key in SUBGROUP_ORDER])
    edges = _freedman_diaconis_edges(pooled)
    panels = []
    for key in SUBGROUP_ORDER:
        e = errors[key]
        hist, _ = np.histogram(e, bins=edges, density=True) if e.size else (np.zeros(len(edges) - 1), None)
        panels.append({
            "label": key.label,
            "count": int(e.size),
            "density": np.asarray(hist).tolist(),
            "shapiro_p": float(shapiro[key.label].p_value) if key.label in shapiro else None,
        })
    return {"bin_edges": edges.tolist(), "panels": panels}


def run_performance_audit(partition: SubgroupPartition, config: AuditConfig) -> PerformanceArm:
    """Both performance passes plus the repeated-sampling MAE summary."""
    config.validate()
    errors = _subgroup_errors(partition)
    for key in SUBGROUP_ORDER:
        if errors[key].size < 3:
            raise DataError(
                f"subgroup {key.label!r} has {errors[key].size} subjects; "
                "the performance audit needs at least 3 per subgroup"
            )
    n = config.sample_size if config.sample_size is not None else partition.min_group_size()

    full = _battery(errors, config, _STREAM_SW_FULL, "full_cohort") if config.run_full_pass else None

    balanced = None
    mae_summary = None
    if config.run_balanced_pass:
        draw = balanced_sample(partition, n, derive_seed(config.seed, _STREAM_BALANCED_DRAW))
        balanced_errors = sampled_errors(partition, draw)
        balanced = _battery(balanced_errors, config, _STREAM_SW_BALANCED, "balanced")
        mae_summary = repeated_subgroup_mae(
            partition, n, config.repeats, derive_seed(config.seed, _STREAM_MAE)
        )

    error_summary = {
        key.label: SubgroupErrorSummary(
            count=int(errors[key].size),
            mae=float(errors[key].mean()),
            sd=float(errors[key].std(ddof=1)) if errors[key].size > 1 else 0.0,
        )
        for key in SUBGROUP_ORDER
    }
    shapiro_for_fig = (full or balanced).shapiro if (full or balanced) else {}
    figure_data = {
        "age_distribution": _age_distribution_figure(partition, config),
        "error_histograms": _error_histogram_figure(errors, shapiro_for_fig),
    }
    return PerformanceArm(
        full=full,
        balanced=balanced,
        balanced_sample_size=n,
        mae_summary=mae_summary,
        error_summary=error_summary,
        figure_data=figure_data,
    )


# ---------------------------------------------------------------------------
# feature arm


def _age_pair_label(labels: Sequence[str]) -> str:
    def strip(label: str) -> str:
        return label.strip("[)").replace(",", "-")

    return f"Age {strip(labels[0])}/{strip(labels[1])}"


def run_feature_audit(
    partition: SubgroupPartition,
    features: FeatureMatrix,
    config: AuditConfig,
) -> FeatureArm:
    """PCA, KDE bundles, and the shift-test family over the included subjects."""
    config.validate()
    included = []
    missing = 0
    for key, group in partition.iter_groups():
        for rec in group:
            if rec.feature_row is None:
                missing += 1
            else:
                included.append((key, rec))
    if len(included) < 2:
        raise DataError("feature audit needs at least 2 subjects with feature rows")

    rows = np.array([rec.feature_row for _, rec in included], dtype=np.intp)
    ages = np.array([rec.age for _, rec in included])
    races = np.array([key.race.value for key, _ in included])
    sexes = np.array([key.sex.value for key, _ in included])

    X = features.X[rows]
    n, d = X.shape
    k = min(config.modes, n - 1, d)
    model = pca_fit(X, k)
    scores = pca_project(model, X)
    total_variance = float(((X - X.mean(axis=0)) ** 2).sum() / (n - 1))

    # visualization brackets: equal width over the observed ages
    viz = equal_width_brackets(ages, config.viz_brackets)
    viz_idx = viz.assign(ages)

    # test brackets: fixed half-open edges; out-of-range subjects are
    # excluded from the age comparison only, with a count
    test_brackets = AgeBracketing(edges=tuple(float(e) for e in config.bracket_edges))
    test_idx = test_brackets.assign(ages)
    outside = int((test_idx < 0).sum())

    groupings: list[tuple[str, list[tuple[str, np.ndarray]]]] = [
        ("age", [(lbl, np.flatnonzero(viz_idx == i)) for i, lbl in enumerate(viz.labels)]),
        ("race", [(r.value, np.flatnonzero(races == r.value)) for r in RACE_LEVELS]),
        ("sex", [(s.value, np.flatnonzero(sexes == s.value)) for s in SEX_LEVELS]),
    ]

    def bundle_for_mode(mode: int) -> dict[str, list[tuple[str, Optional[KdeCurve]]]]:
        out: dict[str, list[tuple[str, Optional[KdeCurve]]]] = {}
        col = scores[:, mode - 1]
        for attr, levels in groupings:
            collected = []
            for lbl, idx in levels:
                vals = col[idx]
                if vals.size >= 2 and vals.std(ddof=1) > 0:
                    collected.append((lbl, kde(vals, config.grid_points, config.bandwidth_rule)))
                else:
                    collected.append((lbl, None))
            out[attr] = collected
        return out

    per_mode = ordered_map(bundle_for_mode, range(1, k + 1))
    kde_bundles: dict[str, dict[int, list[tuple[str, Optional[KdeCurve]]]]] = {}
    for attr in ("age", "race", "sex"):
        kde_bundles[attr] = {mode: per_mode[mode - 1][attr] for mode in range(1, k + 1)}

    def comparisons_for(index_subset: Optional[np.ndarray]) -> list[tuple[str, np.ndarray, np.ndarray]]:
        if index_subset is None:
            sel = np.arange(n)
        else:
            sel = index_subset
        t_idx = test_idx[sel]
        comps: list[tuple[str, np.ndarray, np.ndarray]] = []
        n_brackets = len(test_brackets.labels)
        for i in range(n_brackets):
            for j in range(i + 1, n_brackets):
                comps.append((
                    _age_pair_label((test_brackets.labels[i], test_brackets.labels[j])),
                    sel[np.flatnonzero(t_idx == i)],
                    sel[np.flatnonzero(t_idx == j)],
                ))
        for ra, rb in RACE_PAIRS:
            comps.append((
                f"{ra.value}/{rb.value}",
                sel[np.flatnonzero(races[sel] == ra.value)],
                sel[np.flatnonzero(races[sel] == rb.value)],
            ))
        comps.append((
            "Female/Male",
            sel[np.flatnonzero(sexes[sel] == Sex.FEMALE.value)],
            sel[np.flatnonzero(sexes[sel] == Sex.MALE.value)],
        ))
        return comps

    modes_list = list(range(1, k + 1))
    shift_all = feature_shift_tests(scores, comparisons_for(None), modes=modes_list, alpha=config.alpha)

    # equal-size variant: a fresh seeded draw of min-subgroup size from every
    # subgroup that has feature rows
    by_key: dict[SubgroupKey, list[int]] = {key: [] for key in SUBGROUP_ORDER}
    for pos, (key, _) in enumerate(included):
        by_key[key].append(pos)
    sizes = [len(v) for v in by_key.values() if len(v) > 0]
    shift_equal = None
    n_eq = None
    if len(sizes) == len(SUBGROUP_ORDER) and min(sizes) >= 2:
        n_eq = min(sizes)
        chosen: list[int] = []
        for ordinal, key in enumerate(SUBGROUP_ORDER):
            rng = make_rng(derive_seed(config.seed, _STREAM_EQUAL_SHIFT + ordinal))
            take = sample_without_replacement(len(by_key[key]), n_eq, rng)
            chosen.extend(by_key[key][i] for i in take)
        subset = np.array(sorted(chosen), dtype=np.intp)
        shift_equal = feature_shift_tests(
            scores, comparisons_for(subset), modes=modes_list, alpha=config.alpha
        )

    return FeatureArm(
        n_subjects=n,
        n_missing_features=missing,
        dim=d,
        modes_requested=config.modes,
        modes_used=k,
        explained_variance=tuple(float(v) for v in model.explained_variance),
        total_variance=total_variance,
        kde_bundles=kde_bundles,
        shift_all=shift_all,
        shift_equal=shift_equal,
        equal_sample_size=n_eq,
        age_viz_labels=viz.labels,
        age_test_labels=test_brackets.labels,
        age_outside_test_brackets=outside,
        score_ids=tuple(rec.id for _, rec in included),
        scores=scores,
    )


# ---------------------------------------------------------------------------
# report assembly and serialization


def file_digest(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def build_provenance(
    config: AuditConfig,
    partition: Optional[SubgroupPartition] = None,
    inputs: Optional[dict[str, str | Path]] = None,
) -> dict:
    from . import __version__

    # the thread cap is deliberately not recorded: results are identical at
    # any AUDIT_THREADS value, so it is not needed for replay
    prov: dict = {
        "tool": {"name": "biasaudit", "version": __version__},
        "config": config.to_dict(),
        "seed": config.seed,
        "backend": "numba" if USING_NUMBA else "numpy",
    }
    if inputs:
        prov["inputs"] = {
            name: {"path": str(p), "sha256": file_digest(p)} for name, p in inputs.items()
        }
    if partition is not None:
        reasons: dict[str, int] = {}
        for _, reason in partition.excluded:
            reasons[reason] = reasons.get(reason, 0) + 1
        prov["cohort"] = {
            "included": partition.total_included(),
            "excluded": len(partition.excluded),
            "exclusion_reasons": dict(sorted(reasons.items())),
            "subgroup_counts": {key.label: c for key, c in partition.counts().items()},
        }
    return prov


def assemble_report(
    performance: Optional[PerformanceArm],
    feature: Optional[FeatureArm],
    provenance: dict,
) -> AuditReport:
    if performance is None and feature is None:
        raise ConfigError("a report needs at least one audit arm")
    return AuditReport(performance=performance, feature=feature, provenance=provenance)


def _test_result_dict(r: TestResult) -> dict:
    return {
        "statistic": float(r.statistic),
        "df": None if r.df is None else [float(v) for v in r.df],
        "p_value": float(r.p_value),
        "method": r.method,
        "extras": r.extras,
    }


def _pairwise_dict(r: PairwiseResults) -> dict:
    return {
        "labels": list(r.labels),
        "t": [[float(v) for v in row] for row in r.t_matrix],
        "p": [[float(v) for v in row] for row in r.p_matrix],
        "df": float(r.df),
        "method": r.method,
        "degenerate": r.degenerate,
    }


def _battery_dict(b: Optional[TestBattery]) -> Optional[dict]:
    if b is None:
        return None
    return {
        "label": b.label,
        "group_sizes": b.group_sizes,
        "shapiro": {lbl: _test_result_dict(r) for lbl, r in b.shapiro.items()},
        "levene": _test_result_dict(b.levene),
        "kruskal_wallis": _test_result_dict(b.kruskal),
        "conover_race": _pairwise_dict(b.conover_race),
        "conover_sex": _pairwise_dict(b.conover_sex),
        "gate": asdict(b.gate),
        "posthoc_adjusted": b.posthoc_adjusted,
    }


def _mae_summary_dict(s: Optional[RepeatedMaeSummary]) -> Optional[dict]:
    if s is None:
        return None
    return {
        "labels": list(s.labels),
        "mean_mae": s.mean_mae,
        "sd_mae": s.sd_mae,
        "pooled_mae": s.pooled_mae,
        "pooled_mae_sd": s.pooled_mae_sd,
        "relative_diff": s.relative_diff,
        "relative_diff_sd": s.relative_diff_sd,
        "repeats": s.repeats,
        "sample_size": s.sample_size,
        "seed": s.seed,
    }


def _kde_curve_dict(c: Optional[KdeCurve]) -> Optional[dict]:
    if c is None:
        return None
    return {
        "grid": [float(v) for v in c.grid],
        "density": [float(v) for v in c.density],
        "bandwidth": float(c.bandwidth),
    }


def _shift_table_dict(t: Optional[ShiftTable]) -> Optional[dict]:
    if t is None:
        return None
    return {
        "alpha": t.alpha,
        "family_size": t.family_size,
        "modes": list(t.modes),
        "comparisons": list(t.comparisons),
        "rows": [
            {
                "mode": row.mode,
                "comparison": row.comparison,
                "statistic": None if row.result is None else float(row.result.statistic),
                "raw_p": None if row.result is None else float(row.result.p_value),
                "adjusted_p": row.adjusted_p,
                "significant": row.significant,
                "skipped_reason": row.skipped_reason,
            }
            for row in t.rows
        ],
    }


def report_to_dict(report: AuditReport) -> dict:
    perf = None
    if report.performance is not None:
        p = report.performance
        perf = {
            "present": True,
            "full": _battery_dict(p.full),
            "balanced": _battery_dict(p.balanced),
            "balanced_sample_size": p.balanced_sample_size,
            "mae_summary": _mae_summary_dict(p.mae_summary),
            "error_summary": {
                lbl: {"count": s.count, "mae": s.mae, "sd": s.sd}
                for lbl, s in p.error_summary.items()
            },
            "figure_data": p.figure_data,
        }
    feat = None
    if report.feature is not None:
        f = report.feature
        feat = {
            "present": True,
            "n_subjects": f.n_subjects,
            "n_missing_features": f.n_missing_features,
            "dim": f.dim,
            "modes_requested": f.modes_requested,
            "modes_used": f.modes_used,
            "explained_variance": list(f.explained_variance),
            "total_variance": f.total_variance,
            "kde_bundles": {
                attr: {
                    str(mode): [
                        {"level": lbl, "curve": _kde_curve_dict(curve)}
                        for lbl, curve in levels
                    ]
                    for mode, levels in modes.items()
                }
                for attr, modes in f.kde_bundles.items()
            },
            "shift_all_subjects": _shift_table_dict(f.shift_all),
            "shift_equal_size": _shift_table_dict(f.shift_equal),
            "equal_sample_size": f.equal_sample_size,
            "age_viz_labels": list(f.age_viz_labels),
            "age_test_labels": list(f.age_test_labels),
            "age_outside_test_brackets": f.age_outside_test_brackets,
        }
    return {
        "performance": perf if perf is not None else {"present": False},
        "feature": feat if feat is not None else {"present": False},
        "provenance": report.provenance,
    }


def report_to_json(report: AuditReport) -> str:
    """Canonical JSON: sorted keys, shortest round-trip floats, no NaN/inf."""
    return json.dumps(report_to_dict(report), sort_keys=True, allow_nan=False,
                      separators=(",", ":")) + "\n"
