"""Balanced subgroup sampling and the repeated-sampling MAE summary.

Each subgroup contributes an equal-size sample drawn without replacement;
the draw is repeated to estimate the spread of each subgroup's MAE and of
its difference from the pooled MAE. Every repeat r and every subgroup g
get their own seed via ``derive_seed`` so results do not depend on
execution order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._parallel import ordered_map
from ._rng import derive_seed, make_rng, sample_without_replacement
from .cohort import SUBGROUP_ORDER, SubgroupKey, SubgroupPartition, absolute_error
from .errors import DataError


@dataclass(frozen=True)
class BalancedSample:
    """Equal-size subject ids per subgroup for one balanced draw."""

    ids: dict[SubgroupKey, tuple[str, ...]]
    sample_size: int
    seed: int


@dataclass(frozen=True)
class RepeatedMaeSummary:
    """Per-subgroup MAE statistics across repeated balanced draws.

    ``relative_diff`` is mean subgroup MAE minus the pooled MAE (pooled over
    all sampled subjects of a repeat, then averaged across repeats);
    ``relative_diff_sd`` is the spread of that per-repeat difference.
    """

    labels: tuple[str, ...]
    mean_mae: dict[str, float]
    sd_mae: dict[str, float]
    pooled_mae: float
    pooled_mae_sd: float
    relative_diff: dict[str, float]
    relative_diff_sd: dict[str, float]
    repeats: int
    sample_size: int
    seed: int


def balanced_sample(partition: SubgroupPartition, n: int, seed: int) -> BalancedSample:
    """Uniform without-replacement sample of ``n`` subjects from every subgroup."""
    if n < 1:
        raise DataError(f"sample size must be >= 1, got {n}")
    counts = partition.counts()
    for key in SUBGROUP_ORDER:
        if counts[key] < n:
            raise DataError(
                f"subgroup {key.label!r} has only {counts[key]} members, cannot sample {n}"
            )
    ids: dict[SubgroupKey, tuple[str, ...]] = {}
    for ordinal, key in enumerate(SUBGROUP_ORDER):
        members = partition.groups[key]
        rng = make_rng(derive_seed(seed, ordinal))
        take = sample_without_replacement(len(members), n, rng)
        ids[key] = tuple(members[i].id for i in take)
    return BalancedSample(ids=ids, sample_size=n, seed=seed)


def sampled_errors(partition: SubgroupPartition, sample: BalancedSample) -> dict[SubgroupKey, np.ndarray]:
    """Absolute errors of the sampled subjects, keyed by subgroup."""
    out: dict[SubgroupKey, np.ndarray] = {}
    for key in SUBGROUP_ORDER:
        lookup = {rec.id: rec for rec in partition.groups[key]}
        out[key] = np.array([absolute_error(lookup[sid]) for sid in sample.ids[key]])
    return out


def repeated_subgroup_mae(
    partition: SubgroupPartition,
    n: int,
    repeats: int,
    seed: int,
) -> RepeatedMaeSummary:
    """Mean and SD of subgroup MAE over ``repeats`` balanced draws."""
    if repeats < 2:
        raise DataError(f"repeats must be >= 2 to estimate a standard deviation, got {repeats}")

    def one_repeat(r: int) -> tuple[np.ndarray, float]:
        sample = balanced_sample(partition, n, derive_seed(seed, r))
        errs = sampled_errors(partition, sample)
        per_group = np.array([errs[key].mean() for key in SUBGROUP_ORDER])
        pooled = float(np.concatenate([errs[key] for key in SUBGROUP_ORDER]).mean())
        return per_group, pooled

    results = ordered_map(one_repeat, range(repeats))
    group_mat = np.vstack([g for g, _ in results])  # repeats x 6
    pooled = np.array([p for _, p in results])
    diffs = group_mat - pooled[:, None]

    labels = tuple(key.label for key in SUBGROUP_ORDER)
    return RepeatedMaeSummary(
        labels=labels,
        mean_mae={lbl: float(v) for lbl, v in zip(labels, group_mat.mean(axis=0))},
        sd_mae={lbl: float(v) for lbl, v in zip(labels, group_mat.std(axis=0, ddof=1))},
        pooled_mae=float(pooled.mean()),
        pooled_mae_sd=float(pooled.std(ddof=1)),
        relative_diff={lbl: float(v) for lbl, v in zip(labels, diffs.mean(axis=0))},
        relative_diff_sd={lbl: float(v) for lbl, v in zip(labels, diffs.std(axis=0, ddof=1))},
        repeats=repeats,
        sample_size=n,
        seed=seed,
    )
