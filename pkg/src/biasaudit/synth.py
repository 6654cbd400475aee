"""Synthetic cohort generation with controllable subgroup composition.

Cohorts are produced from an explicit spec: per-group truncated-normal age
laws, normal prediction-error models (bias + noise), and an optional
feature block where every row is a shared age-loading direction scaled by
standardized age, plus a per-group offset and isotropic noise.

Sampling is fully deterministic per seed: ages come from inverse-CDF
truncated-normal draws (truncation is exact, not rejection-based) on a
counter-based Philox stream, and each group uses its own derived seed.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np

from ._rng import derive_seed, make_rng
from .cohort import SubjectRecord, parse_sex
from .errors import ConfigError
from .featspace import FeatureMatrix
from . import numerics

_LOADING_STREAM = 0x10AD
_GROUP_STREAM_BASE = 0x5EED


@dataclass(frozen=True)
class GroupSpec:
    """One generation group; ``race_label`` is written verbatim to the CSV."""

    race_label: str
    sex: str
    count: int
    age_mean: float = 64.0
    age_sd: float = 7.7
    age_min: float = 44.0
    age_max: float = 82.0
    error_bias: float = 0.0
    error_sd: float = 2.5
    feature_offset: Union[float, tuple[float, ...]] = 0.0

    def validate(self) -> None:
        if self.count < 0:
            raise ConfigError(f"group {self.race_label}/{self.sex}: count must be >= 0")
        if self.age_sd <= 0 or self.error_sd <= 0:
            raise ConfigError(f"group {self.race_label}/{self.sex}: standard deviations must be > 0")
        if not self.age_min < self.age_max:
            raise ConfigError(f"group {self.race_label}/{self.sex}: age_min must be < age_max")
        if self.age_min <= 0:
            raise ConfigError(f"group {self.race_label}/{self.sex}: ages must be positive years")
        if parse_sex(self.sex) is None:
            raise ConfigError(f"group {self.race_label}/{self.sex}: unknown sex label")


@dataclass(frozen=True)
class FeatureSpec:
    dim: int = 512
    age_loading_scale: float = 1.0
    noise_sd: float = 1.0

    def validate(self) -> None:
        if self.dim < 1:
            raise ConfigError("feature dim must be >= 1")
        if self.noise_sd <= 0:
            raise ConfigError("feature noise_sd must be > 0")


@dataclass(frozen=True)
class CohortSpec:
    groups: tuple[GroupSpec, ...]
    features: Optional[FeatureSpec] = field(default_factory=FeatureSpec)
    seed: int = 0

    def validate(self) -> None:
        if not self.groups:
            raise ConfigError("cohort spec needs at least one group")
        for g in self.groups:
            g.validate()
        if self.features is not None:
            self.features.validate()


def _truncated_normal(rng, count: int, mean: float, sd: float, lo: float, hi: float) -> np.ndarray:
    a = numerics.normal_cdf((lo - mean) / sd)
    b = numerics.normal_cdf((hi - mean) / sd)
    u = rng.random(count)
    p = np.clip(a + u * (b - a), np.nextafter(0.0, 1.0), np.nextafter(1.0, 0.0))
    x = mean + sd * numerics.normal_ppf(p)
    return np.clip(x, lo, hi)


def age_loading_direction(spec: CohortSpec) -> np.ndarray:
    """The fixed unit-norm loading vector shared by all feature rows."""
    if spec.features is None:
        raise ConfigError("spec has no feature block")
    rng = make_rng(derive_seed(spec.seed, _LOADING_STREAM))
    v = rng.standard_normal(spec.features.dim)
    return v / np.linalg.norm(v)


def generate_cohort(spec: CohortSpec) -> tuple[list[SubjectRecord], Optional[FeatureMatrix]]:
    """Deterministic synthetic cohort (and features) for a validated spec."""
    spec.validate()
    records: list[SubjectRecord] = []
    feature_rows: list[np.ndarray] = []
    ids: list[str] = []

    with_features = spec.features is not None
    if with_features:
        d = spec.features.dim
        loading = age_loading_direction(spec)
        age_lo = min(g.age_min for g in spec.groups)
        age_hi = max(g.age_max for g in spec.groups)
        age_mid = 0.5 * (age_lo + age_hi)
        age_halfspan = 0.5 * (age_hi - age_lo)

    counter = 0
    for ordinal, group in enumerate(spec.groups):
        if group.count == 0:
            continue
        rng = make_rng(derive_seed(spec.seed, _GROUP_STREAM_BASE + ordinal))
        ages = _truncated_normal(rng, group.count, group.age_mean, group.age_sd,
                                 group.age_min, group.age_max)
        errors = group.error_bias + group.error_sd * rng.standard_normal(group.count)
        sex = parse_sex(group.sex)
        for age, err in zip(ages, errors):
            counter += 1
            sid = f"S{counter:07d}"
            ids.append(sid)
            records.append(SubjectRecord(
                id=sid,
                age=float(age),
                predicted_age=float(age + err),
                sex=sex,
                race_raw=group.race_label,
                feature_row=len(ids) - 1 if with_features else None,
            ))
        if with_features:
            offset = group.feature_offset
            if isinstance(offset, (int, float)):
                offset_vec = float(offset) * loading
            else:
                offset_vec = np.asarray(offset, dtype=np.float64)
                if offset_vec.shape != (d,):
                    raise ConfigError(
                        f"group {group.race_label}/{group.sex}: feature_offset length "
                        f"{offset_vec.shape[0]} does not match dim {d}"
                    )
            z = (ages - age_mid) / age_halfspan
            block = (
                spec.features.age_loading_scale * z[:, None] * loading[None, :]
                + offset_vec[None, :]
                + spec.features.noise_sd * rng.standard_normal((group.count, d))
            )
            feature_rows.append(block)

    if not records:
        raise ConfigError("cohort spec generated zero subjects")
    features = None
    if with_features:
        features = FeatureMatrix(ids=tuple(ids), X=np.vstack(feature_rows))
    return records, features


def folded_normal_mean(mu: float, sd: float) -> float:
    """E|N(mu, sd^2)|, the analytic bridge from injected bias to MAE."""
    return sd * math.sqrt(2.0 / math.pi) * math.exp(-mu * mu / (2.0 * sd * sd)) + mu * (
        1.0 - 2.0 * numerics.normal_cdf(-mu / sd)
    )


# ---------------------------------------------------------------------------
# default spec and JSON round trip

_AUDITED = (
    ("White", "Female", 19592), ("White", "Male", 21825),
    ("Black", "Female", 126), ("Black", "Male", 160),
    ("Asian", "Female", 227), ("Asian", "Male", 227),
    ("Chinese", "Female", 61), ("Chinese", "Male", 61),
    ("Other", "Female", 200), ("Other", "Male", 307),
)


def default_cohort_spec(seed: int = 0, with_features: bool = True) -> CohortSpec:
    """A realistic imbalanced cohort: dominant White majority, small Black and
    Asian groups, Chinese rows that harmonize into Asian, and Other rows that
    the partition excludes."""
    groups = tuple(GroupSpec(race_label=r, sex=s, count=c) for r, s, c in _AUDITED)
    return CohortSpec(groups=groups, features=FeatureSpec() if with_features else None, seed=seed)


def null_cohort_spec(
    n_per_group: int = 126,
    seed: int = 0,
    dim: Optional[int] = 8,
    error_sd: float = 2.0,
    biases: Optional[dict[tuple[str, str], float]] = None,
    offsets: Optional[dict[tuple[str, str], float]] = None,
    age_loading_scale: float = 1.0,
    noise_sd: float = 1.0,
) -> CohortSpec:
    """Six equal subgroups with identical laws unless biases/offsets are given.

    The workhorse of calibration and power studies: with no biases and no
    offsets every subgroup is exchangeable.
    """
    biases = biases or {}
    offsets = offsets or {}
    groups = []
    for race in ("White", "Black", "Asian"):
        for sex in ("Female", "Male"):
            groups.append(GroupSpec(
                race_label=race,
                sex=sex,
                count=n_per_group,
                error_sd=error_sd,
                error_bias=biases.get((race, sex), 0.0),
                feature_offset=offsets.get((race, sex), 0.0),
            ))
    features = None
    if dim is not None:
        features = FeatureSpec(dim=dim, age_loading_scale=age_loading_scale, noise_sd=noise_sd)
    return CohortSpec(groups=tuple(groups), features=features, seed=seed)


def spec_to_json(spec: CohortSpec) -> str:
    payload = {
        "seed": spec.seed,
        "groups": [
            {
                "race": g.race_label,
                "sex": g.sex,
                "count": g.count,
                "age": {"mean": g.age_mean, "sd": g.age_sd, "min": g.age_min, "max": g.age_max},
                "error": {"bias": g.error_bias, "sd": g.error_sd},
                "feature_offset": list(g.feature_offset)
                if not isinstance(g.feature_offset, (int, float))
                else g.feature_offset,
            }
            for g in spec.groups
        ],
        "features": None if spec.features is None else {
            "dim": spec.features.dim,
            "age_loading_scale": spec.features.age_loading_scale,
            "noise_sd": spec.features.noise_sd,
        },
    }
    return json.dumps(payload, indent=2, sort_keys=True)


def spec_from_json(text: str) -> CohortSpec:
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid cohort spec JSON: {exc}") from None
    try:
        groups = tuple(
            GroupSpec(
                race_label=g["race"],
                sex=g["sex"],
                count=int(g["count"]),
                age_mean=float(g.get("age", {}).get("mean", 64.0)),
                age_sd=float(g.get("age", {}).get("sd", 7.7)),
                age_min=float(g.get("age", {}).get("min", 44.0)),
                age_max=float(g.get("age", {}).get("max", 82.0)),
                error_bias=float(g.get("error", {}).get("bias", 0.0)),
                error_sd=float(g.get("error", {}).get("sd", 2.5)),
                feature_offset=tuple(g["feature_offset"])
                if isinstance(g.get("feature_offset", 0.0), (list, tuple))
                else float(g.get("feature_offset", 0.0)),
            )
            for g in payload["groups"]
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid cohort spec structure: {exc}") from None
    feat = payload.get("features")
    features = None
    if feat is not None:
        features = FeatureSpec(
            dim=int(feat.get("dim", 512)),
            age_loading_scale=float(feat.get("age_loading_scale", 1.0)),
            noise_sd=float(feat.get("noise_sd", 1.0)),
        )
    spec = CohortSpec(groups=groups, features=features, seed=int(payload.get("seed", 0)))
    spec.validate()
    return spec


def load_spec(path: str | Path) -> CohortSpec:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"spec file not found: {path}")
    return spec_from_json(path.read_text(encoding="utf-8"))
