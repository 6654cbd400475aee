"""Cohort data model: ingestion, label harmonization, subgroup partition.

A cohort is a CSV table ``id,age,predicted_age,sex,race`` plus an optional
feature matrix keyed by the same ids (CSV or FEATMAT1 binary, see
``load_features_binary``). Race labels are harmonized to the three audited
levels; Chinese folds into Asian, while Other/Mixed/unrecognized labels and
rows with missing attributes are excluded with machine-readable reasons
rather than failing the audit.
"""

from __future__ import annotations

import csv
import math
import struct
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import DataError
from .featspace import FeatureMatrix


class Race(Enum):
    WHITE = "White"
    BLACK = "Black"
    ASIAN = "Asian"


class Sex(Enum):
    FEMALE = "Female"
    MALE = "Male"


_RACE_ALIASES = {
    "white": Race.WHITE,
    "black": Race.BLACK,
    "asian": Race.ASIAN,
    "chinese": Race.ASIAN,
}
_EXCLUDED_RACE_LABELS = {"other": "race_other", "mixed": "race_mixed"}

_SEX_ALIASES = {
    "female": Sex.FEMALE,
    "f": Sex.FEMALE,
    "male": Sex.MALE,
    "m": Sex.MALE,
}


def harmonize_race(race_raw: str) -> Optional[Race]:
    """Map a raw race label to an audited level, or None when excluded.

    Matching is case-insensitive after trimming; Chinese counts as Asian,
    Other/Mixed and anything unrecognized are excluded.
    """
    return _RACE_ALIASES.get(race_raw.strip().lower())


def race_exclusion_reason(race_raw: str) -> str:
    key = race_raw.strip().lower()
    if not key:
        return "missing_attribute"
    return _EXCLUDED_RACE_LABELS.get(key, "race_unrecognized")


def parse_sex(sex_raw: str) -> Optional[Sex]:
    return _SEX_ALIASES.get(sex_raw.strip().lower())


@dataclass(frozen=True)
class SubjectRecord:
    """One audited subject; ``feature_row`` indexes into a FeatureMatrix."""

    id: str
    age: float
    predicted_age: float
    sex: Optional[Sex]
    race_raw: str
    feature_row: Optional[int] = None

    def __post_init__(self):
        if not (math.isfinite(self.age) and self.age > 0.0):
            raise DataError(f"subject {self.id!r}: age must be finite and > 0, got {self.age!r}")
        if not math.isfinite(self.predicted_age):
            raise DataError(f"subject {self.id!r}: predicted_age must be finite, got {self.predicted_age!r}")


@dataclass(frozen=True, order=True)
class SubgroupKey:
    race: Race
    sex: Sex

    @property
    def label(self) -> str:
        return f"{self.race.value} {self.sex.value.lower()}"


SUBGROUP_ORDER: tuple[SubgroupKey, ...] = tuple(
    SubgroupKey(race, sex)
    for race in (Race.WHITE, Race.BLACK, Race.ASIAN)
    for sex in (Sex.FEMALE, Sex.MALE)
)


@dataclass(frozen=True)
class SubgroupPartition:
    """The six race-by-sex membership lists plus the exclusion log."""

    groups: dict[SubgroupKey, tuple[SubjectRecord, ...]]
    excluded: tuple[tuple[str, str], ...]

    def counts(self) -> dict[SubgroupKey, int]:
        return {key: len(self.groups[key]) for key in SUBGROUP_ORDER}

    def min_group_size(self) -> int:
        return min(len(self.groups[key]) for key in SUBGROUP_ORDER)

    def total_included(self) -> int:
        return sum(len(v) for v in self.groups.values())

    def iter_groups(self) -> Iterable[tuple[SubgroupKey, tuple[SubjectRecord, ...]]]:
        for key in SUBGROUP_ORDER:
            yield key, self.groups[key]


def partition(records: Sequence[SubjectRecord]) -> SubgroupPartition:
    """Split records into the six audited subgroups.

    Exclusions (missing attributes, non-audited race labels) are recorded,
    never raised; only an entirely excluded cohort is an error.
    """
    if not records:
        raise DataError("cannot partition an empty cohort")
    seen: set[str] = set()
    groups: dict[SubgroupKey, list[SubjectRecord]] = {key: [] for key in SUBGROUP_ORDER}
    excluded: list[tuple[str, str]] = []
    for rec in records:
        if rec.id in seen:
            raise DataError(f"duplicate subject id {rec.id!r}")
        seen.add(rec.id)
        if rec.sex is None:
            excluded.append((rec.id, "missing_attribute"))
            continue
        race = harmonize_race(rec.race_raw)
        if race is None:
            excluded.append((rec.id, race_exclusion_reason(rec.race_raw)))
            continue
        groups[SubgroupKey(race, rec.sex)].append(rec)
    if not any(groups.values()):
        raise DataError("all subjects were excluded; nothing to audit")
    return SubgroupPartition(
        groups={key: tuple(v) for key, v in groups.items()},
        excluded=tuple(excluded),
    )


def absolute_error(record: SubjectRecord) -> float:
    """|age - predicted_age| in years."""
    return abs(record.age - record.predicted_age)


def mae(errors: Sequence[float]) -> float:
    """Arithmetic mean of absolute errors."""
    if len(errors) == 0:
        raise DataError("mae of an empty list")
    return float(np.mean(np.asarray(errors, dtype=np.float64)))


# ---------------------------------------------------------------------------
# file formats

_COHORT_HEADER = ["id", "age", "predicted_age", "sex", "race"]
FEATMAT_MAGIC = b"FEATMAT1"


def load_cohort_csv(path: str | Path) -> list[SubjectRecord]:
    path = Path(path)
    if not path.exists():
        raise DataError(f"cohort file not found: {path}")
    records: list[SubjectRecord] = []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty cohort file") from None
        if [h.strip() for h in header] != _COHORT_HEADER:
            raise DataError(f"{path}: expected header {','.join(_COHORT_HEADER)!r}, got {','.join(header)!r}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 5:
                raise DataError(f"{path}:{lineno}: expected 5 fields, got {len(row)}")
            sid, age_s, pred_s, sex_s, race_s = (field.strip() for field in row)
            if not sid:
                raise DataError(f"{path}:{lineno}: empty subject id")
            try:
                age = float(age_s)
                pred = float(pred_s)
            except ValueError:
                raise DataError(f"{path}:{lineno}: unparsable age/predicted_age {age_s!r}, {pred_s!r}") from None
            try:
                records.append(
                    SubjectRecord(id=sid, age=age, predicted_age=pred, sex=parse_sex(sex_s), race_raw=race_s)
                )
            except DataError as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from None
    if not records:
        raise DataError(f"{path}: no subject rows")
    return records


def save_cohort_csv(records: Sequence[SubjectRecord], path: str | Path) -> None:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(_COHORT_HEADER)
        for rec in records:
            writer.writerow([
                rec.id,
                repr(rec.age),
                repr(rec.predicted_age),
                rec.sex.value if rec.sex is not None else "",
                rec.race_raw,
            ])


def load_features_csv(path: str | Path) -> FeatureMatrix:
    path = Path(path)
    if not path.exists():
        raise DataError(f"feature file not found: {path}")
    ids: list[str] = []
    rows: list[list[float]] = []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty feature file") from None
        if not header or header[0].strip() != "id":
            raise DataError(f"{path}: first feature column must be 'id'")
        d = len(header) - 1
        expected = [f"f{i}" for i in range(d)]
        if [h.strip() for h in header[1:]] != expected:
            raise DataError(f"{path}: feature columns must be f0..f{d - 1}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != d + 1:
                raise DataError(f"{path}:{lineno}: expected {d + 1} fields, got {len(row)}")
            ids.append(row[0].strip())
            try:
                rows.append([float(v) for v in row[1:]])
            except ValueError:
                raise DataError(f"{path}:{lineno}: unparsable feature value") from None
    if not rows:
        raise DataError(f"{path}: no feature rows")
    return FeatureMatrix(ids=tuple(ids), X=np.asarray(rows, dtype=np.float64))


def load_features_binary(data_path: str | Path, ids_path: str | Path) -> FeatureMatrix:
    """Read the FEATMAT1 binary layout with its sidecar id list.

    Layout: 8-byte magic, little-endian u64 n and u64 d, then n*d float32
    values row-major; the sidecar holds one id per line, n lines.
    """
    data_path = Path(data_path)
    ids_path = Path(ids_path)
    for p in (data_path, ids_path):
        if not p.exists():
            raise DataError(f"feature file not found: {p}")
    with data_path.open("rb") as fh:
        magic = fh.read(8)
        if magic != FEATMAT_MAGIC:
            raise DataError(f"{data_path}: bad magic {magic!r}, expected {FEATMAT_MAGIC!r}")
        header = fh.read(16)
        if len(header) != 16:
            raise DataError(f"{data_path}: truncated header")
        n, d = struct.unpack("<QQ", header)
        payload = np.fromfile(fh, dtype="<f4", count=n * d)
    if payload.size != n * d:
        raise DataError(f"{data_path}: expected {n * d} float32 values, got {payload.size}")
    ids = ids_path.read_text(encoding="utf-8").splitlines()
    if len(ids) != n:
        raise DataError(f"{ids_path}: expected {n} ids, got {len(ids)}")
    return FeatureMatrix(ids=tuple(ids), X=payload.reshape(n, d).astype(np.float64))


def save_features_binary(fm: FeatureMatrix, data_path: str | Path, ids_path: str | Path) -> None:
    data_path = Path(data_path)
    ids_path = Path(ids_path)
    n, d = fm.X.shape
    with data_path.open("wb") as fh:
        fh.write(FEATMAT_MAGIC)
        fh.write(struct.pack("<QQ", n, d))
        np.ascontiguousarray(fm.X, dtype="<f4").tofile(fh)
    ids_path.write_text("\n".join(fm.ids) + "\n", encoding="utf-8")


def attach_features(records: Sequence[SubjectRecord], fm: FeatureMatrix) -> tuple[list[SubjectRecord], int]:
    """Link records to feature rows by id.

    Returns the relinked records plus the count of subjects without a
    feature row (kept for the performance audit, skipped by the feature
    audit).
    """
    index = {sid: i for i, sid in enumerate(fm.ids)}
    out: list[SubjectRecord] = []
    missing = 0
    for rec in records:
        row = index.get(rec.id)
        if row is None:
            missing += 1
        out.append(replace(rec, feature_row=row))
    return out, missing
