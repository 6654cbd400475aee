"""Feature-space inspection: PCA, kernel density estimation, age brackets,
and the per-mode distribution-shift test family.

PCA works on the covariance eigendecomposition, switching to the Gram
matrix when the feature dimension exceeds the number of rows so a
512-dimensional matrix over tens of thousands of subjects stays cheap.
Components follow a fixed sign convention (largest-magnitude entry is
positive), which makes fits reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from ._kernels import kde_evaluate
from .errors import ConfigError, DataError, DegenerateDataError
from .hyptest import TestResult, benjamini_yekutieli, ks_two_sample


@dataclass(frozen=True)
class FeatureMatrix:
    """n subjects by d features, with row ids aligned to cohort ids."""

    ids: tuple[str, ...]
    X: np.ndarray

    def __post_init__(self):
        if self.X.ndim != 2:
            raise DataError(f"feature matrix must be 2-D, got shape {self.X.shape}")
        if len(self.ids) != self.X.shape[0]:
            raise DataError(f"{len(self.ids)} ids for {self.X.shape[0]} feature rows")
        if not np.all(np.isfinite(self.X)):
            raise DataError("feature matrix contains non-finite values")


@dataclass(frozen=True)
class PcaModel:
    mean: np.ndarray
    components: np.ndarray  # k x d, orthonormal rows, descending variance
    explained_variance: np.ndarray

    @property
    def n_modes(self) -> int:
        return self.components.shape[0]


def pca_fit(X: np.ndarray | FeatureMatrix, k: int) -> PcaModel:
    """Top-k principal modes of the sample covariance (divisor n-1)."""
    if isinstance(X, FeatureMatrix):
        X = X.X
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise DataError(f"pca_fit expects a 2-D matrix, got shape {X.shape}")
    n, d = X.shape
    if n < 2:
        raise DataError(f"pca_fit needs at least 2 rows, got {n}")
    if not 1 <= k <= min(n - 1, d):
        raise ConfigError(f"k must satisfy 1 <= k <= min(n-1, d) = {min(n - 1, d)}, got {k}")
    mean = X.mean(axis=0)
    Xc = X - mean
    total_var = float((Xc * Xc).sum() / (n - 1))
    if total_var == 0.0:
        raise DegenerateDataError("pca_fit: zero variance in all columns")

    if d <= n:
        cov = (Xc.T @ Xc) / (n - 1)
        evals, evecs = np.linalg.eigh(cov)
        order = np.argsort(evals)[::-1][:k]
        components = evecs[:, order].T.copy()
        variances = evals[order]
    else:
        gram = (Xc @ Xc.T) / (n - 1)
        evals, evecs = np.linalg.eigh(gram)
        order = np.argsort(evals)[::-1][:k]
        variances = evals[order]
        if np.any(variances <= total_var * 1e-12):
            raise DegenerateDataError("pca_fit: requested modes exceed the rank of the data")
        # right singular vectors recovered from the Gram eigenvectors
        components = (Xc.T @ evecs[:, order]) / np.sqrt(variances * (n - 1))
        components = components.T.copy()

    variances = np.clip(variances, 0.0, None)
    for row in components:
        j = int(np.argmax(np.abs(row)))
        if row[j] < 0.0:
            row *= -1.0
    return PcaModel(mean=mean, components=components, explained_variance=variances)


def pca_project(model: PcaModel, X: np.ndarray | FeatureMatrix) -> np.ndarray:
    """Score matrix (X - mean) @ components^T."""
    if isinstance(X, FeatureMatrix):
        X = X.X
    X = np.asarray(X, dtype=np.float64)
    single = X.ndim == 1
    if single:
        X = X[None, :]
    if X.shape[1] != model.mean.shape[0]:
        raise DataError(f"feature dimension {X.shape[1]} does not match model dimension {model.mean.shape[0]}")
    scores = (X - model.mean) @ model.components.T
    return scores[0] if single else scores


@dataclass(frozen=True)
class KdeCurve:
    grid: np.ndarray
    density: np.ndarray
    bandwidth: float


def _bandwidth(values: np.ndarray, rule) -> float:
    if isinstance(rule, (int, float)) and not isinstance(rule, bool):
        h = float(rule)
        if h <= 0.0:
            raise ConfigError(f"fixed bandwidth must be > 0, got {h}")
        return h
    n = values.shape[0]
    if n < 2:
        raise DegenerateDataError("automatic bandwidth needs at least 2 values")
    sd = float(values.std(ddof=1))
    if sd == 0.0:
        raise DegenerateDataError("automatic bandwidth on a zero-variance sample")
    name = str(rule).strip().lower()
    if name == "scott":
        return sd * n ** (-0.2)
    if name == "silverman":
        q75, q25 = np.percentile(values, [75.0, 25.0])
        iqr = float(q75 - q25)
        a = min(sd, iqr / 1.34) if iqr > 0.0 else sd
        return 0.9 * a * n ** (-0.2)
    raise ConfigError(f"unknown bandwidth rule {rule!r}")


def kde(values: Sequence[float], grid_points: int, bandwidth_rule="scott") -> KdeCurve:
    """Gaussian KDE on a grid spanning the data plus 4 bandwidths each side."""
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 1 or values.shape[0] < 1:
        raise DataError("kde expects a non-empty 1-D sample")
    if not np.all(np.isfinite(values)):
        raise DataError("kde sample contains non-finite values")
    if grid_points < 2:
        raise ConfigError(f"grid_points must be >= 2, got {grid_points}")
    h = _bandwidth(values, bandwidth_rule)
    sv = np.sort(values)
    grid = np.linspace(sv[0] - 4.0 * h, sv[-1] + 4.0 * h, grid_points)
    density = kde_evaluate(sv, grid, h)
    return KdeCurve(grid=grid, density=density, bandwidth=h)


@dataclass(frozen=True)
class AgeBracketing:
    """Half-open age brackets [e_i, e_{i+1}) from strictly ascending edges."""

    edges: tuple[float, ...]

    def __post_init__(self):
        if len(self.edges) < 2:
            raise ConfigError("bracketing needs at least two edges")
        if any(b <= a for a, b in zip(self.edges, self.edges[1:])):
            raise ConfigError(f"bracket edges must be strictly ascending, got {self.edges}")

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(f"[{_fmt_edge(a)},{_fmt_edge(b)})" for a, b in zip(self.edges, self.edges[1:]))

    def assign(self, ages: np.ndarray) -> np.ndarray:
        """Bracket index per age; -1 marks out-of-range."""
        ages = np.asarray(ages, dtype=np.float64)
        idx = np.searchsorted(np.asarray(self.edges), ages, side="right") - 1
        bad = (ages < self.edges[0]) | (ages >= self.edges[-1])
        idx[bad] = -1
        return idx


def _fmt_edge(v: float) -> str:
    return f"{v:g}"


def bracket_ages(
    ages: Sequence[float],
    bracketing: AgeBracketing,
    ids: Optional[Sequence[str]] = None,
) -> list[str]:
    """Bracket label for every age; out-of-range ages raise naming the subject."""
    ages = np.asarray(ages, dtype=np.float64)
    idx = bracketing.assign(ages)
    bad = np.flatnonzero(idx < 0)
    if bad.size:
        i = int(bad[0])
        who = ids[i] if ids is not None else f"index {i}"
        raise DataError(
            f"age {ages[i]:g} of {who} is outside [{_fmt_edge(bracketing.edges[0])}, {_fmt_edge(bracketing.edges[-1])})"
        )
    labels = bracketing.labels
    return [labels[i] for i in idx]


def equal_width_brackets(ages: Sequence[float], count: int) -> AgeBracketing:
    """``count`` equal-width brackets covering the observed age range."""
    ages = np.asarray(ages, dtype=np.float64)
    if ages.size == 0:
        raise DataError("cannot bracket an empty age list")
    if count < 1:
        raise ConfigError(f"bracket count must be >= 1, got {count}")
    lo = float(ages.min())
    hi = float(ages.max())
    if hi <= lo:
        hi = lo + 1.0
    edges = np.linspace(lo, hi, count + 1)
    # keep the maximum age inside the last half-open bracket
    edges[-1] = math.nextafter(hi, math.inf)
    return AgeBracketing(edges=tuple(float(e) for e in edges))


@dataclass(frozen=True)
class ShiftRow:
    """One (mode, comparison) distribution-shift test."""

    mode: int  # 1-based
    comparison: str
    result: Optional[TestResult]
    adjusted_p: Optional[float]
    significant: Optional[bool]
    skipped_reason: Optional[str] = None


@dataclass(frozen=True)
class ShiftTable:
    rows: tuple[ShiftRow, ...]
    alpha: float
    family_size: int
    comparisons: tuple[str, ...] = field(default=())
    modes: tuple[int, ...] = field(default=())


def feature_shift_tests(
    scores: np.ndarray,
    comparisons: Sequence[tuple[str, np.ndarray, np.ndarray]],
    modes: Optional[Iterable[int]] = None,
    alpha: float = 0.05,
) -> ShiftTable:
    """Two-sample KS per (mode, comparison), BY-adjusted over the whole family.

    ``comparisons`` are (label, indices_a, indices_b) pairs into the score
    rows. A side with fewer than two subjects skips that comparison with a
    flag; skipped rows do not enter the adjustment family.
    """
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim != 2:
        raise DataError(f"scores must be 2-D, got shape {scores.shape}")
    mode_list = list(modes) if modes is not None else list(range(1, scores.shape[1] + 1))
    for m in mode_list:
        if not 1 <= m <= scores.shape[1]:
            raise ConfigError(f"mode {m} outside 1..{scores.shape[1]}")

    pending: list[tuple[int, str, Optional[TestResult], Optional[str]]] = []
    for m in mode_list:
        col = scores[:, m - 1]
        for label, idx_a, idx_b in comparisons:
            a = col[np.asarray(idx_a, dtype=np.intp)]
            b = col[np.asarray(idx_b, dtype=np.intp)]
            if a.size < 2 or b.size < 2:
                pending.append((m, label, None, "insufficient_data"))
            else:
                pending.append((m, label, ks_two_sample(a, b), None))

    raw = [item[2].p_value for item in pending if item[2] is not None]
    adjusted = benjamini_yekutieli(raw) if raw else []
    rows: list[ShiftRow] = []
    ai = 0
    for m, label, result, skip in pending:
        if result is None:
            rows.append(ShiftRow(mode=m, comparison=label, result=None, adjusted_p=None,
                                 significant=None, skipped_reason=skip))
        else:
            adj = float(adjusted[ai])
            ai += 1
            rows.append(ShiftRow(mode=m, comparison=label, result=result, adjusted_p=adj,
                                 significant=bool(adj < alpha)))
    return ShiftTable(
        rows=tuple(rows),
        alpha=alpha,
        family_size=len(raw),
        comparisons=tuple(label for label, _, _ in comparisons),
        modes=tuple(mode_list),
    )
