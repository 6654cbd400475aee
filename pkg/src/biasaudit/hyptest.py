"""Hypothesis tests for the subgroup audit.

Rank-based machinery (Kruskal-Wallis with tie correction, Conover-Iman
post-hoc pairs), Shapiro-Wilk normality per Royston's AS R94
approximation, Levene's homogeneity test with mean or median centering,
the exact-statistic two-sample Kolmogorov-Smirnov test with the
asymptotic tail, and the Benjamini-Yekutieli step-up adjustment.

Everything is a pure function of its inputs; the only randomness is the
explicitly seeded subsample Shapiro-Wilk draws when a sample exceeds the
validated size of Royston's approximation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import numerics
from ._kernels import ks_distance, rank_midtie_values
from ._rng import make_rng, sample_without_replacement
from .errors import DataError, DegenerateDataError

__all__ = [
    "TestResult",
    "PairwiseResults",
    "rank_midtie",
    "shapiro_wilk",
    "levene",
    "kruskal_wallis",
    "conover_iman",
    "ks_two_sample",
    "benjamini_yekutieli",
    "SHAPIRO_MAX_N",
]

SHAPIRO_MAX_N = 5000


@dataclass(frozen=True)
class TestResult:
    """Statistic, optional degrees of freedom, p-value, and a method tag."""

    statistic: float
    df: Optional[tuple[float, ...]]
    p_value: float
    method: str
    extras: dict = field(default_factory=dict)


@dataclass(frozen=True)
class PairwiseResults:
    """Pairwise post-hoc output: symmetric p matrix, antisymmetric t matrix."""

    labels: tuple[str, ...]
    p_matrix: np.ndarray
    t_matrix: np.ndarray
    df: float
    method: str
    degenerate: bool = False

    def pair(self, i: int, j: int) -> tuple[float, float]:
        return float(self.t_matrix[i, j]), float(self.p_matrix[i, j])


def _as_sample(values, name: str = "sample") -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1:
        raise DataError(f"{name} must be 1-D, got shape {arr.shape}")
    if np.isnan(arr).any():
        raise DataError(f"{name} contains NaN")
    return arr


def rank_midtie(values) -> np.ndarray:
    """Ranks 1..n; tied values receive the mean of the ranks they cover."""
    arr = _as_sample(values)
    if arr.size < 1:
        raise DataError("rank_midtie needs at least one value")
    return rank_midtie_values(arr)


# ---------------------------------------------------------------------------
# Shapiro-Wilk (Royston 1995, AS R94)

_SW_C1 = (0.0, 0.221157, -0.147981, -2.071190, 4.434685, -2.706056)
_SW_C2 = (0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633)
_SW_C3 = (0.5440, -0.39978, 0.025054, -6.714e-4)
_SW_C4 = (1.3822, -0.77857, 0.062767, -0.0020322)
_SW_C5 = (-1.5861, -0.31082, -0.083751, 0.0038915)
_SW_C6 = (-0.4803, -0.082676, 0.0030302)
_SW_G = (-2.273, 0.459)
_PI6 = 1.90985931710274  # 6/pi
_STQR = 1.04719755119660  # asin(sqrt(3/4))


def _poly(coeffs: Sequence[float], x: float) -> float:
    out = 0.0
    for c in reversed(coeffs):
        out = out * x + c
    return out


def _sw_weights(n: int) -> np.ndarray:
    if n == 3:
        r = math.sqrt(0.5)
        return np.array([-r, 0.0, r])
    i = np.arange(1, n + 1)
    m = numerics.normal_ppf((i - 0.375) / (n + 0.25))
    msum = float(m @ m)
    u = 1.0 / math.sqrt(n)
    an = m[-1] / math.sqrt(msum) + _poly(_SW_C1, u)
    if n > 5:
        an1 = m[-2] / math.sqrt(msum) + _poly(_SW_C2, u)
        phi = (msum - 2.0 * m[-1] ** 2 - 2.0 * m[-2] ** 2) / (1.0 - 2.0 * an ** 2 - 2.0 * an1 ** 2)
        w = m / math.sqrt(phi)
        w[-1] = an
        w[-2] = an1
        w[0] = -an
        w[1] = -an1
    else:
        phi = (msum - 2.0 * m[-1] ** 2) / (1.0 - 2.0 * an ** 2)
        w = m / math.sqrt(phi)
        w[-1] = an
        w[0] = -an
    return w


def shapiro_wilk(sample, *, subsample_seed: int = 0) -> TestResult:
    """Shapiro-Wilk W with Royston's p-value approximation.

    Royston's approximation is validated for 3 <= n <= 5000; larger samples
    are reduced to a seeded uniform subsample of 5000 and the result is
    flagged ``subsampled``.
    """
    x = _as_sample(sample)
    n_input = x.size
    if n_input < 3:
        raise DataError(f"shapiro_wilk needs n >= 3, got {n_input}")
    subsampled = False
    if n_input > SHAPIRO_MAX_N:
        rng = make_rng(subsample_seed)
        idx = sample_without_replacement(n_input, SHAPIRO_MAX_N, rng)
        x = x[idx]
        subsampled = True
    n = x.size
    x = np.sort(x)
    ssq = float(((x - x.mean()) ** 2).sum())
    if ssq == 0.0 or x[0] == x[-1]:
        raise DegenerateDataError("shapiro_wilk: all sample values are identical")

    a = _sw_weights(n)
    w = float((a @ x) ** 2 / ssq)
    w = min(w, 1.0)

    if n == 3:
        p = _PI6 * (math.asin(math.sqrt(w)) - _STQR)
        p = min(1.0, max(0.0, p))
    else:
        w1 = max(1.0 - w, 1.0e-300)
        y = math.log(w1)
        if n <= 11:
            gamma = _poly(_SW_G, float(n))
            if y >= gamma:
                p = 1.0e-99
            else:
                y = -math.log(gamma - y)
                mu = _poly(_SW_C3, float(n))
                sigma = math.exp(_poly(_SW_C4, float(n)))
                p = numerics.normal_sf((y - mu) / sigma)
        else:
            ln_n = math.log(float(n))
            mu = _poly(_SW_C5, ln_n)
            sigma = math.exp(_poly(_SW_C6, ln_n))
            p = numerics.normal_sf((y - mu) / sigma)

    extras = {"n": n, "subsampled": subsampled}
    if subsampled:
        extras["n_input"] = n_input
        extras["subsample_seed"] = subsample_seed
    return TestResult(statistic=w, df=None, p_value=float(p), method="shapiro_wilk", extras=extras)


# ---------------------------------------------------------------------------
# Levene / Brown-Forsythe

def levene(groups: Sequence[Sequence[float]], centering: str = "mean") -> TestResult:
    """Homogeneity-of-variances test on absolute deviations from group centers.

    ``centering="mean"`` is the classical Levene statistic;
    ``centering="median"`` is the Brown-Forsythe variant.
    """
    centering = str(centering).strip().lower()
    if centering not in {"mean", "median"}:
        raise DataError(f"levene centering must be 'mean' or 'median', got {centering!r}")
    gs = [_as_sample(g, f"group {i}") for i, g in enumerate(groups)]
    if len(gs) < 2:
        raise DataError("levene needs at least two groups")
    if any(g.size < 2 for g in gs):
        raise DataError("levene needs at least two values per group")
    center = np.median if centering == "median" else np.mean
    z = [np.abs(g - center(g)) for g in gs]
    k = len(z)
    n_i = np.array([g.size for g in z], dtype=np.float64)
    big_n = float(n_i.sum())
    zbar_i = np.array([g.mean() for g in z])
    zbar = float(np.concatenate(z).mean())
    numerator = float((n_i * (zbar_i - zbar) ** 2).sum())
    denominator = float(sum(((g - m) ** 2).sum() for g, m in zip(z, zbar_i)))
    if denominator == 0.0:
        raise DegenerateDataError("levene: all within-group deviations are identical")
    w = ((big_n - k) / (k - 1.0)) * numerator / denominator
    p = numerics.f_sf(w, int(k - 1), int(big_n - k))
    return TestResult(
        statistic=float(w),
        df=(float(k - 1), float(big_n - k)),
        p_value=float(p),
        method=f"levene_{centering}",
        extras={"centering": centering},
    )


# ---------------------------------------------------------------------------
# Kruskal-Wallis and the Conover-Iman post-hoc

def _pooled_ranks(gs: list[np.ndarray]) -> tuple[np.ndarray, list[np.ndarray]]:
    pooled = np.concatenate(gs)
    ranks = rank_midtie_values(pooled)
    out = []
    start = 0
    for g in gs:
        out.append(ranks[start:start + g.size])
        start += g.size
    return ranks, out


def _tie_correction(pooled: np.ndarray) -> float:
    n = pooled.size
    _, counts = np.unique(pooled, return_counts=True)
    t = counts.astype(np.float64)
    return 1.0 - float((t ** 3 - t).sum()) / (n ** 3 - n)


def kruskal_wallis(groups: Sequence[Sequence[float]]) -> TestResult:
    """Rank-based k-sample omnibus test with mid-tie ranks and tie correction."""
    gs = [_as_sample(g, f"group {i}") for i, g in enumerate(groups)]
    if len(gs) < 2:
        raise DataError("kruskal_wallis needs at least two groups")
    if any(g.size == 0 for g in gs):
        raise DataError("kruskal_wallis: empty group")
    pooled = np.concatenate(gs)
    n = pooled.size
    if n < 3:
        raise DataError(f"kruskal_wallis needs a pooled sample of at least 3, got {n}")
    correction = _tie_correction(pooled)
    if correction == 0.0:
        raise DegenerateDataError("kruskal_wallis: all pooled values are tied")
    _, rank_groups = _pooled_ranks(gs)
    h = 12.0 / (n * (n + 1.0)) * sum(rg.sum() ** 2 / rg.size for rg in rank_groups) - 3.0 * (n + 1.0)
    h_corrected = h / correction
    k = len(gs)
    p = numerics.chisq_sf(max(h_corrected, 0.0), k - 1)
    return TestResult(
        statistic=float(h_corrected),
        df=(float(k - 1),),
        p_value=float(p),
        method="kruskal_wallis",
        extras={"h_uncorrected": float(h), "tie_correction": float(correction)},
    )


def conover_iman(
    groups: Sequence[Sequence[float]],
    labels: Optional[Sequence[str]] = None,
    omnibus: Optional[tuple[float, int]] = None,
) -> PairwiseResults:
    """Pairwise Conover-Iman comparisons following Kruskal-Wallis.

    The t statistics use the pooled mid-tie ranks of exactly these groups
    and, by default, the tie-corrected H from ``kruskal_wallis`` on them.
    ``omnibus=(h, k)`` substitutes the H statistic and group count of an
    enclosing analysis (used when a wider grouping's ranking context is
    reused); degrees of freedom become N - k for the supplied k.
    """
    gs = [_as_sample(g, f"group {i}") for i, g in enumerate(groups)]
    if labels is None:
        labels = tuple(f"group{i}" for i in range(len(gs)))
    labels = tuple(str(lbl) for lbl in labels)
    if len(labels) != len(gs):
        raise DataError(f"{len(labels)} labels for {len(gs)} groups")

    if omnibus is None:
        omni = kruskal_wallis(gs)
        h = omni.statistic
        k_eff = len(gs)
        method = "conover_iman"
    else:
        h, k_eff = float(omnibus[0]), int(omnibus[1])
        method = "conover_iman_reused_omnibus"
        if _tie_correction(np.concatenate(gs)) == 0.0:
            raise DegenerateDataError("conover_iman: all pooled values are tied")

    pooled_ranks, rank_groups = _pooled_ranks(gs)
    n = pooled_ranks.size
    if n - k_eff < 1:
        raise DataError(f"conover_iman: nonpositive degrees of freedom N-k = {n - k_eff}")
    mean_ranks = np.array([rg.mean() for rg in rank_groups])
    sizes = np.array([rg.size for rg in rank_groups], dtype=np.float64)
    s_sq = (float((pooled_ranks ** 2).sum()) - n * (n + 1.0) ** 2 / 4.0) / (n - 1.0)
    df = float(n - k_eff)

    m = len(gs)
    t_matrix = np.zeros((m, m))
    p_matrix = np.eye(m)
    # treat roundoff-level slack as exact separation
    degenerate = (n - 1.0 - h) <= 1.0e-9 * (n - 1.0)
    if degenerate:
        # perfect separation: the variance term collapses, report p = 0
        p_matrix = np.eye(m)
        return PairwiseResults(labels=labels, p_matrix=p_matrix, t_matrix=t_matrix,
                               df=df, method=method, degenerate=True)

    scale = s_sq * (n - 1.0 - h) / (n - k_eff)
    for i in range(m):
        for j in range(i + 1, m):
            se = math.sqrt(scale * (1.0 / sizes[i] + 1.0 / sizes[j]))
            t = (mean_ranks[i] - mean_ranks[j]) / se if se > 0.0 else 0.0
            p = min(1.0, 2.0 * numerics.student_t_sf(abs(t), df))
            t_matrix[i, j] = t
            t_matrix[j, i] = -t
            p_matrix[i, j] = p
            p_matrix[j, i] = p
    return PairwiseResults(labels=labels, p_matrix=p_matrix, t_matrix=t_matrix,
                           df=df, method=method, degenerate=False)


# ---------------------------------------------------------------------------
# two-sample Kolmogorov-Smirnov

def ks_two_sample(a, b) -> TestResult:
    """Exact maximum ECDF gap D with the asymptotic Kolmogorov tail."""
    xa = _as_sample(a, "first sample")
    xb = _as_sample(b, "second sample")
    if xa.size < 1 or xb.size < 1:
        raise DataError("ks_two_sample needs non-empty samples")
    d = ks_distance(np.sort(xa), np.sort(xb))
    n, m = xa.size, xb.size
    stat = math.sqrt(n * m / (n + m)) * d
    p = 1.0 if stat <= 0.0 else numerics.kolmogorov_sf(stat)
    p = min(1.0, max(0.0, p))
    return TestResult(statistic=float(d), df=None, p_value=p, method="ks_two_sample",
                      extras={"n": n, "m": m})


# ---------------------------------------------------------------------------
# Benjamini-Yekutieli adjustment

def benjamini_yekutieli(p_values: Sequence[float]) -> list[float]:
    """Step-up FDR adjustment valid under arbitrary dependence.

    adj_(i) = min(1, min_{j >= i} p_(j) * m * c(m) / j) with the harmonic
    factor c(m); output is returned in the input order.
    """
    ps = np.asarray(p_values, dtype=np.float64)
    if ps.ndim != 1 or ps.size < 1:
        raise DataError("benjamini_yekutieli needs a non-empty 1-D list")
    if np.any((ps < 0.0) | (ps > 1.0)) or np.isnan(ps).any():
        raise DataError("benjamini_yekutieli: p-values must lie in [0, 1]")
    m = ps.size
    c_m = float(np.sum(1.0 / np.arange(1, m + 1)))
    order = np.argsort(ps, kind="stable")
    ranked = ps[order] * m * c_m / np.arange(1, m + 1)
    adjusted = np.minimum.accumulate(ranked[::-1])[::-1]
    adjusted = np.minimum(adjusted, 1.0)
    out = np.empty(m, dtype=np.float64)
    out[order] = adjusted
    return [float(v) for v in out]
