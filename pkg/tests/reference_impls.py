"""Independent reference implementations used as test oracles.

Everything here is built on scipy/statsmodels primitives and shares no
code with the package under test: ranking, tie handling, matrix algebra,
and distribution tails all come from the reference stack.
"""

from __future__ import annotations

import numpy as np
from scipy import stats


def conover_reference(groups: list[np.ndarray]) -> np.ndarray:
    """Pairwise two-sided Conover-Iman p-values (no adjustment).

    Classical formulation: pooled mid-rank transform, tie-corrected
    Kruskal-Wallis H, pooled rank variance S^2, and a t statistic with
    N - k degrees of freedom per pair.
    """
    sizes = np.array([len(g) for g in groups])
    k = len(groups)
    pooled = np.concatenate(groups)
    n = len(pooled)
    ranks = stats.rankdata(pooled)
    tie = stats.tiecorrect(ranks)
    h = stats.kruskal(*groups).statistic  # already tie-corrected

    cuts = np.cumsum(sizes)[:-1]
    rank_groups = np.split(ranks, cuts)
    mean_ranks = np.array([rg.mean() for rg in rank_groups])
    s_sq = (np.sum(ranks**2) - n * (n + 1.0) ** 2 / 4.0) / (n - 1.0)
    df = n - k

    p = np.eye(k)
    for i in range(k):
        for j in range(i + 1, k):
            se = np.sqrt(s_sq * ((n - 1.0 - h) / (n - k)) * (1.0 / sizes[i] + 1.0 / sizes[j]))
            t = (mean_ranks[i] - mean_ranks[j]) / se
            pv = min(1.0, 2.0 * stats.t.sf(abs(t), df))
            p[i, j] = p[j, i] = pv
    return p


def permutation_pvalue_kw(groups: list[np.ndarray], nperm: int, seed: int,
                          block: int = 2000) -> float:
    """Permutation tail probability of the tie-corrected KW statistic."""
    rng = np.random.default_rng(seed)
    sizes = np.array([len(g) for g in groups])
    pooled = np.concatenate(groups)
    n = len(pooled)
    ranks = stats.rankdata(pooled)
    tie = stats.tiecorrect(ranks)
    obs = stats.kruskal(*groups).statistic
    count = 0
    done = 0
    while done < nperm:
        b = min(block, nperm - done)
        idx = np.argsort(rng.random((b, n)), axis=1)
        rp = ranks[idx]
        h = np.zeros(b)
        start = 0
        for s in sizes:
            h += rp[:, start:start + s].sum(axis=1) ** 2 / s
            start += s
        h = (12.0 / (n * (n + 1.0))) * h - 3.0 * (n + 1.0)
        h /= tie
        count += int((h >= obs - 1e-12).sum())
        done += b
    return count / nperm


def _anova_f_rows(z_rows: np.ndarray, sizes: np.ndarray) -> np.ndarray:
    b, n = z_rows.shape
    k = len(sizes)
    grand = z_rows.mean(axis=1)
    num = np.zeros(b)
    den = np.zeros(b)
    start = 0
    for s in sizes:
        blk = z_rows[:, start:start + s]
        mg = blk.mean(axis=1)
        num += s * (mg - grand) ** 2
        den += ((blk - mg[:, None]) ** 2).sum(axis=1)
        start += s
    return (num / (k - 1)) / (den / (n - k))


def permutation_pvalue_levene(groups: list[np.ndarray], centering: str, nperm: int,
                              seed: int, block: int = 2000) -> float:
    """Permutation tail of the Levene statistic over fixed absolute deviations.

    The deviations |x - center| are formed once with the original group
    centers, then permuted across groups; the statistic on permuted rows is
    the one-way ANOVA F of the deviations (exactly the Levene W).
    """
    rng = np.random.default_rng(seed)
    cf = np.median if centering == "median" else np.mean
    z = [np.abs(g - cf(g)) for g in groups]
    sizes = np.array([len(g) for g in z])
    pooled = np.concatenate(z)
    n = len(pooled)
    obs = _anova_f_rows(pooled[None, :], sizes)[0]
    count = 0
    done = 0
    while done < nperm:
        b = min(block, nperm - done)
        idx = np.argsort(rng.random((b, n)), axis=1)
        count += int((_anova_f_rows(pooled[idx], sizes) >= obs - 1e-12).sum())
        done += b
    return count / nperm


def by_adjust_reference(pvalues: list[float]) -> np.ndarray:
    """Benjamini-Yekutieli adjustment via statsmodels."""
    from statsmodels.stats.multitest import multipletests

    return multipletests(pvalues, method="fdr_by")[1]
