"""Hot numeric kernels: mid-tie ranking, KS distance, Gaussian KDE evaluation.

Each kernel has two interchangeable implementations:

* a numba ``@njit`` version (default when numba imports cleanly), and
* a pure-numpy fallback.

Selection happens once at import time via the ``AUDIT_NUMBA`` environment
variable ("0"/"false"/"off" forces the numpy path). ``USING_NUMBA`` reports
the active backend. The two paths agree to floating-point roundoff (tested);
within one backend results are fully deterministic.

``benchmarks/bench_kernels.py`` times both paths side by side.
"""

from __future__ import annotations

import math
import os

import numpy as np

SQRT_2PI = math.sqrt(2.0 * math.pi)

# Gaussian tail beyond 8 bandwidths contributes < 1e-14 per kernel and is
# skipped; keeps KDE cost proportional to local point density.
KDE_CUTOFF_BW = 8.0


def _env_wants_numba() -> bool:
    return os.environ.get("AUDIT_NUMBA", "1").strip().lower() not in {"0", "false", "off"}


# ---------------------------------------------------------------------------
# pure-numpy implementations


def _rank_midtie_np(values: np.ndarray) -> np.ndarray:
    n = values.shape[0]
    order = np.argsort(values, kind="stable")
    sv = values[order]
    boundary = np.empty(n, dtype=bool)
    boundary[0] = True
    boundary[1:] = sv[1:] != sv[:-1]
    run_id = np.cumsum(boundary) - 1
    starts = np.flatnonzero(boundary)
    ends = np.append(starts[1:], n)
    # mean of ranks start+1 .. end over each tie run
    avg = 0.5 * (starts + ends - 1) + 1.0
    ranks = np.empty(n, dtype=np.float64)
    ranks[order] = avg[run_id]
    return ranks


def _ks_distance_np(a_sorted: np.ndarray, b_sorted: np.ndarray) -> float:
    pooled = np.concatenate([a_sorted, b_sorted])
    fa = np.searchsorted(a_sorted, pooled, side="right") / a_sorted.shape[0]
    fb = np.searchsorted(b_sorted, pooled, side="right") / b_sorted.shape[0]
    return float(np.max(np.abs(fa - fb)))


def _kde_eval_np(sorted_values: np.ndarray, grid: np.ndarray, h: float) -> np.ndarray:
    n = sorted_values.shape[0]
    cutoff = KDE_CUTOFF_BW * h
    lo = np.searchsorted(sorted_values, grid - cutoff, side="left")
    hi = np.searchsorted(sorted_values, grid + cutoff, side="right")
    out = np.empty(grid.shape[0], dtype=np.float64)
    norm = 1.0 / (n * h * SQRT_2PI)
    for i in range(grid.shape[0]):
        window = sorted_values[lo[i]:hi[i]]
        if window.shape[0] == 0:
            out[i] = 0.0
            continue
        u = (grid[i] - window) / h
        out[i] = np.exp(-0.5 * u * u).sum() * norm
    return out


# ---------------------------------------------------------------------------
# numba implementations

_HAVE_NUMBA = False
if _env_wants_numba():
    try:
        from numba import njit
    except ImportError:  # pragma: no cover - numba is a declared dependency
        njit = None
    if njit is not None:
        _HAVE_NUMBA = True

        @njit(cache=True)
        def _rank_midtie_nb(values):  # pragma: no cover - exercised via wrapper
            n = values.shape[0]
            order = np.argsort(values)
            ranks = np.empty(n, dtype=np.float64)
            i = 0
            while i < n:
                j = i
                v = values[order[i]]
                while j + 1 < n and values[order[j + 1]] == v:
                    j += 1
                avg = 0.5 * (i + j) + 1.0
                for t in range(i, j + 1):
                    ranks[order[t]] = avg
                i = j + 1
            return ranks

        @njit(cache=True)
        def _ks_distance_nb(a, b):  # pragma: no cover - exercised via wrapper
            na = a.shape[0]
            nb = b.shape[0]
            ia = 0
            ib = 0
            d = 0.0
            while ia < na and ib < nb:
                if a[ia] <= b[ib]:
                    x = a[ia]
                else:
                    x = b[ib]
                while ia < na and a[ia] <= x:
                    ia += 1
                while ib < nb and b[ib] <= x:
                    ib += 1
                diff = abs(ia / na - ib / nb)
                if diff > d:
                    d = diff
            return d

        @njit(cache=True)
        def _kde_eval_nb(sorted_values, grid, h, cutoff):  # pragma: no cover
            n = sorted_values.shape[0]
            m = grid.shape[0]
            out = np.zeros(m, dtype=np.float64)
            norm = 1.0 / (n * h * SQRT_2PI)
            for i in range(m):
                g = grid[i]
                lo = np.searchsorted(sorted_values, g - cutoff)
                hi = np.searchsorted(sorted_values, g + cutoff, side="right")
                s = 0.0
                for t in range(lo, hi):
                    u = (g - sorted_values[t]) / h
                    s += math.exp(-0.5 * u * u)
                out[i] = s * norm
            return out


USING_NUMBA = _HAVE_NUMBA


# ---------------------------------------------------------------------------
# selected entry points


def rank_midtie_values(values: np.ndarray) -> np.ndarray:
    """Ranks 1..n with tied values receiving the mean of their covered ranks."""
    values = np.ascontiguousarray(values, dtype=np.float64)
    if USING_NUMBA:
        return _rank_midtie_nb(values)
    return _rank_midtie_np(values)


def ks_distance(a_sorted: np.ndarray, b_sorted: np.ndarray) -> float:
    """sup_x |F_a(x) - F_b(x)| over the pooled points of two sorted samples."""
    a_sorted = np.ascontiguousarray(a_sorted, dtype=np.float64)
    b_sorted = np.ascontiguousarray(b_sorted, dtype=np.float64)
    if USING_NUMBA:
        return float(_ks_distance_nb(a_sorted, b_sorted))
    return _ks_distance_np(a_sorted, b_sorted)


def kde_evaluate(sorted_values: np.ndarray, grid: np.ndarray, h: float) -> np.ndarray:
    """Gaussian KDE of a sorted sample evaluated on ``grid`` with bandwidth ``h``."""
    sorted_values = np.ascontiguousarray(sorted_values, dtype=np.float64)
    grid = np.ascontiguousarray(grid, dtype=np.float64)
    if USING_NUMBA:
        return _kde_eval_nb(sorted_values, grid, float(h), KDE_CUTOFF_BW * float(h))
    return _kde_eval_np(sorted_values, grid, float(h))
