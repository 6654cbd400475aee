#!/usr/bin/env python3
"""Benchmark the numba kernels against their pure-numpy fallbacks.

Times mid-tie ranking, the KS distance scan, and Gaussian KDE evaluation
at audit-realistic sizes, printing a side-by-side table. Run with the
package installed:

    python benchmarks/bench_kernels.py [--repeats 7]

The numba path needs a warm-up call per kernel (JIT compile); warm-up
time is excluded from the timings, matching how the audit amortizes it.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from biasaudit import _kernels as K


def timeit(fn, *args, repeats: int) -> float:
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=7, help="timing repeats (default 7)")
    args = parser.parse_args()

    if not K._HAVE_NUMBA:
        print("numba unavailable; nothing to compare (numpy path is the only path)")
        return

    rng = np.random.default_rng(0)
    cases = []

    for n in (756, 50_000):
        values = rng.normal(0.0, 1.0, n)
        cases.append((f"rank_midtie n={n}", K._rank_midtie_nb, K._rank_midtie_np, (values,), (values,)))

    for n, m in ((126, 126), (25_000, 25_000)):
        a = np.sort(rng.normal(0.0, 1.0, n))
        b = np.sort(rng.normal(0.2, 1.1, m))
        cases.append((f"ks_distance {n}v{m}", K._ks_distance_nb, K._ks_distance_np, (a, b), (a, b)))

    for n, g in ((756, 256), (50_000, 512)):
        values = np.sort(rng.normal(64.0, 7.7, n))
        h = float(values.std() * n ** -0.2)
        grid = np.linspace(values[0] - 4 * h, values[-1] + 4 * h, g)
        cases.append((
            f"kde_evaluate n={n} grid={g}",
            K._kde_eval_nb, K._kde_eval_np,
            (values, grid, h, K.KDE_CUTOFF_BW * h),
            (values, grid, h),
        ))

    print(f"{'kernel':<32}{'numba':>12}{'numpy':>12}{'speedup':>10}")
    for name, fn_nb, fn_np, args_nb, args_np in cases:
        fn_nb(*args_nb)  # JIT warm-up
        t_nb = timeit(fn_nb, *args_nb, repeats=args.repeats)
        t_np = timeit(fn_np, *args_np, repeats=args.repeats)
        print(f"{name:<32}{t_nb * 1e3:>10.3f}ms{t_np * 1e3:>10.3f}ms{t_np / t_nb:>9.1f}x")


if __name__ == "__main__":
    main()
