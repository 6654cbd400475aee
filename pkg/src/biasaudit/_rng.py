"""Seed derivation and sampling primitives.

All randomness in the package flows from explicit 64-bit seeds through
two fixed building blocks:

* ``splitmix64`` / ``derive_seed`` -- the documented mixing function used
  to spawn independent child seeds (one per repeat, per subgroup, ...).
  Child streams are therefore reproducible regardless of execution order.
* numpy's Philox counter-based bit generator for the actual variates,
  which is platform-independent for a fixed seed.
"""

from __future__ import annotations

import numpy as np

_MASK64 = 0xFFFFFFFFFFFFFFFF
_GOLDEN = 0x9E3779B97F4A7C15


def splitmix64(state: int) -> int:
    """One output of the splitmix64 generator for a 64-bit ``state``."""
    z = (state + _GOLDEN) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def derive_seed(seed: int, index: int) -> int:
    """Child seed ``index`` of ``seed``: splitmix64(seed + (index+1)*golden)."""
    return splitmix64((seed + (index + 1) * _GOLDEN) & _MASK64)


def make_rng(seed: int) -> np.random.Generator:
    """Philox generator keyed by a 64-bit seed."""
    return np.random.Generator(np.random.Philox(key=seed & _MASK64))


def sample_without_replacement(n: int, k: int, rng: np.random.Generator) -> np.ndarray:
    """``k`` distinct indices drawn uniformly from ``range(n)``.

    Partial Fisher-Yates, so the cost is O(k) extra memory on top of the
    index array and the result is a uniformly random k-subset in draw order.
    """
    if not 0 <= k <= n:
        raise ValueError(f"cannot draw {k} from {n}")
    idx = np.arange(n, dtype=np.int64)
    for i in range(k):
        j = int(rng.integers(i, n))
        idx[i], idx[j] = idx[j], idx[i]
    return idx[:k].copy()
