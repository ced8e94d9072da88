"""Range-minimum queries by sparse table: O(m log m) build, O(1) query."""
from __future__ import annotations

import numba as nb
import numpy as np


@nb.njit(cache=True)
def _build(values):
    n = values.shape[0]
    levels = 1
    while (1 << levels) <= n:
        levels += 1
    table = np.empty((levels, n), dtype=values.dtype)
    table[0] = values
    for k in range(1, levels):
        half = 1 << (k - 1)
        for i in range(n - (1 << k) + 1):
            table[k, i] = min(table[k - 1, i], table[k - 1, i + half])
    return table


@nb.njit(cache=True)
def _query(table, lo, hi):
    out = np.empty(lo.shape[0], dtype=table.dtype)
    for t in range(lo.shape[0]):
        a = lo[t]
        b = hi[t]
        k = 0
        while (1 << (k + 1)) <= b - a + 1:
            k += 1
        out[t] = min(table[k, a], table[k, b - (1 << k) + 1])
    return out


class SparseTableMin:
    """Minimum of ``values[lo..hi]`` (inclusive bounds)."""

    def __init__(self, values):
        self.values = np.ascontiguousarray(values)
        if self.values.size == 0:
            raise ValueError("empty array")
        self.table = _build(self.values)

    def query(self, lo, hi) -> np.ndarray:
        lo = np.ascontiguousarray(np.atleast_1d(lo), dtype=np.int64)
        hi = np.ascontiguousarray(np.atleast_1d(hi), dtype=np.int64)
        if np.any(lo > hi) or np.any(lo < 0) or np.any(hi >= len(self.values)):
            raise IndexError("invalid range")
        return _query(self.table, lo, hi)
