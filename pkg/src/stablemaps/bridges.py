"""Discrete bridges: walks with increments >= -1 returning to zero.

The increment vector of a bridge of length ``p`` is uniform on
``E_p = {x in {-1, 0, 1, ...}^p : sum(x) = 0}``, a set of ``N(p)`` elements.
Shifting by one turns it into a uniform weak composition of ``p`` into ``p``
parts, which is what the sequential sampler draws coordinate by coordinate.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numba as nb
import numpy as np
from scipy.special import gammaln

from ._rng import as_generator


@dataclass(frozen=True)
class Bridge:
    p: int
    values: np.ndarray  # Y_0..Y_p

    def __post_init__(self):
        v = self.values
        if len(v) != self.p + 1 or v[0] != 0 or v[-1] != 0 or np.any(np.diff(v) < -1):
            raise ValueError("not a discrete bridge")

    @property
    def increments(self) -> np.ndarray:
        return np.diff(self.values)


@nb.njit(cache=True)
def _composition_kernel(lengths, uniforms, out):
    # For each length p, write p shifted increments y_i >= 0 summing to p into
    # ``out`` using p - 1 uniforms; the last coordinate takes the remainder.
    # With R left to distribute over P parts the first part has law
    # P(m) = C(R - m + P - 2, P - 2) / C(R + P - 1, P - 1), evaluated through
    # P(0) = (P - 1)/(R + P - 1), P(m + 1)/P(m) = (R - m)/(R - m + P - 2).
    pos = 0
    upos = 0
    for b in range(lengths.shape[0]):
        p = lengths[b]
        rem = p
        for i in range(p - 1):
            parts = p - i
            u = uniforms[upos]
            upos += 1
            prob = (parts - 1.0) / (rem + parts - 1.0)
            cum = prob
            m = 0
            while u > cum and m < rem:
                prob *= (rem - m) / (rem - m + parts - 2.0)
                m += 1
                cum += prob
            out[pos] = m
            pos += 1
            rem -= m
        out[pos] = rem
        pos += 1


def sample_increments(lengths, rng) -> np.ndarray:
    """Concatenated uniform elements of ``E_p`` for each ``p`` in ``lengths``."""
    rng = as_generator(rng)
    lengths = np.ascontiguousarray(lengths, dtype=np.int64)
    if lengths.size and lengths.min() < 1:
        raise ValueError("bridge lengths must be >= 1")
    total = int(lengths.sum())
    u = rng.random(total - lengths.size)
    out = np.empty(total, dtype=np.int64)
    _composition_kernel(lengths, u, out)
    return out - 1


def _rejection_increments(p: int, rng, batch: int = 64) -> np.ndarray:
    # walk with step law 2^{-k-2} on {-1, 0, 1, ...}, kept when it ends at 0
    while True:
        steps = rng.geometric(0.5, size=(batch, p)) - 2
        ok = np.flatnonzero(steps.sum(axis=1) == 0)
        if ok.size:
            return steps[ok[0]]


def sample_bridge(p: int, rng, method: str = "sequential") -> Bridge:
    """Draw a uniform discrete bridge of length ``p``."""
    if p < 1:
        raise ValueError("p must be >= 1")
    rng = as_generator(rng)
    if method == "sequential":
        inc = sample_increments(np.array([p]), rng)
    elif method == "rejection":
        inc = _rejection_increments(p, rng)
    else:
        raise ValueError(f"unknown bridge method {method!r}")
    return Bridge(p, np.concatenate(([0], np.cumsum(inc))))


def sample_bridges(p: int, size: int, rng, method: str = "sequential") -> np.ndarray:
    """``size`` independent bridges of length ``p`` as rows of ``Y_0..Y_p``."""
    rng = as_generator(rng)
    if method == "sequential":
        inc = sample_increments(np.full(size, p), rng).reshape(size, p)
    elif method == "rejection":
        rows = []
        need = size
        while need > 0:
            # acceptance probability is about 1/sqrt(4 pi p)
            batch = max(16, min(int(4e6 // p), int(need * 4 * np.sqrt(p)) + 16))
            steps = rng.geometric(0.5, size=(batch, p)) - 2
            good = steps[steps.sum(axis=1) == 0][:need]
            rows.append(good)
            need -= len(good)
        inc = np.concatenate(rows)
    else:
        raise ValueError(f"unknown bridge method {method!r}")
    out = np.zeros((size, p + 1), dtype=np.int64)
    np.cumsum(inc, axis=1, out=out[:, 1:])
    return out


def enumerate_bridges(p: int) -> np.ndarray:
    """All elements of ``E_p`` in lexicographic order, as rows."""
    if p < 1:
        raise ValueError("p must be >= 1")
    rows = []
    # stars and bars: positions of p - 1 bars among 2p - 1 slots
    for bars in itertools.combinations(range(2 * p - 1), p - 1):
        edges = (-1,) + bars + (2 * p - 1,)
        rows.append([edges[i + 1] - edges[i] - 1 for i in range(p)])
    arr = np.array(rows, dtype=np.int64) - 1
    return arr[np.lexsort(arr.T[::-1])]


def bridge_codes(increments: np.ndarray) -> np.ndarray:
    """Injective integer code of increment rows (base ``p + 1`` digits of ``x + 1``)."""
    increments = np.atleast_2d(increments)
    p = increments.shape[1]
    weights = (p + 1) ** np.arange(p - 1, -1, -1, dtype=np.int64)
    return (increments + 1) @ weights


def bridge_variance(p: int, j) -> np.ndarray:
    """Exact ``Var(Y_j)`` for a uniform bridge of length ``p``: ``2 j (p - j) / (p + 1)``."""
    j = np.asarray(j, dtype=float)
    return 2.0 * j * (p - j) / (p + 1.0)


def moment_ratio(paths: np.ndarray, r: int, weights=None, gaps=None) -> float:
    """``max_d E[(Y_{k+d} - Y_k)^{2r}] / d^r`` over gaps ``d`` (all by default).

    Increments of a uniform bridge are exchangeable, so for every gap the
    average runs over all start positions as well as over rows.  ``weights``
    gives row probabilities (for exact enumeration); default is uniform.
    """
    paths = np.asarray(paths, dtype=float)
    p = paths.shape[1] - 1
    w = np.full(len(paths), 1.0 / len(paths)) if weights is None else np.asarray(weights)
    best = 0.0
    for d in (range(1, p + 1) if gaps is None else gaps):
        diff = paths[:, d:] - paths[:, :-d]
        m = float(w @ np.mean(diff ** (2 * r), axis=1))
        best = max(best, m / d**r)
    return best


def increment_sum_law(p: int, d: int) -> np.ndarray:
    """Exact law of ``Y_d`` for a uniform bridge of length ``p``, indexed by ``Y_d + d``.

    ``Y_d + d`` is the sum of the first ``d`` parts of a uniform weak
    composition of ``p`` into ``p`` parts, a negative hypergeometric count.
    """
    if not 0 <= d <= p:
        raise ValueError("need 0 <= d <= p")
    s = np.arange(p + 1)
    if d == 0 or d == p:
        w = np.zeros(p + 1)
        w[0 if d == 0 else p] = 1.0
        return w
    lw = (gammaln(s + d) - gammaln(s + 1) - gammaln(d)
          + gammaln(2 * p - s - d) - gammaln(p - s + 1) - gammaln(p - d)
          - gammaln(2 * p) + gammaln(p + 1) + gammaln(p))
    w = np.exp(lw)
    return w / w.sum()


def moment_constant(p: int, r: int = 2) -> float:
    """Exact ``max_d E[(Y_{k+d} - Y_k)^{2r}] / d^r`` for a uniform bridge of length ``p``.

    By exchangeability the gap-``d`` difference has the law of ``Y_d``.
    """
    best = 0.0
    s = np.arange(p + 1, dtype=float)
    for d in range(1, p + 1):
        m = float(increment_sum_law(p, d) @ (s - d) ** (2 * r))
        best = max(best, m / d**r)
    return best
