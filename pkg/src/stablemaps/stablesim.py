"""Spectrally positive stable paths and the continuous distance process.

``X`` is the centered stable process with index ``alpha`` in (1, 2), no
negative jumps and ``E exp(-u X_t) = exp(t u^alpha)``.  Its Levy measure is
``alpha (alpha - 1) / Gamma(2 - alpha) x^{-1-alpha} dx`` on ``x > 0``.

Two independent routes produce ``X``:

* the rescaled exact walk ``S_[nt] / (c0 n^{1/alpha})`` with steps from
  ``nu`` (the discrete object the limit theorems are about);
* a shot-noise construction: Poisson jumps above ``eps``, a compensating
  drift, and a Gaussian stand-in for the jumps below ``eps``.

Paths are stored on an event grid in which every registered jump occupies
two consecutive positions (value just before, value just after), so running
infima and pre-jump values are exact array lookups.

The distance process is ``D_t = sum_s b_s((I_t^s - X_{s-})^+)`` over the
registered jumps ``s <= t``, where ``I_t^s = inf_[s, t] X`` and ``b_s`` is
a Brownian bridge of duration ``Delta X_s``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba as nb
import numpy as np
from scipy.special import gamma as gamma_fn
from scipy.stats import ks_2samp

from ._rng import as_generator
from .rmq import SparseTableMin
from .weights import WeightModel

DEFAULT_BRIDGE_POINTS = 1024


def levy_rate(alpha: float) -> float:
    """Constant ``k`` of the Levy density ``k x^{-1-alpha}``."""
    return alpha * (alpha - 1) / gamma_fn(2 - alpha)


def jump_intensity(alpha: float, eps: float) -> float:
    """Expected number of jumps larger than ``eps`` per unit time."""
    return (alpha - 1) / gamma_fn(2 - alpha) * eps ** (-alpha)


def _small_jump_variance(alpha: float, eps: float) -> float:
    return levy_rate(alpha) * eps ** (2 - alpha) / (2 - alpha)


def _large_jump_mean(alpha: float, eps: float) -> float:
    return alpha / gamma_fn(2 - alpha) * eps ** (1 - alpha)


@dataclass(frozen=True, eq=False)
class StablePath:
    t: np.ndarray  # nondecreasing times; a jump time appears twice
    X: np.ndarray
    jump_pos: np.ndarray  # position of the post-jump value; pre-jump is jump_pos - 1
    alpha: float
    eps: float  # jump resolution, in units of X
    meta: dict = field(default_factory=dict)

    @property
    def jump_sizes(self) -> np.ndarray:
        return self.X[self.jump_pos] - self.X[self.jump_pos - 1]

    @property
    def jump_times(self) -> np.ndarray:
        return self.t[self.jump_pos]

    def rmq(self) -> SparseTableMin:
        cached = self.__dict__.get("_rmq")
        if cached is None:
            cached = SparseTableMin(self.X)
            object.__setattr__(self, "_rmq", cached)
        return cached

    def running_inf(self, lo, hi) -> np.ndarray:
        """``min X[lo..hi]`` (inclusive positions)."""
        return self.rmq().query(np.asarray(lo), np.asarray(hi))

    def csv(self, D: np.ndarray | None = None) -> str:
        rows = ["t,X" + (",D" if D is not None else "")]
        for k in range(len(self.t)):
            extra = f",{D[k]:.10g}" if D is not None else ""
            rows.append(f"{self.t[k]:.10g},{self.X[k]:.10g}{extra}")
        return "\n".join(rows) + "\n"


# ---------------------------------------------------------------------------
# path simulation


def walk_scale(model: WeightModel, n: int) -> float:
    return model.c0 * n ** (1 / model.alpha)


def simulate_stable_walk(model: WeightModel, n: int, T: float, rng, eps: float = 0.05) -> StablePath:
    """``t -> S_[nt] / (c0 n^{1/alpha})`` on ``[0, T]`` from the exact ``nu`` walk.

    Steps larger than ``eps n^{1/alpha}`` are registered as jumps, so the
    resolution in units of ``X`` is ``eps / c0`` (stored as ``path.eps``).
    Every step is its own grid cell, so each step position already carries
    the pre- and post-jump values.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = as_generator(rng)
    steps = model.sample_nu(rng, int(math.floor(n * T)))
    return path_from_steps(model, steps, n, eps)


def path_from_steps(model: WeightModel, steps, n: int, eps: float = 0.05) -> StablePath:
    """Rescaled path of a given ``nu``-walk (for coupling with a tree's Lukasiewicz path)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    steps = np.asarray(steps)
    scale = walk_scale(model, n)
    X = np.concatenate(([0.0], np.cumsum(steps) / scale))
    t = np.arange(len(steps) + 1) / n
    jump_pos = np.flatnonzero(steps > eps * n ** (1 / model.alpha)) + 1
    return StablePath(t, X, jump_pos, model.alpha, eps / model.c0,
                      {"route": "walk", "n": n, "T": len(steps) / n, "step_eps": eps})


def reregister(path: StablePath, eps: float) -> StablePath:
    """Same walk path with jumps registered at resolution ``eps`` (units of ``X``)."""
    if path.meta.get("route") != "walk":
        raise ValueError("only walk paths keep their small steps")
    jump_pos = np.flatnonzero(np.diff(path.X) > eps) + 1
    return StablePath(path.t, path.X, jump_pos, path.alpha, eps, dict(path.meta))


def simulate_stable_shot_noise(alpha: float, eps: float, T: float, rng,
                               grid: int = 1024, small_jumps: str = "gaussian") -> StablePath:
    """Shot-noise path with jumps above ``eps`` and ``grid`` points per unit time.

    The compensator of the large jumps is a linear drift.  With
    ``small_jumps="gaussian"`` the jumps below ``eps`` are replaced by a
    Brownian motion of the same variance; ``"drift"`` drops them.
    """
    if small_jumps not in ("gaussian", "drift"):
        raise ValueError(f"unknown small-jump treatment {small_jumps!r}")
    if eps <= 0:
        raise ValueError("eps must be > 0")
    if not 1 < alpha < 2:
        raise ValueError("alpha must lie in (1, 2)")
    rng = as_generator(rng)
    lam = jump_intensity(alpha, eps) * T
    nj = rng.poisson(lam)
    s = np.sort(rng.uniform(0, T, nj))
    x = eps * rng.uniform(size=nj) ** (-1 / alpha)
    m = int(math.ceil(grid * T))
    tg = np.linspace(0.0, T, m + 1)
    # event grid: regular points, plus (pre, post) positions at each jump
    times = np.concatenate((tg, s, s))
    kind = np.concatenate((np.zeros(m + 1, np.int8), np.ones(nj, np.int8), np.full(nj, 2, np.int8)))
    order = np.lexsort((kind, times))
    times, kind = times[order], kind[order]
    dt = np.diff(times)
    sigma2 = _small_jump_variance(alpha, eps) if small_jumps == "gaussian" else 0.0
    drift = -_large_jump_mean(alpha, eps)
    inc = drift * dt + math.sqrt(sigma2) * np.sqrt(dt) * rng.standard_normal(len(dt))
    post = kind[1:] == 2
    inc[post] = x  # post-jump position follows its pre-jump twin, at dt = 0
    X = np.concatenate(([0.0], np.cumsum(inc)))
    jump_pos = np.flatnonzero(kind == 2)
    return StablePath(times, X, jump_pos, alpha, eps,
                      {"route": "shot-noise", "T": T, "grid": grid, "small_jump_variance": sigma2})


def walk_endpoints(model: WeightModel, n: int, size: int, rng, t: float = 1.0) -> np.ndarray:
    """Samples of ``S_[nt] / (c0 n^{1/alpha})`` without building paths."""
    rng = as_generator(rng)
    m = int(math.floor(n * t))
    return model.sample_nu_sum(m, size, rng) / walk_scale(model, n)


def shot_noise_endpoints(alpha: float, eps: float, size: int, rng, t: float = 1.0,
                         small_jumps: str = "gaussian") -> np.ndarray:
    """Samples of ``X_t`` from the shot-noise construction."""
    rng = as_generator(rng)
    counts = rng.poisson(jump_intensity(alpha, eps) * t, size)
    total = int(counts.sum())
    sizes = eps * rng.uniform(size=total) ** (-1 / alpha)
    sums = np.zeros(size)
    np.add.at(sums, np.repeat(np.arange(size), counts), sizes)
    small = math.sqrt(_small_jump_variance(alpha, eps) * t) * rng.standard_normal(size)
    if small_jumps == "drift":
        small = 0.0
    return sums - _large_jump_mean(alpha, eps) * t + small


def laplace_check(samples: np.ndarray, u_values, alpha: float, t: float = 1.0) -> list[dict]:
    """Monte Carlo ``E exp(-u X_t)`` against ``exp(t u^alpha)``, with z-scores.

    ``se`` is the standard error under the target law, whose second moment
    ``E exp(-2u X_t) = exp(t (2u)^alpha)`` is known; ``z`` uses it.  The
    sample standard error is right-skewed with the estimate itself and makes
    the test anti-conservative at large ``u``, so it is only reported as
    ``se_sample`` / ``z_sample``.
    """
    out = []
    root_n = math.sqrt(len(samples))
    for u in u_values:
        v = np.exp(-u * samples)
        est = float(v.mean())
        target = math.exp(t * u**alpha)
        se = math.sqrt(math.exp(t * (2 * u) ** alpha) - target**2) / root_n
        se_sample = float(v.std(ddof=1)) / root_n
        out.append({"u": u, "estimate": est, "target": target, "se": se, "z": (est - target) / se,
                    "se_sample": se_sample, "z_sample": (est - target) / se_sample})
    return out


def exact_walk_laplace(model: WeightModel, n: int, u: float) -> float:
    """``E exp(-u S_n / (c0 n^{1/alpha}))`` from the generating function of ``mu``.

    ``G_mu = beta / (1 - (1 - beta) G_mu1)``, so with ``z = exp(-s)``
    ``E z^nu = e^s beta / (beta + (1 - beta) (1 - G_mu1(z)))``.  The term
    ``1 - G_mu1(z)`` is summed as ``sum mu1(k) (1 - z^k)`` over the table
    (no cancellation) and the mass beyond the table enters with weight 1,
    which is exact up to ``z^K`` times that mass.
    """
    s = u / walk_scale(model, n)
    k = np.arange(len(model.mu1_pmf))
    one_minus_g = math.fsum(model.mu1_pmf * -np.expm1(-s * k)) + float(model.mu1_surv[len(k)])
    b = model.beta
    log_phi = s + math.log(b) - math.log(b + (1 - b) * one_minus_g)
    return math.exp(n * log_phi)


# ---------------------------------------------------------------------------
# Brownian bridges


def unit_bridge(rng, points: int = DEFAULT_BRIDGE_POINTS) -> np.ndarray:
    """Standard Brownian bridge on ``points + 1`` dyadic times by midpoint refinement."""
    if points & (points - 1):
        raise ValueError("points must be a power of two")
    rng = as_generator(rng)
    b = np.zeros(points + 1)
    h = points
    while h > 1:
        half = h // 2
        left = np.arange(0, points, h)
        mid = left + half
        # midpoint of a bridge piece of duration h/points: mean of ends,
        # variance (h/points)/4
        b[mid] = 0.5 * (b[left] + b[left + h]) + math.sqrt(h / points / 4) * rng.standard_normal(len(mid))
        h = half
    return b


class BridgeBank:
    """One unit bridge per jump, keyed by a stable jump identifier.

    Bridges are derived from ``(seed, key)`` alone, so two paths that share
    a jump (for instance the same walk at two resolutions) share its bridge.
    """

    def __init__(self, seed: int, points: int = DEFAULT_BRIDGE_POINTS):
        self.seed = int(seed)
        self.points = points
        self._cache: dict[int, np.ndarray] = {}

    def get(self, key: int) -> np.ndarray:
        b = self._cache.get(key)
        if b is None:
            ss = np.random.SeedSequence(self.seed, spawn_key=(int(key),))
            b = unit_bridge(np.random.Generator(np.random.Philox(ss)), self.points)
            self._cache[key] = b
        return b

    def matrix(self, keys) -> np.ndarray:
        return np.stack([self.get(int(k)) for k in keys]) if len(keys) else np.zeros((0, self.points + 1))


def _interp_rows(B: np.ndarray, u: np.ndarray) -> np.ndarray:
    # evaluate row i of B (grid on [0, 1]) at u[i] by linear interpolation
    m = B.shape[1] - 1
    pos = np.clip(u, 0.0, 1.0) * m
    k = np.minimum(pos.astype(np.int64), m - 1)
    w = pos - k
    rows = np.arange(len(u))
    return (1 - w) * B[rows, k] + w * B[rows, k + 1]


@dataclass(frozen=True)
class DistanceSample:
    t: np.ndarray
    D: np.ndarray
    positions: np.ndarray  # grid positions of the evaluation times
    audit: dict


def distance_process(path: StablePath, bridges: BridgeBank | int, positions=None) -> DistanceSample:
    """Evaluate ``D`` at the given grid positions (all positions by default).

    The audit records, at the last evaluated time, the sum of
    ``(I_t^s - X_{s-})^+`` over the jumps that were not registered: the
    conditional variance of the omitted part is at most this sum.
    """
    bank = bridges if isinstance(bridges, BridgeBank) else BridgeBank(bridges)
    m = len(path.X)
    positions = np.arange(m) if positions is None else np.asarray(positions, dtype=np.int64)
    jp = path.jump_pos
    x = path.jump_sizes
    pre = path.X[jp - 1]
    keys = _jump_keys(path)
    B = bank.matrix(keys)
    D = np.zeros(len(positions))
    cond_var = np.zeros(len(positions))
    for i, p in enumerate(positions):
        sel = np.flatnonzero(jp <= p)
        if not sel.size:
            continue
        inf = path.running_inf(jp[sel], np.full(sel.size, p))
        r = inf - pre[sel]
        on = r > 0
        if not on.any():
            continue
        s = sel[on]
        r = r[on]
        xs = x[s]
        D[i] = float(np.sum(np.sqrt(xs) * _interp_rows(B[s], r / xs)))
        cond_var[i] = float(np.sum(r * (xs - r) / xs))
    audit = {"registered_jumps": int(len(jp)), "eps": path.eps,
             "omitted_bound": omitted_bound(path, int(positions[-1])) if len(positions) else 0.0}
    return DistanceSample(path.t[positions], D, positions, {**audit, "conditional_variance": cond_var})


def _jump_keys(path: StablePath) -> np.ndarray:
    # walk jumps are identified by their step index, which does not depend
    # on the resolution; shot-noise jumps by their order of appearance
    if path.meta.get("route") == "walk":
        return path.jump_pos
    return np.arange(len(path.jump_pos))


def omitted_bound(path: StablePath, p: int) -> float:
    """``sum (I_t^s - X_{s-})^+`` over unregistered up-steps ``s <= t`` at position ``p``.

    Only walk paths carry their small jumps explicitly; for shot-noise paths
    the expectation bound ``t * int_0^eps x Pi(dx)`` is returned.
    """
    if path.meta.get("route") != "walk":
        return float(path.t[p] * levy_rate(path.alpha) * path.eps ** (2 - path.alpha) / (2 - path.alpha))
    X = path.X[: p + 1]
    suf = np.minimum.accumulate(X[::-1])[::-1]
    up = np.flatnonzero(np.diff(X) > 0) + 1
    registered = np.zeros(p + 1, dtype=bool)
    registered[path.jump_pos[path.jump_pos <= p]] = True
    small = up[~registered[up]]
    return float(np.sum(np.maximum(suf[small] - X[small - 1], 0.0)))


def distance_at_end(path: StablePath, rng) -> float:
    """``D_T`` at the final time using a suffix minimum (one pass)."""
    rng = as_generator(rng)
    suf = np.minimum.accumulate(path.X[::-1])[::-1]
    jp = path.jump_pos
    x = path.jump_sizes
    r = suf[jp] - path.X[jp - 1]
    on = r > 0
    r, x = r[on], x[on]
    if not len(r):
        return 0.0
    # exact Gaussian marginal of each bridge at r: variance r (x - r) / x
    return float(np.sum(np.sqrt(r * (x - r) / x) * rng.standard_normal(len(r))))


# ---------------------------------------------------------------------------
# derived statistics


def scaling_identity_test(alpha: float, r: float, samples: int, rng, eps: float = 0.01,
                          grid: int = 1024) -> dict:
    """KS comparison of ``(r^{-1/alpha} X_r, r^{-1/(2 alpha)} D_r)`` with ``(X_1, D_1)``.

    Both sides use the shot-noise route with the same jump resolution and
    grid density per unit time, so agreement also checks that those
    discretization choices are immaterial at this sample size.
    """
    rng = as_generator(rng)
    pairs = {}
    for label, T in (("one", 1.0), ("r", float(r))):
        xs = np.empty(samples)
        ds = np.empty(samples)
        for i in range(samples):
            p = simulate_stable_shot_noise(alpha, eps, T, rng, grid)
            xs[i] = p.X[-1]
            ds[i] = distance_at_end(p, rng)
        pairs[label] = (xs, ds)
    x1, d1 = pairs["one"]
    xr, dr = pairs["r"]
    xr = xr * r ** (-1 / alpha)
    dr = dr * r ** (-1 / (2 * alpha))
    return {
        "alpha": alpha, "r": r, "samples": samples, "eps": eps, "grid": grid,
        "ks_X": float(ks_2samp(x1, xr).pvalue),
        "ks_D": float(ks_2samp(d1, dr).pvalue),
        "X1": x1, "D1": d1, "Xr": xr, "Dr": dr,
    }


@nb.njit(cache=True)
def _height_at(X, dt, p, eps):
    # (1/eps) * sum_{s < p} dt_s 1{X_s < inf_[s, p] X + eps}
    acc = 0.0
    cur = X[p]
    for s in range(p - 1, -1, -1):
        if X[s] < cur:
            cur = X[s]
        if X[s] < cur + eps:
            acc += dt[s]
    return acc / eps


def height_process_approx(path: StablePath, eps: float, positions) -> np.ndarray:
    """Riemann-sum version of the epsilon-approximation of the height process.

    The indicator is ``X_s < I_t^s + eps``: times where the path is within
    ``eps`` of its future infimum up to ``t``.
    """
    if eps <= 0:
        raise ValueError("eps must be > 0")
    dt = np.diff(path.t)
    return np.array([_height_at(path.X, dt, int(p), eps) for p in positions])


@dataclass(frozen=True)
class HolderFit:
    slope: float
    stderr: float
    scales: np.ndarray
    envelope: np.ndarray
    valid: bool

    @property
    def band(self) -> tuple[float, float]:
        return self.slope - 2 * self.stderr, self.slope + 2 * self.stderr


def holder_estimate(t: np.ndarray, values: np.ndarray, min_lag: int = 1,
                    max_lag: int | None = None) -> HolderFit:
    """Slope of ``log mean |V_{k+h} - V_k|`` against ``log(h dt)`` over dyadic lags.

    ``values`` is one path or a 2-D array of independent paths on the same
    grid, in which case the envelope is averaged over rows.  The grid must
    be uniform.  A path with no variation at some scale is
    returned with ``valid=False`` and a NaN slope.
    """
    t = np.asarray(t, dtype=float)
    values = np.atleast_2d(np.asarray(values, dtype=float))
    m = values.shape[1]
    if m < 16:
        raise ValueError("grid too coarse for a regression over scales")
    dt = (t[-1] - t[0]) / (m - 1)
    max_lag = max_lag or m // 8
    lags = []
    h = min_lag
    while h <= max_lag:
        lags.append(h)
        h *= 2
    env = np.array([np.mean(np.abs(values[:, h:] - values[:, :-h])) for h in lags])
    scales = np.array(lags) * dt
    if len(lags) < 3 or np.any(env <= 0):
        return HolderFit(float("nan"), float("nan"), scales, env, False)
    A = np.vstack([np.log(scales), np.ones(len(scales))]).T
    coef, *_ = np.linalg.lstsq(A, np.log(env), rcond=None)
    resid = np.log(env) - A @ coef
    s2 = float(resid @ resid) / max(len(lags) - 2, 1)
    cov = s2 * np.linalg.inv(A.T @ A)
    return HolderFit(float(coef[0]), float(math.sqrt(cov[0, 0])), scales, env, True)
