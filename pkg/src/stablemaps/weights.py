"""Critical Boltzmann weights with heavy-tailed face degrees.

A raw sequence ``q°_k ~ k^{-a}`` with ``3/2 < a < 5/2`` is turned into the
unique admissible and critical sequence ``q_k = c (beta/4)^{k-1} q°_k``.  The
calibrated :class:`WeightModel` carries the derived constants and the
offspring laws of the associated two-type Galton-Watson mobile:

* ``mu0``: geometric law of the number of black children of a white vertex,
* ``mu1``: law of the number of white children of a black vertex,
* ``mu``:  law of the number of white grandchildren (compound of the two),
* ``nu``:  centred jump law ``nu(k) = mu(k + 1)`` of the Lukasiewicz walk.

All series are evaluated at the radius of convergence, where the terms decay
only polynomially.  For the power rule the tail beyond a cut-off is summed in
closed form with Hurwitz zeta functions, using the asymptotic expansion of
``Gamma(k + 1/2) / Gamma(k + 1)``; the first omitted term of that expansion
gives the certified error bound.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import gammaln, zeta

from ._rng import as_generator

SQRT_PI = math.sqrt(math.pi)

# sqrt(k) * Gamma(k + 1/2) / Gamma(k + 1) = sum_i GAMMA_RATIO_COEFFS[i] k^{-i} + O(k^{-7})
GAMMA_RATIO_COEFFS = np.array(
    [1.0, -1 / 8, 1 / 128, 5 / 1024, -21 / 32768, -399 / 262144, 869 / 4194304]
)
# magnitude bound for the first omitted coefficient (measured value is ~1.2e-3)
_OMITTED_COEFF = 2e-3

BINOM_EXACT_LIMIT = 4096
_ASYMPTOTIC_FROM = 64
_DIRECT_TERMS = 4096
MU1_TABLE_SIZE = 1 << 20


class SeriesDivergenceError(ValueError):
    """The generating series was evaluated outside its disc of convergence."""


class CalibrationError(RuntimeError):
    """Calibrated constants failed the admissibility or criticality check."""


def binom_n(k: int) -> int:
    """Return ``N(k) = C(2k - 1, k - 1)``, exactly.

    Exact integers are returned up to ``BINOM_EXACT_LIMIT``; beyond it use
    :func:`log_binom_n` (the value is never silently rounded or wrapped).
    """
    k = int(k)
    if k < 1:
        raise ValueError("N(k) is defined for k >= 1")
    if k > BINOM_EXACT_LIMIT:
        raise OverflowError(
            f"N({k}) exceeds the exact range (k <= {BINOM_EXACT_LIMIT}); use log_binom_n"
        )
    return math.comb(2 * k - 1, k - 1)


def log_binom_n(k):
    """Natural logarithm of ``N(k)``, vectorised."""
    k = np.asarray(k, dtype=float)
    return gammaln(2 * k) - gammaln(k) - gammaln(k + 1)


def _r_small(kmax: int) -> np.ndarray:
    # r_k = N(k) 4^{1-k} = 2 Gamma(k+1/2) / (sqrt(pi) Gamma(k+1)); r_1 = 1,
    # r_{k+1} = r_k (k + 1/2) / (k + 1)
    r = np.empty(kmax)
    r[0] = 1.0
    for k in range(1, kmax):
        r[k] = r[k - 1] * (k + 0.5) / (k + 1.0)
    return r


_R_SMALL = _r_small(_ASYMPTOTIC_FROM)


def scaled_binom(k) -> np.ndarray:
    """``N(k) 4^{1-k}`` for integer ``k >= 1`` (vectorised, relative error ~1e-16)."""
    k = np.asarray(k, dtype=np.int64)
    out = np.empty(k.shape, dtype=float)
    small = k < _ASYMPTOTIC_FROM
    out[small] = _R_SMALL[k[small] - 1]
    kb = k[~small].astype(float)
    inv = 1.0 / kb
    poly = np.zeros_like(kb)
    for coeff in GAMMA_RATIO_COEFFS[::-1]:
        poly = poly * inv + coeff
    out[~small] = 2.0 / SQRT_PI * poly / np.sqrt(kb)
    return out


def _power_tail(s: float, start, n_coeffs: int = len(GAMMA_RATIO_COEFFS)):
    """``sum_{k >= start} (2/sqrt(pi)) k^{-s} sum_i E_i k^{-i}`` and its error bound."""
    start = np.asarray(start, dtype=float)
    total = np.zeros_like(start)
    for i in range(n_coeffs):
        total = total + GAMMA_RATIO_COEFFS[i] * zeta(s + i, start)
    bound = _OMITTED_COEFF * zeta(s + n_coeffs, start)
    return 2.0 / SQRT_PI * total, 2.0 / SQRT_PI * bound


@dataclass(frozen=True)
class RawSequence:
    """Un-normalised weights ``q°_k``.

    ``rule`` is ``"power"`` for ``q°_k = k^{-a}`` or a vectorised callable
    ``k -> q°_k`` whose tail behaves like ``k^{-a}``.
    """

    a: float
    rule: str | Callable[[np.ndarray], np.ndarray] = "power"
    truncation_tol: float = 1e-14

    def __post_init__(self):
        if not 1.5 < self.a < 2.5:
            raise ValueError(f"a must lie in (3/2, 5/2), got {self.a}")
        if not (self.rule == "power" or callable(self.rule)):
            raise ValueError(f"unknown raw rule {self.rule!r}")

    @property
    def alpha(self) -> float:
        return self.a - 0.5

    def values(self, k) -> np.ndarray:
        k = np.asarray(k)
        if self.rule == "power":
            return np.power(k.astype(float), -self.a)
        return np.asarray(self.rule(k), dtype=float)

    def tail_prefactor(self, k0: int) -> float:
        """Constant ``kappa`` such that ``q°_k ~ kappa k^{-a}`` beyond ``k0``."""
        if self.rule == "power":
            return 1.0
        # matched at the cut-off; only the power rule has an exact tail
        return float(self.values(np.array([k0]))[0] * k0**self.a)


@dataclass(frozen=True)
class SeriesValue:
    value: float
    error_bound: float
    terms: int


def _custom_cutoff(raw: RawSequence) -> int:
    k = _DIRECT_TERMS
    while k < (1 << 24):
        t = scaled_binom(np.array([k]))[0] * raw.values(np.array([k]))[0]
        if t < raw.truncation_tol:
            break
        k *= 2
    return k


def _radius_sums(raw: RawSequence) -> tuple[SeriesValue, SeriesValue]:
    """``f°(1/4)`` and ``f°'(1/4)`` with certified error bounds."""
    cut = _DIRECT_TERMS if raw.rule == "power" else _custom_cutoff(raw)
    k = np.arange(1, cut, dtype=np.int64)
    terms = scaled_binom(k) * raw.values(k)
    kappa = raw.tail_prefactor(cut)
    tail_f, err_f = _power_tail(raw.a + 0.5, cut)
    tail_lo, err_lo = _power_tail(raw.a - 0.5, cut)
    # (k - 1) k^{-a-1/2} = k^{-(a-1/2)} - k^{-(a+1/2)}
    f = math.fsum(terms) + kappa * float(tail_f)
    fp = 4.0 * (math.fsum((k - 1) * terms) + kappa * float(tail_lo - tail_f))
    ef = kappa * float(err_f)
    efp = 4.0 * kappa * float(err_lo + err_f)
    return SeriesValue(f, ef, cut), SeriesValue(fp, efp, cut)


def _sum_inside(raw: RawSequence, z: float, derivative: int) -> SeriesValue:
    # sum_k r_k q°_k z^{k-1} (and its z-derivative times 4) for 0 <= z < 1:
    # successive term ratios are at most z, so the geometric tail bound holds
    # once terms are decreasing
    total = 0.0
    start = 1
    chunk = 1024
    logz = math.log(z)
    while True:
        k = np.arange(start, start + chunk, dtype=np.int64)
        base = scaled_binom(k) * raw.values(k)
        if derivative == 0:
            t = base * np.exp((k - 1) * logz)
        else:
            t = 4.0 * (k - 1) * base * np.exp(np.maximum(k - 2, 0) * logz)
        total += math.fsum(t)
        last = float(t[-1])
        ratio = z * (1.0 + 1.0 / float(k[-1]))
        if ratio < 1.0:
            bound = last * ratio / (1.0 - ratio)
            if bound <= raw.truncation_tol * abs(total) and t[-1] <= t[-2]:
                return SeriesValue(total, bound, int(k[-1]))
        start += chunk
        chunk = min(chunk * 2, 1 << 22)
        if start > 1 << 28:
            raise SeriesDivergenceError("series converges too slowly near the radius")


def eval_fq(obj, x: float, derivative: int = 0) -> float:
    """Evaluate ``f_q(x) = sum_k N(k) q_k x^{k-1}`` (or its first derivative).

    ``obj`` is a :class:`RawSequence` (radius 1/4) or a calibrated
    :class:`WeightModel` (radius ``Z_q = 1/beta``).
    """
    return eval_fq_certified(obj, x, derivative).value


def eval_fq_certified(obj, x: float, derivative: int = 0) -> SeriesValue:
    if derivative not in (0, 1):
        raise ValueError("only f_q and f_q' are available")
    if x < 0:
        raise ValueError("x must be nonnegative")
    if isinstance(obj, WeightModel):
        y = obj.beta * x / 4.0
        if y > 0.25 * (1 + 1e-13):
            raise SeriesDivergenceError(f"x = {x} exceeds the radius R_q = {obj.Zq}")
        inner = eval_fq_certified(obj.raw, min(y, 0.25), derivative)
        scale = obj.c * (obj.beta / 4.0 if derivative else 1.0)
        return SeriesValue(scale * inner.value, scale * inner.error_bound, inner.terms)
    raw: RawSequence = obj
    if x > 0.25 * (1 + 1e-13):
        raise SeriesDivergenceError(f"x = {x} exceeds the radius 1/4")
    z = 4.0 * min(x, 0.25)
    if z > 1.0 - 1e-12:  # at the radius up to rounding of 1/beta
        z = 1.0
    if z == 1.0:
        f, fp = _radius_sums(raw)
        return fp if derivative else f
    if z == 0.0:
        if derivative == 0:
            return SeriesValue(float(raw.values(np.array([1]))[0]), 0.0, 1)
        # f'(0) = N(2) q°_2
        return SeriesValue(3.0 * float(raw.values(np.array([2]))[0]), 0.0, 2)
    return _sum_inside(raw, z, derivative)


@dataclass(frozen=True, eq=False)
class WeightModel:
    """Calibrated critical weight sequence and its offspring laws.

    Immutable after :func:`calibrate`; the ``mu1`` tables are built eagerly so
    the model can be shared between threads without locking.
    """

    raw: RawSequence
    alpha: float
    beta: float
    c: float
    Zq: float
    c0: float
    f_circ: SeriesValue
    fp_circ: SeriesValue
    mu1_pmf: np.ndarray = field(repr=False)
    mu1_surv: np.ndarray = field(repr=False)
    tail_kappa: float = 1.0

    # ---- weights -------------------------------------------------------
    def qk(self, k) -> np.ndarray:
        k = np.asarray(k, dtype=np.int64)
        return self.c * np.power(self.beta / 4.0, k - 1.0) * self.raw.values(k)

    # ---- offspring laws -------------------------------------------------
    def mu0_pmf(self, k) -> np.ndarray:
        k = np.asarray(k)
        return self.beta * np.power(1.0 - self.beta, k)

    def mu1_mass(self, k) -> np.ndarray:
        k = np.asarray(k, dtype=np.int64)
        return self.c / (1.0 - self.beta) * scaled_binom(k + 1) * self.raw.values(k + 1)

    def mu1_survival(self, k) -> np.ndarray:
        """``mu1([k, inf))`` for integer ``k >= 0``; exact beyond the table too."""
        k = np.atleast_1d(np.asarray(k, dtype=np.int64))
        out = np.empty(k.shape, dtype=float)
        inside = k <= MU1_TABLE_SIZE
        out[inside] = self.mu1_surv[k[inside]]
        if np.any(~inside):
            out[~inside] = self._far_survival(k[~inside])
        return out

    def _far_survival(self, k) -> np.ndarray:
        tail, _ = _power_tail(self.raw.a + 0.5, np.asarray(k, dtype=float) + 1.0)
        return self.c / (1.0 - self.beta) * self.tail_kappa * tail

    @property
    def mean_mu0(self) -> float:
        return (1.0 - self.beta) / self.beta

    @property
    def mean_mu1(self) -> float:
        return self.c * self.fp_circ.value / (4.0 * (1.0 - self.beta))

    # ---- sampling -------------------------------------------------------
    def sample_mu0(self, rng, size) -> np.ndarray:
        rng = as_generator(rng)
        return rng.geometric(self.beta, size=size).astype(np.int64) - 1

    def sample_mu1(self, rng, size) -> np.ndarray:
        """Exact inversion sampling of ``mu1`` by binary search on the survival table."""
        rng = as_generator(rng)
        u = 1.0 - rng.random(size)  # in (0, 1]
        return self.mu1_from_uniform(u)

    def mu1_from_uniform(self, u) -> np.ndarray:
        """Inverse survival function: ``max{k : mu1([k, inf)) >= u}`` for ``u`` in (0, 1]."""
        u = np.asarray(u, dtype=float)
        flat = u.ravel()
        # the survival table is decreasing; search its reversed (ascending) view
        idx = MU1_TABLE_SIZE - np.searchsorted(self.mu1_surv[::-1], flat, side="left")
        np.maximum(idx, 0, out=idx)  # total mass sums to 1 only up to rounding
        far = idx >= MU1_TABLE_SIZE
        if np.any(far):
            idx[far] = self._invert_far(flat[far])
        return idx.reshape(u.shape).astype(np.int64)

    def _invert_far(self, u: np.ndarray) -> np.ndarray:
        # smallest k with survival(k + 1) < u, searched over [table end, 2^62]
        lo = np.full(u.shape, MU1_TABLE_SIZE, dtype=np.int64)
        hi = np.full(u.shape, 2 * MU1_TABLE_SIZE, dtype=np.int64)
        while True:
            grow = self._far_survival(hi) >= u
            if not grow.any():
                break
            lo[grow] = hi[grow]
            hi[grow] = np.minimum(hi[grow] * 2, 1 << 62)
            if np.all(hi[grow] == 1 << 62):
                break
        while np.any(hi - lo > 1):
            mid = lo + (hi - lo) // 2
            ok = self._far_survival(mid) >= u
            lo = np.where(ok, mid, lo)
            hi = np.where(ok, hi, mid)
        return lo

    def sample_mu(self, rng, size) -> np.ndarray:
        """Draws from ``mu``: sums of a ``mu0`` number of ``mu1`` draws."""
        rng = as_generator(rng)
        u_counts = self.sample_mu0(rng, size)
        flat = u_counts.ravel()
        sums = _segment_sums(self.sample_mu1(rng, int(flat.sum())), flat)
        return sums.reshape(u_counts.shape)

    def sample_nu(self, rng, size) -> np.ndarray:
        return self.sample_mu(rng, size) - 1

    def sample_nu_sum(self, n: int, size: int, rng, cells: int = 2048) -> np.ndarray:
        """Exact draws of ``S_n`` for the ``nu`` random walk started at 0.

        ``S_n + n`` is a sum of ``NegBin(n, beta)`` independent ``mu1`` draws;
        the small values are aggregated with one multinomial draw over
        ``cells`` categories, the rest are drawn individually from the
        conditional tail.  Cost does not grow with ``n``.
        """
        rng = as_generator(rng)
        counts = rng.negative_binomial(n, self.beta, size=size)
        pvals = np.append(self.mu1_pmf[:cells], self.mu1_surv[cells])
        pvals = pvals / pvals.sum()
        ks = np.arange(cells, dtype=np.int64)
        out = np.empty(size, dtype=np.int64)
        tail_mass = self.mu1_surv[cells]
        for i, m in enumerate(counts):
            cnt = rng.multinomial(int(m), pvals)
            total = int(cnt[:cells] @ ks)
            n_tail = int(cnt[cells])
            if n_tail:
                u = tail_mass * (1.0 - rng.random(n_tail))
                total += int(self.mu1_from_uniform(u).sum())
            out[i] = total - n
        return out

    # ---- reports --------------------------------------------------------
    def residuals(self) -> dict:
        fq = eval_fq(self, self.Zq)
        fpq = eval_fq(self, self.Zq, derivative=1)
        return {
            "admissibility": fq - (1.0 - 1.0 / self.Zq),
            "criticality": self.Zq**2 * fpq - 1.0,
            "mean_product": self.mean_mu0 * self.mean_mu1 - 1.0,
            "mu1_total_mass": float(self.mu1_surv[0]) - 1.0,
        }

    def report(self) -> dict:
        res = self.residuals()
        return {
            "a": self.raw.a,
            "alpha": self.alpha,
            "beta": self.beta,
            "c": self.c,
            "Zq": self.Zq,
            "c0": self.c0,
            "tail_constant": mu_tail_constant(self),
            "f_circ_quarter": self.f_circ.value,
            "fprime_circ_quarter": self.fp_circ.value,
            "series_error_bound": max(self.f_circ.error_bound, self.fp_circ.error_bound),
            "residual_eq_admissibility": res["admissibility"],
            "residual_eq_criticality": res["criticality"],
            "residual_mean_product": res["mean_product"],
        }


def _segment_sums(values: np.ndarray, counts: np.ndarray) -> np.ndarray:
    cs = np.concatenate(([0], np.cumsum(values, dtype=np.int64)))
    ends = np.cumsum(counts)
    return cs[ends] - cs[ends - counts]


def calibrate(raw: RawSequence | float, tol: float = 1e-9) -> WeightModel:
    """Build the admissible critical weight model for a raw sequence.

    ``c = 4 / (4 f°(1/4) + f°'(1/4))`` and ``beta = f°'(1/4) c / 4``; the
    admissibility and criticality equations are re-evaluated on the result
    and must hold within ``tol``.
    """
    if not isinstance(raw, RawSequence):
        raw = RawSequence(float(raw))
    f, fp = _radius_sums(raw)
    denom = 4.0 * f.value + fp.value
    c = 4.0 / denom
    beta = fp.value / denom
    alpha = raw.alpha
    c0 = (2 * c * math.gamma(2 - alpha) / (alpha * (alpha - 1) * beta * SQRT_PI)) ** (1 / alpha)
    kappa = raw.tail_prefactor(MU1_TABLE_SIZE + 1)

    k = np.arange(MU1_TABLE_SIZE, dtype=np.int64)
    pmf = c / (1.0 - beta) * scaled_binom(k + 1) * raw.values(k + 1)
    far, _ = _power_tail(raw.a + 0.5, float(MU1_TABLE_SIZE) + 1.0)
    surv = np.empty(MU1_TABLE_SIZE + 1)
    surv[-1] = c / (1.0 - beta) * kappa * float(far)
    surv[:-1] = surv[-1] + np.cumsum(pmf[::-1])[::-1]

    model = WeightModel(
        raw=raw, alpha=alpha, beta=beta, c=c, Zq=1.0 / beta, c0=c0,
        f_circ=f, fp_circ=fp, mu1_pmf=pmf, mu1_surv=surv, tail_kappa=kappa,
    )
    res = model.residuals()
    bad = {k: v for k, v in res.items() if not abs(v) <= tol}
    if bad:
        raise CalibrationError(f"calibration residuals above {tol}: {bad}")
    return model


def mu_tail_constant(model: WeightModel) -> float:
    """``A = (alpha - 1) c0^alpha / Gamma(2 - alpha)``, the limit of ``k^alpha mu([k, inf))``."""
    a = model.alpha
    return (a - 1) * model.c0**a / math.gamma(2 - a)


def mu1_tail_constant(model: WeightModel) -> float:
    """Limit of ``k^alpha mu1([k, inf))``."""
    return 2 * model.c / (model.alpha * (1 - model.beta) * SQRT_PI)


@dataclass(frozen=True)
class MuMass:
    pmf: np.ndarray
    tail_mass: float

    def survival(self) -> np.ndarray:
        """``mu([k, inf))`` for ``k = 0..kmax+1``, tail mass included."""
        return self.tail_mass + np.concatenate((np.cumsum(self.pmf[::-1])[::-1], [0.0]))


def mu_mass(model: WeightModel, kmax: int) -> MuMass:
    """Masses ``mu(0..kmax)`` by compounding ``mu1`` under the geometric ``mu0``.

    The generating functions satisfy ``G_mu = beta / (1 - (1 - beta) G_mu1)``,
    i.e. ``mu = beta delta_0 + ((1 - beta) mu1) * mu``; the convolution
    recursion is solved term by term.  The reported tail mass is the deficit
    ``1 - sum(pmf)``.
    """
    if kmax < 0:
        raise ValueError("kmax must be nonnegative")
    g = (1.0 - model.beta) * model.mu1_pmf[: kmax + 1]
    mu = np.empty(kmax + 1)
    denom = 1.0 - g[0]
    mu[0] = model.beta / denom
    for j in range(1, kmax + 1):
        mu[j] = np.dot(g[1 : j + 1], mu[j - 1 :: -1]) / denom
    tail = max(0.0, 1.0 - math.fsum(mu))
    return MuMass(mu, tail)


def nu_mass(model: WeightModel, kmax: int) -> tuple[np.ndarray, float]:
    """``nu(-1..kmax)`` as an array indexed by ``k + 1``, and the tail mass."""
    m = mu_mass(model, kmax + 1)
    return m.pmf, m.tail_mass
