"""Statistical experiments that check the scaling limits end to end.

Each experiment draws replicas from independent ``(seed, stream)`` Philox
streams, so any single number in a report can be regenerated in isolation.
Replicas may run on a thread pool; results are collected in stream order,
which keeps the output independent of the number of workers.

Targets are preregistered in :class:`ExperimentSpec` (sizes, replica counts,
tolerances).  A report lists every target with its statistic and threshold;
anything without a pass/fail rule goes to ``statistics`` instead.
"""
from __future__ import annotations

import csv
import io
import json
import math
import platform
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from importlib import metadata

import numpy as np
from scipy.stats import ks_2samp, wasserstein_distance

from ._rng import RngStream
from .bdg import check_bijection_invariants, map_to_mobile, mobile_to_map
from .mobile import BudgetExceeded, assign_labels, coding_paths, condition_size, enumerate_mobiles, \
    sample_forest_prefix, sample_tree
from .pmap import profile
from .stablesim import (
    distance_at_end,
    height_process_approx,
    path_from_steps,
    shot_noise_endpoints,
    simulate_stable_shot_noise,
)
from .weights import WeightModel, calibrate

TARGETS = ("radius", "delta", "profile", "labels")
_MIN_REPLICAS = 30

# stream layout: experiment kind, size index and replica are packed into one
# integer so every draw has a distinct, documented stream id
_KIND = {"maps": 1, "contrast": 2, "labels": 3, "reversal": 4, "reference": 5, "bootstrap": 6, "rn": 7,
         "bijection": 8}


def stream_id(kind: str, index: int, replica: int) -> int:
    return (_KIND[kind] << 48) | (index << 24) | replica


class SpecError(ValueError):
    """Inconsistent experiment specification."""


@dataclass(frozen=True)
class ExperimentSpec:
    a: float = 2.0
    mode: str = "window"
    delta: float = 0.05
    sizes: tuple[int, ...] = (1024, 2048, 4096, 8192, 16384)
    replicas: int = 200
    seed: int = 0
    targets: tuple[str, ...] = ("radius", "delta", "profile")
    slope_tol: float = 0.05
    ks_level: float = 0.01
    threads: int = 1
    contrast_a: tuple[float, float] = (1.7, 2.3)
    times: tuple[float, ...] = (0.25, 0.5, 1.0)
    rn_size: int = 10**6
    rn_replicas: int = 3
    rn_tol: float = 0.01
    reversal_n: int = 200
    reversal_replicas: int = 2000
    contour_n: int = 10**5
    contour_corr_min: float = 0.95
    reference_eps: float = 1e-3

    def __post_init__(self):
        object.__setattr__(self, "sizes", tuple(int(n) for n in self.sizes))
        object.__setattr__(self, "targets", tuple(self.targets))
        object.__setattr__(self, "contrast_a", tuple(self.contrast_a))
        object.__setattr__(self, "times", tuple(self.times))
        self.validate()

    @property
    def alpha(self) -> float:
        return self.a - 0.5

    def validate(self) -> None:
        if not self.sizes or any(n < 1 for n in self.sizes):
            raise SpecError("sizes must be positive")
        if any(b <= a for a, b in zip(self.sizes, self.sizes[1:])):
            raise SpecError("sizes must be strictly increasing")
        unknown = set(self.targets) - set(TARGETS)
        if unknown:
            raise SpecError(f"unknown targets {sorted(unknown)}")
        if self.replicas < _MIN_REPLICAS:
            raise SpecError(f"at least {_MIN_REPLICAS} replicas are needed for KS and regression targets")
        if len(self.sizes) < 2 and set(self.targets) & {"radius", "delta", "profile", "labels"}:
            raise SpecError("a scaling regression needs at least two sizes")
        if self.threads < 1:
            raise SpecError("threads must be >= 1")

    def as_dict(self) -> dict:
        # the worker count never influences results, so it is not recorded
        d = asdict(self)
        d.pop("threads")
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentSpec":
        known = {f for f in cls.__dataclass_fields__}
        extra = set(d) - known
        if extra:
            raise SpecError(f"unknown spec fields {sorted(extra)}")
        return cls(**d)


@dataclass
class Target:
    name: str
    statistic: float
    threshold: str
    passed: bool

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} {self.name}: {self.statistic:.6g} ({self.threshold})"


@dataclass
class ExperimentReport:
    experiment: str
    spec: dict
    targets: list[Target] = field(default_factory=list)
    statistics: dict = field(default_factory=dict)
    tables: dict[str, list[dict]] = field(default_factory=dict)
    environment: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(t.passed for t in self.targets)

    def add(self, name: str, statistic: float, threshold: str, passed: bool) -> None:
        self.targets.append(Target(name, float(statistic), threshold, bool(passed)))

    def to_json(self) -> str:
        body = {
            "experiment": self.experiment,
            "passed": self.passed,
            "spec": self.spec,
            "targets": [asdict(t) for t in self.targets],
            "statistics": self.statistics,
            "environment": self.environment,
        }
        return json.dumps(_plain(body), indent=2, sort_keys=True) + "\n"

    def table_csv(self, name: str) -> str:
        rows = self.tables[name]
        buf = io.StringIO()
        if rows:
            w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
            w.writeheader()
            w.writerows(_plain(rows))
        return buf.getvalue()


def _plain(x):
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.floating):
        return float(x)
    if isinstance(x, np.ndarray):
        return _plain(x.tolist())
    return x


def environment(spec: ExperimentSpec) -> dict:
    try:
        version = metadata.version("artifact")
    except metadata.PackageNotFoundError:  # running from a source tree
        version = "unknown"
    # thread count is deliberately left out: it must not change report bytes
    return {"seed": spec.seed, "package_version": version, "numpy": np.__version__,
            "python": platform.python_version()}


def _run(fn, items, threads: int) -> list:
    if threads == 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# conditioned maps


@dataclass
class MapSamples:
    """Per-replica summaries of conditioned maps, grouped by size."""

    a: float
    sizes: tuple[int, ...]
    rows: list[dict]  # one row per replica (scalar summaries)
    profiles: dict[int, list[np.ndarray]]  # distance counts per replica

    def column(self, n: int, key: str) -> np.ndarray:
        return np.array([r[key] for r in self.rows if r["n"] == n])


def _map_replica(model: WeightModel, spec: ExperimentSpec, kind: str, n_index: int, n: int, rep: int):
    sid = stream_id(kind, n_index, rep)
    rng = RngStream(spec.seed, sid).generator()
    mb = condition_size(model, rng, n, mode=spec.mode, delta=spec.delta)
    pm = mobile_to_map(mb, validate=False)
    prof = profile(pm)
    min_label = int(mb.white_labels().min())
    row = {"n": n, "replica": rep, "stream": sid, "whites": mb.n_white, "vertices": pm.n_vertices,
           "R": prof.radius, "Delta": prof.delta, "min_label": min_label}
    return row, prof.counts


def sample_maps(spec: ExperimentSpec, a: float | None = None, sizes=None, kind: str = "maps") -> MapSamples:
    a = spec.a if a is None else a
    sizes = spec.sizes if sizes is None else tuple(sizes)
    model = calibrate(a)
    items = [(i, n, r) for i, n in enumerate(sizes) for r in range(spec.replicas)]
    out = _run(lambda it: _map_replica(model, spec, kind, *it), items, spec.threads)
    rows = [o[0] for o in out]
    profiles: dict[int, list[np.ndarray]] = {n: [] for n in sizes}
    for (_, n, _), (_, counts) in zip(items, out):
        profiles[n].append(counts)
    return MapSamples(a, sizes, rows, profiles)


def _bootstrap_slope(spec: ExperimentSpec, sizes, groups, reps: int = 1000) -> tuple[float, float]:
    rng = RngStream(spec.seed, stream_id("bootstrap", 0, 0)).generator()
    x = np.log(np.array(sizes, dtype=float))
    slopes = np.empty(reps)
    for b in range(reps):
        med = [np.median(g[rng.integers(0, len(g), len(g))]) for g in groups]
        slopes[b] = np.polyfit(x, np.log(med), 1)[0]
    lo, hi = np.quantile(slopes, [0.025, 0.975])
    return float(lo), float(hi)


def _scaling(spec: ExperimentSpec, samples: MapSamples, key: str, name: str) -> ExperimentReport:
    if len(samples.sizes) < 2:
        raise SpecError("a scaling regression needs at least two sizes")
    alpha = samples.a - 0.5
    rep = ExperimentReport(name, spec.as_dict(), environment=environment(spec))
    groups = [samples.column(n, key).astype(float) for n in samples.sizes]
    med = np.array([np.median(g) for g in groups])
    if np.any(med <= 0):
        raise SpecError(f"median {key} is zero at some size; sizes are too small")
    slope, icept = np.polyfit(np.log(samples.sizes), np.log(med), 1)
    ci = _bootstrap_slope(spec, samples.sizes, groups)
    target = 1 / (2 * alpha)
    rep.add(f"{key} median slope vs 1/(2 alpha) = {target:.4f}", slope, f"|slope - target| <= {spec.slope_tol}",
            abs(slope - target) <= spec.slope_tol)
    n1, n2 = samples.sizes[-2], samples.sizes[-1]
    p = ks_2samp(groups[-2] * n1 ** (-1 / (2 * alpha)), groups[-1] * n2 ** (-1 / (2 * alpha))).pvalue
    rep.add(f"KS rescaled {key} at n = {n1} vs {n2}", p, f"p > {spec.ks_level}", p > spec.ks_level)
    rep.statistics.update({
        "alpha": alpha, "slope": float(slope), "intercept": float(icept), "slope_ci95": ci,
        "median": dict(zip(samples.sizes, med.tolist())),
        "rescaled_quantiles": {n: np.quantile(g * n ** (-1 / (2 * alpha)), [0.1, 0.25, 0.5, 0.75, 0.9]).tolist()
                               for n, g in zip(samples.sizes, groups)},
    })
    rep.tables["replicas"] = samples.rows
    return rep


def radius_scaling(spec: ExperimentSpec, samples: MapSamples | None = None) -> ExperimentReport:
    """Median radius against ``n`` on a log-log scale, and stability of the rescaled law."""
    samples = samples or sample_maps(spec)
    return _scaling(spec, samples, "R", "radius_scaling")


def delta_scaling(spec: ExperimentSpec, samples: MapSamples | None = None) -> ExperimentReport:
    """As :func:`radius_scaling` for the distance between ``v*`` and the root edge.

    Also checks on every sample that this distance equals minus the minimal
    white label and never exceeds the radius.
    """
    samples = samples or sample_maps(spec)
    rep = _scaling(spec, samples, "Delta", "delta_scaling")
    bad_identity = sum(r["Delta"] != -r["min_label"] for r in samples.rows)
    bad_bound = sum(r["Delta"] > r["R"] for r in samples.rows)
    rep.add("Delta = -min label failures", bad_identity, "== 0", bad_identity == 0)
    rep.add("Delta <= R failures", bad_bound, "== 0", bad_bound == 0)
    return rep


def _pooled_profile(counts_list, n: int, alpha: float):
    """Average of the per-map probability measures ``#V^{-1} sum_v delta(n^{-1/2alpha} d(v*, v))``."""
    width = max(len(c) for c in counts_list)
    w = np.zeros(width)
    for c in counts_list:
        w[: len(c)] += c / c.sum()
    w /= len(counts_list)
    return np.arange(width) * n ** (-1 / (2 * alpha)), w


def _label_occupation(model: WeightModel, spec: ExperimentSpec, n: int) -> tuple[np.ndarray, np.ndarray]:
    # discrete-label route: rescaled (label - min + 1) over whites plus v* at 0,
    # from mobiles independent of the map samples
    def one(rep):
        rng = RngStream(spec.seed, stream_id("reference", 0, rep)).generator()
        mb = condition_size(model, rng, n, mode=spec.mode, delta=spec.delta)
        wl = mb.white_labels()
        return np.bincount(np.concatenate(([0], wl - wl.min() + 1)))
    counts = _run(one, range(spec.replicas), spec.threads)
    return _pooled_profile(counts, n, model.alpha)


def profile_convergence(spec: ExperimentSpec, samples: MapSamples | None = None,
                        contrast: dict[float, MapSamples] | None = None) -> ExperimentReport:
    """Wasserstein-1 comparisons of rescaled distance profiles.

    Profiles are probability measures (normalized by the number of
    vertices) averaged over replicas.  Distances are exact 1-D Wasserstein
    distances between the pooled measures.
    """
    samples = samples or sample_maps(spec)
    alpha = samples.a - 0.5
    rep = ExperimentReport("profile_convergence", spec.as_dict(), environment=environment(spec))
    mass_bad = sum(int(c.sum()) != r["vertices"] for n in samples.sizes
                   for c, r in zip(samples.profiles[n], [r for r in samples.rows if r["n"] == n]))
    rep.add("profile mass != number of vertices", mass_bad, "== 0", mass_bad == 0)
    pooled = {n: _pooled_profile(samples.profiles[n], n, alpha) for n in samples.sizes}
    w1 = []
    for n1, n2 in zip(samples.sizes, samples.sizes[1:]):
        (x1, p1), (x2, p2) = pooled[n1], pooled[n2]
        w1.append(wasserstein_distance(x1, x2, p1, p2))
    rep.statistics["w1_consecutive"] = {f"{a}-{b}": v for a, b, v in zip(samples.sizes, samples.sizes[1:], w1)}
    # strict decrease is the preregistered target; at a few hundred replicas
    # the sampling noise of W1 is comparable to its decrease, so the fitted
    # trend is reported alongside
    steps = [b - a for a, b in zip(w1, w1[1:])]
    rep.add("W1(n, next n) strictly decreasing: largest increment", max(steps) if steps else 0.0, "< 0",
            all(d < 0 for d in steps))
    if len(w1) >= 2:
        rep.statistics["w1_log_slope"] = float(np.polyfit(np.log(samples.sizes[:-1]), np.log(w1), 1)[0])

    n_max = samples.sizes[-1]
    xl, pl = _label_occupation(calibrate(samples.a), spec, n_max)
    xm, pmx = pooled[n_max]
    w_label = wasserstein_distance(xm, xl, pmx, pl)

    contrast = contrast or {a: sample_maps(spec, a=a, sizes=(n_max,), kind="contrast") for a in spec.contrast_a}
    (a_lo, s_lo), (a_hi, s_hi) = sorted(contrast.items())
    lo = _pooled_profile(s_lo.profiles[n_max], n_max, a_lo - 0.5)
    hi = _pooled_profile(s_hi.profiles[n_max], n_max, a_hi - 0.5)
    w_contrast = wasserstein_distance(lo[0], hi[0], lo[1], hi[1])
    rep.add("W1(map profile, label occupation) / W1(contrast alphas)", w_label / w_contrast, "< 1",
            w_label < w_contrast)

    def mean_rescaled(s: MapSamples, a: float):
        return np.array([np.dot(np.arange(len(c)), c) / c.sum() for c in s.profiles[n_max]]) * n_max ** (-1 / (2 * a - 1))
    p = ks_2samp(mean_rescaled(s_lo, a_lo), mean_rescaled(s_hi, a_hi)).pvalue
    rep.add(f"KS separating alpha = {a_lo - 0.5:g} and {a_hi - 0.5:g} profiles", p, f"p < {spec.ks_level}",
            p < spec.ks_level)
    rep.statistics.update({"w1_label_route": w_label, "w1_contrast": w_contrast, "alpha": alpha,
                           "note": "conditioned excursion approximated by size-conditioned mobiles"})
    rep.tables["profile"] = [{"n": n, "x": float(x), "mass": float(m)}
                             for n in samples.sizes for x, m in zip(*pooled[n]) if m > 0]
    return rep


# ---------------------------------------------------------------------------
# coding processes of forests


def _forest_marginals(model: WeightModel, spec: ExperimentSpec, n_index: int, n: int):
    alpha = model.alpha

    def one(rep):
        rng = RngStream(spec.seed, stream_id("labels", n_index, rep)).generator()
        fp = sample_forest_prefix(model, rng, n)
        out = []
        for t in spec.times:
            k = max(int(n * t), 1)
            out.append((fp.S[k] * n ** (-1 / alpha), fp.H[k - 1] * n ** (-(1 - 1 / alpha)),
                        fp.L[k - 1] * n ** (-1 / (2 * alpha))))
        return out
    res = np.array(_run(one, range(spec.replicas), spec.threads), dtype=float)
    return res  # shape (replicas, times, 3)


def _reversal(model: WeightModel, spec: ExperimentSpec):
    k = spec.reversal_n // 3

    def one(rep):
        rng = RngStream(spec.seed, stream_id("reversal", 0, rep)).generator()
        cp = coding_paths(condition_size(model, rng, spec.reversal_n, mode="exactly"), check=False)
        j = max(len(cp.C) - 1 - k, 0)
        return cp.C[k], cp.Lam[k], cp.C[j], -cp.Lam[j]
    return np.array(_run(one, range(spec.reversal_replicas), spec.threads), dtype=float)


def label_process_convergence(spec: ExperimentSpec) -> ExperimentReport:
    """Rescaled Lukasiewicz, height and label processes of i.i.d. forests."""
    model = calibrate(spec.a)
    alpha = model.alpha
    rep = ExperimentReport("label_process_convergence", spec.as_dict(), environment=environment(spec))
    n1, n2 = spec.sizes[-2], spec.sizes[-1]
    m1 = _forest_marginals(model, spec, len(spec.sizes) - 2, n1)
    m2 = _forest_marginals(model, spec, len(spec.sizes) - 1, n2)
    names = ("S", "H", "L")
    ks = {}
    for ti, t in enumerate(spec.times):
        for ci, name in enumerate(names):
            ks[f"{name}@{t}"] = float(ks_2samp(m1[:, ti, ci], m2[:, ti, ci]).pvalue)
        rep.add(f"KS rescaled S at t = {t}, n = {n1} vs {n2}", ks[f"S@{t}"], f"p > {spec.ks_level}",
                ks[f"S@{t}"] > spec.ks_level)
    rep.statistics["ks_across_n"] = ks

    # references from the stable simulator: S -> c0 X, L -> sqrt(2 c0) D
    rng = RngStream(spec.seed, stream_id("reference", 1, 0)).generator()
    ref = {}
    for ti, t in enumerate(spec.times):
        X = model.c0 * shot_noise_endpoints(alpha, spec.reference_eps, spec.replicas, rng, t=t)
        ref[f"S@{t}"] = float(ks_2samp(m2[:, ti, 0], X).pvalue)
        D = np.array([distance_at_end(simulate_stable_shot_noise(alpha, spec.reference_eps, t, rng, grid=256), rng)
                      for _ in range(spec.replicas)]) * math.sqrt(2 * model.c0)
        ref[f"L@{t}"] = float(ks_2samp(m2[:, ti, 2], D).pvalue)
    rep.statistics["ks_vs_stable_reference"] = ref

    # coupled height: discrete H against the epsilon-approximation on the same walk
    nc = spec.contour_n
    fp = sample_forest_prefix(model, RngStream(spec.seed, stream_id("labels", 99, 0)).generator(), nc)
    path = path_from_steps(model, np.diff(fp.S), nc)
    pos = np.linspace(0, nc - 1, 512).astype(np.int64)
    eps = 6.0 / (model.c0 * nc ** (1 / alpha))  # a few walk steps
    h = height_process_approx(path, eps, pos)
    rep.statistics["height_coupling_corr"] = float(np.corrcoef(h, fp.H[pos])[0, 1])

    # contour route: C at index k against H at white index ~ beta k
    kk = np.arange(0, len(fp.C), max(len(fp.C) // 4096, 1))
    wi = np.minimum((model.beta * kk).astype(np.int64), nc - 1)
    corr_c = float(np.corrcoef(fp.C[kk], fp.H[wi])[0, 1])
    corr_l = float(np.corrcoef(fp.Lam[kk], fp.L[wi])[0, 1])
    rep.add(f"corr(C_k, H_[beta k]) at n = {nc}", corr_c, f"> {spec.contour_corr_min}", corr_c > spec.contour_corr_min)
    rep.statistics["contour_label_corr"] = corr_l

    rn = []
    for r in range(spec.rn_replicas):
        f = sample_forest_prefix(model, RngStream(spec.seed, stream_id("rn", 0, r)).generator(), spec.rn_size)
        rn.append(f.contour_index[-1] / spec.rn_size)
    rn_mean = float(np.mean(rn))
    rel = abs(rn_mean * model.beta - 1)
    rep.add(f"R_n/n vs 1/beta = {1 / model.beta:.6f} at n = {spec.rn_size}", rel, f"relative error < {spec.rn_tol}",
            rel < spec.rn_tol)
    rep.statistics["rn_over_n"] = rn

    rv = _reversal(model, spec)
    p_c = float(ks_2samp(rv[:, 0], rv[:, 2]).pvalue)
    p_l = float(ks_2samp(rv[:, 1], rv[:, 3]).pvalue)
    rep.add("time reversal: C_k vs C_(#T-1-k)", p_c, f"p > {spec.ks_level}", p_c > spec.ks_level)
    rep.add("time reversal: Lambda_k vs -Lambda_(#T-1-k)", p_l, f"p > {spec.ks_level}", p_l > spec.ks_level)

    rep.tables["marginals"] = [
        {"n": n, "replica": r, "stream": stream_id("labels", idx, r), "t": t,
         "S": m[r, ti, 0], "H": m[r, ti, 1], "L": m[r, ti, 2]}
        for idx, n, m in ((len(spec.sizes) - 2, n1, m1), (len(spec.sizes) - 1, n2, m2))
        for r in range(m.shape[0]) for ti, t in enumerate(spec.times)
    ]
    return rep


# ---------------------------------------------------------------------------
# bijection


def _round_trip(m) -> list[str]:
    pm = mobile_to_map(m)
    problems = list(check_bijection_invariants(m, pm).violations)
    if not map_to_mobile(pm).same_as(m):
        problems.append("inverse bijection does not return the mobile")
    return problems


def bijection_suite(seed: int = 0, a: float = 2.0, max_white: int = 4, max_children: int = 3,
                    random_count: int = 10**4, max_vertices: int = 10**5, threads: int = 1) -> ExperimentReport:
    """Round trips and map invariants on an exhaustive family and on random mobiles.

    Random mobiles are unconditioned trees; trees larger than
    ``max_vertices`` are discarded and redrawn from the same stream.
    """
    rep = ExperimentReport("bijection", {"seed": seed, "a": a, "max_white": max_white,
                                         "max_children": max_children, "random_count": random_count,
                                         "max_vertices": max_vertices})
    exhaustive = 0
    bad_exhaustive = []
    for m in enumerate_mobiles(max_white, max_children):
        exhaustive += 1
        problems = _round_trip(m)
        if problems:
            bad_exhaustive.append(problems)
    model = calibrate(a)

    def one(r):
        rng = RngStream(seed, stream_id("bijection", 0, r)).generator()
        while True:
            try:
                t = sample_tree(model, rng, size_budget=max_vertices)
                break
            except BudgetExceeded:
                continue
        m = assign_labels(t, rng)
        return m.size, _round_trip(m)
    out = _run(one, range(random_count), threads)
    bad_random = [p for _, p in out if p]
    sizes = np.array([s for s, _ in out])
    rep.add(f"violations on {exhaustive} exhaustive mobiles", len(bad_exhaustive), "== 0", not bad_exhaustive)
    rep.add(f"violations on {random_count} random mobiles", len(bad_random), "== 0", not bad_random)
    rep.statistics.update({"exhaustive_count": exhaustive, "random_max_vertices": int(sizes.max()),
                           "random_mean_vertices": float(sizes.mean()),
                           "examples": (bad_exhaustive + bad_random)[:5]})
    rep.environment = {"seed": seed}
    return rep


# ---------------------------------------------------------------------------
# suites


def run_targets(spec: ExperimentSpec) -> list[ExperimentReport]:
    """Run the requested targets, sharing the conditioned-map samples."""
    reports = []
    samples = None
    if set(spec.targets) & {"radius", "delta", "profile"}:
        samples = sample_maps(spec)
    if "radius" in spec.targets:
        reports.append(radius_scaling(spec, samples))
    if "delta" in spec.targets:
        reports.append(delta_scaling(spec, samples))
    if "profile" in spec.targets:
        reports.append(profile_convergence(spec, samples))
    if "labels" in spec.targets:
        reports.append(label_process_convergence(spec))
    return reports


def compare_slopes(reports: list[ExperimentReport]) -> Target:
    """Slopes of several radius reports must decrease with alpha and have disjoint 95% intervals."""
    rows = sorted((r.statistics["alpha"], r.statistics["slope"], r.statistics["slope_ci95"]) for r in reports)
    ordered = all(b[1] < a[1] for a, b in zip(rows, rows[1:]))
    separated = all(b[2][1] < a[2][0] for a, b in zip(rows, rows[1:]))
    gap = min(a[2][0] - b[2][1] for a, b in zip(rows, rows[1:]))
    return Target("radius slopes ordered and separated across alpha", gap, "CI gap > 0", ordered and separated)
