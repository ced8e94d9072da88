import math
from functools import lru_cache

import numpy as np
import pytest
from scipy.stats import ks_2samp, levy_stable, norm

from stablemaps.mobile import sample_forest_prefix
from stablemaps.stablesim import (
    BridgeBank,
    StablePath,
    distance_process,
    exact_walk_laplace,
    height_process_approx,
    holder_estimate,
    jump_intensity,
    laplace_check,
    omitted_bound,
    path_from_steps,
    reregister,
    scaling_identity_test,
    shot_noise_endpoints,
    simulate_stable_shot_noise,
    simulate_stable_walk,
    unit_bridge,
    walk_endpoints,
)
from stablemaps.weights import calibrate, nu_mass


@lru_cache(maxsize=None)
def model(a=2.0):
    return calibrate(a)


def single_jump_path(x, drop):
    # jump of size x at t = 0.5, then a linear descent of ``drop``
    t = np.array([0.0, 0.5, 0.5, 1.0])
    X = np.array([0.0, 0.0, x, x - drop])
    return StablePath(t, X, np.array([2]), 1.5, 0.0)


def test_walk_path_basics():
    p = simulate_stable_walk(model(), 1000, 2.0, np.random.default_rng(0), eps=0.05)
    assert p.X[0] == 0.0 and len(p.X) == 2001
    assert np.all(p.jump_sizes > 0)
    assert p.jump_sizes.sum() <= np.clip(np.diff(p.X), 0, None).sum()
    thresh = 0.05 * 1000 ** (1 / model().alpha) / (model().c0 * 1000 ** (1 / model().alpha))
    assert math.isclose(p.eps, thresh)
    assert np.all(np.diff(p.X)[p.jump_pos - 1] > p.eps * (1 - 1e-9))
    with pytest.raises(ValueError):
        simulate_stable_walk(model(), 0, 1.0, 0)


def test_exact_finite_n_transform_against_truncated_sum():
    # independent route: masses of nu by convolution, summed directly
    n, m = 10**4, model()
    pmf, _ = nu_mass(m, 20_000)
    k = np.arange(-1, len(pmf) - 1)
    for u in (0.5, 1.0, 2.0):
        s = u / (m.c0 * n ** (1 / m.alpha))
        direct = math.exp(n * math.log(float(np.sum(pmf * np.exp(-s * k)))))
        assert math.isclose(exact_walk_laplace(m, n, u), direct, rel_tol=2e-3)


def test_finite_n_bias_of_the_laplace_transform():
    # relative deviation of the exact n-step transform from exp(u^alpha),
    # shrinking like n^{-1/3}
    frozen = {10**4: (-0.00833, -0.03287, -0.12483),
              10**5: (-0.00388, -0.01543, -0.06026),
              10**6: (-0.00180, -0.00720, -0.02847)}
    for n, devs in frozen.items():
        for u, d in zip((0.5, 1.0, 2.0), devs):
            got = exact_walk_laplace(model(), n, u) / math.exp(u**1.5) - 1
            assert abs(got - d) < 5e-5


def test_laplace_standard_error_against_exact_stable_draws():
    # scipy's S1 parametrisation: E exp(-u X) = exp(sigma^alpha u^alpha / |cos(pi alpha / 2)|)
    alpha = 1.5
    sigma = abs(math.cos(math.pi * alpha / 2)) ** (1 / alpha)
    x = levy_stable.rvs(alpha, 1.0, scale=sigma, size=(40, 2000), random_state=np.random.default_rng(0))
    rows = [laplace_check(batch, (1.0, 2.0), alpha) for batch in x]
    for i, u in enumerate((1.0, 2.0)):
        est = np.array([r[i]["estimate"] for r in rows])
        assert abs(est.mean() / math.exp(u**alpha) - 1) < 0.02
        # the known-variance standard error matches the spread across batches
        assert abs(est.std(ddof=1) / rows[0][i]["se"] - 1) < 0.3
        assert all(abs(r[i]["z"]) < 4 for r in rows)


def test_walk_laplace_matches_exact_transform():
    x = walk_endpoints(model(), 10**5, 10**4, np.random.default_rng(1))
    for row in laplace_check(x, (0.5, 1.0, 2.0), 1.5):
        exact = exact_walk_laplace(model(), 10**5, row["u"])
        assert abs(row["estimate"] - exact) < 3 * row["se"]


def test_walk_laplace_matches_stable_limit_at_large_n():
    x = walk_endpoints(model(), 10**6, 10**4, np.random.default_rng(2))
    for row in laplace_check(x, (0.5, 1.0, 2.0), 1.5):
        assert abs(row["z"]) < 3


def test_walk_marginal_stable_in_n():
    rng = np.random.default_rng(3)
    a = walk_endpoints(model(), 10**5, 10**4, rng)
    b = walk_endpoints(model(), 4 * 10**5, 10**4, rng)
    assert ks_2samp(a, b).pvalue > 0.01


def test_walk_one_step_mean_is_zero():
    steps = model().sample_nu(np.random.default_rng(4), 10**6)
    # heavy tail: compare the median-of-means against a generous bound
    means = steps.reshape(100, -1).mean(axis=1)
    assert abs(np.median(means)) < 0.1


def test_shot_noise_without_jumps_is_a_drift():
    p = simulate_stable_shot_noise(1.5, 1e6, 1.0, np.random.default_rng(5), grid=64, small_jumps="drift")
    assert len(p.jump_pos) == 0
    slope = np.diff(p.X) / np.diff(p.t)
    np.testing.assert_allclose(slope, slope[0])
    with pytest.raises(ValueError):
        simulate_stable_shot_noise(1.5, 0.0, 1.0, 0)
    with pytest.raises(ValueError):
        simulate_stable_shot_noise(1.5, 0.1, 1.0, 0, small_jumps="none")


def test_jump_count_is_poisson():
    eps, reps = 0.05, 2000
    rng = np.random.default_rng(6)
    counts = np.array([len(simulate_stable_shot_noise(1.5, eps, 1.0, rng, grid=16).jump_pos)
                       for _ in range(reps)])
    lam = jump_intensity(1.5, eps)
    # (alpha - 1) / Gamma(2 - alpha) eps^{-alpha}
    assert math.isclose(lam, 0.5 / math.sqrt(math.pi) * eps**-1.5)
    assert abs(counts.mean() - lam) < 3 * math.sqrt(lam / reps)
    assert abs(counts.var() / lam - 1) < 0.15


def test_shot_noise_laplace_and_walk_agreement():
    rng = np.random.default_rng(7)
    y = shot_noise_endpoints(1.5, 1e-3, 10**4, rng)
    for row in laplace_check(y, (0.5, 1.0, 2.0), 1.5):
        assert abs(row["z"]) < 3
    x = walk_endpoints(model(), 10**6, 10**4, rng)
    assert ks_2samp(x, y).pvalue > 0.01


def test_shot_noise_path_invariants():
    p = simulate_stable_shot_noise(1.5, 0.02, 2.0, np.random.default_rng(8), grid=256)
    assert p.X[0] == 0.0 and np.all(np.diff(p.t) >= 0)
    assert np.all(p.jump_sizes >= 0.02)
    assert np.all(p.t[p.jump_pos] == p.t[p.jump_pos - 1])


def test_unit_bridge():
    rng = np.random.default_rng(9)
    b = np.array([unit_bridge(rng, 64) for _ in range(4000)])
    assert np.all(b[:, 0] == 0) and np.all(b[:, -1] == 0)
    for k in (16, 32, 48):
        u = k / 64
        assert abs(b[:, k].var() / (u * (1 - u)) - 1) < 0.1
    with pytest.raises(ValueError):
        unit_bridge(rng, 100)


def test_bridge_bank_is_keyed():
    a, b = BridgeBank(3), BridgeBank(3)
    assert np.array_equal(a.get(17), b.get(17))
    assert not np.array_equal(a.get(17), a.get(18))


def test_no_jumps_gives_zero_distance():
    p = simulate_stable_shot_noise(1.5, 1e6, 1.0, np.random.default_rng(10), grid=32, small_jumps="drift")
    ds = distance_process(p, 0)
    assert np.all(ds.D == 0)


def test_single_jump_marginal():
    x, drop = 2.0, 0.5
    p = single_jump_path(x, drop)
    r = x - drop
    vals = np.array([distance_process(p, BridgeBank(s), [3]).D[0] for s in range(3000)])
    var = r * (x - r) / x
    assert norm.fit(vals)[1] == pytest.approx(math.sqrt(var), rel=0.06)
    assert abs(vals.mean()) < 4 * math.sqrt(var / len(vals))
    # before the jump, and on the jump itself (r = x), D vanishes
    assert np.all(distance_process(p, 1, [0, 1, 2]).D == 0)


def test_conditional_variance_over_bridge_redraws():
    p = simulate_stable_walk(model(), 2000, 1.0, np.random.default_rng(11), eps=0.02)
    end = [len(p.X) - 1]
    vals = np.array([distance_process(p, BridgeBank(s), end).D[0] for s in range(1000)])
    target = distance_process(p, 0, end).audit["conditional_variance"][0]
    assert target > 0
    assert abs(vals.var() / target - 1) < 0.1


def test_resolution_halving_within_audit_bound():
    p = simulate_stable_walk(model(), 4096, 1.0, np.random.default_rng(12), eps=0.02)
    fine = reregister(p, p.eps / 2)
    end = [len(p.X) - 1]
    diffs = np.array([distance_process(p, BridgeBank(s), end).D[0]
                      - distance_process(fine, BridgeBank(s), end).D[0] for s in range(300)])
    bound = omitted_bound(p, end[0])
    assert np.mean(diffs**2) <= bound
    assert omitted_bound(fine, end[0]) <= bound
    assert omitted_bound(reregister(p, 0.0), end[0]) == 0.0


def test_scaling_identity_r1_is_trivial():
    rep = scaling_identity_test(1.5, 1.0, 500, np.random.default_rng(13), eps=0.05, grid=128)
    assert rep["ks_X"] > 0.01 and rep["ks_D"] > 0.01


def test_x_marginal_scaling_at_r16():
    rng = np.random.default_rng(14)
    a = walk_endpoints(model(), 10**5, 10**4, rng)
    b = walk_endpoints(model(), 10**5, 10**4, rng, t=16.0) * 16 ** (-1 / 1.5)
    assert ks_2samp(a, b).pvalue > 0.01


def test_height_approximation_tracks_discrete_height():
    n = 10**5
    fp = sample_forest_prefix(model(), np.random.default_rng(15), n)
    p = path_from_steps(model(), np.diff(fp.S), n)
    pos = np.arange(0, n, 100)
    h = height_process_approx(p, 0.002, pos)
    assert np.all(h >= 0)
    assert np.corrcoef(h, fp.H[pos])[0, 1] > 0.9
    with pytest.raises(ValueError):
        height_process_approx(p, 0.0, pos)


def test_holder_brownian_control():
    bm = np.cumsum(np.random.default_rng(16).standard_normal((16, 4097)), axis=1) / 64
    fit = holder_estimate(np.linspace(0, 1, 4097), bm)
    assert fit.valid and abs(fit.slope - 0.5) < 0.05


def test_holder_distance_process():
    n = 2**16
    pos = np.arange(0, n + 1, 16)
    rng = np.random.default_rng(17)
    rows = []
    for k in range(8):
        p = simulate_stable_walk(model(), n, 1.0, rng, eps=0.005)
        rows.append(distance_process(p, k, pos).D)
    fit = holder_estimate(p.t[pos], np.array(rows))
    assert 0.25 <= fit.slope <= 0.40


def test_holder_constant_path_flagged():
    fit = holder_estimate(np.linspace(0, 1, 100), np.ones(100))
    assert not fit.valid and math.isnan(fit.slope)
    with pytest.raises(ValueError):
        holder_estimate(np.linspace(0, 1, 8), np.arange(8.0))


def test_path_csv():
    p = single_jump_path(1.0, 0.5)
    text = p.csv(np.zeros(4))
    assert text.splitlines()[0] == "t,X,D" and len(text.splitlines()) == 5
