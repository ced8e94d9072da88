import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import chisquare

from stablemaps.bridges import (
    Bridge,
    bridge_codes,
    bridge_variance,
    enumerate_bridges,
    increment_sum_law,
    moment_constant,
    moment_ratio,
    sample_bridge,
    sample_bridges,
    sample_increments,
)
from stablemaps.weights import binom_n


@pytest.mark.parametrize("p", range(1, 9))
def test_enumeration_count_is_central_binomial(p):
    rows = enumerate_bridges(p)
    assert len(rows) == binom_n(p)
    assert np.all(rows.sum(axis=1) == 0)
    assert rows.min() >= -1
    assert len(np.unique(bridge_codes(rows))) == len(rows)


def test_small_cases():
    assert np.array_equal(sample_bridge(1, 0).values, [0, 0])
    assert enumerate_bridges(2).tolist() == [[-1, 1], [0, 0], [1, -1]]


def test_bridge_type_rejects_invalid_paths():
    with pytest.raises(ValueError):
        Bridge(2, np.array([0, -2, 0]))
    with pytest.raises(ValueError):
        Bridge(2, np.array([0, 1, 1]))


@given(st.lists(st.integers(1, 40), min_size=1, max_size=20), st.integers(0, 2**32))
@settings(max_examples=60, deadline=None)
def test_increments_lie_in_e_p(lengths, seed):
    inc = sample_increments(np.array(lengths), seed)
    pos = 0
    for p in lengths:
        seg = inc[pos : pos + p]
        assert seg.sum() == 0 and seg.min() >= -1
        pos += p
    assert pos == len(inc)


@pytest.mark.parametrize("method", ["sequential", "rejection"])
def test_uniformity_chi_square(method):
    p = 6
    rows = enumerate_bridges(p)
    codes = bridge_codes(rows)
    draws = sample_bridges(p, 10**6, np.random.default_rng(17), method=method)
    got = np.searchsorted(codes, bridge_codes(np.diff(draws, axis=1)))
    counts = np.bincount(got, minlength=len(rows))
    assert chisquare(counts).pvalue > 0.001


def test_samplers_agree():
    p = 5
    codes = bridge_codes(enumerate_bridges(p))
    tables = []
    for method, seed in (("sequential", 1), ("rejection", 2)):
        d = sample_bridges(p, 200_000, seed, method=method)
        tables.append(np.bincount(np.searchsorted(codes, bridge_codes(np.diff(d, axis=1))),
                                  minlength=len(codes)))
    from scipy.stats import chi2_contingency
    assert chi2_contingency(np.array(tables)).pvalue > 0.001


@pytest.mark.parametrize("p", [3, 7, 12])
def test_variance_formula_by_enumeration(p):
    paths = np.concatenate([np.zeros((binom_n(p), 1), int), np.cumsum(enumerate_bridges(p), axis=1)], axis=1)
    j = np.arange(p + 1)
    np.testing.assert_allclose(paths.var(axis=0), bridge_variance(p, j), rtol=1e-12, atol=1e-12)


def test_variance_envelope_constant():
    # Var(Y_j) <= 2 K j (p - j)/p holds with K = 1 for every p
    for p in range(1, 13):
        j = np.arange(1, p)
        assert np.all(bridge_variance(p, j) <= 2 * j * (p - j) / p)


def _enumerated_paths(p):
    return np.concatenate([np.zeros((binom_n(p), 1), int), np.cumsum(enumerate_bridges(p), axis=1)], axis=1)


@pytest.mark.parametrize("p", [2, 5, 9])
def test_exact_marginal_law_matches_enumeration(p):
    paths = _enumerated_paths(p)
    for d in range(p + 1):
        emp = np.bincount(paths[:, d] + d, minlength=p + 1) / len(paths)
        np.testing.assert_allclose(increment_sum_law(p, d), emp, atol=1e-12)
    assert math.isclose(moment_constant(p), moment_ratio(paths, 2), rel_tol=1e-10)


def test_fourth_moment_constant_grows_to_step_moment():
    # the worst gap is d = 1, whose fourth moment tends to that of the
    # unconditioned step law 2^{-k-2}, which equals 38
    ks = [moment_constant(p) for p in (4, 12, 100, 1000)]
    assert all(x < y for x, y in zip(ks, ks[1:]))
    assert ks[-1] < 38 and ks[-1] > 0.95 * 38


def test_fourth_moment_constant_monte_carlo():
    paths = sample_bridges(1000, 4000, np.random.default_rng(3))
    assert abs(moment_ratio(paths, 2, gaps=[1, 2, 3, 4, 8, 16, 64, 256, 500]) / moment_constant(1000) - 1) < 0.2


def test_rescaled_bridge_variance_matches_brownian_bridge():
    p = 10**4
    paths = sample_bridges(p, 4000, np.random.default_rng(8))
    for t in (0.25, 0.5, 0.75):
        y = paths[:, int(p * t)] / math.sqrt(2 * p)
        # sampling error of a variance from 4000 draws is about 2.2%
        assert abs(y.var() / (t * (1 - t)) - 1) < 0.05


def test_label_increment_mean_is_zero():
    rng = np.random.default_rng(4)
    for p in (2, 4, 9):
        paths = sample_bridges(p, 50_000, rng)
        y = paths[:, 1]
        assert abs(y.mean()) < 4 * y.std() / math.sqrt(len(y))


def test_unknown_method():
    with pytest.raises(ValueError):
        sample_bridge(3, 0, method="magic")
    with pytest.raises(ValueError):
        sample_bridge(0, 0)
