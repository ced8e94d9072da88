from functools import lru_cache

import numpy as np
import pytest

from stablemaps.bdg import (
    INF,
    NegativeOrientation,
    NotBipartite,
    _successors,
    check_bijection_invariants,
    contour_map_vertices,
    corner_sequence,
    delta_identity,
    map_to_mobile,
    mobile_to_map,
    successors_naive,
)
from stablemaps.mobile import (
    BudgetExceeded,
    InvalidMobile,
    Mobile,
    assign_labels,
    condition_size,
    enumerate_mobiles,
    sample_tree,
)
from stablemaps.pmap import InvalidMap, PlanarMap, bfs, check_map
from stablemaps.weights import calibrate


@lru_cache(maxsize=None)
def model(a=2.0):
    return calibrate(a)


def random_mobiles(count, seed, budget=2000, a=2.0):
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < count:
        try:
            t = sample_tree(model(a), rng, size_budget=budget)
        except BudgetExceeded:
            continue
        out.append(assign_labels(t, rng))
    return out


def relabel(pm, rng):
    """Same map with half-edges and vertices renumbered at random."""
    p = rng.permutation(pm.n_half_edges)
    q = rng.permutation(pm.n_vertices)
    a = np.empty_like(pm.alpha)
    s = np.empty_like(pm.sigma)
    v = np.empty_like(pm.vert)
    a[p] = p[pm.alpha]
    s[p] = p[pm.sigma]
    v[p] = q[pm.vert]
    return PlanarMap(a, s, v, pm.n_vertices, int(p[pm.root]), int(q[pm.v_star]))


def test_single_vertex_mobile_gives_vertex_map():
    m = Mobile(np.array([-1]), np.array([0]))
    pm = mobile_to_map(m)
    assert pm.is_vertex_map and pm.n_vertices == 1
    assert map_to_mobile(pm).same_as(m)
    assert check_bijection_invariants(m, pm).ok


def test_two_vertex_mobile():
    m = Mobile(np.array([-1, 0]), np.array([0, 0]))
    pm = mobile_to_map(m)
    assert (pm.n_vertices, pm.n_edges, pm.n_faces) == (2, 1, 1)
    assert pm.face_degrees().tolist() == [2]
    assert pm.e_minus == pm.v_star and pm.e_plus == 0
    assert bfs(pm, pm.v_star).tolist() == [1, 0]
    assert check_bijection_invariants(m, pm).ok
    assert map_to_mobile(pm).same_as(m)


def test_successor_scan_matches_naive():
    rng = np.random.default_rng(0)
    for m in random_mobiles(200, 1, budget=3000):
        if m.size == 1:
            continue
        lab = corner_sequence(m).label
        assert np.array_equal(_successors(lab), successors_naive(lab))
    # a long contour
    m = condition_size(model(), rng, 500, mode="window")
    lab = corner_sequence(m).label
    assert np.array_equal(_successors(lab), successors_naive(lab))


def test_successor_definition():
    lab = np.array([0, 1, 0, -1, 0, 2])
    phi = _successors(lab)
    assert phi.tolist() == [3, 2, 3, INF, 9, 7]


def test_exhaustive_round_trip_small():
    count = 0
    for m in enumerate_mobiles(3, 3):
        pm = mobile_to_map(m)
        report = check_bijection_invariants(m, pm)
        assert report.ok, report.violations
        assert map_to_mobile(pm).same_as(m)
        count += 1
    assert count == 2908


def test_random_round_trip_and_relabeling():
    rng = np.random.default_rng(2)
    for m in random_mobiles(500, 3):
        pm = mobile_to_map(m)
        report = check_bijection_invariants(m, pm)
        assert report.ok, report.violations
        assert map_to_mobile(pm).same_as(m)
        if not pm.is_vertex_map:
            assert map_to_mobile(relabel(pm, rng)).same_as(m)


@pytest.mark.parametrize("a", [1.7, 2.3])
def test_large_conditioned_mobile(a):
    m = condition_size(model(a), np.random.default_rng(4), 20_000, mode="window")
    pm = mobile_to_map(m)
    report = check_bijection_invariants(m, pm)
    assert report.ok, report.violations
    assert map_to_mobile(pm).same_as(m)


def test_root_distance_equals_minus_min_label():
    # the root edge runs from the successor corner of the root (label -1,
    # or v* when no such corner exists) to the root
    for m in random_mobiles(300, 5):
        pm = mobile_to_map(m)
        d, expect = delta_identity(m, pm)
        assert d == expect


def test_root_distance_when_successor_is_a_white():
    m = Mobile(np.array([-1, 0, 1]), np.array([0, 0, -1]))
    pm = mobile_to_map(m)
    assert pm.e_minus != pm.v_star
    assert delta_identity(m, pm) == (1, 1)


def test_invalid_mobile_rejected():
    with pytest.raises(InvalidMobile):
        mobile_to_map(Mobile(np.array([-1, 0, 1, 1]), np.array([0, 0, -2, 0])))
    with pytest.raises(InvalidMobile):
        mobile_to_map(Mobile(np.array([-1, 0])))


def test_negative_orientation_rejected():
    m = random_mobiles(1, 6, budget=500)[0]
    while m.size < 5:
        m = random_mobiles(1, int(m.size) + 7, budget=500)[0]
    pm = mobile_to_map(m)
    flipped = PlanarMap(pm.alpha, pm.sigma, pm.vert, pm.n_vertices, int(pm.alpha[pm.root]), pm.v_star)
    with pytest.raises(NegativeOrientation):
        map_to_mobile(flipped)
    assert "root edge is not positive" in check_map(flipped)


def test_non_bipartite_rejected():
    # triangle: three vertices, three edges, two faces
    alpha = np.array([1, 0, 3, 2, 5, 4])
    vert = np.array([0, 1, 1, 2, 2, 0])
    sigma = np.array([5, 2, 1, 4, 3, 0])
    tri = PlanarMap(alpha, sigma, vert, 3, 0, 0)
    problems = check_map(tri)
    assert "face of odd degree" in problems
    assert "edge between vertices at equal distance (not bipartite)" in problems
    with pytest.raises(NotBipartite):
        map_to_mobile(tri)
    assert issubclass(NotBipartite, InvalidMap) and NotBipartite is not NegativeOrientation


def test_check_detects_corrupted_rotation():
    m = condition_size(model(), np.random.default_rng(8), 50, mode="exactly")
    pm = mobile_to_map(m)
    s = pm.sigma.copy()
    # swap the successors of two half-edges at the busiest vertex
    v = np.bincount(pm.vert).argmax()
    hs = np.flatnonzero(pm.vert == v)
    assert len(hs) >= 3
    s[hs[0]], s[hs[1]] = s[hs[1]], s[hs[0]]
    bad = PlanarMap(pm.alpha, s, pm.vert, pm.n_vertices, pm.root, pm.v_star)
    assert not check_bijection_invariants(m, bad).ok


def test_contour_vertices_follow_white_contour():
    m = condition_size(model(), np.random.default_rng(9), 40, mode="exactly")
    cv = contour_map_vertices(m)
    assert len(cv) == m.size
    assert cv[0] == 0 and cv[-1] == 0
    assert np.array_equal(corner_sequence(m).vertex, cv[:-1])
