import json

import numpy as np
import pytest

from stablemaps.bdg import contour_map_vertices, corner_sequence, mobile_to_map, INF
from stablemaps.mobile import Mobile, coding_paths, condition_size
from stablemaps.pmap import (
    InvalidMap,
    PlanarMap,
    bfs,
    check_map,
    map_from_bytes,
    map_to_bytes,
    map_to_text,
    pair_distances,
    profile,
    profile_csv,
    stratified_pairs,
    summary_json,
)
from stablemaps.weights import calibrate


@pytest.fixture(scope="module")
def big():
    m = condition_size(calibrate(2.0), np.random.default_rng(21), 20_000, mode="window")
    return m, mobile_to_map(m)


def two_vertex_map():
    return mobile_to_map(Mobile(np.array([-1, 0]), np.array([0, 0])))


def test_vertex_map():
    pm = PlanarMap.vertex_map()
    assert bfs(pm, 0).tolist() == [0]
    p = profile(pm)
    assert p.as_dict()["profile"] == {0: 1} and p.radius == 0 and p.delta == 0
    assert check_map(pm) == []


def test_two_vertex_map_profile():
    pm = two_vertex_map()
    assert bfs(pm, pm.v_star).tolist() == [1, 0]
    p = profile(pm)
    assert p.as_dict()["profile"] == {0: 1, 1: 1}
    assert p.radius == 1 and p.delta == 0


def test_bfs_rejects_bad_source():
    with pytest.raises(IndexError):
        bfs(two_vertex_map(), 2)


def test_distance_identity_and_profile(big):
    m, pm = big
    d = bfs(pm, pm.v_star)
    wl = m.white_labels()
    assert np.array_equal(d[:-1], wl - wl.min() + 1)
    p = profile(pm)
    assert p.counts.sum() == pm.n_vertices and p.counts[0] == 1
    assert p.radius == len(p.counts) - 1 and p.counts[-1] > 0
    assert p.delta <= p.radius
    assert check_map(pm) == []


def test_pair_bound_and_trivial_pairs(big):
    m, pm = big
    cv = contour_map_vertices(m)
    lam = coding_paths(m, check=False).Lam
    pairs = stratified_pairs(len(cv), 20_000, np.random.default_rng(1), n_sources=64)
    d, bound = pair_distances(pm, cv, lam, pairs)
    assert np.all(d <= bound)
    near = np.abs(pairs[:, 0] - pairs[:, 1]) <= 32
    assert near[: len(near) // 2].all()
    same = np.stack([np.arange(0, 100), np.arange(0, 100)], axis=1)
    d, bound = pair_distances(pm, cv, lam, same)
    assert np.all(d == 0) and np.all(bound == 2)


def test_successor_corners_are_adjacent(big):
    m, pm = big
    cs = corner_sequence(m)
    n = len(cs.label)
    idx = np.flatnonzero(cs.successor != INF)[:200]
    cv = contour_map_vertices(m)
    lam = coding_paths(m, check=False).Lam
    pairs = np.stack([idx, cs.successor[idx] % n], axis=1)
    d, _ = pair_distances(pm, cv, lam, pairs)
    assert np.all(d == 1)


def test_serialization_round_trip(big):
    _, pm = big
    back = map_from_bytes(map_to_bytes(pm))
    for name in ("alpha", "sigma", "vert"):
        assert np.array_equal(getattr(back, name), getattr(pm, name))
    assert (back.root, back.v_star, back.n_vertices) == (pm.root, pm.v_star, pm.n_vertices)
    with pytest.raises(InvalidMap):
        map_from_bytes(map_to_bytes(pm)[:-3])
    with pytest.raises(InvalidMap):
        map_from_bytes(b"XXXX" + map_to_bytes(pm)[4:])
    text = map_to_text(two_vertex_map())
    assert text.splitlines()[1] == "h alpha sigma vertex face"


def test_exports(big):
    _, pm = big
    p = profile(pm)
    lines = profile_csv(p).splitlines()
    assert lines[0] == "k,count" and len(lines) == len(p.counts) + 1
    rec = json.loads(summary_json(p, seed=3, stream=4))
    assert rec == {"n": pm.n_vertices, "R": p.radius, "Delta": p.delta, "seed": 3, "stream": 4}


def test_check_map_flags_disconnection():
    pm = two_vertex_map()
    broken = PlanarMap(pm.alpha, pm.sigma, pm.vert, 3, pm.root, pm.v_star)
    assert any("Euler" in p or "disconnected" in p for p in check_map(broken))
