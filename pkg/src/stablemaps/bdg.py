"""Bouttier-Di Francesco-Guitter bijection between mobiles and pointed maps.

Forward direction: corner ``i`` of the white contour (``0 <= i < n`` with
``n = #T - 1``) is joined to its successor, the first later corner (in the
periodic contour) whose label is one less, or to the extra vertex ``v*``
when no such corner exists.  Edges are drawn as non-crossing arcs on the
outside of the tree, which fixes the rotation at every vertex:

* at a white vertex, half-edges are grouped by corner in contour order;
  within a corner, arcs arriving from earlier corners come first, shortest
  (innermost) arc first, and the arc leaving the corner comes last;
* at ``v*`` the arcs are ordered by decreasing corner index.

Planarity is certified afterwards by Euler's formula on the face orbits.

Backward direction: distances from ``v*`` recover the labels; every edge
has one half-edge going down (towards ``v*``), and walking a face from one
down-going half-edge to the next reproduces one step of the white contour.
"""
from __future__ import annotations

from dataclasses import dataclass

import numba as nb
import numpy as np

from .mobile import InvalidMobile, Mobile, full_contour, validate_mobile, white_contour
from .pmap import InvalidMap, PlanarMap, bfs, check_map


class NotBipartite(InvalidMap):
    pass


class NegativeOrientation(InvalidMap):
    pass


INF = np.iinfo(np.int64).max


@dataclass(frozen=True)
class CornerSequence:
    vertex: np.ndarray  # map vertex of corner i (white rank)
    label: np.ndarray
    successor: np.ndarray  # phi(i) in the periodic contour, INF for v*


@nb.njit(cache=True)
def _successors(labels):
    # phi(i) = first j > i (periodic) with label(j) = label(i) - 1; one
    # backward sweep over two periods with the next position of each label
    n = labels.shape[0]
    lo = labels.min()
    hi = labels.max()
    nxt = np.full(hi - lo + 2, INF, dtype=np.int64)
    phi = np.empty(n, dtype=np.int64)
    for t in range(2 * n - 1, -1, -1):
        lab = labels[t % n] - lo
        if t < n:
            phi[t] = nxt[lab - 1] if lab >= 1 else INF
        nxt[lab] = t
    return phi


def successors_naive(labels: np.ndarray) -> np.ndarray:
    n = len(labels)
    phi = np.full(n, INF, dtype=np.int64)
    for i in range(n):
        for j in range(i + 1, i + n):
            if labels[j % n] == labels[i] - 1:
                phi[i] = j
                break
    return phi


def corner_sequence(m: Mobile) -> CornerSequence:
    wc = white_contour(m)[:-1]
    rank = np.cumsum(m.is_white) - 1
    lab = m.label[wc]
    return CornerSequence(rank[wc], lab, _successors(lab))


def contour_map_vertices(m: Mobile) -> np.ndarray:
    """Map vertex id of every white contour index ``0 .. #T - 1``."""
    rank = np.cumsum(m.is_white) - 1
    return rank[white_contour(m)]


def mobile_to_map(m: Mobile, validate: bool = True) -> PlanarMap:
    """Rooted pointed bipartite map of a labeled mobile."""
    if m.label is None:
        raise InvalidMobile("mobile is unlabeled")
    if validate:
        problems = validate_mobile(m)
        if problems:
            raise InvalidMobile("; ".join(problems))
    if m.size == 1:
        return PlanarMap.vertex_map()
    cs = corner_sequence(m)
    n = len(cs.label)
    n_white = m.n_white
    v_star = n_white
    phi = cs.successor
    to_star = phi == INF
    i = np.arange(n)
    h = np.arange(2 * n)
    vert = np.empty(2 * n, dtype=np.int64)
    corner = np.empty(2 * n, dtype=np.int64)
    within = np.empty(2 * n, dtype=np.int64)
    # outgoing half-edge 2i sits at corner i, after every arriving arc
    vert[0::2] = cs.vertex
    corner[0::2] = i
    within[0::2] = 2 * n + 1
    # arriving half-edge 2i + 1 sits at corner phi(i) mod n, inner arcs first
    tgt = np.where(to_star, 0, phi % n)
    vert[1::2] = np.where(to_star, v_star, cs.vertex[tgt])
    corner[1::2] = np.where(to_star, -i, tgt)
    within[1::2] = np.where(to_star, 0, phi - i)
    order = np.lexsort((within, corner, vert))
    sigma = np.empty(2 * n, dtype=np.int64)
    sv = vert[order]
    nxt = np.roll(order, -1)
    # close each vertex's cycle: last half-edge of a vertex points to its first
    starts = np.flatnonzero(np.r_[True, sv[1:] != sv[:-1]])
    ends = np.r_[starts[1:], len(order)] - 1
    nxt[ends] = order[starts]
    sigma[order] = nxt
    alpha = h ^ 1
    return PlanarMap(alpha, sigma, vert, n_white + 1, 1, v_star)


def map_to_mobile(pm: PlanarMap) -> Mobile:
    """Inverse of :func:`mobile_to_map`.

    Raises :class:`NotBipartite` when an edge joins two vertices at the same
    distance from ``v*`` and :class:`NegativeOrientation` when the root edge
    points towards ``v*``.
    """
    if pm.is_vertex_map:
        return Mobile(np.array([-1]), np.array([0]))
    d = bfs(pm, pm.v_star)
    if np.any(d < 0):
        raise InvalidMap("map is disconnected")
    dh = d[pm.vert]
    if np.any(dh == dh[pm.alpha]):
        raise NotBipartite("edge between vertices at equal distance from v*")
    if d[pm.e_plus] != d[pm.e_minus] + 1:
        raise NegativeOrientation("root edge is not oriented away from v*")
    down = dh > dh[pm.alpha]
    faces = pm.faces()
    sigma_inv = np.empty_like(pm.sigma)
    sigma_inv[pm.sigma] = np.arange(pm.n_half_edges)
    corners = _corner_walk(pm.alpha, pm.sigma, sigma_inv, down, int(pm.alpha[pm.root]), pm.n_edges)
    if corners[-1] < 0:
        raise InvalidMap("face walk did not close up; rotation system is inconsistent")
    # contour: white vertex of corner i, then the face (black) after it,
    # which is the face bordering the far half of the corner's edge
    seq = np.empty(2 * len(corners) + 1, dtype=np.int64)
    seq[0:-1:2] = pm.vert[corners]
    seq[1::2] = pm.n_vertices + faces[pm.alpha[corners]]
    seq[-1] = seq[0]
    parent, ids = _tree_from_visits(seq)
    label = np.zeros(len(parent), dtype=np.int64)
    is_vertex = ids < pm.n_vertices
    label[is_vertex] = d[ids[is_vertex]] - d[pm.e_plus]
    return Mobile(parent, label)


@nb.njit(cache=True)
def _corner_walk(alpha, sigma, sigma_inv, down, start, n):
    # Contour-direction walk around a face: g -> sigma^-1(alpha(g)).  From the
    # down-going half-edge of corner i, follow up-going half-edges as far as
    # they go; the last one arrives at corner i + 1.  With none, corner i + 1
    # is the sector where edge i lands.  Either way the sector's down-going
    # half-edge is found by rotating forward past the arrivals.
    out = np.full(n, -1, dtype=np.int64)
    h = start
    for k in range(n):
        out[k] = h
        y = h
        g = sigma_inv[alpha[y]]
        steps = 0
        while not down[g]:
            y = g
            g = sigma_inv[alpha[y]]
            steps += 1
            if steps > alpha.shape[0]:
                out[n - 1] = -1
                return out
        t = alpha[y]
        steps = 0
        while not down[t]:
            t = sigma[t]
            steps += 1
            if steps > alpha.shape[0]:
                out[n - 1] = -1
                return out
        h = t
    if h != start:
        out[n - 1] = -1
    return out


@nb.njit(cache=True)
def _tree_from_visits(seq):
    # seq lists the vertex visited at each contour step; a step back to the
    # grandparent-of-stack closes the current vertex, anything else opens a
    # new child
    m = seq.shape[0]
    size = (m + 1) // 2
    parent = np.full(size, -1, dtype=np.int64)
    ids = np.empty(size, dtype=np.int64)
    stack = np.empty(size, dtype=np.int64)
    sp = 0
    stack[0] = 0
    ids[0] = seq[0]
    nv = 1
    for t in range(1, m):
        x = seq[t]
        if sp >= 1 and ids[stack[sp - 1]] == x:
            sp -= 1
        else:
            parent[nv] = stack[sp]
            ids[nv] = x
            sp += 1
            stack[sp] = nv
            nv += 1
    return parent, ids


# ---------------------------------------------------------------------------
# checks


@dataclass
class BijectionReport:
    violations: list

    @property
    def ok(self) -> bool:
        return not self.violations


def check_bijection_invariants(m: Mobile, pm: PlanarMap) -> BijectionReport:
    """Face/black pairing and degrees, distance identity, counts, Euler, positivity."""
    v = []
    if m.size == 1:
        if not pm.is_vertex_map:
            v.append("single-vertex mobile must give the vertex map")
        return BijectionReport(v)
    v.extend(check_map(pm))
    nw, nbk = m.n_white, m.n_black
    if pm.n_vertices != nw + 1:
        v.append(f"#V = {pm.n_vertices}, expected {nw + 1}")
    if pm.n_faces != nbk:
        v.append(f"#F = {pm.n_faces}, expected {nbk}")
    black = ~m.is_white
    if pm.n_edges != int(np.sum(m.child_count[black] + 1)):
        v.append("#E differs from the sum of (k_v + 1) over black vertices")
    # the arriving half of edge i borders the face of the black vertex
    # visited between corners i and i + 1
    blk = _full_black(m)
    fac = pm.faces()[1::2]
    pairs = np.unique(np.stack([blk, fac], axis=1), axis=0)
    if len(pairs) != nbk or len(np.unique(pairs[:, 0])) != nbk or len(np.unique(pairs[:, 1])) != nbk:
        v.append("faces and black vertices are not in bijection")
    else:
        deg = pm.face_degrees()[pairs[:, 1]]
        want = 2 * (m.child_count[pairs[:, 0]] + 1)
        if np.any(deg != want):
            k = int(np.flatnonzero(deg != want)[0])
            v.append(f"face of black {pairs[k, 0]} has degree {deg[k]}, expected {want[k]}")
    d = bfs(pm, pm.v_star)
    wl = m.label[m.is_white]
    if not np.array_equal(d[:nw], wl - wl.min() + 1):
        v.append("distance identity d(v*, v) = l(v) - min l + 1 fails")
    return BijectionReport(v)


def _full_black(m: Mobile) -> np.ndarray:
    # black vertex v_{2i+1} between white corners i and i + 1
    return full_contour(m)[1::2]


def delta_identity(m: Mobile, pm: PlanarMap) -> tuple[int, int]:
    """``(d(e-, v*), -min label)``; the two agree for every mobile.

    The root edge goes from the corner successor of the root (label -1) to
    the root, so ``d(e-, v*) = -1 - min l + 1``; when that successor is
    ``v*`` itself, ``min l = 0`` and both sides vanish.
    """
    if pm.is_vertex_map:
        return 0, 0
    d = bfs(pm, pm.v_star)
    return int(d[pm.e_minus]), int(-m.label[m.is_white].min())
