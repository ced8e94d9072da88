"""Rooted pointed planar maps as rotation systems, and distance observables.

A map with ``E`` edges has half-edges ``0 .. 2E - 1``.  ``alpha`` pairs the
two halves of each edge, ``sigma`` is the rotation around each vertex and
faces are the cycles of ``sigma[alpha[h]]``.  ``vert[h]`` is the vertex at
which half-edge ``h`` starts.  The root half-edge starts at ``e-`` and ends
at ``e+``.
"""
from __future__ import annotations

import io
import json
import struct
from dataclasses import dataclass, field

import numba as nb
import numpy as np

from ._rng import as_generator
from .rmq import SparseTableMin


class InvalidMap(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class PlanarMap:
    alpha: np.ndarray
    sigma: np.ndarray
    vert: np.ndarray
    n_vertices: int
    root: int  # -1 for the vertex map
    v_star: int

    def __post_init__(self):
        for name in ("alpha", "sigma", "vert"):
            object.__setattr__(self, name, np.ascontiguousarray(getattr(self, name), dtype=np.int64))

    @classmethod
    def vertex_map(cls) -> "PlanarMap":
        e = np.zeros(0, dtype=np.int64)
        return cls(e, e, e, 1, -1, 0)

    @property
    def n_half_edges(self) -> int:
        return len(self.alpha)

    @property
    def n_edges(self) -> int:
        return len(self.alpha) // 2

    @property
    def is_vertex_map(self) -> bool:
        return self.n_edges == 0

    def faces(self) -> np.ndarray:
        """Face id of every half-edge (the face on the left of ``h``)."""
        cached = self.__dict__.get("_faces")
        if cached is None:
            cached = _orbits(self.alpha, self.sigma)
            object.__setattr__(self, "_faces", cached)
        return cached

    @property
    def n_faces(self) -> int:
        return 1 if self.is_vertex_map else int(self.faces().max()) + 1

    def face_degrees(self) -> np.ndarray:
        return np.bincount(self.faces())

    @property
    def e_minus(self) -> int:
        return self.v_star if self.is_vertex_map else int(self.vert[self.root])

    @property
    def e_plus(self) -> int:
        return self.v_star if self.is_vertex_map else int(self.vert[self.alpha[self.root]])

    def csr(self):
        cached = self.__dict__.get("_csr")
        if cached is None:
            order = np.argsort(self.vert, kind="stable")
            ptr = np.zeros(self.n_vertices + 1, dtype=np.int64)
            np.cumsum(np.bincount(self.vert, minlength=self.n_vertices), out=ptr[1:])
            nbr = self.vert[self.alpha[order]]
            cached = (ptr, np.ascontiguousarray(nbr))
            object.__setattr__(self, "_csr", cached)
        return cached


@nb.njit(cache=True)
def _orbits(alpha, sigma):
    n = alpha.shape[0]
    face = np.full(n, -1, dtype=np.int64)
    f = 0
    for h0 in range(n):
        if face[h0] >= 0:
            continue
        h = h0
        while face[h] < 0:
            face[h] = f
            h = sigma[alpha[h]]
        f += 1
    return face


@nb.njit(cache=True)
def _bfs(ptr, nbr, source, n):
    dist = np.full(n, -1, dtype=np.int64)
    queue = np.empty(n, dtype=np.int64)
    head = 0
    tail = 1
    queue[0] = source
    dist[source] = 0
    while head < tail:
        v = queue[head]
        head += 1
        dv = dist[v] + 1
        for k in range(ptr[v], ptr[v + 1]):
            u = nbr[k]
            if dist[u] < 0:
                dist[u] = dv
                queue[tail] = u
                tail += 1
    return dist


def bfs(m: PlanarMap, source: int) -> np.ndarray:
    """Graph distances from ``source`` (-1 for unreachable vertices)."""
    if not 0 <= source < m.n_vertices:
        raise IndexError("source is not a vertex")
    ptr, nbr = m.csr()
    return _bfs(ptr, nbr, source, m.n_vertices)


def check_map(m: PlanarMap) -> list[str]:
    """Structural invariants of a rooted pointed bipartite map."""
    problems = []
    h = np.arange(m.n_half_edges)
    if m.n_half_edges % 2:
        problems.append("odd number of half-edges")
    if m.n_half_edges and (np.any(m.alpha[m.alpha] != h) or np.any(m.alpha == h)):
        problems.append("alpha is not a fixed-point-free involution")
    if m.n_half_edges and not np.array_equal(np.sort(m.sigma), h):
        problems.append("sigma is not a permutation")
    if m.n_half_edges and np.any(m.vert[m.sigma] != m.vert):
        problems.append("sigma leaves a vertex")
    if problems:
        return problems
    if m.n_vertices - m.n_edges + m.n_faces != 2:
        problems.append(f"Euler characteristic {m.n_vertices - m.n_edges + m.n_faces} != 2")
    if m.n_half_edges and np.any(m.face_degrees() % 2):
        problems.append("face of odd degree")
    d = bfs(m, m.v_star)
    if np.any(d < 0):
        problems.append("map is disconnected")
    elif m.n_half_edges:
        if np.any(d[m.vert] == d[m.vert[m.alpha]]):
            problems.append("edge between vertices at equal distance (not bipartite)")
        if d[m.e_plus] != d[m.e_minus] + 1:
            problems.append("root edge is not positive")
    return problems


# ---------------------------------------------------------------------------
# observables


@dataclass(frozen=True)
class DistanceProfile:
    counts: np.ndarray  # counts[k] = #{v : d(v*, v) = k}
    n: int
    radius: int
    delta: int  # d(e-, v*)

    def as_dict(self) -> dict:
        return {"n": self.n, "R": self.radius, "Delta": self.delta,
                "profile": {int(k): int(c) for k, c in enumerate(self.counts) if c}}


def profile(m: PlanarMap) -> DistanceProfile:
    d = bfs(m, m.v_star)
    counts = np.bincount(d)
    return DistanceProfile(counts, m.n_vertices, int(d.max()), int(d[m.e_minus]))


def profile_csv(p: DistanceProfile) -> str:
    buf = io.StringIO()
    buf.write("k,count\n")
    for k, c in enumerate(p.counts):
        buf.write(f"{k},{c}\n")
    return buf.getvalue()


def stratified_pairs(n: int, count: int, rng, near_fraction: float = 0.5,
                     max_gap: int = 32, n_sources: int = 256) -> np.ndarray:
    """Contour index pairs: half uniform, half at separation ``<= max_gap``.

    First indices are drawn from ``n_sources`` uniform contour positions so
    that exact distances cost one BFS per source.
    """
    rng = as_generator(rng)
    sources = rng.integers(0, n, size=min(n_sources, count))
    i = sources[rng.integers(0, len(sources), size=count)]
    j = rng.integers(0, n, size=count)
    n_near = int(count * near_fraction)
    gap = rng.integers(-max_gap, max_gap + 1, size=n_near)
    j[:n_near] = np.clip(i[:n_near] + gap, 0, n - 1)
    return np.stack([i, j], axis=1)


def pair_distances(m: PlanarMap, contour_vertices: np.ndarray, contour_labels: np.ndarray,
                   pairs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Graph distance ``d(v°_i, v°_j)`` and the label bound
    ``Lambda_i + Lambda_j - 2 min_{[i ^ j, i v j]} Lambda + 2`` for each pair.

    ``contour_vertices`` gives the map vertex of each white contour index.
    BFS is run once per distinct source vertex.
    """
    pairs = np.asarray(pairs, dtype=np.int64)
    i, j = pairs[:, 0], pairs[:, 1]
    lo, hi = np.minimum(i, j), np.maximum(i, j)
    lam = np.asarray(contour_labels, dtype=np.int64)
    mins = SparseTableMin(lam).query(lo, hi)
    bound = lam[i] + lam[j] - 2 * mins + 2
    src = contour_vertices[i]
    dst = contour_vertices[j]
    dist = np.empty(len(pairs), dtype=np.int64)
    order = np.argsort(src, kind="stable")
    ptr, nbr = m.csr()
    start = 0
    while start < len(order):
        s = src[order[start]]
        stop = start
        while stop < len(order) and src[order[stop]] == s:
            stop += 1
        d = _bfs(ptr, nbr, s, m.n_vertices)
        sel = order[start:stop]
        dist[sel] = d[dst[sel]]
        start = stop
    return dist, bound


# ---------------------------------------------------------------------------
# serialization

_MAGIC = b"PMAP"
_VERSION = 1


def map_to_bytes(m: PlanarMap) -> bytes:
    head = struct.pack("<4sIQQqq", _MAGIC, _VERSION, m.n_half_edges, m.n_vertices, m.root, m.v_star)
    return head + b"".join(a.astype("<i8").tobytes() for a in (m.alpha, m.sigma, m.vert))


def map_from_bytes(data: bytes) -> PlanarMap:
    if len(data) < struct.calcsize("<4sIQQqq"):
        raise InvalidMap("not a map file")
    magic, version, nh, nv, root, vs = struct.unpack_from("<4sIQQqq", data, 0)
    if magic != _MAGIC or version != _VERSION:
        raise InvalidMap("not a map file")
    off = struct.calcsize("<4sIQQqq")
    if len(data) != off + 24 * nh:
        raise InvalidMap("truncated map file")
    arrs = [np.frombuffer(data, dtype="<i8", count=nh, offset=off + 8 * nh * k).astype(np.int64)
            for k in range(3)]
    return PlanarMap(*arrs, int(nv), int(root), int(vs))


def map_to_text(m: PlanarMap) -> str:
    buf = io.StringIO()
    buf.write(f"# map vertices={m.n_vertices} edges={m.n_edges} faces={m.n_faces} "
              f"root={m.root} v_star={m.v_star}\n")
    buf.write("h alpha sigma vertex face\n")
    faces = m.faces() if m.n_half_edges else np.zeros(0, dtype=np.int64)
    for h in range(m.n_half_edges):
        buf.write(f"{h} {m.alpha[h]} {m.sigma[h]} {m.vert[h]} {faces[h]}\n")
    return buf.getvalue()


def summary_json(p: DistanceProfile, seed: int | None = None, stream: int | None = None) -> str:
    rec = {"n": p.n, "R": p.radius, "Delta": p.delta}
    if seed is not None:
        rec["seed"] = seed
    if stream is not None:
        rec["stream"] = stream
    return json.dumps(rec, sort_keys=True)
