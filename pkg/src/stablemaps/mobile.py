"""Labeled mobiles: two-type Galton-Watson trees with bridge labels.

Trees are stored as flat arrays in depth-first (preorder) layout: vertex 0 is
the root, ``parent[v] < v``, children of a vertex appear in increasing id
order.  White vertices sit at even depth, black at odd depth.

Sampling works on the white-vertex encoding: white ``j`` (in lexicographic
order) has ``U[j]`` black children, drawn from ``mu0``, and its ``i``-th black
child has ``V[voff[j] + i]`` white children, drawn from ``mu1``.  The
Lukasiewicz step of white ``j`` is ``sum_i V[voff[j] + i] - 1``; trees of an
i.i.d. forest are the excursions of this walk above its running minimum.
"""
from __future__ import annotations

import io
import struct
from dataclasses import dataclass, field

import numba as nb
import numpy as np
from scipy.signal import fftconvolve

from ._rng import as_generator
from .bridges import sample_increments, enumerate_bridges
from .weights import WeightModel, nu_mass

DEFAULT_SIZE_BUDGET = 10**8
DEFAULT_MAX_ATTEMPTS = 10**7


class BudgetExceeded(RuntimeError):
    """A sampled tree grew past the vertex budget."""

    def __init__(self, budget: int, attempts: int = 1):
        super().__init__(f"tree exceeded the budget of {budget} vertices (attempt {attempts})")
        self.budget = budget
        self.attempts = attempts


class RetryLimitExceeded(RuntimeError):
    """Rejection sampling ran out of attempts."""

    def __init__(self, attempts: int):
        super().__init__(f"no accepted tree after {attempts} attempts")
        self.attempts = attempts


class InvalidMobile(ValueError):
    pass


# ---------------------------------------------------------------------------
# tree data structure


@dataclass(frozen=True, eq=False)
class Mobile:
    """Rooted plane tree in preorder layout, optionally with white labels.

    ``label`` has one entry per vertex; entries at black vertices are 0 and
    carry no meaning.  ``label`` is ``None`` for an unlabeled tree.
    """

    parent: np.ndarray
    label: np.ndarray | None = None
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        parent = np.ascontiguousarray(self.parent, dtype=np.int64)
        object.__setattr__(self, "parent", parent)
        if self.label is not None:
            object.__setattr__(self, "label", np.ascontiguousarray(self.label, dtype=np.int64))
        depth, ptr, idx = _structure(parent)
        object.__setattr__(self, "depth", depth)
        object.__setattr__(self, "child_ptr", ptr)
        object.__setattr__(self, "child_idx", idx)

    @property
    def size(self) -> int:
        return len(self.parent)

    @property
    def is_white(self) -> np.ndarray:
        return self.depth % 2 == 0

    @property
    def n_white(self) -> int:
        return int(np.count_nonzero(self.is_white))

    @property
    def n_black(self) -> int:
        return self.size - self.n_white

    @property
    def child_count(self) -> np.ndarray:
        return np.diff(self.child_ptr)

    def children(self, v: int) -> np.ndarray:
        return self.child_idx[self.child_ptr[v] : self.child_ptr[v + 1]]

    def with_labels(self, label) -> "Mobile":
        return Mobile(self.parent, label, dict(self.meta))

    def white_labels(self) -> np.ndarray:
        return self.label[self.is_white]

    def same_as(self, other: "Mobile") -> bool:
        if not np.array_equal(self.parent, other.parent):
            return False
        if (self.label is None) != (other.label is None):
            return False
        if self.label is None:
            return True
        w = self.is_white
        return np.array_equal(self.label[w], other.label[w])


def _structure(parent: np.ndarray):
    n = len(parent)
    if n == 0 or parent[0] != -1:
        raise InvalidMobile("vertex 0 must be the root")
    if n > 1 and np.any(parent[1:] < 0):
        raise InvalidMobile("only vertex 0 may be a root")
    if np.any(parent[1:] >= np.arange(1, n)):
        raise InvalidMobile("parents must precede children (preorder layout)")
    depth = _depths(parent)
    counts = np.bincount(parent[1:], minlength=n)
    ptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(counts, out=ptr[1:])
    order = np.argsort(parent[1:], kind="stable") + 1
    return depth, ptr, order.astype(np.int64)


@nb.njit(cache=True)
def _depths(parent):
    n = parent.shape[0]
    depth = np.zeros(n, dtype=np.int64)
    for v in range(1, n):
        if parent[v] >= 0:  # forest roots stay at depth 0
            depth[v] = depth[parent[v]] + 1
    return depth


@nb.njit(cache=True)
def _is_preorder(parent, ptr, idx):
    # a preorder numbering visits each child right after its previous
    # sibling's subtree; equivalently a DFS in child order yields 0, 1, 2, ...
    n = parent.shape[0]
    stack = np.empty(n, dtype=np.int64)
    nxt = np.zeros(n, dtype=np.int64)
    sp = 0
    stack[0] = 0
    expect = 1
    while sp >= 0:
        v = stack[sp]
        k = ptr[v] + nxt[v]
        if k < ptr[v + 1]:
            nxt[v] += 1
            c = idx[k]
            if c != expect:
                return False
            expect += 1
            sp += 1
            stack[sp] = c
        else:
            sp -= 1
    return expect == n


# ---------------------------------------------------------------------------
# building trees from the white encoding


@nb.njit(cache=True)
def _build_from_encoding(U, V, voff, n_white):
    """Preorder parent array of the forest coded by (U, V) restricted to its
    first ``n_white`` whites.

    Returns (parent, white_rank, full_children): ``white_rank`` is the
    lexicographic index of each white (-1 for blacks); ``full_children`` is
    the sampled white-child count of each black (children beyond the prefix
    are not built).  Construction stops as soon as a white beyond the prefix
    would be created, so the result is a preorder prefix of the forest.
    """
    nb_max = 0
    for j in range(n_white):
        nb_max += U[j]
    size = n_white + nb_max
    parent = np.full(size, -1, dtype=np.int64)
    depth = np.zeros(size, dtype=np.int64)
    white_rank = np.full(size, -1, dtype=np.int64)
    full_children = np.zeros(size, dtype=np.int64)
    stack = np.empty(size, dtype=np.int64)
    remaining = np.empty(size, dtype=np.int64)
    nxt = np.empty(size, dtype=np.int64)
    vid = 0
    wi = 0
    done = False
    while wi < n_white and not done:
        root = vid
        parent[root] = -1
        depth[root] = 0
        white_rank[root] = wi
        sp = 0
        stack[0] = root
        remaining[0] = U[wi]
        nxt[0] = 0
        wi += 1
        vid += 1
        while sp >= 0:
            t = stack[sp]
            if remaining[sp] == 0:
                sp -= 1
                continue
            remaining[sp] -= 1
            c = nxt[sp]
            nxt[sp] += 1
            if depth[t] % 2 == 0:
                b = vid
                vid += 1
                parent[b] = t
                depth[b] = depth[t] + 1
                k = V[voff[white_rank[t]] + c]
                full_children[b] = k
                sp += 1
                stack[sp] = b
                remaining[sp] = k
                nxt[sp] = 0
            else:
                if wi >= n_white:
                    done = True
                    break
                w = vid
                vid += 1
                parent[w] = t
                depth[w] = depth[t] + 1
                white_rank[w] = wi
                sp += 1
                stack[sp] = w
                remaining[sp] = U[wi]
                nxt[sp] = 0
                wi += 1
    return parent[:vid], white_rank[:vid], full_children[:vid]


def _offsets(U: np.ndarray) -> np.ndarray:
    voff = np.zeros(len(U) + 1, dtype=np.int64)
    np.cumsum(U, out=voff[1:])
    return voff


def _luka_steps(V: np.ndarray, voff: np.ndarray) -> np.ndarray:
    cs = np.concatenate(([0], np.cumsum(V)))
    return cs[voff[1:]] - cs[voff[:-1]] - 1


def tree_from_encoding(U, V, meta: dict | None = None) -> Mobile:
    """Unlabeled tree from its white encoding (one complete tree)."""
    U = np.ascontiguousarray(U, dtype=np.int64)
    V = np.ascontiguousarray(V, dtype=np.int64)
    voff = _offsets(U)
    if voff[-1] != len(V):
        raise InvalidMobile("encoding lengths disagree")
    steps = _luka_steps(V, voff)
    S = np.concatenate(([0], np.cumsum(steps)))
    if S[-1] != -1 or np.any(S[:-1] < 0):
        raise InvalidMobile("encoding is not a single tree")
    parent, _, _ = _build_from_encoding(U, V, voff, len(U))
    m = Mobile(parent, None, dict(meta or {}))
    object.__setattr__(m, "encoding", (U, V))
    return m


# ---------------------------------------------------------------------------
# forest walk sampling


@dataclass
class _Chunk:
    start: int  # global index of its first white
    U: np.ndarray
    V: np.ndarray
    voff: np.ndarray
    steps: np.ndarray


def _draw_chunk(model: WeightModel, rng, start: int, size: int, first_u=None) -> _Chunk:
    U = model.sample_mu0(rng, size)
    if first_u is not None:
        U[0] = first_u
    voff = _offsets(U)
    V = model.sample_mu1(rng, int(voff[-1]))
    return _Chunk(start, U, V, voff, _luka_steps(V, voff))


@nb.njit(cache=True)
def _scan(steps, U, level, length, blacks, lo, hi, budget):
    """Advance the forest walk over one chunk.

    State (level, length, blacks) describes the current tree.  Status codes:
    0 chunk exhausted, 1 tree accepted (ends at returned index), 2 budget
    exceeded by a tree that cannot be abandoned.  ``aborted`` counts trees
    finished or abandoned without acceptance.  A tree whose white count
    passes ``hi`` is abandoned and the walk restarts at the next white; this
    is a stopping-time decision, so the next tree is again independent.
    """
    aborted = 0
    for i in range(steps.shape[0]):
        level += steps[i]
        length += 1
        blacks += U[i]
        if level < 0:
            if length >= lo and length <= hi:
                return 1, i, length, 0, 0, aborted
            aborted += 1
            level = 0
            length = 0
            blacks = 0
        elif length >= hi:
            # a tree with hi whites still open will exceed the window
            aborted += 1
            level = 0
            length = 0
            blacks = 0
        elif length + blacks > budget:
            return 2, i, length, level, blacks, aborted
    return 0, -1, length, level, blacks, aborted


def _sample_encoding(model, rng, lo, hi, budget, max_attempts, chunk=None):
    """Encoding (U, V) of the first tree of an i.i.d. forest with ``lo <= #whites <= hi``.

    ``hi = None`` keeps every tree with at least ``lo`` whites (no abandoning).
    """
    rng = as_generator(rng)
    hi_eff = np.iinfo(np.int64).max if hi is None else int(hi)
    if chunk is None:
        chunk = int(min(max(4096, 2 * lo), 1 << 20))
    chunks: list[_Chunk] = []
    level = length = blacks = 0
    start = 0  # global white index where the next chunk starts
    attempts = 0
    while True:
        ch = _draw_chunk(model, rng, start, chunk)
        chunks.append(ch)
        start += chunk
        status, idx, length, level, blacks, aborted = _scan(
            ch.steps, ch.U, level, length, blacks, lo, hi_eff, budget
        )
        attempts += aborted
        if status == 1:
            end = ch.start + idx + 1
            U, V = _collect(chunks, end - length, end)
            return U, V, attempts + 1
        if status == 2:
            raise BudgetExceeded(budget, attempts + 1)
        if attempts >= max_attempts:
            raise RetryLimitExceeded(attempts)
        tree_start = start - length
        chunks = [c for c in chunks if c.start + len(c.U) > tree_start]


def _collect(chunks, g0, g1):
    Us, Vs = [], []
    for c in chunks:
        a = max(g0, c.start) - c.start
        b = min(g1, c.start + len(c.U)) - c.start
        if a < b:
            Us.append(c.U[a:b])
            Vs.append(c.V[c.voff[a] : c.voff[b]])
    return np.concatenate(Us), np.concatenate(Vs)


def sample_tree(model: WeightModel, rng, size_budget: int = DEFAULT_SIZE_BUDGET,
                root_children: int | None = None) -> Mobile:
    """Unconditioned two-type Galton-Watson tree.

    ``root_children`` forces the number of black children of the root.
    Raises :class:`BudgetExceeded` when the tree passes ``size_budget``
    vertices (whites plus blacks).
    """
    if size_budget < 1:
        raise ValueError("size_budget must be >= 1")
    rng = as_generator(rng)
    chunk = 256
    Us, Vs = [], []
    level = length = blacks = 0
    first = True
    while True:
        ch = _draw_chunk(model, rng, 0, chunk, root_children if first else None)
        first = False
        status, idx, length, level, blacks, _ = _scan(
            ch.steps, ch.U, level, length, blacks, 1, np.iinfo(np.int64).max, size_budget
        )
        if status == 1:
            Us.append(ch.U[: idx + 1])
            Vs.append(ch.V[: ch.voff[idx + 1]])
            U = np.concatenate(Us)
            V = np.concatenate(Vs)
            return tree_from_encoding(U, V, {"mode": "unconditioned"})
        if status == 2:
            raise BudgetExceeded(size_budget)
        Us.append(ch.U)
        Vs.append(ch.V)
        chunk = min(chunk * 4, 1 << 20)


def sample_white_sizes(model: WeightModel, rng, count: int, cap: int) -> np.ndarray:
    """White sizes of ``count`` i.i.d. trees; trees reaching ``cap`` are
    abandoned and reported as ``cap`` (right-censored)."""
    rng = as_generator(rng)
    out = np.empty(count, dtype=np.int64)
    filled = 0
    level = length = 0
    while filled < count:
        ch = _draw_chunk(model, rng, 0, max(4096, min(4 * count, 1 << 20)))
        filled, level, length = _sizes_kernel(ch.steps, out, filled, level, length, cap)
    return out


@nb.njit(cache=True)
def _sizes_kernel(steps, out, filled, level, length, cap):
    for i in range(steps.shape[0]):
        level += steps[i]
        length += 1
        if level < 0 or length >= cap:
            out[filled] = min(length, cap)
            filled += 1
            level = 0
            length = 0
            if filled == out.shape[0]:
                break
    return filled, level, length


def condition_size(model: WeightModel, rng, n: int, mode: str = "window", delta: float = 0.05,
                   size_budget: int = DEFAULT_SIZE_BUDGET,
                   max_attempts: int = DEFAULT_MAX_ATTEMPTS, label: bool = True) -> Mobile:
    """Mobile conditioned on its number of white vertices.

    ``mode`` is ``"at_least"`` (first tree of the forest with ``>= n`` whites),
    ``"exactly"`` (``== n``) or ``"window"`` (in ``[n, (1 + delta) n]``).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = as_generator(rng)
    if mode == "exactly":
        lo, hi = n, n
    elif mode == "window":
        if delta < 0:
            raise ValueError("delta must be >= 0")
        lo, hi = n, int(np.floor((1 + delta) * n))
    elif mode == "at_least":
        lo, hi = n, None
    else:
        raise ValueError(f"unknown conditioning mode {mode!r}")
    U, V, attempts = _sample_encoding(model, rng, lo, hi, size_budget, max_attempts)
    meta = {"mode": mode, "n": n, "attempts": attempts}
    if mode == "window":
        meta["delta"] = delta
    tree = tree_from_encoding(U, V, meta)
    return assign_labels(tree, rng) if label else tree


# ---------------------------------------------------------------------------
# labels


@nb.njit(cache=True)
def _propagate(parent, depth, ptr, idx, full_children, incr, label):
    # bridge of black b occupies incr[boff : boff + full_children[b] + 1], in
    # preorder of blacks; child j (0-based) gets parent label + Y_{j+1}
    boff = 0
    for v in range(parent.shape[0]):
        if depth[v] % 2 == 1:
            base = label[parent[v]]
            y = 0
            for j in range(ptr[v + 1] - ptr[v]):
                y += incr[boff + j]
                label[idx[ptr[v] + j]] = base + y
            boff += full_children[v] + 1


def _label_tree(tree: Mobile, rng, full_children=None) -> np.ndarray:
    black = ~tree.is_white
    k = tree.child_count if full_children is None else full_children
    lengths = k[black] + 1
    incr = sample_increments(lengths, rng)
    label = np.zeros(tree.size, dtype=np.int64)
    _propagate(tree.parent, tree.depth, tree.child_ptr, tree.child_idx,
               np.ascontiguousarray(k, dtype=np.int64), incr, label)
    return label


def assign_labels(tree: Mobile, rng) -> Mobile:
    """Attach labels: root 0, and around each black vertex with ``k`` children
    the labels read from the parent form a uniform bridge of length ``k + 1``."""
    rng = as_generator(rng)
    return tree.with_labels(_label_tree(tree, rng))


@nb.njit(cache=True)
def _check_labels(parent, depth, ptr, idx, label):
    bad = 0
    for v in range(parent.shape[0]):
        if depth[v] % 2 == 1:
            prev = label[parent[v]]
            for j in range(ptr[v], ptr[v + 1]):
                cur = label[idx[j]]
                if cur < prev - 1:
                    bad += 1
                prev = cur
            if label[parent[v]] < prev - 1:
                bad += 1
    return bad


def validate_mobile(m: Mobile) -> list[str]:
    """List of violated mobile conditions (empty when valid)."""
    problems = []
    if not _is_preorder(m.parent, m.child_ptr, m.child_idx):
        problems.append("vertices are not in preorder")
    if m.label is None:
        problems.append("mobile is unlabeled")
        return problems
    if m.label[0] != 0:
        problems.append("root label is not 0")
    bad = _check_labels(m.parent, m.depth, m.child_ptr, m.child_idx, m.label)
    if bad:
        problems.append(f"{bad} label steps below -1 around black vertices")
    return problems


# ---------------------------------------------------------------------------
# coding paths


@dataclass(frozen=True)
class CodingPaths:
    S: np.ndarray  # Lukasiewicz path, length n_white + 1
    H: np.ndarray  # height (half generations) of whites in lexicographic order
    L: np.ndarray  # labels of whites in lexicographic order
    C: np.ndarray  # white contour heights, length #T
    Lam: np.ndarray  # white contour labels


@nb.njit(cache=True)
def _full_contour(ptr, idx, n):
    out = np.empty(2 * n - 1, dtype=np.int64)
    stack = np.empty(n, dtype=np.int64)
    nxt = np.zeros(n, dtype=np.int64)
    sp = 0
    stack[0] = 0
    out[0] = 0
    pos = 1
    while sp >= 0:
        v = stack[sp]
        k = ptr[v] + nxt[v]
        if k < ptr[v + 1]:
            nxt[v] += 1
            c = idx[k]
            sp += 1
            stack[sp] = c
            out[pos] = c
            pos += 1
        else:
            sp -= 1
            if sp >= 0:
                out[pos] = stack[sp]
                pos += 1
    return out


def full_contour(m: Mobile) -> np.ndarray:
    """Contour sequence ``v_0 .. v_{2(#T - 1)}`` (vertex ids)."""
    return _full_contour(m.child_ptr, m.child_idx, m.size)


def white_contour(m: Mobile) -> np.ndarray:
    """White contour ``v°_i = v_{2i}``, ``i = 0..#T - 1``."""
    return full_contour(m)[::2]


def lukasiewicz(m: Mobile) -> np.ndarray:
    whites = np.flatnonzero(m.is_white)
    cc = m.child_count
    # grandchildren of a white = sum of child counts of its black children
    gc = np.zeros(m.size, dtype=np.int64)
    black = np.flatnonzero(~m.is_white)
    np.add.at(gc, m.parent[black], cc[black])
    steps = gc[whites] - 1
    return np.concatenate(([0], np.cumsum(steps)))


@nb.njit(cache=True)
def height_from_lukasiewicz(S):
    """``H_n = #{k < n : S_k = min_{k <= j <= n} S_j}`` for ``n < len(S) - 1``."""
    n = S.shape[0] - 1
    H = np.empty(n, dtype=np.int64)
    stack = np.empty(n + 1, dtype=np.int64)
    sp = 0
    for i in range(n):
        while sp > 0 and S[stack[sp - 1]] > S[i]:
            sp -= 1
        H[i] = sp
        stack[sp] = i
        sp += 1
    return H


def coding_paths(m: Mobile, check: bool = True) -> CodingPaths:
    """All five coding sequences; ``check`` recomputes ``H`` from ``S``."""
    whites = np.flatnonzero(m.is_white)
    S = lukasiewicz(m)
    H = m.depth[whites] // 2
    lab = m.label if m.label is not None else np.zeros(m.size, dtype=np.int64)
    L = lab[whites]
    wc = white_contour(m)
    C = m.depth[wc] // 2
    Lam = lab[wc]
    if check and not np.array_equal(H, height_from_lukasiewicz(S)):
        raise AssertionError("height and Lukasiewicz path disagree")
    return CodingPaths(S, H, L, C, Lam)


def ancestor_ranks(S: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Ancestors ``k`` of white ``n`` (lexicographic indices) and, for each,
    ``S_{k+1} - min_{k+1 <= j <= n} S_j + 1``, the rank of the child of
    ``u_k`` on the ancestral line of ``u_n``."""
    S = np.asarray(S)
    sub = S[: n + 1]
    suffix_min = np.minimum.accumulate(sub[::-1])[::-1]
    anc = np.flatnonzero(sub[:n] == suffix_min[:n])
    ranks = S[anc + 1] - suffix_min[anc + 1] + 1
    return anc, ranks


def mobile_from_contour(depths: np.ndarray, white_labels: np.ndarray | None = None) -> Mobile:
    """Rebuild a mobile from its full contour depth sequence and white contour labels.

    The white contour pair (C, Lambda) does not determine the tree in
    general (a black vertex with two leaf whites and a white with a childless
    black give the same C), so the full contour is used for the shape.
    """
    depths = np.asarray(depths, dtype=np.int64)
    if depths[0] != 0 or np.any(np.abs(np.diff(depths)) != 1):
        raise InvalidMobile("not a contour sequence")
    n = (len(depths) + 1) // 2
    parent = np.full(n, -1, dtype=np.int64)
    ids = np.empty(len(depths), dtype=np.int64)
    stack = [0]
    ids[0] = 0
    nxt = 1
    for i in range(1, len(depths)):
        if depths[i] > depths[i - 1]:
            parent[nxt] = stack[-1]
            stack.append(nxt)
            nxt += 1
        else:
            stack.pop()
        ids[i] = stack[-1]
    m = Mobile(parent)
    if white_labels is None:
        return m
    label = np.zeros(n, dtype=np.int64)
    label[ids[::2]] = white_labels
    return m.with_labels(label)


# ---------------------------------------------------------------------------
# forests (prefix of an i.i.d. sequence of mobiles)


@dataclass(frozen=True)
class ForestPrefix:
    """First ``n`` whites of an i.i.d. labeled forest, in lexicographic order."""

    S: np.ndarray  # Lukasiewicz path of the forest, length n + 1
    H: np.ndarray
    L: np.ndarray
    contour_index: np.ndarray  # R_j: first white-contour index of white j
    black_children: np.ndarray  # B(j), number of black children of white j
    C: np.ndarray  # concatenated white contour heights up to white n - 1
    Lam: np.ndarray


@nb.njit(cache=True)
def _forest_contour(parent, depth, ptr, idx, white_rank, n_white):
    """White contour of a preorder forest prefix, up to the first visit of the
    last white; returns (vertex ids, first index per white rank)."""
    nv = parent.shape[0]
    out = np.empty(2 * nv + 2, dtype=np.int64)
    first = np.full(n_white, -1, dtype=np.int64)
    stack = np.empty(nv, dtype=np.int64)
    nxt = np.zeros(nv, dtype=np.int64)
    pos = 0
    for r in range(nv):
        if parent[r] != -1:
            continue
        sp = 0
        stack[0] = r
        out[pos] = r
        first[white_rank[r]] = pos
        pos += 1
        if white_rank[r] == n_white - 1:
            return out[:pos], first
        while sp >= 0:
            v = stack[sp]
            k = ptr[v] + nxt[v]
            if k < ptr[v + 1]:
                nxt[v] += 1
                c = idx[k]
                sp += 1
                stack[sp] = c
                if depth[c] % 2 == 0:
                    out[pos] = c
                    first[white_rank[c]] = pos
                    pos += 1
                    if white_rank[c] == n_white - 1:
                        return out[:pos], first
            else:
                sp -= 1
                if sp >= 0 and depth[stack[sp]] % 2 == 0:
                    out[pos] = stack[sp]
                    pos += 1
    return out[:pos], first


def sample_forest_prefix(model: WeightModel, rng, n: int) -> ForestPrefix:
    """Coding data of the first ``n`` whites of an i.i.d. forest of mobiles.

    Only whites lexicographically before ``u_n`` are built, so the cost is
    linear in ``n`` regardless of how large the last tree is.
    """
    rng = as_generator(rng)
    ch = _draw_chunk(model, rng, 0, n + 1)
    U, V, voff = ch.U, ch.V, ch.voff
    parent, white_rank, full_children = _build_from_encoding(U, V, voff, n + 1)
    depth = _depths(parent)
    counts = np.bincount(parent[parent >= 0], minlength=len(parent))
    ptr = np.zeros(len(parent) + 1, dtype=np.int64)
    np.cumsum(counts, out=ptr[1:])
    idx = (np.argsort(np.where(parent >= 0, parent, -1), kind="stable")[np.count_nonzero(parent < 0):]).astype(np.int64)
    # labels: each black draws a bridge of its full length
    black = depth % 2 == 1
    incr = sample_increments(full_children[black] + 1, rng)
    label = np.zeros(len(parent), dtype=np.int64)
    _propagate(parent, depth, ptr, idx, full_children, incr, label)
    whites = np.flatnonzero(white_rank >= 0)
    order = whites[np.argsort(white_rank[whites])]
    S = np.concatenate(([0], np.cumsum(ch.steps[:n])))
    wc, first = _forest_contour(parent, depth, ptr, idx, white_rank, n + 1)
    return ForestPrefix(
        S=S,
        H=depth[order][:n] // 2,
        L=label[order][:n],
        contour_index=first[:n],
        black_children=U[:n].copy(),
        C=depth[wc][:-1] // 2,
        Lam=label[wc][:-1],
    )


def contour_index_from_encoding(U: np.ndarray, V: np.ndarray, n: int) -> int:
    """First white-contour index ``R_n`` of white ``u_n`` of a forest, from counts.

    ``R_n = sum_{j<n} (B_j + 1) - sum_{j ancestor of u_n} (B_j - b_j)`` where
    ``B_j`` is the number of black children of ``u_j`` and ``b_j`` the index
    of the black child on the line to ``u_n``; non-ancestors are visited
    ``B_j + 1`` times before ``u_n``, ancestors ``b_j + 1`` times.  The
    grandchild rank comes from the Lukasiewicz path.
    """
    U = np.asarray(U, dtype=np.int64)
    V = np.asarray(V, dtype=np.int64)
    voff = _offsets(U)
    S = np.concatenate(([0], np.cumsum(_luka_steps(V, voff))))
    anc, ranks = ancestor_ranks(S, n)
    total = int(np.sum(U[:n] + 1))
    for j, r in zip(anc, ranks):
        vj = V[voff[j] : voff[j + 1]]
        b = int(np.searchsorted(np.cumsum(vj), r, side="left"))
        total -= int(U[j]) - b
    return total


# ---------------------------------------------------------------------------
# exact first-passage probabilities


@dataclass(frozen=True)
class KempermanTable:
    dp: np.ndarray  # dp[j, n] = P_j(V = n)
    identity: np.ndarray  # (j + 1)/n * P_0(S_n = -j - 1)
    max_discrepancy: float
    truncation_bound: float


def walk_distribution(model: WeightModel, n_max: int) -> np.ndarray:
    """``P_0(S_m = x)`` for ``m <= n_max`` and ``-n_max <= x <= n_max``, at
    row ``m``, column ``x + n_max``.

    Jumps above ``n_max`` are dropped; they cannot be followed by a return
    below zero within ``n_max`` steps, so all negative values are exact.
    """
    nu, _ = nu_mass(model, n_max)
    width = 2 * n_max + 1
    out = np.zeros((n_max + 1, width))
    out[0, n_max] = 1.0
    for m in range(1, n_max + 1):
        conv = np.convolve(out[m - 1], nu)  # nu indexed from -1
        out[m] = conv[1 : width + 1]
    return out


def kemperman_check(model: WeightModel, n_max: int = 40, j_max: int = 20,
                    threshold: float = 1e-10) -> KempermanTable:
    """First-passage probabilities ``P_j(V = n)`` computed by a direct DP and
    by Kemperman's identity ``(j + 1)/n P_0(S_n = -j - 1)``.

    ``V`` is the hitting time of ``-1`` for the walk with jump law ``nu``.
    From height ``h`` at least ``h + 1`` steps are needed, and a jump of
    size ``k`` needs ``k`` further down-steps, so truncating ``nu`` at
    ``n_max`` changes no probability with ``n <= n_max``: the truncation
    bound is zero and the comparison is exact up to rounding.
    """
    if n_max > 60:
        raise ValueError("the exact DP is limited to n_max <= 60")
    nu, _ = nu_mass(model, n_max)  # nu[k + 1] = nu(k), k = -1..n_max
    H = n_max + 1
    # f[h, m] = P_h(V = m) for h in 0..H-1
    f = np.zeros((H, n_max + 1))
    f[0, 1] = nu[0]
    for m in range(2, n_max + 1):
        for h in range(0, min(m, H)):
            ks = np.arange(-1, n_max + 1)
            tgt = h + ks
            ok = (tgt >= 0) & (tgt < H)
            f[h, m] = np.dot(nu[ok], f[tgt[ok], m - 1])
    dist = walk_distribution(model, n_max)
    ident = np.zeros_like(f)
    for m in range(1, n_max + 1):
        for j in range(0, min(j_max, H - 1) + 1):
            x = -j - 1
            if x >= -m:
                ident[j, m] = (j + 1) / m * dist[m, x + n_max]
    rows = slice(0, j_max + 1)
    disc = float(np.max(np.abs(f[rows, 1:] - ident[rows, 1:])))
    table = KempermanTable(f[rows], ident[rows], disc, 0.0)
    if disc > threshold:
        raise ArithmeticError(f"first-passage tables disagree by {disc:.3e}")
    return table


def exact_size_law(model: WeightModel, n_max: int) -> np.ndarray:
    """``P(#T° = m)`` for ``m = 0..n_max`` via ``(1/m) P_0(S_m = -1)``."""
    nu, _ = nu_mass(model, n_max)
    out = np.zeros(n_max + 1)
    cur = np.array([1.0])  # P_0(S_m = x) for x = -m .. n_max
    for m in range(1, n_max + 1):
        cur = fftconvolve(cur, nu)[: m + n_max + 1]
        np.maximum(cur, 0.0, out=cur)
        out[m] = cur[m - 1] / m  # x = -1 sits at index m - 1
    return out


# ---------------------------------------------------------------------------
# exhaustive enumeration of small mobiles


def enumerate_trees(max_white: int, max_children: int) -> list[Mobile]:
    """All alternating plane trees with at most ``max_white`` whites and every
    child count at most ``max_children``."""
    results = []

    def rec(U, V, level, whites):
        if level < 0:
            results.append((U, V))
            return
        for u in range(max_children + 1):
            for vs in _tuples(u, max_children):
                new_level = level + sum(vs) - 1
                # whites still owed by the walk must fit in the budget
                if whites + 1 + max(new_level + 1, 0) > max_white:
                    continue
                rec(U + [u], V + list(vs), new_level, whites + 1)

    rec([], [], 0, 0)
    return [tree_from_encoding(np.array(U, dtype=np.int64), np.array(V, dtype=np.int64))
            for U, V in results]


def _tuples(length, max_value):
    if length == 0:
        yield ()
        return
    for head in range(max_value + 1):
        for tail in _tuples(length - 1, max_value):
            yield (head,) + tail


def enumerate_mobiles(max_white: int, max_children: int):
    """Every labeled mobile on the trees of :func:`enumerate_trees`."""
    for tree in enumerate_trees(max_white, max_children):
        black = np.flatnonzero(~tree.is_white)
        options = [enumerate_bridges(int(tree.child_count[b]) + 1) for b in black]
        for combo in _product(options):
            incr = np.concatenate(combo) if combo else np.zeros(0, dtype=np.int64)
            label = np.zeros(tree.size, dtype=np.int64)
            _propagate(tree.parent, tree.depth, tree.child_ptr, tree.child_idx,
                       tree.child_count.astype(np.int64), incr.astype(np.int64), label)
            yield tree.with_labels(label)


def _product(options):
    if not options:
        yield []
        return
    for head in options[0]:
        for rest in _product(options[1:]):
            yield [head] + rest


# ---------------------------------------------------------------------------
# serialization

_MAGIC = b"MOBL"
_VERSION = 1


def mobile_to_text(m: Mobile) -> str:
    buf = io.StringIO()
    buf.write(f"# mobile vertices={m.size} white={m.n_white} black={m.n_black}\n")
    white = m.is_white
    lab = m.label if m.label is not None else np.zeros(m.size, dtype=np.int64)
    for v in range(m.size):
        c = "w" if white[v] else "b"
        l = str(lab[v]) if white[v] and m.label is not None else "-"
        buf.write(f"{v} {m.parent[v]} {c} {l}\n")
    return buf.getvalue()


def mobile_from_text(text: str) -> Mobile:
    parent, label = [], []
    labeled = True
    for line in text.splitlines():
        if not line.strip() or line.startswith("#"):
            continue
        vid, par, color, lab = line.split()
        if int(vid) != len(parent):
            raise InvalidMobile("vertex ids must be consecutive")
        parent.append(int(par))
        if color == "w":
            if lab == "-":
                labeled = False
                label.append(0)
            else:
                label.append(int(lab))
        else:
            label.append(0)
    m = Mobile(np.array(parent, dtype=np.int64))
    return m.with_labels(np.array(label, dtype=np.int64)) if labeled else m


def mobile_to_bytes(m: Mobile) -> bytes:
    flags = 1 if m.label is not None else 0
    head = struct.pack("<4sIIQ", _MAGIC, _VERSION, flags, m.size)
    body = m.parent.astype("<i8").tobytes()
    if m.label is not None:
        body += m.label.astype("<i8").tobytes()
    return head + body


def mobile_from_bytes(data: bytes) -> Mobile:
    if len(data) < struct.calcsize("<4sIIQ"):
        raise InvalidMobile("not a mobile file")
    magic, version, flags, n = struct.unpack_from("<4sIIQ", data, 0)
    if magic != _MAGIC or version != _VERSION:
        raise InvalidMobile("not a mobile file")
    off = struct.calcsize("<4sIIQ")
    expect = off + 8 * n * (2 if flags & 1 else 1)
    if len(data) != expect:
        raise InvalidMobile("truncated mobile file")
    parent = np.frombuffer(data, dtype="<i8", count=n, offset=off).astype(np.int64)
    if flags & 1:
        label = np.frombuffer(data, dtype="<i8", count=n, offset=off + 8 * n).astype(np.int64)
        return Mobile(parent, label)
    return Mobile(parent)


def coding_paths_csv(paths: CodingPaths) -> str:
    cols = [paths.S, paths.H, paths.L, paths.C, paths.Lam]
    n = max(len(c) for c in cols)
    buf = io.StringIO()
    buf.write("i,S,H,L,C,Lam\n")
    for i in range(n):
        row = [str(c[i]) if i < len(c) else "" for c in cols]
        buf.write(f"{i}," + ",".join(row) + "\n")
    return buf.getvalue()
