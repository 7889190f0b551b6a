"""Quotient-graph bisection and vertex separators lifted from it.

The bisection core works on any weighted CSR graph. Quotient graphs and plain
vertex graphs (unit weights) go through the same code, so with one vertex
per patch both routes give identical labelings.
"""
from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import breadth_first_order, connected_components

from .graph import AdjacencyGraph, QuotientGraph, SubgraphView, as_assignment

DEFAULT_BALANCE_TOL = 1.2
FM_PASSES = 10
FM_STALL_LIMIT = 64
SEP_STALL_LIMIT = 32
LEFT, RIGHT, SEP = 0, 1, 2


def _ratio(a, b):
    lo, hi = (a, b) if a < b else (b, a)
    if lo <= 0:
        return 0.0 if hi <= 0 else float("inf")
    return hi / lo


def imbalance(w0: float, w1: float) -> float:
    """Heavier over lighter side weight; ``inf`` if one side is empty."""
    lo, hi = min(w0, w1), max(w0, w1)
    if lo <= 0:
        return 0.0 if hi <= 0 else float("inf")
    return hi / lo


@dataclass
class Bipartition:
    """Side label (LEFT/RIGHT) for every alive patch, ids ascending."""

    patches: np.ndarray
    labels: np.ndarray
    cut_weight: int
    side_weights: tuple[int, int]
    patch_count: int

    def full_labels(self) -> np.ndarray:
        """Label per patch id; -1 for patches not in the bipartition."""
        out = np.full(self.patch_count, -1, dtype=np.int64)
        out[self.patches] = self.labels
        return out

    def side(self, which: int) -> np.ndarray:
        return self.patches[self.labels == which]


@dataclass
class SeparatorResult:
    s: np.ndarray
    g_left: np.ndarray
    g_right: np.ndarray


def _rng(seed):
    if isinstance(seed, (tuple, list)):
        return np.random.default_rng(list(seed))
    return np.random.default_rng(seed)


def _grow(adj: sp.csr_matrix, vwgt: np.ndarray, rng) -> np.ndarray:
    """Greedy graph growing from a pseudo-peripheral node of the heaviest node's component."""
    k = len(vwgt)
    heavy = np.flatnonzero(vwgt == vwgt.max())
    start = int(heavy[rng.integers(len(heavy))])
    root = start
    for _ in range(2):
        order = breadth_first_order(adj, root, directed=False, return_predecessors=False)
        root = int(order[-1])
    visited = np.zeros(k, dtype=bool)
    chunks = []
    nxt = root
    while True:
        order = breadth_first_order(adj, nxt, directed=False, return_predecessors=False)
        visited[order] = True
        chunks.append(order)
        rest = np.flatnonzero(~visited)
        if rest.size == 0:
            break
        nxt = int(rest[0])
    order = np.concatenate(chunks)
    cum = np.cumsum(vwgt[order])
    half = cum[-1] / 2.0
    cut = int(np.searchsorted(cum, half))  # first prefix reaching half
    before = cum[cut - 1] if cut > 0 else 0
    if cum[cut] - half < half - before:
        cut += 1
    cut = min(max(cut, 1), k - 1)
    labels = np.full(k, RIGHT, dtype=np.int64)
    labels[order[:cut]] = LEFT
    return labels


def _fm_refine(adj: sp.csr_matrix, vwgt: np.ndarray, labels: np.ndarray, balance_tol: float,
               passes: int = FM_PASSES):
    """Boundary Fiduccia-Mattheyses passes minimizing the weighted edge cut."""
    k = len(vwgt)
    indptr, indices, data = adj.indptr.tolist(), adj.indices.tolist(), adj.data.tolist()
    src = np.repeat(np.arange(k), np.diff(adj.indptr))
    total = np.bincount(src, weights=adj.data, minlength=k)
    lab = labels.tolist()
    w = vwgt.tolist()
    W = [int(vwgt[labels == LEFT].sum()), int(vwgt[labels == RIGHT].sum())]

    def gain_of(v):
        s = lab[v]
        g = 0
        for p in range(indptr[v], indptr[v + 1]):
            g += data[p] if lab[indices[p]] != s else -data[p]
        return g

    def score(c, wts):
        r = imbalance(*wts)
        return (0 if r <= balance_tol else 1, c, r)

    cut = None
    for _ in range(passes):
        lab_arr = np.array(lab)
        ext = np.bincount(src, weights=adj.data * (lab_arr[src] != lab_arr[adj.indices]), minlength=k)
        if cut is None:
            cut = int(round(ext.sum())) // 2
        bnd = np.flatnonzero(ext > 0)
        gvals = (2 * ext[bnd] - total[bnd]).round().astype(np.int64).tolist()
        gains = dict(zip(bnd.tolist(), gvals))
        heap = [(-g, v) for v, g in gains.items()]
        heapq.heapify(heap)
        locked = set()
        moves = []
        best = score(cut, W)
        best_len = 0
        start = best
        stall = 0
        while heap and stall < FM_STALL_LIMIT:
            ng, v = heapq.heappop(heap)
            if v in locked or gains.get(v) != -ng:
                continue
            a = lab[v]
            b = 1 - a
            nw = W.copy()
            nw[a] -= w[v]
            nw[b] += w[v]
            r_new = imbalance(*nw)
            if nw[a] <= 0 or (r_new > balance_tol and r_new > imbalance(*W)):
                locked.add(v)
                continue
            lab[v] = b
            W = nw
            cut += ng
            locked.add(v)
            moves.append(v)
            del gains[v]
            for p in range(indptr[v], indptr[v + 1]):
                u = indices[p]
                if u in locked:
                    continue
                gu = gain_of(u)
                if gu != gains.get(u):
                    gains[u] = gu
                    heapq.heappush(heap, (-gu, u))
            sc = score(cut, W)
            if sc < best:
                best = sc
                best_len = len(moves)
                stall = 0
            else:
                stall += 1
        for v in reversed(moves[best_len:]):
            s_ = lab[v]
            lab[v] = 1 - s_
            W[s_] -= w[v]
            W[1 - s_] += w[v]
        cut = best[1]
        if not best < start:
            break
    return np.array(lab, dtype=np.int64), cut, (W[0], W[1])


def bisect_weighted(adj: sp.csr_matrix, vwgt, balance_tol: float = DEFAULT_BALANCE_TOL, seed=0):
    """Two-way partition of a node- and edge-weighted graph.

    Returns ``(labels, cut_weight, (w_left, w_right))``. The side holding
    node 0 is always LEFT.
    """
    vwgt = np.asarray(vwgt, dtype=np.int64)
    k = len(vwgt)
    if k == 0:
        return np.empty(0, dtype=np.int64), 0, (0, 0)
    if k == 1:
        return np.zeros(1, dtype=np.int64), 0, (int(vwgt[0]), 0)
    adj = sp.csr_matrix(adj)
    adj.sort_indices()
    labels = _grow(adj, vwgt, _rng(seed))
    labels, cut, W = _fm_refine(adj, vwgt, labels, balance_tol)
    if labels[0] != LEFT:
        labels = 1 - labels
        W = (W[1], W[0])
    return labels, int(cut), (int(W[0]), int(W[1]))


def bipartition_quotient(q: QuotientGraph, balance_tol: float = DEFAULT_BALANCE_TOL, seed=0) -> Bipartition:
    """Balanced bisection of the alive patches of ``q``.

    A single alive patch is put on the left with zero cut.
    """
    ids, adj = q.to_csr()
    if len(ids) == 0:
        raise ValueError("quotient graph has no alive patch")
    labels, cut, W = bisect_weighted(adj, q.node_weight[ids], balance_tol, seed)
    return Bipartition(ids, labels, cut, W, q.patch_count)


def bipartition_vertices(g: AdjacencyGraph, balance_tol: float = DEFAULT_BALANCE_TOL, seed=0) -> Bipartition:
    """Same bisection run directly on a vertex graph with unit weights."""
    if isinstance(g, SubgraphView):
        g = g.graph
    adj = sp.csr_matrix((np.ones(len(g.neighbors), dtype=np.int64), g.neighbors, g.offsets), shape=(g.n, g.n))
    labels, cut, W = bisect_weighted(adj, np.ones(g.n, dtype=np.int64), balance_tol, seed)
    return Bipartition(np.arange(g.n, dtype=np.int64), labels, cut, W, g.n)


def _vertex_sides(g: AdjacencyGraph, gmap, part: Bipartition) -> np.ndarray:
    sides = part.full_labels()[as_assignment(gmap)]
    if np.any(sides < 0):
        raise ValueError("vertex belongs to a patch outside the bipartition")
    return sides


def _crossing_edges(g: AdjacencyGraph, sides: np.ndarray):
    u, v = g.edges()
    m = sides[u] != sides[v]
    return u[m], v[m]


def super_separator(g: AdjacencyGraph, gmap, part: Bipartition) -> np.ndarray:
    """Both endpoints of every edge whose patches lie on opposite sides (sorted)."""
    if isinstance(g, SubgraphView):
        g = g.graph
    u, v = _crossing_edges(g, _vertex_sides(g, gmap, part))
    return np.unique(np.concatenate([u, v]))


def _lazy_adjacency(g: AdjacencyGraph):
    """``adj(v)`` as Python lists, converted only for vertices actually visited."""
    neighbors, offsets = g.neighbors, g.offsets
    cache: dict[int, list] = {}

    def adj(v):
        a = cache.get(v)
        if a is None:
            a = cache[v] = neighbors[offsets[v]:offsets[v + 1]].tolist()
        return a
    return adj


def _refine(adj, region, weights, balance_tol):
    """FM-style vertex-separator moves; ``region`` (list) is updated in place.

    ``adj(v)`` returns the neighbor list of ``v``. A separator vertex moving to side X pulls its neighbors on the other side
    into the separator, so the gain is ``1 - |N(v) on other side|``. Only
    moves with non-negative gain are taken; a pass ends after
    ``SEP_STALL_LIMIT`` moves without a new best state and is rolled back to
    its best state (smallest separator, then least balance excess over
    ``balance_tol``, then fewest moves).
    """
    sep = {v for v, r in enumerate(region) if r == SEP}
    W = weights

    def candidate(v, cur):
        """Best feasible ``(-gain, ratio, side)`` for v or None; ``cur`` is the current ratio."""
        opp = [0, 0, 0]
        for u in adj(v):
            opp[region[u]] += 1
        best = None
        # v joins a side; its neighbors on the other side are pulled into s
        if opp[RIGHT] <= 1:
            r = _ratio(W[0] + 1, W[1] - opp[RIGHT])
            if r <= balance_tol or r <= cur:
                best = (opp[RIGHT] - 1, r, LEFT)
        if opp[LEFT] <= 1:
            r = _ratio(W[0] - opp[LEFT], W[1] + 1)
            if r <= balance_tol or r <= cur:
                key = (opp[LEFT] - 1, r, RIGHT)
                if best is None or key < best:
                    best = key
        return best

    for _ in range(FM_PASSES):
        cur = _ratio(W[0], W[1])
        start = (len(sep), max(cur, balance_tol))
        best_state = start
        best_len = 0
        log = []  # (v, side, pulled)
        locked = set()
        heap = []
        for v in sep:
            c = candidate(v, cur)
            if c is not None:
                heap.append((c[0], v))
        heapq.heapify(heap)
        stall = 0
        while heap and stall < SEP_STALL_LIMIT:
            neg_g, v = heapq.heappop(heap)
            if v in locked or region[v] != SEP:
                continue
            c = candidate(v, cur)
            if c is None:
                continue
            if c[0] != neg_g:
                heapq.heappush(heap, (c[0], v))
                continue
            x = c[2]
            other = 1 - x
            pulled = [u for u in adj(v) if region[u] == other]
            region[v] = x
            sep.discard(v)
            W[x] += 1
            for u in pulled:
                region[u] = SEP
                sep.add(u)
            W[other] -= len(pulled)
            locked.add(v)
            log.append((v, x, pulled))
            cur = _ratio(W[0], W[1])
            state = (len(sep), max(cur, balance_tol))
            if state < best_state:
                best_state = state
                best_len = len(log)
                stall = 0
            else:
                stall += 1
            touched = set(pulled)
            for u in pulled:
                touched.update(adj(u))
            touched.update(adj(v))
            for u in touched:
                if region[u] == SEP and u not in locked:
                    cu = candidate(u, cur)
                    if cu is not None:
                        heapq.heappush(heap, (cu[0], u))
        for v, x, pulled in reversed(log[best_len:]):
            other = 1 - x
            for u in pulled:
                region[u] = other
                sep.discard(u)
            W[other] += len(pulled)
            region[v] = SEP
            sep.add(v)
            W[x] -= 1
        if not best_state < start:
            break
    return sep


def refine_separator(g: AdjacencyGraph, super_s, gmap, part: Bipartition,
                     balance_tol: float = DEFAULT_BALANCE_TOL) -> SeparatorResult:
    """Shrink a separator superset to a vertex separator of ``g``.

    Starts from the superset's vertices on one side (the side with fewer of
    them; ties go left), then applies separator-vertex moves.
    """
    if isinstance(g, SubgraphView):
        g = g.graph
    sides = _vertex_sides(g, gmap, part)
    super_s = np.asarray(super_s, dtype=np.int64)
    in_super = np.zeros(g.n, dtype=bool)
    in_super[super_s] = True
    u, v = _crossing_edges(g, sides)
    if np.any(~(in_super[u] | in_super[v])):
        raise ValueError("separator superset does not cover every crossing edge")
    if super_s.size == 0:
        return split_left_right(g, super_s, gmap, part)

    b0 = super_s[sides[super_s] == LEFT]
    b1 = super_s[sides[super_s] == RIGHT]
    pick = LEFT if len(b0) <= len(b1) else RIGHT
    init = np.zeros(g.n, dtype=bool)
    init[b0 if pick == LEFT else b1] = True
    # crossing edges the chosen side leaves open get their other endpoint
    open_edge = ~(init[u] | init[v])
    init[np.where(sides[u[open_edge]] == pick, v[open_edge], u[open_edge])] = True

    region = np.where(init, SEP, sides).tolist()
    weights = [int(np.count_nonzero((sides == LEFT) & ~init)), int(np.count_nonzero((sides == RIGHT) & ~init))]
    sep = _refine(_lazy_adjacency(g), region, weights, balance_tol)
    s = np.array(sorted(sep), dtype=np.int64)
    region_arr = np.array(region, dtype=np.int64)
    return split_left_right(g, s, gmap, part, hint=region_arr)


def split_left_right(g: AdjacencyGraph, s, gmap, part: Bipartition, hint: np.ndarray | None = None) -> SeparatorResult:
    """Assign the components of ``g - s`` to sides.

    A component goes to the side most of its vertices are labeled with
    (``hint`` if given, else the patch labels); ties go left.
    """
    if isinstance(g, SubgraphView):
        g = g.graph
    s = np.asarray(s, dtype=np.int64)
    sides = hint if hint is not None else _vertex_sides(g, gmap, part)
    in_s = np.zeros(g.n, dtype=bool)
    in_s[s] = True
    rest = np.flatnonzero(~in_s)
    if rest.size == 0:
        e = np.empty(0, dtype=np.int64)
        return SeparatorResult(np.sort(s), e, e.copy())
    local = np.full(g.n, -1, dtype=np.int64)
    local[rest] = np.arange(len(rest))
    u, v = g.edges()
    m = ~in_s[u] & ~in_s[v]
    mat = sp.csr_matrix((np.ones(int(m.sum()), dtype=np.int8), (local[u[m]], local[v[m]])),
                        shape=(len(rest), len(rest)))
    ncomp, comp = connected_components(mat, directed=False)
    right_votes = np.bincount(comp, weights=(sides[rest] == RIGHT), minlength=ncomp)
    sizes = np.bincount(comp, minlength=ncomp)
    comp_side = np.where(right_votes * 2 > sizes, RIGHT, LEFT)
    vs = comp_side[comp]
    return SeparatorResult(np.sort(s), rest[vs == LEFT], rest[vs == RIGHT])
