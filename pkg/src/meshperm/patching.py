"""Connected patch partitions of a mesh graph.

Patches come from a graph-distance Lloyd iteration: farthest-point seeding,
Voronoi assignment by multi-source BFS, and re-centering each patch on the
vertex deepest inside it. Everything is level-synchronous numpy, so the
result does not depend on how many threads numpy uses.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .graph import AdjacencyGraph, GroupMap, as_assignment, expand_rows

DEFAULT_PATCH_SIZE = 256
LLOYD_ROUNDS = 10
MERGE_FRACTION = 0.25


@dataclass
class PatchPartition:
    assignment: np.ndarray
    patch_count: int
    target_size: int = DEFAULT_PATCH_SIZE

    def group_map(self) -> GroupMap:
        return GroupMap(self.assignment, self.patch_count)

    def sizes(self) -> np.ndarray:
        return np.bincount(self.assignment, minlength=self.patch_count)


@dataclass
class PatchReport:
    connected: bool
    sizes: np.ndarray
    disconnected: list = field(default_factory=list)
    unused: list = field(default_factory=list)


def multi_source_bfs(g: AdjacencyGraph, sources, labels, same_label_only: np.ndarray | None = None):
    """Hop distance and owning label from the nearest source.

    A vertex reached from several sources at the same distance takes the
    smallest label. When ``same_label_only`` is given (a per-vertex label
    array), the search only follows edges inside one label class.
    Unreached vertices get distance -1 and label -1.
    """
    dist = np.full(g.n, -1, dtype=np.int64)
    lab = np.full(g.n, -1, dtype=np.int64)
    frontier = np.asarray(sources, dtype=np.int64)
    dist[frontier] = 0
    lab[frontier] = np.asarray(labels, dtype=np.int64)
    span = int(lab.max()) + 1 if frontier.size else 1
    d = 0
    while frontier.size:
        src, pos = expand_rows(g.offsets, frontier)
        nb = g.neighbors[pos]
        m = dist[nb] < 0
        if same_label_only is not None:
            m &= same_label_only[nb] == same_label_only[src]
        nb = nb[m]
        if nb.size == 0:
            break
        # one sort on (vertex, label) keeps the smallest label per vertex first
        key = nb * span + lab[src[m]]
        key.sort()
        first = np.empty(len(key), dtype=bool)
        first[0] = True
        vert = key // span
        first[1:] = vert[1:] != vert[:-1]
        frontier = vert[first]
        d += 1
        dist[frontier] = d
        lab[frontier] = key[first] - frontier * span
    return dist, lab


def _bfs_within(g: AdjacencyGraph, sources: np.ndarray, assign: np.ndarray) -> np.ndarray:
    """Hop distance from ``sources`` following only edges inside one patch."""
    dist = np.full(g.n, -1, dtype=np.int64)
    frontier = np.unique(sources)
    dist[frontier] = 0
    src_all = np.repeat(np.arange(g.n, dtype=np.int64), g.degree())
    inner = assign[src_all] == assign[g.neighbors]
    offsets = np.zeros(g.n + 1, dtype=np.int64)
    np.cumsum(np.bincount(src_all[inner], minlength=g.n), out=offsets[1:])
    nbrs = g.neighbors[inner]
    d = 0
    while frontier.size:
        _, pos = expand_rows(offsets, frontier)
        nb = nbrs[pos]
        nb = np.unique(nb[dist[nb] < 0])
        d += 1
        dist[nb] = d
        frontier = nb
    return dist


def _neighbor_table(g: AdjacencyGraph) -> np.ndarray | None:
    """Neighbors padded to the max degree with sentinel ``n``; None if too ragged."""
    deg = g.degree()
    if g.n == 0 or deg.max(initial=0) > 4 * deg.mean() + 8:
        return None
    table = np.full((g.n + 1, int(deg.max())), g.n, dtype=np.int64)
    src = np.repeat(np.arange(g.n, dtype=np.int64), deg)
    col = np.arange(len(g.neighbors)) - g.offsets[src]
    table[src, col] = g.neighbors
    return table


def _relax_from(g: AdjacencyGraph, table, dist: np.ndarray, seed: int) -> None:
    """Lower ``dist`` in place with distances from ``seed``.

    ``dist`` has one extra sentinel slot at index ``n`` holding 0.
    """
    dist[seed] = 0
    frontier = np.array([seed], dtype=np.int64)
    d = 0
    while frontier.size:
        if table is not None:
            nb = table[frontier].ravel()
        else:
            nb = g.neighbors[expand_rows(g.offsets, frontier)[1]]
        nb = np.unique(nb[dist[nb] > d + 1])
        d += 1
        dist[nb] = d
        frontier = nb


def _farthest_point_seeds(g: AdjacencyGraph, comp_vertices: np.ndarray, k: int, start: int,
                          dist: np.ndarray, table=None) -> list[int]:
    seeds = [int(start)]
    _relax_from(g, table, dist, start)
    for _ in range(k - 1):
        nxt = int(comp_vertices[np.argmax(dist[comp_vertices])])
        if dist[nxt] == 0:
            break
        seeds.append(nxt)
        _relax_from(g, table, dist, nxt)
    return seeds


def _recenter(g: AdjacencyGraph, assign: np.ndarray, seeds: np.ndarray) -> np.ndarray:
    """Move each seed to the vertex of its patch farthest from the patch boundary."""
    src = np.repeat(np.arange(g.n, dtype=np.int64), g.degree())
    crossing = assign[src] != assign[g.neighbors]
    boundary = np.unique(src[crossing])
    if boundary.size == 0:
        return seeds
    dist = _bfs_within(g, boundary, assign)
    deepest = np.zeros(len(seeds), dtype=np.int64)
    np.maximum.at(deepest, assign, dist)
    cand = np.flatnonzero(dist == deepest[assign])  # ascending, so first hit is lowest id
    _, first = np.unique(assign[cand], return_index=True)
    best = cand[first]
    new = seeds.copy()
    has_boundary = np.zeros(len(seeds), dtype=bool)
    has_boundary[assign[boundary]] = True
    pid = assign[best]
    upd = has_boundary[pid]
    new[pid[upd]] = best[upd]
    return new


def _canonical(assign: np.ndarray) -> tuple[np.ndarray, int]:
    """Relabel patches in order of their lowest vertex id."""
    if assign.size == 0:
        return assign.copy(), 0
    ids, first = np.unique(assign, return_index=True)
    rank = np.empty(int(ids.max()) + 1, dtype=np.int64)
    rank[ids[np.argsort(first, kind="stable")]] = np.arange(len(ids), dtype=np.int64)
    return rank[assign], len(ids)


def _components_within_patches(g: AdjacencyGraph, assign: np.ndarray) -> np.ndarray:
    src = np.repeat(np.arange(g.n, dtype=np.int64), g.degree())
    same = assign[src] == assign[g.neighbors]
    mat = sp.csr_matrix((np.ones(int(same.sum()), dtype=np.int8), (src[same], g.neighbors[same])),
                        shape=(g.n, g.n))
    _, comp = connected_components(mat, directed=False)
    return comp


def enforce_connectivity(partition, g: AdjacencyGraph):
    """Split every disconnected patch into its connected pieces.

    The piece holding the patch's lowest vertex keeps the old id; other pieces
    get fresh ids after the existing ones, in order of their lowest vertex.
    Accepts a PatchPartition or GroupMap and returns the same type.
    """
    assign = as_assignment(partition)
    P = partition.patch_count
    if g.n == 0:
        return partition
    comp = _components_within_patches(g, assign)
    verts = np.arange(g.n, dtype=np.int64)
    # first vertex of every component (components numbered by lowest vertex)
    _, comp_first = np.unique(comp, return_index=True)
    comp_patch = assign[comp_first]
    order = np.lexsort((comp_first, comp_patch))
    cp = comp_patch[order]
    is_head = np.empty(len(order), dtype=bool)
    is_head[0] = True
    is_head[1:] = cp[1:] != cp[:-1]
    new_id = np.empty(len(comp_first), dtype=np.int64)
    new_id[order[is_head]] = cp[is_head]
    extra = order[~is_head]
    extra = extra[np.argsort(comp_first[extra], kind="stable")]
    new_id[extra] = P + np.arange(len(extra), dtype=np.int64)
    out = new_id[comp[verts]]
    count = P + len(extra)
    if isinstance(partition, PatchPartition):
        return PatchPartition(out, count, partition.target_size)
    return GroupMap(out, count)


def _merge_small(g: AdjacencyGraph, assign: np.ndarray, P: int, target_size: int) -> np.ndarray:
    """Fold undersized patches into their smallest neighboring patch.

    Patches below ``MERGE_FRACTION * target`` are always merged. Patches below
    half the target are merged only while the result stays within twice the
    target.
    """
    hard = MERGE_FRACTION * target_size
    soft = 0.5 * target_size
    cap = 2 * target_size
    sizes = np.bincount(assign, minlength=P).astype(np.int64)
    if not np.any((sizes > 0) & (sizes < soft)):
        return assign
    u, v = g.edges()
    pu, pv = assign[u], assign[v]
    cross = pu != pv
    adj: list[set] = [set() for _ in range(P)]
    for a, b in zip(pu[cross].tolist(), pv[cross].tolist()):
        adj[a].add(b)
        adj[b].add(a)
    parent = list(range(P))
    size = sizes.tolist()

    def mergeable(p):
        if not adj[p] or size[p] == 0 or size[p] >= soft:
            return False
        if size[p] < hard:
            return True
        return size[p] + min(size[x] for x in adj[p]) <= cap

    while True:
        small = [p for p in range(P) if parent[p] == p and mergeable(p)]
        if not small:
            break
        p = min(small, key=lambda x: (size[x], x))
        target = min(adj[p], key=lambda x: (size[x], x))
        parent[p] = target
        size[target] += size[p]
        size[p] = 0
        for r in adj[p]:
            adj[r].discard(p)
            if r != target:
                adj[r].add(target)
                adj[target].add(r)
        adj[p] = set()
    root = np.array(parent, dtype=np.int64)
    while True:
        nxt = root[root]
        if np.array_equal(nxt, root):
            break
        root = nxt
    return root[assign]


def _split_large(g: AdjacencyGraph, assign: np.ndarray, P: int, target_size: int) -> tuple[np.ndarray, int]:
    """Halve patches above twice the target along BFS layers from a far vertex."""
    assign = assign.copy()
    work = np.flatnonzero(np.bincount(assign, minlength=P) > 2 * target_size).tolist()
    while work:
        p = work.pop()
        verts = np.flatnonzero(assign == p)
        if len(verts) <= 2 * target_size:
            continue
        d0, _ = multi_source_bfs(g, verts[:1], [0], same_label_only=assign)
        far = int(verts[np.argmax(d0[verts])])
        d1, _ = multi_source_bfs(g, [far], [0], same_label_only=assign)
        d1 = np.where(d1 < 0, g.n, d1)
        order = verts[np.lexsort((verts, d1[verts]))]
        assign[order[: len(order) // 2]] = P
        work.extend([P, p])
        P += 1
    return assign, P


def patch_count_for(n: int, target_size: int) -> int:
    return max(1, int(np.floor(n / target_size + 0.5)))


def compute_patches(g: AdjacencyGraph, target_size: int = DEFAULT_PATCH_SIZE, seed: int = 0,
                    rounds: int = LLOYD_ROUNDS) -> PatchPartition:
    """Connected patches of roughly ``target_size`` vertices.

    Each connected component is patched on its own with
    ``max(1, round(n_c / target_size))`` seeds.
    """
    if target_size < 1:
        raise ValueError("target_size must be >= 1")
    n = g.n
    if n == 0:
        return PatchPartition(np.empty(0, dtype=np.int64), 0, target_size)
    if target_size == 1:
        return PatchPartition(np.arange(n, dtype=np.int64), n, target_size)

    ncomp, comp = connected_components(g.to_csr(), directed=False)
    dist = np.full(n + 1, np.iinfo(np.int64).max // 2, dtype=np.int64)
    dist[n] = 0
    table = _neighbor_table(g)
    seeds: list[int] = []
    order = np.argsort(comp, kind="stable")
    bounds = np.searchsorted(comp[order], np.arange(ncomp + 1))
    for c in range(ncomp):
        verts = order[bounds[c]:bounds[c + 1]]
        k = patch_count_for(len(verts), target_size)
        pick = int(np.random.default_rng([seed, c]).integers(len(verts)))
        seeds.extend(_farthest_point_seeds(g, verts, k, int(verts[pick]), dist, table))
    seeds_arr = np.array(seeds, dtype=np.int64)
    labels = np.arange(len(seeds_arr), dtype=np.int64)

    assign = None
    for _ in range(max(1, rounds)):
        _, new = multi_source_bfs(g, seeds_arr, labels)
        if assign is not None and np.array_equal(new, assign):
            break
        assign = new
        seeds_arr = _recenter(g, assign, seeds_arr)

    assign, P = _split_large(g, assign, len(seeds_arr), target_size)
    part = enforce_connectivity(PatchPartition(assign, P, target_size), g)
    merged = _merge_small(g, part.assignment, part.patch_count, target_size)
    out, count = _canonical(merged)
    return PatchPartition(out, count, target_size)


def validate_user_patches(gmap, g: AdjacencyGraph) -> PatchReport:
    """Report patches whose induced subgraph is disconnected and unused ids."""
    assign = as_assignment(gmap)
    if len(assign) != g.n:
        raise ValueError("group map does not cover the graph")
    P = gmap.patch_count if isinstance(gmap, GroupMap) else (int(assign.max()) + 1 if assign.size else 0)
    sizes = np.bincount(assign, minlength=P)
    comp = _components_within_patches(g, assign) if g.n else assign
    pieces = np.zeros(P, dtype=np.int64)
    if g.n:
        pairs = np.unique(np.stack([assign, comp]), axis=1)
        pieces = np.bincount(pairs[0], minlength=P)
    disconnected = np.flatnonzero(pieces > 1).tolist()
    unused = np.flatnonzero(sizes == 0).tolist()
    return PatchReport(not disconnected, sizes, disconnected, unused)


def is_connected_patch(g: AdjacencyGraph, assign: np.ndarray, patch: int) -> bool:
    verts = np.flatnonzero(assign == patch)
    if verts.size <= 1:
        return True
    dist, _ = multi_source_bfs(g, verts[:1], [0], same_label_only=np.where(assign == patch, 1, 0))
    return bool(np.all(dist[verts] >= 0))
