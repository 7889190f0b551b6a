"""Matrix graph, group maps, induced subgraphs and the patch quotient graph."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .io import SparsePattern, TriangleMesh


def expand_rows(offsets: np.ndarray, rows: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Positions into the flat neighbor array for every entry of ``rows``.

    Returns ``(source_row_for_each_entry, flat_positions)``.
    """
    rows = np.asarray(rows, dtype=np.int64)
    starts = offsets[rows]
    counts = offsets[rows + 1] - starts
    total = int(counts.sum())
    if total == 0:
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64)
    run_start = np.cumsum(counts) - counts
    pos = np.arange(total, dtype=np.int64) - np.repeat(run_start, counts) + np.repeat(starts, counts)
    return np.repeat(rows, counts), pos


@dataclass(eq=False)
class AdjacencyGraph:
    """Undirected simple graph in CSR form with sorted neighbor lists."""

    n: int
    offsets: np.ndarray
    neighbors: np.ndarray

    @classmethod
    def from_edges(cls, n: int, u, v) -> "AdjacencyGraph":
        """Symmetrize, drop self-loops and duplicates."""
        u = np.asarray(u, dtype=np.int64).ravel()
        v = np.asarray(v, dtype=np.int64).ravel()
        keep = u != v
        src = np.concatenate([u[keep], v[keep]])
        dst = np.concatenate([v[keep], u[keep]])
        key = np.unique(src * max(n, 1) + dst)
        src = key // max(n, 1)
        dst = key % max(n, 1)
        offsets = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(src, minlength=n), out=offsets[1:])
        return cls(n, offsets, dst)

    @classmethod
    def from_csr(cls, mat) -> "AdjacencyGraph":
        coo = sp.coo_matrix(mat)
        return cls.from_edges(coo.shape[0], coo.row, coo.col)

    @property
    def edge_count(self) -> int:
        return len(self.neighbors) // 2

    def degree(self) -> np.ndarray:
        return np.diff(self.offsets)

    def adj(self, v: int) -> np.ndarray:
        return self.neighbors[self.offsets[v]:self.offsets[v + 1]]

    def edges(self) -> tuple[np.ndarray, np.ndarray]:
        """Each undirected edge once as ``(u, v)`` with ``u < v`` (cached, read-only)."""
        cached = self.__dict__.get("_edges")
        if cached is None:
            src = np.repeat(np.arange(self.n, dtype=np.int64), self.degree())
            m = src < self.neighbors
            cached = (src[m], self.neighbors[m])
            for a in cached:
                a.setflags(write=False)
            self.__dict__["_edges"] = cached
        return cached

    def to_csr(self) -> sp.csr_matrix:
        data = np.ones(len(self.neighbors), dtype=np.int64)
        return sp.csr_matrix((data, self.neighbors, self.offsets), shape=(self.n, self.n))

    def adjacency_lists(self) -> list[list[int]]:
        nbrs = self.neighbors.tolist()
        off = self.offsets.tolist()
        return [nbrs[off[i]:off[i + 1]] for i in range(self.n)]

    def same_structure(self, other: "AdjacencyGraph") -> bool:
        return (self.n == other.n and np.array_equal(self.offsets, other.offsets)
                and np.array_equal(self.neighbors, other.neighbors))

    def check(self) -> None:
        """Raise ``AssertionError`` if any adjacency invariant is broken."""
        assert self.offsets[0] == 0 and self.offsets[-1] == len(self.neighbors)
        assert np.all(np.diff(self.offsets) >= 0)
        src = np.repeat(np.arange(self.n), self.degree())
        assert not np.any(src == self.neighbors), "self-loop"
        for v in range(self.n):
            a = self.adj(v)
            assert np.all(np.diff(a) > 0), f"neighbors of {v} not sorted/unique"
        fwd = np.sort(src * self.n + self.neighbors)
        bwd = np.sort(self.neighbors * self.n + src)
        assert np.array_equal(fwd, bwd), "asymmetric adjacency"


def build_graph(pattern: SparsePattern) -> AdjacencyGraph:
    """Graph of a symmetric pattern, diagonal dropped."""
    return AdjacencyGraph.from_edges(pattern.n, pattern.rows, pattern.cols)


def mesh_to_graph(mesh: TriangleMesh) -> AdjacencyGraph:
    t = mesh.triangles
    u = np.concatenate([t[:, 0], t[:, 1], t[:, 2]])
    v = np.concatenate([t[:, 1], t[:, 2], t[:, 0]])
    return AdjacencyGraph.from_edges(mesh.vertex_count, u, v)


def mesh_pattern(mesh: TriangleMesh, block_size: int = 1) -> SparsePattern:
    """Pattern of a vertex-based operator on ``mesh`` (diagonal included).

    With ``block_size > 1`` every scalar entry becomes a dense block, as for
    Hessians with several unknowns per vertex.
    """
    g = mesh_to_graph(mesh)
    diag = np.arange(g.n, dtype=np.int64)
    src = np.concatenate([np.repeat(diag, g.degree()), diag])
    dst = np.concatenate([g.neighbors, diag])
    b = int(block_size)
    if b == 1:
        return SparsePattern(g.n, src, dst)
    a, c = np.meshgrid(np.arange(b), np.arange(b), indexing="ij")
    rows = (src[:, None] * b + a.ravel()[None, :]).ravel()
    cols = (dst[:, None] * b + c.ravel()[None, :]).ravel()
    return SparsePattern(g.n * b, rows, cols)


def compress_blocks(pattern: SparsePattern, b: int) -> AdjacencyGraph:
    """Graph with one node per uniform ``b``-row block; blocks couple if any entry does."""
    if b < 1:
        raise ValueError("block size must be >= 1")
    if pattern.n % b:
        raise ValueError(f"dimension {pattern.n} not divisible by block size {b}")
    return AdjacencyGraph.from_edges(pattern.n // b, pattern.rows // b, pattern.cols // b)


@dataclass
class GroupMap:
    """Patch id per graph vertex."""

    assignment: np.ndarray
    patch_count: int

    def __post_init__(self):
        self.assignment = np.asarray(self.assignment, dtype=np.int64)
        if self.assignment.size and (self.assignment.min() < 0 or self.assignment.max() >= self.patch_count):
            raise ValueError("patch id outside [0, patch_count)")

    @classmethod
    def from_assignment(cls, assignment) -> "GroupMap":
        a = np.asarray(assignment, dtype=np.int64)
        return cls(a, int(a.max()) + 1 if a.size else 0)

    @classmethod
    def singletons(cls, n: int) -> "GroupMap":
        return cls(np.arange(n, dtype=np.int64), n)

    def __len__(self) -> int:
        return len(self.assignment)

    def sizes(self) -> np.ndarray:
        return np.bincount(self.assignment, minlength=self.patch_count)

    def unused(self) -> np.ndarray:
        return np.flatnonzero(self.sizes() == 0)


def as_assignment(gmap) -> np.ndarray:
    a = getattr(gmap, "assignment", gmap)
    return np.asarray(a, dtype=np.int64)


def lift_patches(mesh_patches: GroupMap, b: int = 1, n: int | None = None) -> GroupMap:
    """Give every row of a mesh vertex's ``b``-block that vertex's patch.

    ``n`` (rows of the target system) is checked against ``b * len(mesh_patches)``.
    """
    if n is not None and n != b * len(mesh_patches):
        raise ValueError(f"size mismatch: {len(mesh_patches)} mesh vertices x block {b} != {n} rows")
    return GroupMap(np.repeat(mesh_patches.assignment, b), mesh_patches.patch_count)


@dataclass(eq=False)
class SubgraphView:
    """Induced subgraph plus the map from local to parent (global) ids."""

    global_ids: np.ndarray
    graph: AdjacencyGraph

    @property
    def n(self) -> int:
        return self.graph.n

    def to_global(self, local) -> np.ndarray:
        return self.global_ids[np.asarray(local, dtype=np.int64)]

    def to_local(self, global_ids) -> np.ndarray:
        g = np.asarray(global_ids, dtype=np.int64)
        order = np.argsort(self.global_ids, kind="stable")
        sorted_ids = self.global_ids[order]
        pos = np.searchsorted(sorted_ids, g)
        if np.any(pos >= len(sorted_ids)) or np.any(sorted_ids[np.minimum(pos, len(sorted_ids) - 1)] != g):
            raise KeyError("vertex not in subgraph")
        return order[pos]


def induced_subgraph(g, vertices, check: bool = True) -> SubgraphView:
    """Subgraph of ``g`` (an AdjacencyGraph or SubgraphView) on ``vertices``.

    Local vertex ``i`` is ``vertices[i]``; for a SubgraphView parent the ids
    are the parent's local ids and the result maps to the root global ids.
    """
    parent_ids = None
    if isinstance(g, SubgraphView):
        parent_ids = g.global_ids
        g = g.graph
    verts = np.asarray(vertices, dtype=np.int64).ravel()
    if check and verts.size:
        if verts.min() < 0 or verts.max() >= g.n:
            raise ValueError("vertex out of range")
        if len(np.unique(verts)) != len(verts):
            raise ValueError("duplicate vertex in induced_subgraph")
    local = np.full(g.n, -1, dtype=np.int64)
    local[verts] = np.arange(len(verts), dtype=np.int64)
    src, pos = expand_rows(g.offsets, verts)
    nb = local[g.neighbors[pos]]
    keep = nb >= 0
    src_local = local[src[keep]]
    nb = nb[keep]
    if verts.size > 1 and np.any(np.diff(verts) < 0):
        order = np.lexsort((nb, src_local))
        src_local, nb = src_local[order], nb[order]
    offsets = np.zeros(len(verts) + 1, dtype=np.int64)
    np.cumsum(np.bincount(src_local, minlength=len(verts)), out=offsets[1:])
    ids = verts if parent_ids is None else parent_ids[verts]
    return SubgraphView(ids, AdjacencyGraph(len(verts), offsets, nb))


@dataclass(eq=False)
class QuotientGraph:
    """Patch-level graph of a vertex subset of a parent graph.

    ``node_weight[p]`` counts alive vertices of patch ``p``;
    ``edge_weight[(p, q)]`` (``p < q``) counts alive edges joining the two
    patches. Dead patches keep their index. ``vertex_alive`` is indexed by the
    parent graph's vertex ids.
    """

    patch_count: int
    node_weight: np.ndarray
    edge_weight: dict = field(default_factory=dict)
    vertex_alive: np.ndarray | None = None

    @property
    def alive(self) -> np.ndarray:
        return self.node_weight > 0

    def alive_patches(self) -> np.ndarray:
        return np.flatnonzero(self.node_weight > 0)

    @property
    def alive_count(self) -> int:
        return int(np.count_nonzero(self.node_weight))

    @property
    def total_weight(self) -> int:
        return int(self.node_weight.sum())

    def copy(self) -> "QuotientGraph":
        va = None if self.vertex_alive is None else self.vertex_alive.copy()
        return QuotientGraph(self.patch_count, self.node_weight.copy(), dict(self.edge_weight), va)

    def same_as(self, other: "QuotientGraph") -> bool:
        """Equal node weights, alive flags and positive edge weights."""
        mine = {k: w for k, w in self.edge_weight.items() if w > 0}
        theirs = {k: w for k, w in other.edge_weight.items() if w > 0}
        return (self.patch_count == other.patch_count
                and np.array_equal(self.node_weight, other.node_weight)
                and mine == theirs)

    def to_csr(self) -> tuple[np.ndarray, sp.csr_matrix]:
        """``(alive_patch_ids, weighted adjacency over them)`` in ascending id order."""
        ids = self.alive_patches()
        k = len(ids)
        if not self.edge_weight:
            return ids, sp.csr_matrix((k, k), dtype=np.int64)
        local = np.full(self.patch_count, -1, dtype=np.int64)
        local[ids] = np.arange(k, dtype=np.int64)
        pairs = np.fromiter((x for key in self.edge_weight for x in key), dtype=np.int64,
                            count=2 * len(self.edge_weight)).reshape(-1, 2)
        w = np.fromiter(self.edge_weight.values(), dtype=np.int64, count=len(self.edge_weight))
        a, b = local[pairs[:, 0]], local[pairs[:, 1]]
        mat = sp.csr_matrix((np.concatenate([w, w]), (np.concatenate([a, b]), np.concatenate([b, a]))),
                            shape=(k, k))
        mat.sort_indices()
        return ids, mat


def _patch_pair_counts(pu: np.ndarray, pv: np.ndarray, patch_count: int):
    cross = pu != pv
    lo = np.minimum(pu[cross], pv[cross])
    hi = np.maximum(pu[cross], pv[cross])
    keys, counts = np.unique(lo * patch_count + hi, return_counts=True)
    return keys // patch_count, keys % patch_count, counts


def build_quotient(g: AdjacencyGraph, gmap) -> QuotientGraph:
    """One pass over the edges of ``g``."""
    if isinstance(g, SubgraphView):
        g = g.graph
    assign = as_assignment(gmap)
    if len(assign) != g.n:
        raise ValueError("group map does not cover the graph")
    P = gmap.patch_count if isinstance(gmap, GroupMap) else (int(assign.max()) + 1 if assign.size else 0)
    weights = np.bincount(assign, minlength=P).astype(np.int64)
    u, v = g.edges()
    lo, hi, counts = _patch_pair_counts(assign[u], assign[v], max(P, 1))
    edges = dict(zip(zip(lo.tolist(), hi.tolist()), counts.tolist()))
    return QuotientGraph(P, weights, edges, np.ones(g.n, dtype=bool))


def quotient_remove(q: QuotientGraph, g: AdjacencyGraph, gmap, removed) -> QuotientGraph:
    """Remove vertices from ``q`` in place and return it.

    Each alive crossing edge incident to a removed vertex is subtracted
    exactly once, including edges with both endpoints removed.
    """
    if isinstance(g, SubgraphView):
        g = g.graph
    assign = as_assignment(gmap)
    rem = np.asarray(removed, dtype=np.int64).ravel()
    if rem.size == 0:
        return q
    if q.vertex_alive is None:
        raise ValueError("quotient graph carries no vertex liveness")
    if len(np.unique(rem)) != len(rem) or not np.all(q.vertex_alive[rem]):
        raise ValueError("removing an already-dead vertex")
    in_rem = np.zeros(g.n, dtype=bool)
    in_rem[rem] = True
    src, pos = expand_rows(g.offsets, rem)
    dst = g.neighbors[pos]
    # alive neighbor outside the batch, or inside it and counted from the lower endpoint
    keep = q.vertex_alive[dst] & (~in_rem[dst] | (src < dst))
    lo, hi, counts = _patch_pair_counts(assign[src[keep]], assign[dst[keep]], max(q.patch_count, 1))
    ew = q.edge_weight
    for key, c in zip(zip(lo.tolist(), hi.tolist()), counts.tolist()):
        left = ew[key] - c
        if left < 0:
            raise ValueError(f"quotient edge {key} went negative; quotient inconsistent with graph")
        if left:
            ew[key] = left
        else:
            del ew[key]
    np.subtract.at(q.node_weight, assign[rem], 1)
    q.vertex_alive[rem] = False
    return q


def restrict_quotient(q: QuotientGraph, g: AdjacencyGraph, gmap, keep, drop) -> QuotientGraph:
    """Quotient of ``keep`` derived from ``q``, which covers ``keep`` and ``drop``.

    Requires that no edge of ``g`` joins ``keep`` and ``drop`` (true after a
    separator has been removed). Only edges inside ``drop`` between patches
    that straddle both sets are visited; all other work is on the patch level.
    """
    if isinstance(g, SubgraphView):
        g = g.graph
    assign = as_assignment(gmap)
    keep = np.asarray(keep, dtype=np.int64)
    drop = np.asarray(drop, dtype=np.int64)
    P = q.patch_count
    count_keep = np.bincount(assign[keep], minlength=P).astype(np.int64)
    count_drop = np.bincount(assign[drop], minlength=P)
    present = count_keep > 0
    edges = {key: w for key, w in q.edge_weight.items() if present[key[0]] and present[key[1]]}

    straddle = present & (count_drop > 0)
    if np.any(straddle):
        mover = drop[straddle[assign[drop]]]
        if mover.size:
            in_mover = np.zeros(g.n, dtype=bool)
            in_mover[mover] = True
            src, pos = expand_rows(g.offsets, mover)
            dst = g.neighbors[pos]
            sel = in_mover[dst] & (src < dst)
            lo, hi, counts = _patch_pair_counts(assign[src[sel]], assign[dst[sel]], max(P, 1))
            for key, c in zip(zip(lo.tolist(), hi.tolist()), counts.tolist()):
                left = edges[key] - c
                if left:
                    edges[key] = left
                else:
                    del edges[key]

    alive = np.zeros(len(q.vertex_alive) if q.vertex_alive is not None else g.n, dtype=bool)
    alive[keep] = True
    return QuotientGraph(P, count_keep, edges, alive)
