"""Symbolic Cholesky analysis: factor structure, fill counts and cost.

The sparse path computes each column's structure as the union of its later
neighbors and its factor-etree children's structures. A dense elimination
game is kept as an independent oracle for small graphs.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .etree import is_ancestor_or_self
from .graph import AdjacencyGraph, SubgraphView

DENSE_LIMIT = 200


@dataclass
class FillReport:
    n: int
    nnz_A: int
    nnz_L: int
    fill_ratio: float
    column_counts: np.ndarray
    cost: int

    @property
    def fill_entries(self) -> int:
        """Entries of L that are not in lower(A)."""
        return self.nnz_L - (self.nnz_A + self.n) // 2


def _perm_arrays(perm, n: int) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(getattr(perm, "perm", perm), dtype=np.int64)
    if p.shape != (n,) or not np.array_equal(np.sort(p), np.arange(n)):
        raise ValueError("perm is not a permutation of the graph's vertices")
    inv = np.empty(n, dtype=np.int64)
    inv[p] = np.arange(n, dtype=np.int64)
    return p, inv


def _graph(g) -> AdjacencyGraph:
    return g.graph if isinstance(g, SubgraphView) else g


def _report(g: AdjacencyGraph, counts: np.ndarray) -> FillReport:
    nnz_a = g.n + 2 * g.edge_count
    nnz_l = int(counts.sum())
    return FillReport(g.n, nnz_a, nnz_l, nnz_l / nnz_a if nnz_a else 0.0, counts,
                      int(np.dot(counts, counts)))


def _later_neighbors(g: AdjacencyGraph, inv: np.ndarray) -> list[list[int]]:
    """Per position k, the positions of neighbors eliminated after k."""
    u, v = g.edges()
    a, b = inv[u], inv[v]
    lo, hi = np.minimum(a, b), np.maximum(a, b)
    order = np.argsort(lo, kind="stable")
    lo, hi = lo[order], hi[order]
    splits = np.searchsorted(lo, np.arange(1, g.n))
    return [chunk.tolist() for chunk in np.split(hi, splits)]


def symbolic_factor(g, perm, keep_pattern: bool = False):
    """Column counts, factor-etree parents and optionally each column's structure.

    Everything is in permuted positions. ``structs[j]`` (if kept) is the
    sorted array of row positions ``i > j`` with ``L(i, j) != 0``.
    """
    g = _graph(g)
    n = g.n
    _, inv = _perm_arrays(perm, n)
    later = _later_neighbors(g, inv) if n else []
    parent = [-1] * n
    counts = [1] * n
    pending: dict[int, list[set]] = {}
    structs = [None] * n if keep_pattern else None
    for j in range(n):
        s = set(later[j])
        for child in pending.pop(j, ()):
            s |= child
        s.discard(j)
        counts[j] = len(s) + 1
        if keep_pattern:
            structs[j] = np.array(sorted(s), dtype=np.int64)
        if s:
            p = min(s)
            parent[j] = p
            pending.setdefault(p, []).append(s)
    return np.array(counts, dtype=np.int64), np.array(parent, dtype=np.int64), structs


def elimination_fill(g, perm) -> FillReport:
    counts, _, _ = symbolic_factor(g, perm)
    return _report(_graph(g), counts)


def dense_elimination_fill(g, perm) -> FillReport:
    """Elimination game on a dense boolean matrix; the reference for small graphs."""
    g = _graph(g)
    n = g.n
    if n > DENSE_LIMIT:
        raise ValueError(f"dense oracle limited to n <= {DENSE_LIMIT}")
    _, inv = _perm_arrays(perm, n)
    m = np.zeros((n, n), dtype=bool)
    u, v = g.edges()
    m[inv[u], inv[v]] = True
    m[inv[v], inv[u]] = True
    counts = np.ones(n, dtype=np.int64)
    for k in range(n):
        nz = np.flatnonzero(m[k + 1:, k]) + k + 1
        counts[k] += len(nz)
        m[np.ix_(nz, nz)] = True
    return _report(g, counts)


def factor_etree_parents(g, perm) -> np.ndarray:
    """``parent[j]`` = smallest ``i > j`` with ``L(i, j) != 0`` (positions), or -1."""
    return symbolic_factor(g, perm)[1]


def cholesky_cost(report: FillReport) -> int:
    c = np.asarray(report.column_counts, dtype=np.int64)
    return int(np.dot(c, c))


def _node_of_vertex(etree, n: int) -> np.ndarray:
    node = np.full(n, -1, dtype=np.int64)
    for idx, nd in enumerate(etree.nodes):
        node[np.asarray(nd.vertices, dtype=np.int64)] = idx
    if np.any(node < 0):
        raise ValueError("etree does not cover every vertex")
    return node


def cross_block_fill(g, perm, etree) -> int:
    """Number of factor entries joining two etree nodes that are not ancestor-related.

    If every factor-etree parent lies in the same node as its child or in
    an ancestor node, every column's structure does too (structures follow
    the factor-etree path), so the answer is 0 without forming L.
    """
    g = _graph(g)
    if g.n == 0:
        return 0
    p, _ = _perm_arrays(perm, g.n)
    node = _node_of_vertex(etree, g.n)[p]  # by position
    counts, parent, _ = symbolic_factor(g, p)
    j = np.flatnonzero(parent >= 0)
    if np.all(is_ancestor_or_self(node[parent[j]], node[j])):
        return 0
    _, _, structs = symbolic_factor(g, p, keep_pattern=True)
    cols = np.repeat(np.arange(g.n), counts - 1)
    rows = np.concatenate(structs) if structs else np.empty(0, dtype=np.int64)
    a, b = node[rows], node[cols]
    related = is_ancestor_or_self(a, b) | is_ancestor_or_self(b, a)
    return int(np.count_nonzero(~related))
