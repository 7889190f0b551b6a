"""Patch-guided nested dissection into a full binary tree stored in an array."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .graph import (AdjacencyGraph, QuotientGraph, SubgraphView, as_assignment,
                    build_quotient, induced_subgraph, quotient_remove, restrict_quotient)
from .partition import (DEFAULT_BALANCE_TOL, SeparatorResult, bipartition_quotient,
                        bipartition_vertices, refine_separator, super_separator)

MAX_DEFAULT_LEVEL = 8
LEAF_TARGET = 512
MIN_SUBGRAPH = 32


@dataclass
class EtreeNode:
    vertices: np.ndarray
    level: int
    perm_local: np.ndarray | None = None


@dataclass
class EliminationTree:
    nodes: list[EtreeNode] = field(default_factory=list)

    @classmethod
    def empty(cls, nd_level: int) -> "EliminationTree":
        size = 2 ** (nd_level + 1) - 1
        return cls([EtreeNode(np.empty(0, dtype=np.int64), node_level(i)) for i in range(size)])

    @property
    def nd_level(self) -> int:
        return node_level(len(self.nodes) - 1) if self.nodes else -1

    def __len__(self) -> int:
        return len(self.nodes)

    def children(self, idx: int) -> tuple[int, ...]:
        c = 2 * idx + 1
        return (c, c + 1) if c + 1 < len(self.nodes) else ()

    def is_leaf(self, idx: int) -> bool:
        return 2 * idx + 1 >= len(self.nodes)

    def vertex_count(self) -> int:
        return sum(len(nd.vertices) for nd in self.nodes)

    def node_of_vertex(self, n: int) -> np.ndarray:
        node = np.full(n, -1, dtype=np.int64)
        for idx, nd in enumerate(self.nodes):
            if np.any(node[nd.vertices] >= 0):
                raise ValueError("vertex appears in two etree nodes")
            node[nd.vertices] = idx
        if np.any(node < 0):
            raise ValueError("etree does not cover every vertex")
        return node

    def check(self, g: AdjacencyGraph) -> None:
        """Vertex conservation, stored levels and edge locality."""
        if isinstance(g, SubgraphView):
            g = g.graph
        n_nodes = len(self.nodes)
        if n_nodes == 0 or (n_nodes + 1) & n_nodes:
            raise ValueError("etree size is not 2^(L+1) - 1")
        for idx, nd in enumerate(self.nodes):
            if nd.level != node_level(idx):
                raise ValueError(f"node {idx} stores level {nd.level}")
        node = self.node_of_vertex(g.n)
        u, v = g.edges()
        a, b = node[u], node[v]
        if not np.all(is_ancestor_or_self(a, b) | is_ancestor_or_self(b, a)):
            raise ValueError("edge joins etree nodes that are not ancestor-related")


def node_level(idx: int) -> int:
    return (idx + 1).bit_length() - 1


def is_ancestor_or_self(a, b) -> np.ndarray:
    """Elementwise: heap node ``a`` is ``b`` or one of its ancestors."""
    ha = np.asarray(a, dtype=np.int64) + 1
    hb = np.asarray(b, dtype=np.int64) + 1
    shift = np.frexp(hb)[1] - np.frexp(ha)[1]  # difference of bit lengths
    ok = shift >= 0
    return ok & ((hb >> np.where(ok, shift, 0)) == ha)


def default_nd_level(n: int) -> int:
    if n < 2 * LEAF_TARGET:
        return 0
    return min(MAX_DEFAULT_LEVEL, int(math.floor(math.log2(n / LEAF_TARGET))))


def _node_seed(seed, idx: int):
    return [int(seed), int(idx)]


def get_separator(gv: SubgraphView, gmap, q: QuotientGraph, seed=0,
                  balance_tol: float = DEFAULT_BALANCE_TOL) -> SeparatorResult:
    """Separator of ``gv`` guided by the quotient ``q`` (global ids in the result).

    With a single alive patch the bisection runs on the vertices of ``gv``
    (``build_etree`` itself stops early in that case).
    """
    assign = as_assignment(gmap)
    g = gv.graph
    if q.alive_count <= 1:
        part = bipartition_vertices(g, balance_tol, seed)
        local_map = np.arange(g.n, dtype=np.int64)
    else:
        part = bipartition_quotient(q, balance_tol, seed)
        local_map = assign[gv.global_ids]
    sup = super_separator(g, local_map, part)
    res = refine_separator(g, sup, local_map, part, balance_tol)
    return SeparatorResult(gv.to_global(res.s), gv.to_global(res.g_left), gv.to_global(res.g_right))


def build_etree(G: AdjacencyGraph, gmap, nd_level: int, seed=0,
                balance_tol: float = DEFAULT_BALANCE_TOL, min_size: int = 0,
                quotient: QuotientGraph | None = None) -> EliminationTree:
    """Nested dissection to depth ``nd_level``.

    The quotient graph is built once (or taken from ``quotient``, which is
    consumed) and updated incrementally down the recursion. A subgraph with
    fewer than ``min_size`` vertices or one alive patch stops early: it is
    stored whole at its node and the node's descendants stay empty.
    """
    if nd_level < 0:
        raise ValueError("nd_level must be >= 0")
    if isinstance(G, SubgraphView):
        G = G.graph
    assign = as_assignment(gmap)
    if len(assign) != G.n:
        raise ValueError("group map does not cover the graph")
    tree = EliminationTree.empty(nd_level)
    q = quotient if quotient is not None else build_quotient(G, gmap)
    root = SubgraphView(np.arange(G.n, dtype=np.int64), G)

    def recurse(idx: int, view: SubgraphView, q: QuotientGraph, depth: int):
        if depth == 0 or view.n < max(min_size, 2) or q.alive_count <= 1:
            tree.nodes[idx].vertices = np.sort(view.global_ids)
            return
        res = get_separator(view, assign, q, _node_seed(seed, idx), balance_tol)
        tree.nodes[idx].vertices = res.s
        quotient_remove(q, G, assign, res.s)
        q_left = restrict_quotient(q, G, assign, res.g_left, res.g_right)
        q_right = restrict_quotient(q, G, assign, res.g_right, res.g_left)
        # views are taken from G so local ids follow ascending global ids
        recurse(2 * idx + 1, induced_subgraph(G, res.g_left, check=False), q_left, depth - 1)
        recurse(2 * idx + 2, induced_subgraph(G, res.g_right, check=False), q_right, depth - 1)

    recurse(0, root, q, nd_level)
    return tree


def build_etree_vertex(G: AdjacencyGraph, nd_level: int, seed=0,
                       balance_tol: float = DEFAULT_BALANCE_TOL, min_size: int = 0) -> EliminationTree:
    """Classical vertex-level nested dissection with the same separator code.

    Serves as the reference for the singleton-patch limiting case.
    """
    if isinstance(G, SubgraphView):
        G = G.graph
    tree = EliminationTree.empty(nd_level)

    def recurse(idx: int, view: SubgraphView, depth: int):
        if depth == 0 or view.n < max(min_size, 2):
            tree.nodes[idx].vertices = np.sort(view.global_ids)
            return
        g = view.graph
        part = bipartition_vertices(g, balance_tol, _node_seed(seed, idx))
        ids = np.arange(g.n, dtype=np.int64)
        res = refine_separator(g, super_separator(g, ids, part), ids, part, balance_tol)
        tree.nodes[idx].vertices = view.to_global(res.s)
        recurse(2 * idx + 1, induced_subgraph(G, view.to_global(res.g_left), check=False), depth - 1)
        recurse(2 * idx + 2, induced_subgraph(G, view.to_global(res.g_right), check=False), depth - 1)

    recurse(0, SubgraphView(np.arange(G.n, dtype=np.int64), G), nd_level)
    return tree
