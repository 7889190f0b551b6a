"""Schedules over the etree, permutation assembly and block expansion."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .etree import EliminationTree, EtreeNode
from .graph import AdjacencyGraph, SubgraphView, induced_subgraph
from .ordering import minimum_degree


@dataclass
class Permutation:
    """``perm[new] = old`` and ``inverse[old] = new``."""

    perm: np.ndarray
    inverse: np.ndarray

    @classmethod
    def from_perm(cls, perm) -> "Permutation":
        p = np.asarray(perm, dtype=np.int64).ravel()
        inv = np.full(len(p), -1, dtype=np.int64)
        if p.size and (p.min() < 0 or p.max() >= len(p)):
            raise ValueError("permutation entry out of range")
        inv[p] = np.arange(len(p), dtype=np.int64)
        if np.any(inv < 0):
            raise ValueError("permutation has repeated entries")
        return cls(p, inv)

    @classmethod
    def identity(cls, n: int) -> "Permutation":
        a = np.arange(n, dtype=np.int64)
        return cls(a, a.copy())

    def __len__(self) -> int:
        return len(self.perm)


def schedule_postorder(etree: EliminationTree) -> list[int]:
    out: list[int] = []
    stack = [(0, False)] if len(etree) else []
    while stack:
        idx, expanded = stack.pop()
        if expanded or etree.is_leaf(idx):
            out.append(idx)
            continue
        left, right = etree.children(idx)
        stack.append((idx, True))
        stack.append((right, False))
        stack.append((left, False))
    return out


def schedule_levelorder(etree: EliminationTree) -> list[int]:
    out: list[int] = []
    for level in range(etree.nd_level, -1, -1):
        out.extend(range(2 ** level - 1, 2 ** (level + 1) - 1))
    return out


def validate_schedule(etree: EliminationTree, sequence) -> int | None:
    """``None`` if valid, else the first position where validity breaks.

    A schedule must list every node exactly once with children before
    their parent. A too-short schedule fails at position ``len(sequence)``.
    """
    size = len(etree)
    seen = [False] * size
    for pos, idx in enumerate(sequence):
        idx = int(idx)
        if idx < 0 or idx >= size or seen[idx]:
            return pos
        if any(not seen[c] for c in etree.children(idx)):
            return pos
        seen[idx] = True
    if len(sequence) != size:
        return len(sequence)
    return None


def _order_node(G: AdjacencyGraph, node: EtreeNode, mode: str) -> np.ndarray:
    view = induced_subgraph(G, node.vertices, check=False)
    return minimum_degree(view, mode).order


def compute_local_orders(etree: EliminationTree, G: AdjacencyGraph, mode: str = "approx_md",
                         threads: int = 1) -> EliminationTree:
    """Fill ``perm_local`` of every node from its induced subgraph; returns ``etree``."""
    if isinstance(G, SubgraphView):
        G = G.graph
    work = [nd for nd in etree.nodes if len(nd.vertices)]
    if threads > 1 and len(work) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            orders = list(pool.map(lambda nd: _order_node(G, nd, mode), work))
    else:
        orders = [_order_node(G, nd, mode) for nd in work]
    for nd, order in zip(work, orders):
        nd.perm_local = order
    for nd in etree.nodes:
        if not len(nd.vertices):
            nd.perm_local = np.empty(0, dtype=np.int64)
    return etree


def compute_perm(etree: EliminationTree, G: AdjacencyGraph, schedule, mode: str = "approx_md") -> Permutation:
    """Concatenate each node's reordered vertex list in schedule order.

    Nodes without a cached local permutation are ordered with ``mode`` first.
    """
    bad = validate_schedule(etree, schedule)
    if bad is not None:
        raise ValueError(f"invalid schedule at position {bad}")
    if isinstance(G, SubgraphView):
        G = G.graph
    parts = []
    for idx in schedule:
        nd = etree.nodes[idx]
        if not len(nd.vertices):
            continue
        if nd.perm_local is None:
            nd.perm_local = _order_node(G, nd, mode)
        parts.append(np.asarray(nd.vertices, dtype=np.int64)[nd.perm_local])
    perm = np.concatenate(parts) if parts else np.empty(0, dtype=np.int64)
    if len(perm) != G.n:
        raise ValueError("etree does not cover the graph")
    return Permutation.from_perm(perm)


def _expand(ids: np.ndarray, b: int) -> np.ndarray:
    ids = np.asarray(ids, dtype=np.int64)
    return (ids[:, None] * b + np.arange(b, dtype=np.int64)).ravel()


def expand_blocks(perm, etree: EliminationTree | None, b: int):
    """Lift a permutation (and etree) on blocks to the ``b``-times larger system."""
    if b < 1:
        raise ValueError("block size must be >= 1")
    p = np.asarray(getattr(perm, "perm", perm), dtype=np.int64)
    out = Permutation.from_perm(_expand(p, b))
    if etree is None:
        return out, None
    nodes = []
    for nd in etree.nodes:
        local = None if nd.perm_local is None else _expand(nd.perm_local, b)
        nodes.append(EtreeNode(_expand(nd.vertices, b), nd.level, local))
    return out, EliminationTree(nodes)
