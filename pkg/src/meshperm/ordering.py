"""Minimum-degree local orderings on a quotient-graph elimination model.

Eliminated vertices become elements; a variable's reach is its remaining
variable neighbors plus the boundaries of its adjacent elements. Elements
adjacent to a newly eliminated pivot are absorbed into the pivot's element.
No supervariable detection is done.
"""
from __future__ import annotations

import heapq
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .graph import AdjacencyGraph, SubgraphView

MODES = ("approx_md", "exact_md", "natural")
CLI_MODES = {"amd": "approx_md", "mmd": "exact_md", "natural": "natural"}


@dataclass
class LocalPermutation:
    order: np.ndarray
    mode: str


class EliminationState:
    """Variables, elements and degree bookkeeping during elimination."""

    def __init__(self, g):
        if isinstance(g, SubgraphView):
            g = g.graph
        self.n = g.n
        self.var_adj = [set(nb) for nb in g.adjacency_lists()]
        self.elem_adj: list[set | None] = [set() for _ in range(self.n)]
        self.boundary: dict[int, set] = {}
        self.eliminated = [False] * self.n
        self.remaining = self.n
        self.approx = [len(a) for a in self.var_adj]

    def reach(self, i: int) -> set:
        r = set(self.var_adj[i])
        for e in self.elem_adj[i]:
            r |= self.boundary[e]
        r.discard(i)
        return r

    def exact_degree(self, i: int) -> int:
        return len(self.reach(i))

    def eliminate(self, p: int, track_approx: bool = False) -> set:
        """Turn ``p`` into an element; returns its boundary ``Lp``.

        With ``track_approx`` the approximate degree of every ``i`` in ``Lp``
        becomes ``min(remaining - 1, d_i + |Lp| - 1,
        |A_i| + |Lp| - 1 + sum over other elements |Le \\ Lp|)``.
        """
        lp = self.reach(p)
        absorbed = self.elem_adj[p]
        boundary = self.boundary
        for e in absorbed:
            del boundary[e]
        self.eliminated[p] = True
        self.remaining -= 1
        var_adj, elem_adj = self.var_adj, self.elem_adj
        touched: list[int] = []
        for i in lp:
            adj = var_adj[i]
            adj.discard(p)
            if adj:
                var_adj[i] = adj - lp  # now reachable through element p
            ea = elem_adj[i]
            if absorbed:
                ea.difference_update(absorbed)
            if track_approx:
                touched.extend(ea)
        boundary[p] = lp
        var_adj[p] = set()
        elem_adj[p] = None
        if track_approx:
            # |Le \ Lp| = |Le| - |Le & Lp| for each element touching Lp
            outside = {e: len(boundary[e]) - c for e, c in Counter(touched).items()}
            size = len(lp) - 1
            cap = self.remaining - 1
            approx = self.approx
            get = outside.__getitem__
            for i in lp:
                ea = elem_adj[i]
                approx[i] = min(cap, approx[i] + size, len(var_adj[i]) + size + sum(map(get, ea)))
                ea.add(p)
        else:
            for i in lp:
                elem_adj[i].add(p)
        return lp


def approx_degree_bound_check(gv, state: EliminationState) -> dict[int, tuple[int, int]]:
    """``{v: (approx, exact)}`` for every uneliminated variable of ``state``."""
    return {v: (state.approx[v], state.exact_degree(v))
            for v in range(state.n) if not state.eliminated[v]}


def _order(state: EliminationState, exact: bool, observer=None) -> list[int]:
    """Multiple elimination by rounds.

    Each round eliminates, lowest id first, every minimum-degree variable
    not adjacent to one already eliminated in the round. Exact degrees of
    the touched variables are recomputed after the round; approximate
    degrees are updated after every elimination.
    """
    deg = [len(a) for a in state.var_adj] if exact else state.approx
    heap = [(d, v) for v, d in enumerate(deg)]
    heapq.heapify(heap)
    order = []
    done = state.eliminated
    while heap:
        dmin = heap[0][0]
        marked: set[int] = set()
        while heap and heap[0][0] == dmin:
            d, v = heapq.heappop(heap)
            if done[v] or deg[v] != d or v in marked:
                continue
            lp = state.eliminate(v, track_approx=not exact)
            order.append(v)
            marked |= lp
            if observer is not None:
                observer(state)
        for i in marked:
            if not done[i]:
                if exact:
                    deg[i] = state.exact_degree(i)
                heapq.heappush(heap, (deg[i], i))
        # drop stale entries so heap[0] is a live minimum
        while heap and (done[heap[0][1]] or deg[heap[0][1]] != heap[0][0]):
            heapq.heappop(heap)
    return order


def minimum_degree(gv, mode: str = "approx_md", observer=None) -> LocalPermutation:
    """Elimination order over the local indices of ``gv``.

    ``observer(state)`` is called after each elimination (testing hook).
    """
    mode = CLI_MODES.get(mode, mode)
    if mode not in MODES:
        raise ValueError(f"unknown local ordering mode {mode!r}")
    g = gv.graph if isinstance(gv, SubgraphView) else gv
    if mode == "natural" or g.n == 0:
        return LocalPermutation(np.arange(g.n, dtype=np.int64), mode)
    state = EliminationState(g)
    order = _order(state, mode == "exact_md", observer)
    return LocalPermutation(np.array(order, dtype=np.int64), mode)
