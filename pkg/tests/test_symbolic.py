import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from helpers import (cycle_graph, graph_from_edges, grid_graph, leaves_up_order, path_graph,
                     random_graph, random_mesh_graph, random_tree, star_graph)
from meshperm.assemble import compute_perm, schedule_postorder
from meshperm.etree import EliminationTree, EtreeNode, build_etree, is_ancestor_or_self
from meshperm.graph import GroupMap
from meshperm.symbolic import (cholesky_cost, cross_block_fill, dense_elimination_fill, elimination_fill,
                               factor_etree_parents)


@pytest.mark.parametrize("n", [1, 2, 5, 40])
def test_path_natural(n):
    r = elimination_fill(path_graph(n), np.arange(n))
    assert r.nnz_L == 2 * n - 1
    assert r.nnz_A == 3 * n - 2
    assert r.fill_ratio == pytest.approx((2 * n - 1) / (3 * n - 2))
    assert cholesky_cost(r) == r.cost == 4 * (n - 1) + 1


@pytest.mark.parametrize("n", [2, 5, 30])
def test_star_center_first(n):
    r = elimination_fill(star_graph(n), np.arange(n))
    assert r.nnz_L == n * (n + 1) // 2


def test_c4_natural():
    r = elimination_fill(cycle_graph(4), np.arange(4))
    assert r.nnz_L == 9
    assert r.column_counts.tolist() == [3, 3, 2, 1]
    assert r.cost == 23
    assert dense_elimination_fill(cycle_graph(4), np.arange(4)).column_counts.tolist() == [3, 3, 2, 1]


def test_diagonal_pattern():
    g = graph_from_edges(6, [])
    r = elimination_fill(g, np.arange(6))
    assert r.nnz_L == 6 and r.cost == 6
    assert np.all(factor_etree_parents(g, np.arange(6)) == -1)


def test_factor_parents_path():
    assert factor_etree_parents(path_graph(5), np.arange(5)).tolist() == [1, 2, 3, 4, -1]


def test_factor_parents_respect_nd_tree():
    g = grid_graph(3, 3)
    tree = build_etree(g, GroupMap.singletons(9), 1)
    perm = compute_perm(tree, g, schedule_postorder(tree))
    parents = factor_etree_parents(g, perm)
    node = tree.node_of_vertex(9)
    col_node = node[perm.perm]
    has = parents >= 0
    assert np.all(is_ancestor_or_self(col_node[parents[has]], col_node[has]))


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 120), st.floats(0.01, 0.3), st.integers(0, 10 ** 6))
def test_oracle_random_graphs(n, p, seed):
    g = random_graph(n, p, seed)
    perm = np.random.default_rng(seed).permutation(n)
    a, b = elimination_fill(g, perm), dense_elimination_fill(g, perm)
    assert a.nnz_L == b.nnz_L
    assert np.array_equal(a.column_counts, b.column_counts)


def test_oracle_canonical_families():
    graphs = [path_graph(50), star_graph(30), cycle_graph(40), grid_graph(10, 14), random_mesh_graph(200, 0)]
    for g in graphs:
        for perm in (np.arange(g.n), np.arange(g.n)[::-1], np.random.default_rng(1).permutation(g.n)):
            assert elimination_fill(g, perm).nnz_L == dense_elimination_fill(g, perm).nnz_L


def test_dense_oracle_rejects_large():
    with pytest.raises(ValueError):
        dense_elimination_fill(path_graph(500), np.arange(500))


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 80), st.integers(0, 10 ** 6))
def test_relabeling_invariance(n, seed):
    rng = np.random.default_rng(seed)
    g = random_graph(n, 0.1, seed)
    perm = rng.permutation(n)
    pi = rng.permutation(n)  # new label of old vertex v is pi[v]
    u, v = g.edges()
    h = graph_from_edges(n, np.stack([pi[u], pi[v]], 1))
    assert elimination_fill(h, pi[perm]).nnz_L == elimination_fill(g, perm).nnz_L


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 150), st.integers(0, 10 ** 6))
def test_trees_leaves_up_zero_fill(n, seed):
    g = random_tree(n, seed)
    assert elimination_fill(g, leaves_up_order(g)).nnz_L == n + g.edge_count


def test_cross_block_fill_examples():
    g = grid_graph(3, 3)
    tree = build_etree(g, GroupMap.singletons(9), 1)
    perm = compute_perm(tree, g, schedule_postorder(tree))
    assert cross_block_fill(g, perm, tree) == 0
    single = EliminationTree([EtreeNode(np.arange(9), 0)])
    assert cross_block_fill(g, np.random.default_rng(0).permutation(9), single) == 0


def test_cross_block_fill_detects_leak():
    # path 0-1-2-3 with a "separator" {3} that leaves edge 1-2 crossing
    g = path_graph(4)
    tree = EliminationTree([EtreeNode(np.array([3]), 0), EtreeNode(np.array([0, 1]), 1),
                            EtreeNode(np.array([2]), 1)])
    perm = compute_perm(tree, g, schedule_postorder(tree), "natural")
    assert cross_block_fill(g, perm, tree) > 0
