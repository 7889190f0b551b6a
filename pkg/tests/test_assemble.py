import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from helpers import grid_graph, path_graph, random_mesh_graph
from meshperm.assemble import (Permutation, compute_local_orders, compute_perm, expand_blocks,
                               schedule_levelorder, schedule_postorder, validate_schedule)
from meshperm.etree import EliminationTree, EtreeNode, build_etree
from meshperm.graph import GroupMap
from meshperm.patching import compute_patches
from meshperm.symbolic import cross_block_fill, elimination_fill


def _p3_tree():
    return EliminationTree([EtreeNode(np.array([1]), 0), EtreeNode(np.array([0]), 1),
                            EtreeNode(np.array([2]), 1)])


def random_schedule(tree, rng):
    """A uniformly chosen ready node at each step; always valid."""
    ready = [i for i in range(len(tree)) if tree.is_leaf(i)]
    done = set()
    out = []
    while ready:
        idx = ready.pop(int(rng.integers(len(ready))))
        out.append(idx)
        done.add(idx)
        if idx:
            parent = (idx - 1) // 2
            if all(c in done for c in tree.children(parent)):
                ready.append(parent)
    return out


def test_schedules_small_trees():
    assert schedule_postorder(EliminationTree.empty(0)) == [0]
    assert schedule_levelorder(EliminationTree.empty(0)) == [0]
    assert schedule_postorder(EliminationTree.empty(1)) == [1, 2, 0]
    assert schedule_levelorder(EliminationTree.empty(1)) == [1, 2, 0]
    assert schedule_postorder(EliminationTree.empty(2)) == [3, 4, 1, 5, 6, 2, 0]
    assert schedule_levelorder(EliminationTree.empty(2)) == [3, 4, 5, 6, 1, 2, 0]


def test_validate_schedule():
    t = EliminationTree.empty(1)
    assert validate_schedule(t, [1, 2, 0]) is None
    assert validate_schedule(t, [0, 1, 2]) == 0
    assert validate_schedule(t, [1, 1, 0]) == 1
    assert validate_schedule(t, [1, 2]) == 2
    assert validate_schedule(t, [1, 5, 0]) == 1
    for level in range(5):
        tree = EliminationTree.empty(level)
        assert validate_schedule(tree, schedule_postorder(tree)) is None
        assert validate_schedule(tree, schedule_levelorder(tree)) is None


def test_compute_perm_p3():
    g = path_graph(3)
    for sched in (schedule_postorder, schedule_levelorder):
        tree = _p3_tree()
        assert compute_perm(tree, g, sched(tree), "natural").perm.tolist() == [0, 2, 1]
    with pytest.raises(ValueError, match="invalid schedule"):
        compute_perm(_p3_tree(), g, [0, 1, 2])


def test_grid3_schedules_same_fill():
    g = grid_graph(3, 3)
    tree = build_etree(g, GroupMap.singletons(9), 1)
    compute_local_orders(tree, g, "exact_md")
    a = compute_perm(tree, g, schedule_postorder(tree))
    b = compute_perm(tree, g, schedule_levelorder(tree))
    assert elimination_fill(g, a).nnz_L == elimination_fill(g, b).nnz_L


def test_level_vs_post_differ_on_deeper_tree():
    g = grid_graph(12, 12)
    tree = build_etree(g, GroupMap.singletons(g.n), 2)
    compute_local_orders(tree, g)
    a = compute_perm(tree, g, schedule_postorder(tree)).perm
    b = compute_perm(tree, g, schedule_levelorder(tree)).perm
    assert not np.array_equal(a, b)
    assert elimination_fill(g, a).nnz_L == elimination_fill(g, b).nnz_L


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 1000))
def test_random_valid_schedules_same_fill(seed):
    rng = np.random.default_rng(seed)
    g = random_mesh_graph(400, seed)
    tree = build_etree(g, compute_patches(g, 20, seed).group_map(), 3, seed)
    compute_local_orders(tree, g)
    ref = elimination_fill(g, compute_perm(tree, g, schedule_postorder(tree))).nnz_L
    for _ in range(3):
        sched = random_schedule(tree, rng)
        assert validate_schedule(tree, sched) is None
        perm = compute_perm(tree, g, sched)
        assert sorted(perm.perm.tolist()) == list(range(g.n))
        assert elimination_fill(g, perm).nnz_L == ref
        assert cross_block_fill(g, perm, tree) == 0


def test_local_orders_threads_match():
    g = random_mesh_graph(600, 2)
    gm = compute_patches(g, 30).group_map()
    a = compute_local_orders(build_etree(g, gm, 3), g, threads=1)
    b = compute_local_orders(build_etree(g, gm, 3), g, threads=4)
    for x, y in zip(a.nodes, b.nodes):
        assert np.array_equal(x.perm_local, y.perm_local)


def test_expand_blocks_examples():
    assert expand_blocks([1, 0], None, 2)[0].perm.tolist() == [2, 3, 0, 1]
    assert expand_blocks([2, 0, 1], None, 2)[0].perm.tolist() == [4, 5, 0, 1, 2, 3]
    assert expand_blocks([2, 0, 1], None, 1)[0].perm.tolist() == [2, 0, 1]
    perm, tree = expand_blocks([0, 2, 1], _p3_tree(), 3)
    assert tree.nodes[0].vertices.tolist() == [3, 4, 5]
    assert len(perm) == 9


def test_permutation_validation():
    p = Permutation.from_perm([2, 0, 1])
    assert p.inverse.tolist() == [1, 2, 0]
    with pytest.raises(ValueError):
        Permutation.from_perm([0, 0, 1])
    with pytest.raises(ValueError):
        Permutation.from_perm([0, 3, 1])
