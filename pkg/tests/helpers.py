"""Small graph and mesh builders shared by the tests."""
from __future__ import annotations

import numpy as np
from scipy.spatial import Delaunay

from meshperm.bench import make_grid_mesh
from meshperm.graph import AdjacencyGraph, mesh_to_graph
from meshperm.io import TriangleMesh


def graph_from_edges(n, edges) -> AdjacencyGraph:
    e = np.asarray(list(edges), dtype=np.int64).reshape(-1, 2)
    return AdjacencyGraph.from_edges(n, e[:, 0], e[:, 1])


def path_graph(n):
    return graph_from_edges(n, [(i, i + 1) for i in range(n - 1)])


def star_graph(n, center=0):
    return graph_from_edges(n, [(center, v) for v in range(n) if v != center])


def cycle_graph(n):
    return graph_from_edges(n, [(i, (i + 1) % n) for i in range(n)])


def grid_graph(rows, cols):
    return mesh_to_graph(make_grid_mesh(rows, cols))


def random_mesh(n_points, seed) -> TriangleMesh:
    """Delaunay triangulation of uniform random points in the unit square."""
    pts = np.random.default_rng(seed).random((n_points, 2))
    tri = Delaunay(pts).simplices.astype(np.int64)
    return TriangleMesh(n_points, tri)


def random_mesh_graph(n_points, seed):
    return mesh_to_graph(random_mesh(n_points, seed))


def random_graph(n, p, seed):
    rng = np.random.default_rng(seed)
    iu, ju = np.triu_indices(n, 1)
    keep = rng.random(len(iu)) < p
    return graph_from_edges(n, np.stack([iu[keep], ju[keep]], 1))


def random_tree(n, seed):
    rng = np.random.default_rng(seed)
    return graph_from_edges(n, [(v, int(rng.integers(v))) for v in range(1, n)])


def leaves_up_order(tree: AdjacencyGraph) -> np.ndarray:
    """Repeatedly strip leaves; a zero-fill order for any forest."""
    deg = tree.degree().copy()
    done = np.zeros(tree.n, dtype=bool)
    order = []
    stack = [v for v in range(tree.n) if deg[v] <= 1]
    while stack:
        v = stack.pop()
        if done[v]:
            continue
        done[v] = True
        order.append(v)
        for u in tree.adj(v):
            if not done[u]:
                deg[u] -= 1
                if deg[u] <= 1:
                    stack.append(int(u))
    return np.array(order, dtype=np.int64)


def lattice_graph(rows, cols):
    """4-neighbour grid without diagonals, row-major ids."""
    idx = np.arange(rows * cols).reshape(rows, cols)
    edges = np.concatenate([np.stack([idx[:, :-1].ravel(), idx[:, 1:].ravel()], 1),
                            np.stack([idx[:-1].ravel(), idx[1:].ravel()], 1)])
    return graph_from_edges(rows * cols, edges)


def write_off(mesh: TriangleMesh, path) -> None:
    lines = ["OFF", f"{mesh.vertex_count} {len(mesh.triangles)} 0"]
    lines += ["0 0 0"] * mesh.vertex_count
    lines += [f"3 {a} {b} {c}" for a, b, c in mesh.triangles.tolist()]
    path.write_text("\n".join(lines) + "\n")
