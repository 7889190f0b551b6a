"""End-to-end pipeline runs with per-stage timing, plus internal baselines."""
from __future__ import annotations

import csv
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import io
from .assemble import (Permutation, compute_local_orders, compute_perm, expand_blocks,
                       schedule_levelorder, schedule_postorder)
from .etree import MIN_SUBGRAPH, EliminationTree, EtreeNode, build_etree, default_nd_level
from .graph import (AdjacencyGraph, GroupMap, build_graph, build_quotient, compress_blocks,
                    mesh_pattern)
from .ordering import CLI_MODES, minimum_degree
from .partition import DEFAULT_BALANCE_TOL
from .patching import DEFAULT_PATCH_SIZE, compute_patches, validate_user_patches
from .symbolic import FillReport, cross_block_fill, elimination_fill

BASELINES = ("natural", "md", "nd-vertex")


class StageError(RuntimeError):
    """Failure inside a named pipeline stage."""

    def __init__(self, stage: str, cause: Exception):
        self.stage = stage
        super().__init__(f"{stage}: {cause}")


@dataclass
class RunConfig:
    mesh: str | None = None
    matrix: str | None = None
    grid: tuple[int, int] | None = None
    patch_size: int = DEFAULT_PATCH_SIZE
    nd_level: int | None = None
    schedule: str = "post"
    local_mode: str = "approx_md"
    block_size: int = 1
    baselines: tuple[str, ...] = ()
    seed: int = 0
    balance_tol: float = DEFAULT_BALANCE_TOL
    min_size: int = MIN_SUBGRAPH
    patch_file: str | None = None
    out_perm: str | None = None
    out_etree: str | None = None
    csv: str | None = None
    threads: int = 1
    timing: bool = True

    def __post_init__(self):
        given = [x is not None for x in (self.mesh, self.matrix, self.grid)]
        if sum(given) != 1:
            raise ValueError("exactly one of mesh, matrix, grid must be given")
        if self.patch_size < 1:
            raise ValueError("patch_size must be >= 1")
        if self.block_size < 1:
            raise ValueError("block_size must be >= 1")
        if self.schedule not in ("post", "level"):
            raise ValueError(f"unknown schedule {self.schedule!r}")
        self.local_mode = CLI_MODES.get(self.local_mode, self.local_mode)
        for b in self.baselines:
            if b not in BASELINES:
                raise ValueError(f"unknown baseline {b!r}")

    @property
    def input_id(self) -> str:
        if self.grid is not None:
            return f"grid{self.grid[0]}x{self.grid[1]}"
        return Path(self.mesh or self.matrix).name


@dataclass
class BenchRow:
    input: str
    n: int
    nnz_A: int
    method: str
    patch_size: int
    nd_level: int
    t_patch: float = 0.0
    t_quotient: float = 0.0
    t_etree: float = 0.0
    t_local: float = 0.0
    t_assemble: float = 0.0
    nnz_L: int = 0
    fill_ratio: float = 0.0
    cost: int = 0

    @property
    def t_separator(self) -> float:
        return self.t_patch + self.t_quotient + self.t_etree

    @property
    def t_total(self) -> float:
        return self.t_separator + self.t_local + self.t_assemble


@dataclass
class PipelineResult:
    row: BenchRow
    perm: Permutation
    etree: EliminationTree
    fill: FillReport
    patches: GroupMap | None = None
    extra: dict = field(default_factory=dict)


@dataclass
class Problem:
    """The system to order: ``system`` is the full graph, ``graph`` its block compression."""

    system: AdjacencyGraph
    graph: AdjacencyGraph
    block_size: int
    nnz_A: int


def make_grid_mesh(rows: int, cols: int) -> io.TriangleMesh:
    """Row-major grid; quad (a b / c d) is split into (a, b, d) and (a, d, c)."""
    if rows < 2 or cols < 2:
        raise ValueError("grid needs at least 2 rows and 2 columns")
    idx = np.arange(rows * cols, dtype=np.int64).reshape(rows, cols)
    a, b = idx[:-1, :-1].ravel(), idx[:-1, 1:].ravel()
    c, d = idx[1:, :-1].ravel(), idx[1:, 1:].ravel()
    tri = np.stack([np.stack([a, b, d], 1), np.stack([a, d, c], 1)], 1).reshape(-1, 3)
    return io.TriangleMesh(rows * cols, tri)


def load_problem(config: RunConfig) -> Problem:
    b = config.block_size
    if config.matrix is not None:
        pattern = io.parse_matrix_market(config.matrix)
    else:
        mesh = make_grid_mesh(*config.grid) if config.grid is not None else io.load_mesh(config.mesh)
        pattern = mesh_pattern(mesh, b)
    system = build_graph(pattern)
    graph = compress_blocks(pattern, b) if b > 1 else system
    return Problem(system, graph, b, system.n + 2 * system.edge_count)


class _Timer:
    def __init__(self):
        self.ms: dict[str, float] = {}

    def run(self, stage: str, fn, *args, **kwargs):
        t0 = time.perf_counter()
        try:
            out = fn(*args, **kwargs)
        except StageError:
            raise
        except Exception as exc:  # surface the stage name
            raise StageError(stage, exc) from exc
        self.ms[stage] = self.ms.get(stage, 0.0) + (time.perf_counter() - t0) * 1e3
        return out


def _finish(problem: Problem, config: RunConfig, method: str, patch_size: int, nd_level: int,
            timer: _Timer, perm: Permutation, etree: EliminationTree, patches=None) -> PipelineResult:
    """Expand blocks, verify, measure fill, build the row and write artifacts."""
    if problem.block_size > 1:
        perm, etree = timer.run("assemble", expand_blocks, perm, etree, problem.block_size)
    if len(perm) != problem.system.n:
        raise StageError("check", ValueError("permutation length differs from system size"))
    leak = cross_block_fill(problem.system, perm, etree)
    if leak:
        raise StageError("check", ValueError(f"{leak} factor entries cross sibling subtrees"))
    fill = elimination_fill(problem.system, perm)
    ms = timer.ms if config.timing else {}
    row = BenchRow(config.input_id, problem.system.n, fill.nnz_A, method, patch_size, nd_level,
                   ms.get("patch", 0.0), ms.get("quotient", 0.0), ms.get("etree", 0.0),
                   ms.get("local", 0.0), ms.get("assemble", 0.0),
                   fill.nnz_L, fill.fill_ratio, fill.cost)
    return PipelineResult(row, perm, etree, fill, patches)


def _nd(problem: Problem, config: RunConfig, gmap_fn, method: str, patch_size: int) -> PipelineResult:
    G = problem.graph
    nd_level = config.nd_level if config.nd_level is not None else default_nd_level(G.n)
    timer = _Timer()
    gmap = timer.run("patch", gmap_fn)
    q = timer.run("quotient", build_quotient, G, gmap)
    etree = timer.run("etree", build_etree, G, gmap, nd_level, config.seed, config.balance_tol,
                      config.min_size, q)
    timer.run("local", compute_local_orders, etree, G, config.local_mode, config.threads)
    sched_fn = schedule_postorder if config.schedule == "post" else schedule_levelorder

    def assemble():
        return compute_perm(etree, G, sched_fn(etree), config.local_mode)

    perm = timer.run("assemble", assemble)
    return _finish(problem, config, method, patch_size, nd_level, timer, perm, etree, gmap)


def run_pipeline(config: RunConfig, problem: Problem | None = None) -> PipelineResult:
    """Patches, etree, local orders and assembly, each timed."""
    problem = problem or load_problem(config)
    G = problem.graph

    if config.patch_file is not None:
        def gmap_fn():
            gmap = GroupMap.from_assignment(io.read_patch_file(config.patch_file))
            if len(gmap) != G.n:
                raise ValueError(f"patch file lists {len(gmap)} ids for {G.n} vertices")
            report = validate_user_patches(gmap, G)
            if not report.connected:
                raise ValueError(f"disconnected user patches: {report.disconnected.tolist()[:10]}")
            return gmap
        method = "ours-user"
    else:
        def gmap_fn():
            return compute_patches(G, config.patch_size, config.seed).group_map()
        method = f"ours-{config.patch_size}"

    result = _nd(problem, config, gmap_fn, method, config.patch_size)
    if config.out_perm:
        io.write_permutation(result.perm, config.out_perm)
    if config.out_etree:
        io.write_etree(result.etree, config.out_etree)
    return result


def _single_node_tree(n: int, order: np.ndarray) -> EliminationTree:
    return EliminationTree([EtreeNode(np.arange(n, dtype=np.int64), 0, order)])


def run_baseline(name: str, config: RunConfig, problem: Problem | None = None) -> PipelineResult:
    problem = problem or load_problem(config)
    G = problem.graph
    if name == "nd-vertex":
        return _nd(problem, config, lambda: GroupMap.singletons(G.n), "nd-vertex", 1)
    timer = _Timer()
    if name == "natural":
        order = timer.run("local", np.arange, G.n, dtype=np.int64)
    elif name == "md":
        mode = "exact_md" if config.local_mode == "exact_md" else "approx_md"
        order = timer.run("local", lambda: minimum_degree(G, mode).order)
    else:
        raise ValueError(f"unknown baseline {name!r}")
    etree = _single_node_tree(G.n, order)
    perm = timer.run("assemble", compute_perm, etree, G, [0])
    return _finish(problem, config, name, 0, 0, timer, perm, etree)


def run_baselines(config: RunConfig, problem: Problem | None = None) -> list[PipelineResult]:
    problem = problem or load_problem(config)
    return [run_baseline(name, config, problem) for name in config.baselines]


CSV_COLUMNS = [f.name for f in fields(BenchRow)]


def format_row(row: BenchRow) -> dict[str, str]:
    out = {}
    for key, value in asdict(row).items():
        if key.startswith("t_"):
            out[key] = f"{value:.3f}"
        elif key == "fill_ratio":
            out[key] = f"{value:.6f}"
        else:
            out[key] = str(value)
    return out


def write_csv(rows: list[BenchRow], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
        writer.writeheader()
        for row in rows:
            writer.writerow(format_row(row))
