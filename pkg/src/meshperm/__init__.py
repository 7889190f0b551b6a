"""Fill-reducing orderings for mesh matrices via patch quotient graphs."""
from .assemble import (Permutation, compute_local_orders, compute_perm, expand_blocks,
                       schedule_levelorder, schedule_postorder, validate_schedule)
from .bench import BenchRow, RunConfig, make_grid_mesh, run_baselines, run_pipeline
from .etree import EliminationTree, EtreeNode, build_etree, default_nd_level, get_separator
from .graph import (AdjacencyGraph, GroupMap, QuotientGraph, SubgraphView, build_graph,
                    build_quotient, induced_subgraph, mesh_to_graph, quotient_remove)
from .io import ParseError, SparsePattern, TriangleMesh, load_mesh, parse_matrix_market
from .ordering import LocalPermutation, minimum_degree
from .partition import Bipartition, SeparatorResult, bipartition_quotient
from .patching import PatchPartition, compute_patches
from .symbolic import FillReport, cross_block_fill, elimination_fill

__version__ = "0.1.0"
