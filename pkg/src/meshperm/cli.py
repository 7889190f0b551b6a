"""``meshperm order ...``: run the pipeline (and baselines) and emit CSV."""
from __future__ import annotations

import argparse
import csv
import os
import sys

from .bench import BASELINES, RunConfig, StageError, format_row, load_problem, run_baselines, run_pipeline, write_csv
from .io import ParseError
from .ordering import CLI_MODES

THREADS_ENV = "MESH_PERM_THREADS"


def _grid(text: str) -> tuple[int, int]:
    try:
        r, c = text.lower().split("x")
        return int(r), int(c)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected RxC, got {text!r}") from None


def _baselines(text: str) -> tuple[str, ...]:
    names = tuple(x.strip() for x in text.split(",") if x.strip())
    for name in names:
        if name not in BASELINES:
            raise argparse.ArgumentTypeError(f"unknown baseline {name!r} (choose from {', '.join(BASELINES)})")
    return names


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="meshperm", description="Patch-based nested-dissection orderings.")
    sub = parser.add_subparsers(dest="command", required=True)
    order = sub.add_parser("order", help="compute a fill-reducing permutation")
    src = order.add_mutually_exclusive_group(required=True)
    src.add_argument("--mesh", help="OFF or OBJ triangle mesh")
    src.add_argument("--matrix", help="Matrix Market file")
    src.add_argument("--grid", type=_grid, help="synthetic triangulated grid, e.g. 300x300")
    order.add_argument("--patch-size", type=int, default=256)
    order.add_argument("--patch-file", help="one patch id per (compressed) vertex per line")
    order.add_argument("--nd-level", type=int, default=None)
    order.add_argument("--schedule", choices=["post", "level"], default="post")
    order.add_argument("--local", choices=sorted(CLI_MODES), default="amd")
    order.add_argument("--block", type=int, default=1)
    order.add_argument("--seed", type=int, default=0)
    order.add_argument("--baselines", type=_baselines, default=())
    order.add_argument("--out-perm")
    order.add_argument("--out-etree")
    order.add_argument("--csv")
    order.add_argument("--threads", type=int, default=None)
    order.add_argument("--no-timing", action="store_true", help="write zeros in duration columns")
    return parser


def _threads(value: int | None) -> int:
    if value is None:
        value = int(os.environ.get(THREADS_ENV, "1") or 1)
    return max(1, value)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = RunConfig(mesh=args.mesh, matrix=args.matrix, grid=args.grid,
                           patch_size=args.patch_size, nd_level=args.nd_level, schedule=args.schedule,
                           local_mode=args.local, block_size=args.block, baselines=args.baselines,
                           seed=args.seed, patch_file=args.patch_file, out_perm=args.out_perm,
                           out_etree=args.out_etree, csv=args.csv, threads=_threads(args.threads),
                           timing=not args.no_timing)
        problem = load_problem(config)
        rows = [run_pipeline(config, problem).row]
        rows += [r.row for r in run_baselines(config, problem)]
    except (ParseError, StageError, ValueError, OSError) as exc:
        print(f"meshperm: error: {exc}", file=sys.stderr)
        return 1
    if config.csv:
        write_csv(rows, config.csv)
    else:
        writer = csv.DictWriter(sys.stdout, fieldnames=list(format_row(rows[0])))
        writer.writeheader()
        for row in rows:
            writer.writerow(format_row(row))
    return 0
