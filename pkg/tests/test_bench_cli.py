from __future__ import annotations

import csv
import io as stdio
from contextlib import redirect_stderr, redirect_stdout

import numpy as np
import pytest

from meshperm.bench import (CSV_COLUMNS, RunConfig, load_problem, make_grid_mesh, run_baseline,
                            run_pipeline)
from meshperm.cli import main
from meshperm.io import write_matrix_market, SparsePattern
from meshperm.symbolic import cross_block_fill, elimination_fill


def _run_cli(*argv):
    out, err = stdio.StringIO(), stdio.StringIO()
    with redirect_stdout(out), redirect_stderr(err):
        code = main(list(argv))
    return code, out.getvalue(), err.getvalue()


def _write_path_matrix(path, n):
    entries = [(i, i) for i in range(n)] + [(i, i + 1) for i in range(n - 1)]
    write_matrix_market(SparsePattern.from_entries(n, entries).symmetrized(), path)


def _write_star_matrix(path, n):
    entries = [(i, i) for i in range(n)] + [(0, i) for i in range(1, n)]
    write_matrix_market(SparsePattern.from_entries(n, entries).symmetrized(), path)


@pytest.mark.parametrize("rows, cols", [(2, 2), (3, 3), (4, 7)])
def test_make_grid_mesh_counts(rows, cols):
    mesh = make_grid_mesh(rows, cols)
    assert mesh.vertex_count == rows * cols
    assert len(mesh.triangles) == 2 * (rows - 1) * (cols - 1)


def test_make_grid_mesh_rejects_small():
    with pytest.raises(ValueError):
        make_grid_mesh(1, 5)


def test_run_config_validation():
    with pytest.raises(ValueError):
        RunConfig()
    with pytest.raises(ValueError):
        RunConfig(grid=(4, 4), mesh="x.off")
    with pytest.raises(ValueError):
        RunConfig(grid=(4, 4), patch_size=0)
    with pytest.raises(ValueError):
        RunConfig(grid=(4, 4), baselines=("metis",))
    assert RunConfig(grid=(4, 4), local_mode="mmd").local_mode == "exact_md"


def test_pipeline_grid32_defaults():
    config = RunConfig(grid=(32, 32))
    res = run_pipeline(config)
    assert res.row.method == "ours-256"
    assert res.row.n == 1024
    assert cross_block_fill(load_problem(config).system, res.perm, res.etree) == 0
    assert sorted(res.perm.perm.tolist()) == list(range(1024))
    for name in ("t_patch", "t_quotient", "t_etree", "t_local", "t_assemble"):
        assert getattr(res.row, name) >= 0


def test_patch_size_one_equals_nd_vertex():
    config = RunConfig(grid=(24, 24), patch_size=1, nd_level=3)
    ours = run_pipeline(config)
    base = run_baseline("nd-vertex", config)
    assert np.array_equal(ours.perm.perm, base.perm.perm)
    assert ours.row.nnz_L == base.row.nnz_L


def test_nd_level_zero_natural_is_identity():
    config = RunConfig(grid=(10, 10), nd_level=0, local_mode="natural")
    res = run_pipeline(config)
    assert res.perm.perm.tolist() == list(range(100))
    nat = run_baseline("natural", config)
    assert res.row.nnz_L == nat.row.nnz_L


def test_baselines_path_and_star(tmp_path):
    n = 12
    _write_path_matrix(tmp_path / "p.mtx", n)
    row = run_baseline("natural", RunConfig(matrix=str(tmp_path / "p.mtx"))).row
    assert row.nnz_L == 2 * n - 1 and row.fill_ratio == pytest.approx((2 * n - 1) / (3 * n - 2))
    _write_star_matrix(tmp_path / "s.mtx", n)
    row = run_baseline("md", RunConfig(matrix=str(tmp_path / "s.mtx"))).row
    assert row.nnz_L == 2 * n - 1


def test_block_pipeline_fill_on_full_system():
    config = RunConfig(grid=(16, 16), block_size=2)
    res = run_pipeline(config)
    problem = load_problem(config)
    assert res.row.n == 512
    assert res.row.nnz_L == elimination_fill(problem.system, res.perm).nnz_L
    pairs = res.perm.perm.reshape(-1, 2)
    assert np.all(pairs[:, 1] == pairs[:, 0] + 1) and np.all(pairs[:, 0] % 2 == 0)


def test_user_patch_file(tmp_path):
    patches = (np.arange(64) % 8 >= 4).astype(int)
    (tmp_path / "p.txt").write_text("".join(f"{p}\n" for p in patches))
    res = run_pipeline(RunConfig(grid=(8, 8), patch_file=str(tmp_path / "p.txt"), nd_level=1, min_size=0))
    assert res.row.method == "ours-user"
    (tmp_path / "bad.txt").write_text("".join(f"{i % 2}\n" for i in range(64)))
    with pytest.raises(Exception, match="patch"):
        run_pipeline(RunConfig(grid=(8, 8), patch_file=str(tmp_path / "bad.txt")))


def test_cli_stdout_csv_and_artifacts(tmp_path):
    code, out, err = _run_cli("order", "--grid", "12x12", "--patch-size", "16", "--nd-level", "2",
                              "--baselines", "natural,md,nd-vertex", "--out-perm", str(tmp_path / "o.perm"),
                              "--out-etree", str(tmp_path / "o.etree"))
    assert code == 0, err
    rows = list(csv.DictReader(stdio.StringIO(out)))
    assert list(rows[0]) == CSV_COLUMNS
    assert [r["method"] for r in rows] == ["ours-16", "natural", "md", "nd-vertex"]
    perm = [int(x) for x in (tmp_path / "o.perm").read_text().split()]
    assert sorted(perm) == list(range(144))
    lines = (tmp_path / "o.etree").read_text().splitlines()
    assert len(lines) == 7 and lines[0].startswith("0 0 ")


def test_cli_no_timing_is_reproducible(tmp_path):
    args = ["order", "--grid", "20x20", "--patch-size", "32", "--baselines", "md", "--no-timing"]
    _, a, _ = _run_cli(*args, "--csv", str(tmp_path / "a.csv"))
    _, b, _ = _run_cli(*args, "--csv", str(tmp_path / "b.csv"))
    ta, tb = (tmp_path / "a.csv").read_text(), (tmp_path / "b.csv").read_text()
    assert ta == tb
    for row in csv.DictReader(stdio.StringIO(ta)):
        assert all(float(row[c]) == 0.0 for c in CSV_COLUMNS if c.startswith("t_"))


def test_cli_errors(tmp_path):
    (tmp_path / "bad.off").write_text("OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 7\n")
    code, _, err = _run_cli("order", "--mesh", str(tmp_path / "bad.off"))
    assert code == 1 and "index out of range" in err
    code, _, err = _run_cli("order", "--mesh", str(tmp_path / "missing.off"))
    assert code == 1 and "error" in err
    with pytest.raises(SystemExit):
        _run_cli("order", "--grid", "3by3")


def test_threads_env_fallback(tmp_path, monkeypatch):
    monkeypatch.setenv("MESH_PERM_THREADS", "3")
    code, _, err = _run_cli("order", "--grid", "16x16", "--patch-size", "16", "--nd-level", "2",
                            "--out-perm", str(tmp_path / "a.perm"))
    assert code == 0, err
    monkeypatch.delenv("MESH_PERM_THREADS")
    _run_cli("order", "--grid", "16x16", "--patch-size", "16", "--nd-level", "2",
             "--out-perm", str(tmp_path / "b.perm"))
    assert (tmp_path / "a.perm").read_bytes() == (tmp_path / "b.perm").read_bytes()
