"""Readers and writers for meshes, sparse patterns, permutations and etrees.

Supported inputs are ASCII OFF, a ``v``/``f`` subset of Wavefront OBJ and
Matrix Market coordinate files. Only structure is kept: vertex coordinates
and numeric matrix values are read past and discarded.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING, Iterable, Sequence

import numpy as np

if TYPE_CHECKING:  # pragma: no cover
    from .etree import EliminationTree


class ParseError(ValueError):
    """Malformed input file. ``line`` is 1-based when known."""

    def __init__(self, message: str, line: int | None = None, path=None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}"
        if line is not None:
            where += f":{line}" if where else f"line {line}"
        super().__init__(f"{where}: {message}" if where else message)


@dataclass
class TriangleMesh:
    vertex_count: int
    triangles: np.ndarray = field(default_factory=lambda: np.empty((0, 3), dtype=np.int64))

    def __post_init__(self):
        tri = np.asarray(self.triangles, dtype=np.int64).reshape(-1, 3)
        if tri.size:
            if tri.min() < 0 or tri.max() >= self.vertex_count:
                raise ValueError("triangle index out of range")
            if np.any((tri[:, 0] == tri[:, 1]) | (tri[:, 1] == tri[:, 2]) | (tri[:, 0] == tri[:, 2])):
                raise ValueError("degenerate triangle")
        self.triangles = tri

    @property
    def face_count(self) -> int:
        return len(self.triangles)


@dataclass
class SparsePattern:
    """Structural nonzeros of a square matrix as parallel index arrays.

    Entries are stored deduplicated and sorted by (row, col). Use
    :meth:`symmetrized` to add mirrored entries.
    """

    n: int
    rows: np.ndarray
    cols: np.ndarray

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=np.int64).ravel()
        cols = np.asarray(self.cols, dtype=np.int64).ravel()
        if rows.shape != cols.shape:
            raise ValueError("rows and cols differ in length")
        if rows.size and (min(rows.min(), cols.min()) < 0 or max(rows.max(), cols.max()) >= self.n):
            raise ValueError("pattern index out of range")
        key = np.unique(rows * max(self.n, 1) + cols)
        self.rows = key // max(self.n, 1)
        self.cols = key % max(self.n, 1)

    @classmethod
    def from_entries(cls, n: int, entries: Iterable[tuple[int, int]]) -> "SparsePattern":
        pairs = np.array(list(entries), dtype=np.int64).reshape(-1, 2)
        return cls(n, pairs[:, 0], pairs[:, 1])

    @property
    def entries(self) -> set[tuple[int, int]]:
        return set(zip(self.rows.tolist(), self.cols.tolist()))

    @property
    def nnz(self) -> int:
        return len(self.rows)

    def symmetrized(self) -> "SparsePattern":
        return SparsePattern(self.n, np.concatenate([self.rows, self.cols]), np.concatenate([self.cols, self.rows]))

    def is_symmetric(self) -> bool:
        fwd = self.rows * max(self.n, 1) + self.cols
        bwd = np.sort(self.cols * max(self.n, 1) + self.rows)
        return np.array_equal(fwd, bwd)

    def with_diagonal(self) -> "SparsePattern":
        d = np.arange(self.n, dtype=np.int64)
        return SparsePattern(self.n, np.concatenate([self.rows, d]), np.concatenate([self.cols, d]))


def _content_lines(path):
    """Yield (line number, tokens) for non-blank, non-comment lines."""
    with open(path, "r") as fh:
        for lineno, raw in enumerate(fh, start=1):
            text = raw.split("#", 1)[0].strip()
            if text:
                yield lineno, text.split()


def _int(token: str, lineno: int, path, what: str) -> int:
    try:
        return int(token)
    except ValueError:
        raise ParseError(f"non-integer {what} {token!r}", lineno, path) from None


def _fan(face: Sequence[int]) -> list[tuple[int, int, int]]:
    return [(face[0], face[k], face[k + 1]) for k in range(1, len(face) - 1)]


def parse_off(path) -> TriangleMesh:
    """Read an ASCII OFF file; polygons are fan-triangulated from their first vertex."""
    lines = _content_lines(path)
    try:
        lineno, tokens = next(lines)
    except StopIteration:
        raise ParseError("empty file", None, path) from None
    head = tokens[0]
    if not head.endswith("OFF"):
        raise ParseError(f"missing OFF header, got {head!r}", lineno, path)
    counts = tokens[1:]
    if not counts:
        try:
            lineno, counts = next(lines)
        except StopIteration:
            raise ParseError("missing vertex/face counts", lineno, path) from None
    if len(counts) < 2:
        raise ParseError("malformed header counts", lineno, path)
    nv = _int(counts[0], lineno, path, "vertex count")
    nf = _int(counts[1], lineno, path, "face count")
    if nv < 0 or nf < 0:
        raise ParseError("negative count in header", lineno, path)

    for k in range(nv):
        try:
            lineno, tokens = next(lines)
        except StopIteration:
            raise ParseError(f"expected {nv} vertices, found {k}", lineno, path) from None
        if len(tokens) < 3:
            raise ParseError("vertex line needs 3 coordinates", lineno, path)

    triangles: list[tuple[int, int, int]] = []
    for k in range(nf):
        try:
            lineno, tokens = next(lines)
        except StopIteration:
            raise ParseError(f"expected {nf} faces, found {k}", lineno, path) from None
        size = _int(tokens[0], lineno, path, "face size")
        if size < 3 or len(tokens) < size + 1:
            raise ParseError(f"bad face size {size}", lineno, path)
        face = [_int(t, lineno, path, "vertex index") for t in tokens[1:size + 1]]
        for idx in face:
            if idx < 0 or idx >= nv:
                raise ParseError(f"index out of range: {idx} (vertex count {nv})", lineno, path)
        if len(set(face)) != len(face):
            raise ParseError("degenerate face (repeated vertex)", lineno, path)
        triangles.extend(_fan(face))
    return TriangleMesh(nv, np.array(triangles, dtype=np.int64).reshape(-1, 3))


def parse_obj(path) -> TriangleMesh:
    """Read ``v`` and ``f`` records of an OBJ file; other records are ignored.

    Face entries may carry ``/vt/vn`` suffixes and negative (relative) indices.
    """
    nv = 0
    faces: list[tuple[list[int], int]] = []
    for lineno, tokens in _content_lines(path):
        tag = tokens[0]
        if tag == "v":
            nv += 1
        elif tag == "f":
            face = []
            for tok in tokens[1:]:
                idx = _int(tok.split("/", 1)[0], lineno, path, "vertex index")
                if idx < 0:
                    idx = nv + idx + 1
                face.append(idx - 1)
            if len(face) < 3:
                raise ParseError("face with fewer than 3 vertices", lineno, path)
            faces.append((face, lineno))

    triangles = []
    for face, lineno in faces:
        for idx in face:
            if idx < 0 or idx >= nv:
                raise ParseError(f"index out of range: {idx + 1} (vertex count {nv})", lineno, path)
        if len(set(face)) != len(face):
            raise ParseError("degenerate face (repeated vertex)", lineno, path)
        triangles.extend(_fan(face))
    return TriangleMesh(nv, np.array(triangles, dtype=np.int64).reshape(-1, 3))


def load_mesh(path) -> TriangleMesh:
    suffix = Path(path).suffix.lower()
    if suffix == ".obj":
        return parse_obj(path)
    return parse_off(path)


_MM_FIELDS = {"real", "integer", "pattern", "complex"}
_MM_SYMMETRY = {"symmetric", "general"}


def parse_matrix_market(path) -> SparsePattern:
    """Read the symmetrized, 0-based pattern of a coordinate Matrix Market file."""
    with open(path, "r") as fh:
        header = fh.readline()
        parts = header.strip().lower().split()
        if len(parts) != 5 or parts[0] != "%%matrixmarket" or parts[1] != "matrix":
            raise ParseError("unsupported header: expected %%MatrixMarket matrix ...", 1, path)
        if parts[2] != "coordinate":
            raise ParseError(f"unsupported format {parts[2]!r}", 1, path)
        if parts[3] not in _MM_FIELDS:
            raise ParseError(f"unsupported field {parts[3]!r}", 1, path)
        if parts[4] not in _MM_SYMMETRY:
            raise ParseError(f"unsupported symmetry {parts[4]!r}", 1, path)

        lineno = 1
        size = None
        for raw in fh:
            lineno += 1
            text = raw.strip()
            if not text or text.startswith("%"):
                continue
            size = text.split()
            break
        if size is None or len(size) != 3:
            raise ParseError("missing size line", lineno, path)
        nrows, ncols, nnz = (_int(t, lineno, path, "size") for t in size)
        if nrows != ncols:
            raise ParseError(f"non-square matrix {nrows}x{ncols}", lineno, path)

        rows = np.empty(nnz, dtype=np.int64)
        cols = np.empty(nnz, dtype=np.int64)
        k = 0
        for raw in fh:
            lineno += 1
            text = raw.strip()
            if not text or text.startswith("%"):
                continue
            if k >= nnz:
                raise ParseError("more entries than declared", lineno, path)
            tok = text.split()
            if len(tok) < 2:
                raise ParseError("entry needs row and column", lineno, path)
            i = _int(tok[0], lineno, path, "row index")
            j = _int(tok[1], lineno, path, "column index")
            if not (1 <= i <= nrows and 1 <= j <= ncols):
                raise ParseError(f"index out of range: ({i}, {j})", lineno, path)
            rows[k] = i - 1
            cols[k] = j - 1
            k += 1
        if k != nnz:
            raise ParseError(f"expected {nnz} entries, found {k}", lineno, path)
    return SparsePattern(nrows, rows, cols).symmetrized()


def write_matrix_market(pattern: SparsePattern, path) -> None:
    """Write the lower triangle of a symmetric pattern as a ``pattern symmetric`` file."""
    lower = pattern.rows >= pattern.cols
    r, c = pattern.rows[lower], pattern.cols[lower]
    with open(path, "w") as fh:
        fh.write("%%MatrixMarket matrix coordinate pattern symmetric\n")
        fh.write(f"{pattern.n} {pattern.n} {len(r)}\n")
        for i, j in zip(r.tolist(), c.tolist()):
            fh.write(f"{i + 1} {j + 1}\n")


def write_permutation(perm, path) -> None:
    values = np.asarray(getattr(perm, "perm", perm), dtype=np.int64)
    with open(path, "w") as fh:
        fh.write("".join(f"{v}\n" for v in values.tolist()))


def read_permutation(path) -> np.ndarray:
    with open(path, "r") as fh:
        return np.array([int(line) for line in fh if line.strip()], dtype=np.int64)


def write_etree(etree: "EliminationTree", path) -> None:
    """One line per node in array order: ``idx level vertex_count v0 v1 ...``."""
    with open(path, "w") as fh:
        for idx, node in enumerate(etree.nodes):
            verts = np.asarray(node.vertices, dtype=np.int64).tolist()
            fh.write(" ".join(str(x) for x in [idx, node.level, len(verts), *verts]) + "\n")


def read_etree_lines(path) -> list[tuple[int, int, list[int]]]:
    """Parse an etree file into ``(idx, level, vertices)`` tuples."""
    out = []
    with open(path, "r") as fh:
        for lineno, raw in enumerate(fh, start=1):
            tok = raw.split()
            if not tok:
                continue
            idx, level, count = (int(t) for t in tok[:3])
            verts = [int(t) for t in tok[3:]]
            if len(verts) != count:
                raise ParseError(f"node {idx} declares {count} vertices, lists {len(verts)}", lineno, path)
            out.append((idx, level, verts))
    return out


def read_patch_file(path) -> np.ndarray:
    """One patch id per vertex per line."""
    ids = []
    for lineno, tokens in _content_lines(path):
        ids.append(_int(tokens[0], lineno, path, "patch id"))
    return np.array(ids, dtype=np.int64)
