"""Graph ingestion and cluster output.

Two input formats are read:

* Matrix Market coordinate files (``real``, ``integer`` or ``pattern``;
  ``general`` or ``symmetric``). Indices are 1-based on disk and vertex
  labels are those 1-based ids.
* Labeled edge lists, one ``src<TAB>dst<TAB>weight`` edge per line (runs of
  spaces are accepted in place of tabs). Labels are numbered in order of
  first appearance; lines starting with ``#`` are comments.

Cluster files hold one cluster per line as space-separated labels, clusters
ordered by their smallest vertex id. The label map has one ``id<TAB>label``
line per vertex.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from .exceptions import GraphParseError
from .mcl import ClusterAssignment
from .sparse import CscMatrix, from_coo


def _parse_float(tok: str, lineno: int) -> float:
    try:
        v = float(tok)
    except ValueError:
        raise GraphParseError(f"bad numeric value {tok!r}", lineno) from None
    if not math.isfinite(v):
        raise GraphParseError(f"non-finite value {tok!r}", lineno)
    if v < 0:
        raise GraphParseError(f"negative edge weight {tok!r}", lineno)
    return v


def read_matrix_market(path) -> tuple[CscMatrix, list[str]]:
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise GraphParseError("empty file", 1)
    header = lines[0].split()
    if len(header) != 5 or header[0].lower() != "%%matrixmarket":
        raise GraphParseError("missing '%%MatrixMarket matrix coordinate <field> <symmetry>' header", 1)
    obj, fmt, field, symmetry = (h.lower() for h in header[1:])
    if obj != "matrix" or fmt != "coordinate":
        raise GraphParseError(f"unsupported layout {obj} {fmt}", 1)
    if field not in ("real", "integer", "pattern"):
        raise GraphParseError(f"unsupported field {field!r}", 1)
    if symmetry not in ("general", "symmetric"):
        raise GraphParseError(f"unsupported symmetry {symmetry!r}", 1)

    size = None
    rows, cols, vals = [], [], []
    for lineno, line in enumerate(lines[1:], start=2):
        s = line.strip()
        if not s or s.startswith("%"):
            continue
        tok = s.split()
        if size is None:
            if len(tok) != 3:
                raise GraphParseError("size line must be 'nrows ncols nnz'", lineno)
            try:
                size = tuple(int(t) for t in tok)
            except ValueError:
                raise GraphParseError("size line must hold integers", lineno) from None
            if symmetry == "symmetric" and size[0] != size[1]:
                raise GraphParseError("symmetric matrix must be square", lineno)
            continue
        want = 2 if field == "pattern" else 3
        if len(tok) != want:
            raise GraphParseError(f"expected {want} fields, got {len(tok)}", lineno)
        try:
            i, j = int(tok[0]) - 1, int(tok[1]) - 1
        except ValueError:
            raise GraphParseError("indices must be integers", lineno) from None
        if not (0 <= i < size[0] and 0 <= j < size[1]):
            raise GraphParseError(f"index ({i + 1}, {j + 1}) outside {size[0]}x{size[1]}", lineno)
        v = 1.0 if field == "pattern" else _parse_float(tok[2], lineno)
        if symmetry == "symmetric":
            if i < j:
                raise GraphParseError("symmetric file has an entry above the diagonal", lineno)
            if i != j:
                rows.append(j)
                cols.append(i)
                vals.append(v)
        rows.append(i)
        cols.append(j)
        vals.append(v)
    if size is None:
        raise GraphParseError("missing size line", len(lines))
    n_entries = len(vals) if symmetry == "general" else sum(1 for r, c in zip(rows, cols) if r >= c)
    if n_entries != size[2]:
        raise GraphParseError(f"header declares {size[2]} entries, found {n_entries}", len(lines))
    m = from_coo(size[0], size[1], rows, cols, vals)
    return m, [str(k + 1) for k in range(size[0])]


def read_labeled_tsv(path) -> tuple[CscMatrix, list[str]]:
    ids: dict[str, int] = {}
    rows, cols, vals = [], [], []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            s = line.strip()
            if not s or s.startswith("#"):
                continue
            tok = s.split("\t") if "\t" in s else s.split()
            if len(tok) != 3:
                raise GraphParseError(f"expected 'src<TAB>dst<TAB>weight', got {len(tok)} fields", lineno)
            src, dst = tok[0].strip(), tok[1].strip()
            if not src or not dst or len((src + " " + dst).split()) != 2:
                raise GraphParseError("labels must be nonempty and free of whitespace", lineno)
            w = _parse_float(tok[2].strip(), lineno)
            for lab in (src, dst):
                if lab not in ids:
                    ids[lab] = len(ids)
            # edge src -> dst is entry (dst, src): column src holds its out-edges
            rows.append(ids[dst])
            cols.append(ids[src])
            vals.append(w)
    n = len(ids)
    if n == 0:
        raise GraphParseError("no edges found")
    return from_coo(n, n, rows, cols, vals), list(ids)


def load_graph(path, fmt: str = "auto") -> tuple[CscMatrix, list[str]]:
    """Read a graph file; ``fmt`` is ``mm``, ``tsv`` or ``auto`` (sniff the header)."""
    path = Path(path)
    if not path.is_file():
        raise GraphParseError(f"cannot read {path}")
    if fmt == "auto":
        with open(path, encoding="utf-8") as fh:
            first = fh.readline()
        fmt = "mm" if first.lower().startswith("%%matrixmarket") else "tsv"
    if fmt == "mm":
        return read_matrix_market(path)
    if fmt == "tsv":
        return read_labeled_tsv(path)
    raise ValueError(f"unknown format {fmt!r}")


def format_clusters(assignment: ClusterAssignment, labels: list[str]) -> str:
    return "".join(" ".join(labels[v] for v in members) + "\n" for members in assignment.clusters())


def format_label_map(labels: list[str]) -> str:
    return "".join(f"{i}\t{lab}\n" for i, lab in enumerate(labels))


def read_label_map(path) -> list[str]:
    labels = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            idx, _, lab = line.rstrip("\n").partition("\t")
            if int(idx) != len(labels):
                raise GraphParseError("label map ids must be dense and ordered", lineno)
            labels.append(lab)
    return labels


def read_clusters(clusters_path, label_map_path) -> ClusterAssignment:
    """Rebuild the assignment from a cluster file and its label map."""
    labels = read_label_map(label_map_path)
    ids = {lab: i for i, lab in enumerate(labels)}
    cluster_of = np.full(len(labels), -1, dtype=np.int64)
    with open(clusters_path, encoding="utf-8") as fh:
        for c, line in enumerate(fh):
            for lab in line.split():
                cluster_of[ids[lab]] = c
    if np.any(cluster_of < 0):
        raise GraphParseError("cluster file does not cover every vertex")
    return ClusterAssignment(cluster_of, int(cluster_of.max()) + 1 if len(labels) else 0)
