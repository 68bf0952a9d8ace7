"""Compressed sparse column storage and the statistics that drive SpGEMM.

All indices are 0-based. A CSR view of a matrix is the CSC storage of its
transpose, so only the column-major layout is materialized here.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .exceptions import DimensionMismatchError, MatrixFormatError

INDEX_DTYPE = np.int64
VALUE_DTYPE = np.float64


def _frozen(arr, dtype):
    out = np.array(arr, dtype=dtype, copy=True).reshape(-1)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class TripleList:
    """Coordinate-format entries ``(row, col, value)`` with declared shape.

    Duplicates are allowed; they are summed by :func:`from_triples`.
    """

    entries: Sequence[tuple[int, int, float]]
    nrows: int
    ncols: int


@dataclass(frozen=True, eq=False)
class CscMatrix:
    """Immutable compressed sparse column matrix.

    Parameters
    ----------
    nrows, ncols : int
        Matrix shape.
    col_ptr : array of int, length ``ncols + 1``
        Offsets of each column into ``row_idx`` / ``values``.
    row_idx : array of int
        Row index of each stored entry, strictly increasing within a column.
    values : array of float
        Stored values; never exactly zero.
    """

    nrows: int
    ncols: int
    col_ptr: np.ndarray
    row_idx: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "nrows", int(self.nrows))
        object.__setattr__(self, "ncols", int(self.ncols))
        object.__setattr__(self, "col_ptr", _frozen(self.col_ptr, INDEX_DTYPE))
        object.__setattr__(self, "row_idx", _frozen(self.row_idx, INDEX_DTYPE))
        object.__setattr__(self, "values", _frozen(self.values, VALUE_DTYPE))
        self._check()

    def _check(self):
        if self.nrows < 0 or self.ncols < 0:
            raise MatrixFormatError("negative dimension")
        cp = self.col_ptr
        if len(cp) != self.ncols + 1:
            raise MatrixFormatError(f"col_ptr has length {len(cp)}, expected {self.ncols + 1}")
        if cp[0] != 0:
            raise MatrixFormatError("col_ptr[0] must be 0")
        if np.any(np.diff(cp) < 0):
            raise MatrixFormatError("col_ptr must be non-decreasing")
        nnz = int(cp[-1])
        if len(self.row_idx) != nnz or len(self.values) != nnz:
            raise MatrixFormatError("row_idx/values length must equal col_ptr[ncols]")
        if nnz == 0:
            return
        ri = self.row_idx
        if ri.min() < 0 or ri.max() >= self.nrows:
            raise MatrixFormatError("row index out of bounds")
        # strictly increasing rows within a column: a non-increase is only
        # allowed where a new column starts
        drops = np.flatnonzero(np.diff(ri) <= 0) + 1
        if drops.size and not np.all(np.isin(drops, cp[1:-1])):
            raise MatrixFormatError("row indices must be strictly increasing within each column")
        if not np.all(np.isfinite(self.values)):
            raise MatrixFormatError("values must be finite")
        if np.any(self.values == 0.0):
            raise MatrixFormatError("explicit zeros are not stored")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nrows, self.ncols)

    @property
    def nnz(self) -> int:
        return int(self.col_ptr[-1])

    def column_nnz(self) -> np.ndarray:
        return np.diff(self.col_ptr)

    def column(self, j: int) -> tuple[np.ndarray, np.ndarray]:
        lo, hi = self.col_ptr[j], self.col_ptr[j + 1]
        return self.row_idx[lo:hi], self.values[lo:hi]

    def col_indices(self) -> np.ndarray:
        """Column id of every stored entry."""
        return np.repeat(np.arange(self.ncols, dtype=INDEX_DTYPE), self.column_nnz())

    def column_sums(self) -> np.ndarray:
        sums = np.zeros(self.ncols)
        np.add.at(sums, self.col_indices(), self.values)
        return sums

    def to_dense(self) -> np.ndarray:
        out = np.zeros((self.nrows, self.ncols))
        out[self.row_idx, self.col_indices()] = self.values
        return out

    def to_scipy(self):
        import scipy.sparse as sp

        return sp.csc_matrix(
            (self.values.copy(), self.row_idx.copy(), self.col_ptr.copy()), shape=self.shape
        )

    def col_slice(self, start: int, stop: int) -> "CscMatrix":
        """Columns ``start:stop`` as a new matrix with the same row count."""
        lo, hi = self.col_ptr[start], self.col_ptr[stop]
        return CscMatrix(
            self.nrows,
            stop - start,
            self.col_ptr[start : stop + 1] - lo,
            self.row_idx[lo:hi],
            self.values[lo:hi],
        )

    def row_slice(self, start: int, stop: int) -> "CscMatrix":
        """Rows ``start:stop`` with row indices shifted to start at zero."""
        keep = (self.row_idx >= start) & (self.row_idx < stop)
        counts = np.zeros(self.ncols, dtype=INDEX_DTYPE)
        np.add.at(counts, self.col_indices()[keep], 1)
        ptr = np.concatenate([[0], np.cumsum(counts)])
        return CscMatrix(stop - start, self.ncols, ptr, self.row_idx[keep] - start, self.values[keep])

    def equals(self, other: "CscMatrix") -> bool:
        """Exact structural and bitwise value equality."""
        return (
            self.shape == other.shape
            and np.array_equal(self.col_ptr, other.col_ptr)
            and np.array_equal(self.row_idx, other.row_idx)
            and np.array_equal(self.values, other.values)
        )

    def same_structure(self, other: "CscMatrix") -> bool:
        return (
            self.shape == other.shape
            and np.array_equal(self.col_ptr, other.col_ptr)
            and np.array_equal(self.row_idx, other.row_idx)
        )

    def __repr__(self):
        return f"CscMatrix(shape={self.shape}, nnz={self.nnz})"

    @classmethod
    def empty(cls, nrows: int, ncols: int) -> "CscMatrix":
        return cls(nrows, ncols, np.zeros(ncols + 1, dtype=INDEX_DTYPE), [], [])

    @classmethod
    def identity(cls, n: int) -> "CscMatrix":
        return cls(n, n, np.arange(n + 1), np.arange(n), np.ones(n))

    @classmethod
    def from_dense(cls, dense) -> "CscMatrix":
        dense = np.asarray(dense, dtype=VALUE_DTYPE)
        if dense.ndim != 2:
            raise ValueError("expected a 2-D array")
        cols, rows = np.nonzero(dense.T)
        ptr = np.concatenate([[0], np.cumsum(np.count_nonzero(dense, axis=0))])
        return cls(dense.shape[0], dense.shape[1], ptr, rows, dense[rows, cols])

    @classmethod
    def from_scipy(cls, mat) -> "CscMatrix":
        m = mat.tocsc(copy=True)
        m.sum_duplicates()
        m.eliminate_zeros()
        m.sort_indices()
        return cls(m.shape[0], m.shape[1], m.indptr, m.indices, m.data)

    @classmethod
    def from_columns(cls, nrows: int, columns: Iterable[tuple[Sequence[int], Sequence[float]]]) -> "CscMatrix":
        """Build from per-column ``(rows, values)`` pairs already sorted by row."""
        ptr = [0]
        rows: list = []
        vals: list = []
        for r, v in columns:
            rows.extend(r)
            vals.extend(v)
            ptr.append(len(rows))
        return cls(nrows, len(ptr) - 1, ptr, rows, vals)


def hstack(parts: Sequence[CscMatrix]) -> CscMatrix:
    """Concatenate matrices with equal row counts side by side."""
    if not parts:
        raise ValueError("nothing to stack")
    nrows = parts[0].nrows
    if any(p.nrows != nrows for p in parts):
        raise DimensionMismatchError("hstack requires equal row counts")
    ptrs = [np.zeros(1, dtype=INDEX_DTYPE)]
    offset = 0
    for p in parts:
        ptrs.append(p.col_ptr[1:] + offset)
        offset += p.nnz
    return CscMatrix(
        nrows,
        sum(p.ncols for p in parts),
        np.concatenate(ptrs),
        np.concatenate([p.row_idx for p in parts]),
        np.concatenate([p.values for p in parts]),
    )


@dataclass(frozen=True, eq=False)
class DcscMatrix:
    """Doubly compressed sparse column matrix.

    Only nonempty columns are listed: ``jc`` holds their ids and ``cp`` the
    offsets of each listed column into ``row_idx``.
    """

    nrows: int
    ncols: int
    jc: np.ndarray
    cp: np.ndarray
    row_idx: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        for name in ("jc", "cp", "row_idx"):
            object.__setattr__(self, name, _frozen(getattr(self, name), INDEX_DTYPE))
        object.__setattr__(self, "values", _frozen(self.values, VALUE_DTYPE))
        if len(self.cp) != len(self.jc) + 1 or self.cp[0] != 0:
            raise MatrixFormatError("cp must have length |jc|+1 and start at 0")
        if np.any(np.diff(self.jc) <= 0):
            raise MatrixFormatError("jc must be strictly increasing")
        if np.any(np.diff(self.cp) <= 0):
            raise MatrixFormatError("every listed column needs at least one nonzero")
        if len(self.jc) and (self.jc[0] < 0 or self.jc[-1] >= self.ncols):
            raise MatrixFormatError("column id out of bounds")

    @property
    def nnz(self) -> int:
        return int(self.cp[-1])


def dcsc_from_csc(m: CscMatrix) -> DcscMatrix:
    counts = m.column_nnz()
    jc = np.flatnonzero(counts)
    cp = np.concatenate([[0], np.cumsum(counts[jc])])
    return DcscMatrix(m.nrows, m.ncols, jc, cp, m.row_idx, m.values)


def csc_from_dcsc(m: DcscMatrix) -> CscMatrix:
    counts = np.zeros(m.ncols, dtype=INDEX_DTYPE)
    counts[m.jc] = np.diff(m.cp)
    ptr = np.concatenate([[0], np.cumsum(counts)])
    return CscMatrix(m.nrows, m.ncols, ptr, m.row_idx, m.values)


def from_triples(t: TripleList) -> CscMatrix:
    """Assemble a CSC matrix, summing duplicates and dropping exact zeros.

    Duplicates are summed in ascending value order so the result does not
    depend on the order of ``t.entries``.
    """
    n = len(t.entries)
    rows = np.empty(n, dtype=INDEX_DTYPE)
    cols = np.empty(n, dtype=INDEX_DTYPE)
    vals = np.empty(n, dtype=VALUE_DTYPE)
    for k, (r, c, v) in enumerate(t.entries):
        if not (0 <= r < t.nrows and 0 <= c < t.ncols):
            raise MatrixFormatError(f"entry {k} {(r, c, v)} outside {t.nrows}x{t.ncols}")
        if not np.isfinite(v):
            raise MatrixFormatError(f"entry {k} {(r, c, v)} is not finite")
        rows[k], cols[k], vals[k] = r, c, v
    return from_coo(t.nrows, t.ncols, rows, cols, vals)


def from_coo(nrows: int, ncols: int, rows, cols, vals) -> CscMatrix:
    """Vectorized assembly from coordinate arrays (no bounds reporting)."""
    rows = np.asarray(rows, dtype=INDEX_DTYPE)
    cols = np.asarray(cols, dtype=INDEX_DTYPE)
    vals = np.asarray(vals, dtype=VALUE_DTYPE)
    if len(vals) == 0:
        return CscMatrix.empty(nrows, ncols)
    order = np.lexsort((vals, rows, cols))
    rows, cols, vals = rows[order], cols[order], vals[order]
    start = np.concatenate([[True], (rows[1:] != rows[:-1]) | (cols[1:] != cols[:-1])])
    heads = np.flatnonzero(start)
    summed = np.add.reduceat(vals, heads)
    rows, cols = rows[heads], cols[heads]
    keep = summed != 0.0
    rows, cols, summed = rows[keep], cols[keep], summed[keep]
    counts = np.bincount(cols, minlength=ncols)
    ptr = np.concatenate([[0], np.cumsum(counts)])
    return CscMatrix(nrows, ncols, ptr, rows, summed)


def make_column_stochastic(m: CscMatrix, add_loops: bool = True) -> CscMatrix:
    """Scale every nonempty column to sum to one.

    With ``add_loops`` a unit self-loop is added to each column first, so no
    column of the result is empty.
    """
    if m.nnz and m.values.min() < 0:
        raise ValueError("column-stochastic normalization requires nonnegative values")
    if add_loops:
        if m.nrows != m.ncols:
            raise DimensionMismatchError("self-loops require a square matrix")
        n = m.ncols
        m = from_coo(
            n,
            n,
            np.concatenate([m.row_idx, np.arange(n)]),
            np.concatenate([m.col_indices(), np.arange(n)]),
            np.concatenate([m.values, np.ones(n)]),
        )
    return scale_columns(m)


def scale_columns(m: CscMatrix) -> CscMatrix:
    """Divide each nonempty column by its sum."""
    if m.nnz == 0:
        return m
    sums = m.column_sums()
    return CscMatrix(m.nrows, m.ncols, m.col_ptr, m.row_idx, m.values / sums[m.col_indices()])


@dataclass(frozen=True)
class MultiplyStats:
    """Work and output-size summary of a product ``AB``.

    ``cf`` is ``flops / nnz_out``; it is reported as 0 for an empty output.
    """

    flops: int
    nnz_out: float
    cf: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "cf", self.flops / self.nnz_out if self.nnz_out > 0 else 0.0)

    @classmethod
    def estimated(cls, flops: int, nnz_estimate: float) -> "MultiplyStats":
        """Stats from an estimated output size, clamped to the feasible range."""
        nnz = min(float(nnz_estimate), float(flops))
        if flops > 0:
            nnz = max(nnz, 1.0)
        return cls(int(flops), nnz)


def count_flops(a: CscMatrix, b: CscMatrix) -> int:
    if a.ncols != b.nrows:
        raise DimensionMismatchError(f"cannot multiply {a.shape} by {b.shape}")
    return int(a.column_nnz()[b.row_idx].sum())


def column_flops(a: CscMatrix, b: CscMatrix) -> np.ndarray:
    """Number of nontrivial products contributing to each column of ``AB``."""
    if a.ncols != b.nrows:
        raise DimensionMismatchError(f"cannot multiply {a.shape} by {b.shape}")
    per_entry = a.column_nnz()[b.row_idx]
    out = np.zeros(b.ncols, dtype=INDEX_DTYPE)
    np.add.at(out, b.col_indices(), per_entry)
    return out


def multiply_stats(a: CscMatrix, b: CscMatrix, nnz_out: int) -> MultiplyStats:
    flops = count_flops(a, b)
    if nnz_out < 0 or nnz_out > flops:
        raise ValueError(f"nnz_out={nnz_out} is impossible for flops={flops}")
    return MultiplyStats(flops, nnz_out)
