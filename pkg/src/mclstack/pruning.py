"""Column-local MCL operators: pruning with top-k selection, and inflation.

Both operators renormalize each surviving column to sum to one. They act on
columns independently, which is what lets expansion and pruning be fused
over column batches.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .sparse import CscMatrix, scale_columns


@dataclass(frozen=True)
class MclParams:
    inflation: float = 2.0
    prune_threshold: float = 1e-4
    select_k: int = 1000
    max_iterations: int = 100
    convergence_epsilon: float = 1e-4
    add_loops: bool = True

    def __post_init__(self):
        if not self.inflation > 1:
            raise ValueError("inflation must exceed 1")
        if self.prune_threshold < 0:
            raise ValueError("prune_threshold must be nonnegative")
        if self.select_k < 1:
            raise ValueError("select_k must be at least 1")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")


def _prune_column(rows, vals, threshold, k):
    keep = vals >= threshold
    if not keep.any():
        # fall back to the largest original entry; ties go to the smaller row
        best = np.lexsort((rows, -vals))[0]
        return rows[best : best + 1], np.ones(1)
    rows, vals = rows[keep], vals[keep]
    if len(vals) > k:
        chosen = np.sort(np.lexsort((rows, -vals))[:k])
        rows, vals = rows[chosen], vals[chosen]
    return rows, vals / vals.sum()


def prune(c: CscMatrix, p) -> CscMatrix:
    """Drop entries below ``p.prune_threshold``, keep the ``p.select_k`` largest.

    Ties in the top-k cut keep the smaller row index. A column emptied by the
    threshold keeps only its largest original entry, set to 1.
    """
    threshold, k = p.prune_threshold, p.select_k
    columns = []
    for j in range(c.ncols):
        rows, vals = c.column(j)
        if len(vals) == 0:
            columns.append((rows, vals))
        else:
            columns.append(_prune_column(rows, vals, threshold, k))
    return CscMatrix.from_columns(c.nrows, columns)


def inflate(c: CscMatrix, inflation: float) -> CscMatrix:
    """Raise every entry to ``inflation`` and rescale columns to sum to one."""
    if c.nnz and c.values.min() < 0:
        raise ValueError("inflation requires nonnegative entries")
    powered = c.values ** inflation
    keep = powered != 0.0
    if not keep.all():
        # underflowed entries are dropped like any other exact zero
        counts = np.bincount(c.col_indices()[keep], minlength=c.ncols)
        ptr = np.concatenate([[0], np.cumsum(counts)])
        return scale_columns(CscMatrix(c.nrows, c.ncols, ptr, c.row_idx[keep], powered[keep]))
    return scale_columns(CscMatrix(c.nrows, c.ncols, c.col_ptr, c.row_idx, powered))
