"""Column-wise SpGEMM kernels with heap and hash-table accumulators.

Both kernels accumulate the contributions to an output entry in ascending
order of the inner index, so they produce bitwise-identical results.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .exceptions import DimensionMismatchError
from .sparse import CscMatrix, MultiplyStats, column_flops

# Knuth's multiplicative constant; the table size is a power of two so the
# mask keeps the low bits of the product.
_HASH_SCALE = 2654435761


class KernelKind(str, Enum):
    HEAP = "heap"
    HASH = "hash"


@dataclass(frozen=True)
class SelectorThresholds:
    """Hash is chosen above ``cf_switch``; heap is forced below ``flops_floor``."""

    cf_switch: float = 3.0
    flops_floor: int = 4096

    def __post_init__(self):
        if not self.cf_switch > 1:
            raise ValueError("cf_switch must exceed 1")
        if self.flops_floor < 0:
            raise ValueError("flops_floor must be nonnegative")


@dataclass(frozen=True)
class KernelChoice:
    kind: KernelKind
    flops: int
    cf_estimate: float
    thresholds: SelectorThresholds

    def to_dict(self):
        return {
            "kind": self.kind.value,
            "flops": self.flops,
            "cf_estimate": self.cf_estimate,
            "cf_switch": self.thresholds.cf_switch,
            "flops_floor": self.thresholds.flops_floor,
        }


def select_kernel(stats: MultiplyStats, thresholds: SelectorThresholds | None = None) -> KernelChoice:
    t = thresholds or SelectorThresholds()
    if stats.flops < 0:
        raise ValueError("flops must be nonnegative")
    if stats.flops < t.flops_floor or stats.cf <= t.cf_switch:
        kind = KernelKind.HEAP
    else:
        kind = KernelKind.HASH
    return KernelChoice(kind, stats.flops, stats.cf, t)


def _check_dims(a: CscMatrix, b: CscMatrix):
    if a.ncols != b.nrows:
        raise DimensionMismatchError(f"cannot multiply {a.shape} by {b.shape}")


def heap_spgemm(a: CscMatrix, b: CscMatrix) -> CscMatrix:
    """Product ``AB`` merging the contributing columns of ``A`` with a min-heap."""
    _check_dims(a, b)
    a_ptr = a.col_ptr.tolist()
    a_rows = a.row_idx.tolist()
    a_vals = a.values.tolist()
    b_ptr = b.col_ptr.tolist()
    b_rows = b.row_idx.tolist()
    b_vals = b.values.tolist()

    out_ptr = [0]
    out_rows: list[int] = []
    out_vals: list[float] = []
    heappush, heappop, heapreplace = heapq.heappush, heapq.heappop, heapq.heapreplace
    for j in range(b.ncols):
        # heap items: (row, position of the source in B's column, cursor into A)
        heap = []
        scale = []
        ends = []
        for t, p in enumerate(range(b_ptr[j], b_ptr[j + 1])):
            k = b_rows[p]
            lo, hi = a_ptr[k], a_ptr[k + 1]
            scale.append(b_vals[p])
            ends.append(hi)
            if lo < hi:
                heap.append((a_rows[lo], t, lo))
        heapq.heapify(heap)
        cur_row = -1
        acc = 0.0
        while heap:
            row, t, q = heap[0]
            prod = a_vals[q] * scale[t]
            if row == cur_row:
                acc += prod
            else:
                if cur_row >= 0 and acc != 0.0:
                    out_rows.append(cur_row)
                    out_vals.append(acc)
                cur_row, acc = row, prod
            q += 1
            if q < ends[t]:
                heapreplace(heap, (a_rows[q], t, q))
            else:
                heappop(heap)
        if cur_row >= 0 and acc != 0.0:
            out_rows.append(cur_row)
            out_vals.append(acc)
        out_ptr.append(len(out_rows))
    return CscMatrix(a.nrows, b.ncols, out_ptr, out_rows, out_vals)


def _table_size(flops: int) -> int:
    size = 1
    while size < flops:
        size <<= 1
    return size


def hash_spgemm_symbolic(a: CscMatrix, b: CscMatrix) -> np.ndarray:
    """Structural nonzero count of every column of ``AB`` (cancellation ignored)."""
    _check_dims(a, b)
    a_ptr = a.col_ptr.tolist()
    a_rows = a.row_idx.tolist()
    b_ptr = b.col_ptr.tolist()
    b_rows = b.row_idx.tolist()
    flops = column_flops(a, b).tolist()
    counts = np.zeros(b.ncols, dtype=np.int64)
    for j in range(b.ncols):
        if flops[j] == 0:
            continue
        size = _table_size(flops[j])
        mask = size - 1
        keys = [-1] * size
        n = 0
        for p in range(b_ptr[j], b_ptr[j + 1]):
            k = b_rows[p]
            for q in range(a_ptr[k], a_ptr[k + 1]):
                row = a_rows[q]
                h = (row * _HASH_SCALE) & mask
                while True:
                    slot = keys[h]
                    if slot == row:
                        break
                    if slot == -1:
                        keys[h] = row
                        n += 1
                        break
                    h = (h + 1) & mask
        counts[j] = n
    return counts


def hash_spgemm_numeric(a: CscMatrix, b: CscMatrix) -> CscMatrix:
    """Product ``AB`` accumulating each column in an open-addressing table.

    The table holds at least as many slots as the column has products, so
    it never needs to grow; linear probing resolves collisions.
    """
    _check_dims(a, b)
    a_ptr = a.col_ptr.tolist()
    a_rows = a.row_idx.tolist()
    a_vals = a.values.tolist()
    b_ptr = b.col_ptr.tolist()
    b_rows = b.row_idx.tolist()
    b_vals = b.values.tolist()
    flops = column_flops(a, b).tolist()

    out_ptr = [0]
    out_rows: list[int] = []
    out_vals: list[float] = []
    for j in range(b.ncols):
        if flops[j] == 0:
            out_ptr.append(len(out_rows))
            continue
        size = _table_size(flops[j])
        mask = size - 1
        keys = [-1] * size
        vals = [0.0] * size
        for p in range(b_ptr[j], b_ptr[j + 1]):
            k = b_rows[p]
            bv = b_vals[p]
            for q in range(a_ptr[k], a_ptr[k + 1]):
                row = a_rows[q]
                prod = a_vals[q] * bv
                h = (row * _HASH_SCALE) & mask
                while True:
                    slot = keys[h]
                    if slot == row:
                        vals[h] += prod
                        break
                    if slot == -1:
                        keys[h] = row
                        vals[h] = prod
                        break
                    h = (h + 1) & mask
        filled = sorted((keys[h], vals[h]) for h in range(size) if keys[h] != -1)
        for row, v in filled:
            if v != 0.0:
                out_rows.append(row)
                out_vals.append(v)
        out_ptr.append(len(out_rows))
    return CscMatrix(a.nrows, b.ncols, out_ptr, out_rows, out_vals)


def run_kernel(kind: KernelKind | str, a: CscMatrix, b: CscMatrix) -> CscMatrix:
    kind = KernelKind(kind)
    if kind is KernelKind.HEAP:
        return heap_spgemm(a, b)
    return hash_spgemm_numeric(a, b)
