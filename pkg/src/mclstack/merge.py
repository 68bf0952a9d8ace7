"""Accumulation of per-stage partial products.

An :class:`IntermediateList` is one stage's partial product flattened to
``(col, row, value)`` triples sorted by ``(col, row)``. Three ways of
summing a sequence of such lists are provided: a linear two-way merge, a
single heap-based multiway merge, and :class:`BinaryMergeAccumulator`, which
merges incrementally on even-numbered stages and keeps at most
``popcount(i)`` lists alive after stage ``i``.

Key comparisons are counted in :class:`MergeCounters` so the relative cost of
the schemes can be measured rather than timed.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .sparse import INDEX_DTYPE, CscMatrix

Entry = tuple[int, int, float]


@dataclass
class IntermediateList:
    entries: list[Entry]
    origin_stage: int = 0

    def __len__(self):
        return len(self.entries)

    def validate(self):
        prev = None
        for col, row, val in self.entries:
            key = (col, row)
            if prev is not None and key <= prev:
                raise ValueError(f"list from stage {self.origin_stage} not strictly sorted at {key}")
            prev = key
        return self

    @classmethod
    def from_csc(cls, m: CscMatrix, origin_stage: int = 0) -> "IntermediateList":
        cols = m.col_indices().tolist()
        return cls(list(zip(cols, m.row_idx.tolist(), m.values.tolist())), origin_stage)

    def to_csc(self, nrows: int, ncols: int) -> CscMatrix:
        if not self.entries:
            return CscMatrix.empty(nrows, ncols)
        cols, rows, vals = zip(*self.entries)
        counts = np.bincount(np.asarray(cols, dtype=INDEX_DTYPE), minlength=ncols)
        return CscMatrix(nrows, ncols, np.concatenate([[0], np.cumsum(counts)]), rows, vals)


@dataclass
class MergeCounters:
    comparisons: int = 0
    merge_events: int = 0
    peak_elements: int = 0
    elements_in: int = 0

    def record_event(self, sizes: Sequence[int]):
        volume = sum(sizes)
        self.merge_events += 1
        self.elements_in += volume
        self.peak_elements = max(self.peak_elements, volume)

    def to_dict(self):
        return {
            "comparisons": self.comparisons,
            "merge_events": self.merge_events,
            "peak_elements": self.peak_elements,
            "elements_in": self.elements_in,
        }


class _CountingHeap:
    """Binary min-heap over tuples whose key comparisons are tallied."""

    def __init__(self, counters: MergeCounters):
        self.items: list = []
        self.counters = counters

    def __len__(self):
        return len(self.items)

    def _less(self, x, y) -> bool:
        self.counters.comparisons += 1
        return x < y

    def push(self, item):
        items = self.items
        items.append(item)
        i = len(items) - 1
        while i > 0:
            parent = (i - 1) >> 1
            if self._less(items[i], items[parent]):
                items[i], items[parent] = items[parent], items[i]
                i = parent
            else:
                break

    def _sift_down(self, i):
        items = self.items
        n = len(items)
        while True:
            left = 2 * i + 1
            if left >= n:
                return
            child = left
            right = left + 1
            if right < n and self._less(items[right], items[left]):
                child = right
            if self._less(items[child], items[i]):
                items[i], items[child] = items[child], items[i]
                i = child
            else:
                return

    def pop(self):
        items = self.items
        top = items[0]
        last = items.pop()
        if items:
            items[0] = last
            self._sift_down(0)
        return top

    def replace(self, item):
        top = self.items[0]
        self.items[0] = item
        self._sift_down(0)
        return top


def _emit(out: list, key, acc):
    if acc != 0.0:
        out.append((key[0], key[1], acc))


def two_way_merge(l1: IntermediateList, l2: IntermediateList,
                  counters: MergeCounters | None = None) -> IntermediateList:
    """Sorted union of two lists; on equal keys ``l1``'s value comes first in the sum."""
    l1.validate()
    l2.validate()
    c = counters if counters is not None else MergeCounters()
    c.record_event([len(l1), len(l2)])
    a, b = l1.entries, l2.entries
    i = j = 0
    out: list[Entry] = []
    comparisons = 0
    while i < len(a) and j < len(b):
        ka, kb = a[i][:2], b[j][:2]
        comparisons += 1
        if ka < kb:
            out.append(a[i])
            i += 1
        elif kb < ka:
            out.append(b[j])
            j += 1
        else:
            _emit(out, ka, a[i][2] + b[j][2])
            i += 1
            j += 1
    out.extend(a[i:])
    out.extend(b[j:])
    c.comparisons += comparisons
    return IntermediateList(out, min(l1.origin_stage, l2.origin_stage))


def _heap_merge(lists: Sequence[IntermediateList], counters: MergeCounters) -> IntermediateList:
    # tiebreak on (origin_stage, position) so equal keys are summed in stage order
    order = sorted(range(len(lists)), key=lambda t: (lists[t].origin_stage, t))
    heap = _CountingHeap(counters)
    for rank, t in enumerate(order):
        ent = lists[t].entries
        if ent:
            heap.push((ent[0][0], ent[0][1], rank, 0))
    out: list[Entry] = []
    cur = None
    acc = 0.0
    while len(heap):
        col, row, rank, pos = heap.items[0]
        ent = lists[order[rank]].entries
        key = (col, row)
        if key == cur:
            acc += ent[pos][2]
        else:
            if cur is not None:
                _emit(out, cur, acc)
            cur, acc = key, ent[pos][2]
        pos += 1
        if pos < len(ent):
            heap.replace((ent[pos][0], ent[pos][1], rank, pos))
        else:
            heap.pop()
    if cur is not None:
        _emit(out, cur, acc)
    origin = min((l.origin_stage for l in lists), default=0)
    return IntermediateList(out, origin)


def multiway_merge(lists: Sequence[IntermediateList],
                   counters: MergeCounters | None = None) -> IntermediateList:
    """Merge all lists in a single pass with a heap holding one cursor per list."""
    if not lists:
        return IntermediateList([], 0)
    for l in lists:
        l.validate()
    c = counters if counters is not None else MergeCounters()
    if len(lists) == 1:
        return IntermediateList(list(lists[0].entries), lists[0].origin_stage)
    c.record_event([len(l) for l in lists])
    return _heap_merge(lists, c)


class BinaryMergeAccumulator:
    """Stack-based incremental merge of stage outputs arriving in order.

    After the ``i``-th push, the lists on the stack correspond to the set bits
    of ``i``: a push at an ``i`` divisible by ``2**m`` (and not ``2**(m+1)``)
    pops the top ``m + 1`` lists and merges them with one heap.
    """

    def __init__(self):
        self.stack: list[IntermediateList] = []
        self.stages_pushed = 0
        self.counters = MergeCounters()
        # (stage number, sizes of the merged lists, comparisons spent) per event
        self.events: list[tuple[int, list[int], int]] = []
        self._finalized = False

    @property
    def peak_elements(self) -> int:
        return self.counters.peak_elements

    @property
    def depth(self) -> int:
        return len(self.stack)

    def push(self, l: IntermediateList) -> "BinaryMergeAccumulator":
        if self._finalized:
            raise RuntimeError("accumulator already finalized")
        l.validate()
        self.stack.append(l)
        self.stages_pushed += 1
        j = self.stages_pushed
        nmerges = 0
        while j % 2 == 0:
            nmerges += 1
            j //= 2
        if nmerges:
            group = [self.stack.pop() for _ in range(nmerges + 1)]
            self.stack.append(self._merge(group))
        return self

    def _merge(self, group: list[IntermediateList]) -> IntermediateList:
        sizes = [len(l) for l in group]
        before = self.counters.comparisons
        self.counters.record_event(sizes)
        merged = _heap_merge(group, self.counters)
        self.events.append((self.stages_pushed, sizes, self.counters.comparisons - before))
        return merged

    def finalize(self) -> IntermediateList:
        if self._finalized:
            raise RuntimeError("accumulator already finalized")
        if not self.stack:
            raise ValueError("no lists were pushed")
        self._finalized = True
        if len(self.stack) > 1:
            group = self.stack[::-1]
            self.stack = [self._merge(group)]
        return self.stack.pop()


def binary_merge(lists: Sequence[IntermediateList]) -> tuple[IntermediateList, BinaryMergeAccumulator]:
    acc = BinaryMergeAccumulator()
    for l in lists:
        acc.push(l)
    return acc.finalize(), acc
