"""Single-machine simulation of 2D Sparse SUMMA.

The operands are cut into a ``q x q`` grid of blocks. In stage ``k`` every
logical process ``p_ij`` receives ``A_ik`` along its grid row and ``B_kj``
along its grid column, multiplies them locally, and hands the partial
product to its merge accumulator. Broadcasts are not executed; their volume
is recorded so it can be fed to the pipeline timeline model.

Logical processes run in row-major order (or on a thread pool with results
collected in that order), so output never depends on ``n_threads``.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .estimate import EstimatorConfig, estimate_nnz
from .exceptions import DimensionMismatchError
from .kernels import KernelChoice, KernelKind, SelectorThresholds, run_kernel, select_kernel
from .merge import BinaryMergeAccumulator, IntermediateList, MergeCounters, multiway_merge
from .pipeline import StageCosts
from .sparse import CscMatrix, MultiplyStats, count_flops, from_coo, hstack


class MergeScheme(str, Enum):
    MULTIWAY = "multiway"
    BINARY = "binary"


@dataclass(frozen=True)
class GridConfig:
    q: int = 1

    def __post_init__(self):
        if self.q < 1:
            raise ValueError("grid side q must be at least 1")

    @property
    def P(self) -> int:
        return self.q * self.q


def stripe_offsets(n: int, q: int) -> np.ndarray:
    """Boundaries of ``q`` contiguous stripes over ``n`` items, widths differing by at most one."""
    return np.array([i * n // q for i in range(q + 1)], dtype=np.int64)


@dataclass(eq=False)
class BlockMatrix:
    grid: GridConfig
    blocks: list  # blocks[i][j] is the CscMatrix at row stripe i, column stripe j
    row_offsets: np.ndarray
    col_offsets: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return int(self.row_offsets[-1]), int(self.col_offsets[-1])


def _split(m: CscMatrix, grid: GridConfig, row_offsets, col_offsets) -> BlockMatrix:
    q = grid.q
    blocks = [[None] * q for _ in range(q)]
    for j in range(q):
        strip = m.col_slice(int(col_offsets[j]), int(col_offsets[j + 1]))
        for i in range(q):
            blocks[i][j] = strip.row_slice(int(row_offsets[i]), int(row_offsets[i + 1]))
    return BlockMatrix(grid, blocks, np.asarray(row_offsets), np.asarray(col_offsets))


def partition(m: CscMatrix, grid: GridConfig) -> BlockMatrix:
    """Cut ``m`` into ``q x q`` contiguous, near-equal blocks."""
    if grid.q > min(m.nrows, m.ncols):
        raise ValueError(f"grid side {grid.q} exceeds matrix dimensions {m.shape}")
    return _split(m, grid, stripe_offsets(m.nrows, grid.q), stripe_offsets(m.ncols, grid.q))


def reassemble(bm: BlockMatrix) -> CscMatrix:
    nrows, ncols = bm.shape
    rows, cols, vals = [], [], []
    q = bm.grid.q
    for i in range(q):
        for j in range(q):
            blk = bm.blocks[i][j]
            rows.append(blk.row_idx + bm.row_offsets[i])
            cols.append(blk.col_indices() + bm.col_offsets[j])
            vals.append(blk.values)
    return from_coo(nrows, ncols, np.concatenate(rows), np.concatenate(cols), np.concatenate(vals))


@dataclass(frozen=True)
class CostModel:
    """Rates that turn recorded volumes into modeled stage durations (seconds)."""

    bytes_per_nnz: int = 16  # one 8-byte index and one 8-byte value
    network_bandwidth: float = 1.0e9
    link_bandwidth: float = 1.0e10
    flop_rate: float = 1.0e9
    merge_rate: float = 2.0e8


def local_multiply(a: CscMatrix, b: CscMatrix, kernel: str = "auto",
                   thresholds: SelectorThresholds | None = None,
                   est_cfg: EstimatorConfig | None = None,
                   split: int = 1) -> tuple[CscMatrix, KernelChoice]:
    """One local SpGEMM with the kernel picked by ``kernel`` (``heap``, ``hash`` or ``auto``).

    ``split`` divides the columns of ``b`` into that many groups multiplied
    independently, the way columns would be dealt out to several
    accelerators; the result is unchanged.
    """
    thresholds = thresholds or SelectorThresholds()
    flops = count_flops(a, b)
    if kernel == "auto":
        est = estimate_nnz(a, b, est_cfg).total if flops else 0.0
        choice = select_kernel(MultiplyStats.estimated(flops, est), thresholds)
    else:
        choice = KernelChoice(KernelKind(kernel), flops, 0.0, thresholds)
    if split <= 1 or b.ncols <= 1:
        return run_kernel(choice.kind, a, b), choice
    bounds = stripe_offsets(b.ncols, min(split, b.ncols))
    parts = [run_kernel(choice.kind, a, b.col_slice(int(lo), int(hi)))
             for lo, hi in zip(bounds[:-1], bounds[1:])]
    return hstack(parts), choice


@dataclass
class ProcessRecord:
    i: int
    j: int
    flops: list = field(default_factory=list)  # per stage
    list_sizes: list = field(default_factory=list)  # per stage
    kernels: list = field(default_factory=list)  # KernelKind value per stage
    merge_comparisons: list = field(default_factory=list)  # per stage
    counters: MergeCounters = field(default_factory=MergeCounters)

    @property
    def multiway_elements(self) -> int:
        """Elements a multiway merge must hold at once: every stage's list."""
        return sum(self.list_sizes)

    def to_dict(self):
        return {
            "i": self.i,
            "j": self.j,
            "flops": self.flops,
            "list_sizes": self.list_sizes,
            "kernels": self.kernels,
            "merge_comparisons": self.merge_comparisons,
            "merge": self.counters.to_dict(),
            "multiway_elements": self.multiway_elements,
        }


@dataclass
class StageRecord:
    stage: int
    a_bcast_nnz: int
    b_bcast_nnz: int
    max_a_block_nnz: int
    max_b_block_nnz: int
    max_recv_nnz: int
    flops: int
    max_process_flops: int
    max_merge_comparisons: int

    def to_dict(self):
        return dict(self.__dict__)


@dataclass
class SummaStats:
    q: int
    merge: MergeScheme
    stages: list
    processes: list

    @property
    def flops(self) -> int:
        return sum(s.flops for s in self.stages)

    def memory_totals(self) -> tuple[int, int]:
        """Summed peak merge volume over processes, and the multiway equivalent."""
        peak = sum(p.counters.peak_elements for p in self.processes)
        total = sum(p.multiway_elements for p in self.processes)
        return peak, total

    def stage_costs(self, model: CostModel | None = None) -> StageCosts:
        """Modeled per-stage durations, each the maximum over logical processes."""
        model = model or CostModel()
        bpn = model.bytes_per_nnz
        return StageCosts(
            bcast=[(s.max_a_block_nnz + s.max_b_block_nnz) * bpn / model.network_bandwidth
                   for s in self.stages],
            xfer=[s.max_recv_nnz * bpn / model.link_bandwidth for s in self.stages],
            mult=[s.max_process_flops / model.flop_rate for s in self.stages],
            merge=[s.max_merge_comparisons / model.merge_rate for s in self.stages],
        )

    def to_dict(self):
        peak, total = self.memory_totals()
        return {
            "q": self.q,
            "merge": self.merge.value,
            "flops": self.flops,
            "peak_merge_elements": peak,
            "multiway_merge_elements": total,
            "stages": [s.to_dict() for s in self.stages],
            "processes": [p.to_dict() for p in self.processes],
        }


def _run_process(i, j, ab: BlockMatrix, bb: BlockMatrix, q, kernel, merge, thresholds, est_cfg, split):
    rec = ProcessRecord(i, j)
    acc = BinaryMergeAccumulator() if merge is MergeScheme.BINARY else None
    lists = []
    nrows = ab.blocks[i][0].nrows
    ncols = bb.blocks[0][j].ncols
    for k in range(q):
        prod, choice = local_multiply(ab.blocks[i][k], bb.blocks[k][j], kernel, thresholds, est_cfg, split)
        lst = IntermediateList.from_csc(prod, k)
        rec.flops.append(choice.flops)
        rec.kernels.append(choice.kind.value)
        rec.list_sizes.append(len(lst))
        if acc is not None:
            n_events = len(acc.events)
            acc.push(lst)
            rec.merge_comparisons.append(sum(e[2] for e in acc.events[n_events:]))
        else:
            lists.append(lst)
            rec.merge_comparisons.append(0)
    if acc is not None:
        n_events = len(acc.events)
        merged = acc.finalize()
        rec.merge_comparisons[-1] += sum(e[2] for e in acc.events[n_events:])
        rec.counters = acc.counters
    else:
        before = rec.counters.comparisons
        merged = multiway_merge(lists, rec.counters)
        rec.merge_comparisons[-1] += rec.counters.comparisons - before
    return merged.to_csc(nrows, ncols), rec


def summa_multiply(a: CscMatrix, b: CscMatrix, grid: GridConfig | None = None,
                   kernel: str = "auto", merge: MergeScheme | str = MergeScheme.BINARY,
                   thresholds: SelectorThresholds | None = None,
                   est_cfg: EstimatorConfig | None = None,
                   split: int = 1, n_threads: int = 1) -> tuple[CscMatrix, SummaStats]:
    """Compute ``AB`` on a simulated ``q x q`` process grid.

    Stripes may be empty when a dimension is smaller than ``q`` (a narrow
    column batch, for instance); such blocks simply contribute nothing.
    """
    grid = grid or GridConfig()
    merge = MergeScheme(merge)
    if a.ncols != b.nrows:
        raise DimensionMismatchError(f"cannot multiply {a.shape} by {b.shape}")
    q = grid.q
    inner = stripe_offsets(a.ncols, q)
    ab = _split(a, grid, stripe_offsets(a.nrows, q), inner)
    bb = _split(b, grid, inner, stripe_offsets(b.ncols, q))

    coords = [(i, j) for i in range(q) for j in range(q)]

    def work(ij):
        return _run_process(ij[0], ij[1], ab, bb, q, kernel, merge, thresholds, est_cfg, split)

    if n_threads > 1:
        with ThreadPoolExecutor(max_workers=n_threads) as pool:
            results = list(pool.map(work, coords))
    else:
        results = [work(ij) for ij in coords]

    cblocks = [[None] * q for _ in range(q)]
    records = []
    for (i, j), (blk, rec) in zip(coords, results):
        cblocks[i][j] = blk
        records.append(rec)
    c = reassemble(BlockMatrix(grid, cblocks, ab.row_offsets, bb.col_offsets))

    stages = []
    for k in range(q):
        a_nnz = [ab.blocks[i][k].nnz for i in range(q)]
        b_nnz = [bb.blocks[k][j].nnz for j in range(q)]
        stages.append(StageRecord(
            stage=k,
            a_bcast_nnz=sum(a_nnz),
            b_bcast_nnz=sum(b_nnz),
            max_a_block_nnz=max(a_nnz),
            max_b_block_nnz=max(b_nnz),
            max_recv_nnz=max(a_nnz[r.i] + b_nnz[r.j] for r in records),
            flops=sum(r.flops[k] for r in records),
            max_process_flops=max(r.flops[k] for r in records),
            max_merge_comparisons=max(r.merge_comparisons[k] for r in records),
        ))
    return c, SummaStats(q, merge, stages, records)
