"""Phased expansion: multiply and prune a batch of columns at a time.

The number of phases comes from the estimated size of the unpruned product
against the memory budget. Because pruning is column-local and each output
column is computed identically whatever batch it falls in, the result does
not depend on the number of phases.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .estimate import EstimatorConfig, NnzEstimate
from .exceptions import BudgetInfeasibleError
from .kernels import SelectorThresholds
from .pruning import prune as prune_columns
from .sparse import CscMatrix, hstack
from .summa import CostModel, GridConfig, MergeScheme, SummaStats, stripe_offsets, summa_multiply

PTR_BYTES = 8


@dataclass(frozen=True)
class PhasePlan:
    h: int
    batches: tuple  # (start, stop) column ranges
    estimated_bytes: float
    budget_bytes: float
    safety: float

    def __post_init__(self):
        if self.h != len(self.batches):
            raise ValueError("h must equal the number of batches")

    @classmethod
    def forced(cls, ncols: int, h: int, estimated_bytes: float = 0.0) -> "PhasePlan":
        """A plan with a fixed number of phases, ignoring any budget."""
        h = max(1, min(h, ncols)) if ncols else 1
        return cls(h, _batches(ncols, h), estimated_bytes, math.inf, 1.0)

    def to_dict(self):
        return {
            "h": self.h,
            "batches": [list(b) for b in self.batches],
            "estimated_bytes": self.estimated_bytes,
            "budget_bytes": self.budget_bytes if math.isfinite(self.budget_bytes) else None,
            "safety": self.safety,
        }


def _batches(ncols: int, h: int) -> tuple:
    bounds = stripe_offsets(ncols, h)
    return tuple((int(lo), int(hi)) for lo, hi in zip(bounds[:-1], bounds[1:]))


def estimated_bytes(estimated: NnzEstimate, ncols: int, bytes_per_nnz: int = CostModel.bytes_per_nnz) -> float:
    return float(estimated.total) * bytes_per_nnz + (ncols + 1) * PTR_BYTES


def plan_phases(estimated: NnzEstimate, ncols: int, budget_bytes: float, safety: float = 0.9,
                bytes_per_nnz: int = CostModel.bytes_per_nnz) -> PhasePlan:
    if not budget_bytes > 0:
        raise ValueError("budget_bytes must be positive")
    if not 0 < safety <= 1:
        raise ValueError("safety must lie in (0, 1]")
    total = estimated_bytes(estimated, ncols, bytes_per_nnz)
    if ncols and len(estimated.per_column):
        densest = int(np.argmax(estimated.per_column))
        col_bytes = float(estimated.per_column[densest]) * bytes_per_nnz
        if col_bytes > budget_bytes:
            raise BudgetInfeasibleError(
                f"column {densest} alone needs ~{col_bytes:.0f} bytes, over the budget of {budget_bytes:.0f}",
                column=densest,
            )
    h = max(1, math.ceil(total / (safety * budget_bytes)))
    if ncols:
        h = min(h, ncols)
    return PhasePlan(h, _batches(ncols, h), total, float(budget_bytes), float(safety))


@dataclass
class ExpandStats:
    plan: PhasePlan
    phases: list = field(default_factory=list)  # SummaStats per phase
    nnz_unpruned: int = 0

    @property
    def flops(self) -> int:
        return sum(s.flops for s in self.phases)

    def memory_totals(self) -> tuple[int, int]:
        peak = total = 0
        for s in self.phases:
            p, t = s.memory_totals()
            peak += p
            total += t
        return peak, total

    def to_dict(self):
        return {
            "plan": self.plan.to_dict(),
            "flops": self.flops,
            "nnz_unpruned": self.nnz_unpruned,
            "phases": [s.to_dict() for s in self.phases],
        }


def phased_expand(a: CscMatrix, plan: PhasePlan, grid: GridConfig | None = None, prune=None,
                  kernel: str = "auto", merge: MergeScheme | str = MergeScheme.BINARY,
                  thresholds: SelectorThresholds | None = None,
                  est_cfg: EstimatorConfig | None = None,
                  n_threads: int = 1) -> tuple[CscMatrix, ExpandStats]:
    """``prune(A @ A)`` computed batch by batch over the columns of the right operand.

    ``prune`` is any object with ``prune_threshold`` and ``select_k``; ``None``
    skips pruning.
    """
    if plan.batches and plan.batches[-1][1] != a.ncols:
        raise ValueError("phase plan does not cover the matrix columns")
    stats = ExpandStats(plan)
    slices = []
    for lo, hi in plan.batches:
        c, s = summa_multiply(a, a.col_slice(lo, hi), grid, kernel, merge, thresholds, est_cfg,
                              n_threads=n_threads)
        stats.phases.append(s)
        stats.nnz_unpruned += c.nnz
        slices.append(prune_columns(c, prune) if prune is not None else c)
    if not slices:
        return CscMatrix.empty(a.nrows, a.ncols), stats
    return hstack(slices), stats
