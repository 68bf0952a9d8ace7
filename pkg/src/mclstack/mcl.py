"""Markov clustering driver.

Each iteration estimates the size of ``A @ A``, plans phases against the
memory budget, expands and prunes batch by batch on the simulated SUMMA grid,
and inflates. Columns are renormalized after pruning and after inflation so
the matrix stays column-stochastic throughout.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .estimate import (EstimateMethod, EstimatorConfig, choose_estimator, estimate_nnz,
                       exact_symbolic_nnz)
from .exceptions import DimensionMismatchError
from .kernels import KernelChoice, SelectorThresholds, select_kernel
from .phases import ExpandStats, PhasePlan, phased_expand, plan_phases
from .pruning import MclParams, inflate, prune
from .sparse import CscMatrix, MultiplyStats, count_flops, from_coo, make_column_stochastic
from .summa import GridConfig, MergeScheme

__all__ = [
    "ClusterAssignment",
    "IterationStats",
    "MclParams",
    "connected_components",
    "inflate",
    "max_change",
    "mcl_cluster",
    "mcl_iterate",
    "prune",
]

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class ClusterAssignment:
    cluster_of: np.ndarray
    num_clusters: int

    def clusters(self) -> list[list[int]]:
        """Members of each cluster, clusters ordered by their smallest member."""
        out = [[] for _ in range(self.num_clusters)]
        for v, c in enumerate(self.cluster_of.tolist()):
            out[c].append(v)
        return out

    def same_partition(self, other: "ClusterAssignment") -> bool:
        return self.num_clusters == other.num_clusters and np.array_equal(self.cluster_of, other.cluster_of)


@dataclass
class IterationStats:
    iteration: int
    flops: int
    nnz_before_prune_estimate: float
    nnz_unpruned: int
    nnz_after_prune: int
    cf: float
    h_phases: int
    kernel_used: KernelChoice
    estimate_method: EstimateMethod
    change: float
    peak_merge_elements: int = 0
    multiway_merge_elements: int = 0
    expand: ExpandStats | None = field(default=None, repr=False)

    def to_dict(self, detail: bool = False):
        d = {
            "iteration": self.iteration,
            "flops": self.flops,
            "nnz_before_prune_estimate": self.nnz_before_prune_estimate,
            "nnz_unpruned": self.nnz_unpruned,
            "nnz_after_prune": self.nnz_after_prune,
            "cf": self.cf,
            "h_phases": self.h_phases,
            "kernel_used": self.kernel_used.to_dict(),
            "estimate_method": self.estimate_method.value,
            "change": self.change,
            "peak_merge_elements": self.peak_merge_elements,
            "multiway_merge_elements": self.multiway_merge_elements,
        }
        if detail and self.expand is not None:
            d["expand"] = self.expand.to_dict()
        return d


def connected_components(a: CscMatrix) -> ClusterAssignment:
    """Components of the symmetrized nonzero pattern, numbered by smallest member."""
    if a.nrows != a.ncols:
        raise DimensionMismatchError("connected components need a square matrix")
    n = a.nrows
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for r, c in zip(a.row_idx.tolist(), a.col_indices().tolist()):
        ra, rb = find(r), find(c)
        if ra != rb:
            # keep the smaller id as root
            if ra < rb:
                parent[rb] = ra
            else:
                parent[ra] = rb
    label = {}
    cluster_of = np.empty(n, dtype=np.int64)
    for v in range(n):
        root = find(v)
        if root not in label:
            label[root] = len(label)
        cluster_of[v] = label[root]
    return ClusterAssignment(cluster_of, len(label))


def max_change(new: CscMatrix, old: CscMatrix) -> float:
    """Largest absolute entrywise difference, absent entries counting as zero."""
    diff = from_coo(
        new.nrows,
        new.ncols,
        np.concatenate([new.row_idx, old.row_idx]),
        np.concatenate([new.col_indices(), old.col_indices()]),
        np.concatenate([new.values, -old.values]),
    )
    return float(np.abs(diff.values).max()) if diff.nnz else 0.0


def _estimate(a: CscMatrix, flops: int, est: EstimatorConfig) -> tuple:
    """Probabilistic estimate first; fall back to the exact pass when cf is small."""
    sketch = estimate_nnz(a, a, est)
    cf_est = MultiplyStats.estimated(flops, sketch.total).cf
    if choose_estimator(cf_est, est) is EstimateMethod.EXACT_SYMBOLIC:
        exact = exact_symbolic_nnz(a, a)
        return exact, MultiplyStats.estimated(flops, exact.total).cf
    return sketch, cf_est


def mcl_iterate(a: CscMatrix, p: MclParams, grid: GridConfig | None = None,
                budget_bytes: float = math.inf, est: EstimatorConfig | None = None,
                *, iteration: int = 1, phases: int | None = None, kernel: str = "auto",
                merge: MergeScheme | str = MergeScheme.BINARY,
                thresholds: SelectorThresholds | None = None,
                n_threads: int = 1) -> tuple[CscMatrix, IterationStats]:
    """One expand-prune-inflate step on a column-stochastic matrix.

    ``phases`` forces the number of column batches instead of planning them
    from the estimate and ``budget_bytes``.
    """
    est = est or EstimatorConfig()
    grid = grid or GridConfig()
    thresholds = thresholds or SelectorThresholds()
    flops = count_flops(a, a)
    estimate, cf_est = _estimate(a, flops, est)
    if phases is not None:
        plan = PhasePlan.forced(a.ncols, phases)
    elif math.isinf(budget_bytes):
        plan = PhasePlan.forced(a.ncols, 1)
    else:
        plan = plan_phases(estimate, a.ncols, budget_bytes, est.safety)
    pruned, xstats = phased_expand(a, plan, grid, p, kernel, merge, thresholds, est, n_threads)
    nxt = inflate(pruned, p.inflation)
    peak, total = xstats.memory_totals()
    stats = IterationStats(
        iteration=iteration,
        flops=flops,
        nnz_before_prune_estimate=float(estimate.total),
        nnz_unpruned=xstats.nnz_unpruned,
        nnz_after_prune=pruned.nnz,
        cf=flops / xstats.nnz_unpruned if xstats.nnz_unpruned else 0.0,
        h_phases=plan.h,
        kernel_used=select_kernel(MultiplyStats.estimated(flops, estimate.total), thresholds),
        estimate_method=estimate.method,
        change=max_change(nxt, a),
        peak_merge_elements=peak,
        multiway_merge_elements=total,
        expand=xstats,
    )
    logger.debug("iteration %d: flops=%d nnz=%d change=%.3g", iteration, flops, nxt.nnz, stats.change)
    return nxt, stats


@dataclass
class MclRun:
    assignment: ClusterAssignment
    history: list
    matrix: CscMatrix
    converged: bool

    def __iter__(self):
        # unpacks as (assignment, history)
        return iter((self.assignment, self.history))


def mcl_cluster(a: CscMatrix, p: MclParams | None = None, grid: GridConfig | None = None,
                budget_bytes: float = math.inf, est: EstimatorConfig | None = None,
                callback=None, **kwargs) -> MclRun:
    """Run MCL to convergence and read clusters off the connected components.

    Extra keyword arguments (``phases``, ``kernel``, ``merge``,
    ``thresholds``, ``n_threads``) are passed to :func:`mcl_iterate`.
    ``callback(matrix_in, stats, est_cfg)`` is invoked after each iteration.
    The returned object unpacks as ``(assignment, history)``.
    """
    p = p or MclParams()
    est = est or EstimatorConfig()
    if a.nrows != a.ncols:
        raise DimensionMismatchError(f"MCL needs a square matrix, got {a.shape}")
    m = make_column_stochastic(a, add_loops=p.add_loops)
    history = []
    converged = False
    for it in range(1, p.max_iterations + 1):
        iter_est = replace(est, seed=est.seed + it - 1)
        prev = m
        m, stats = mcl_iterate(m, p, grid, budget_bytes, iter_est, iteration=it, **kwargs)
        history.append(stats)
        if callback is not None:
            callback(prev, stats, iter_est)
        if stats.change < p.convergence_epsilon:
            converged = True
            break
    return MclRun(connected_components(m), history, m, converged)
