"""scikit-learn style front end to the MCL driver."""

from __future__ import annotations

import math

from sklearn.base import BaseEstimator, ClusterMixin

from .estimate import EstimatorConfig
from .kernels import SelectorThresholds
from .mcl import MclParams, mcl_cluster
from .summa import GridConfig, MergeScheme
from .validation import check_adjacency, check_positive_int


class MarkovClustering(ClusterMixin, BaseEstimator):
    """Markov clustering of a weighted graph given as its adjacency matrix.

    ``fit`` takes a square nonnegative matrix (dense array, scipy sparse, or
    :class:`~mclstack.sparse.CscMatrix`) whose entry ``(i, j)`` is the weight
    of the edge between ``i`` and ``j``; samples are the graph's vertices.

    Parameters
    ----------
    inflation : float, default=2.0
        Exponent of the Hadamard power applied each iteration.
    prune_threshold : float, default=1e-4
        Entries below this are dropped after expansion.
    select_k : int, default=1000
        Maximum nonzeros kept per column after pruning.
    max_iter : int, default=100
    tol : float, default=1e-4
        Convergence threshold on the largest entrywise change.
    add_loops : bool, default=True
        Add a unit self-loop to every vertex before normalizing.
    grid : int, default=1
        Side ``q`` of the simulated process grid.
    budget_bytes : float or None, default=None
        Memory budget for the unpruned product; ``None`` means unlimited.
    phases : int or None, default=None
        Force this many column batches instead of planning them.
    n_keys : int, default=10
        Keys per vertex in the output-size sketch.
    cf_threshold : float, default=2.0
        Compression factor below which the exact symbolic estimate is used.
    kernel : {"auto", "heap", "hash"}, default="auto"
    merge : {"binary", "multiway"}, default="binary"
    random_state : int, default=0
        Seed of the output-size sketch.
    n_threads : int, default=1
        Worker threads over logical processes; never changes the result.

    Attributes
    ----------
    labels_ : ndarray of shape (n_vertices,)
        Cluster id of every vertex, clusters numbered by smallest member.
    n_clusters_ : int
    n_iter_ : int
    converged_ : bool
    history_ : list of IterationStats
    flow_matrix_ : CscMatrix
        The final (converged) flow matrix.
    """

    def __init__(self, inflation=2.0, prune_threshold=1e-4, select_k=1000, max_iter=100, tol=1e-4,
                 add_loops=True, grid=1, budget_bytes=None, phases=None, n_keys=10,
                 cf_threshold=2.0, kernel="auto", merge="binary", random_state=0, n_threads=1):
        self.inflation = inflation
        self.prune_threshold = prune_threshold
        self.select_k = select_k
        self.max_iter = max_iter
        self.tol = tol
        self.add_loops = add_loops
        self.grid = grid
        self.budget_bytes = budget_bytes
        self.phases = phases
        self.n_keys = n_keys
        self.cf_threshold = cf_threshold
        self.kernel = kernel
        self.merge = merge
        self.random_state = random_state
        self.n_threads = n_threads

    def _params(self):
        if self.kernel not in ("auto", "heap", "hash"):
            raise ValueError(f"unknown kernel {self.kernel!r}")
        params = MclParams(
            inflation=float(self.inflation),
            prune_threshold=float(self.prune_threshold),
            select_k=check_positive_int(self.select_k, "select_k"),
            max_iterations=check_positive_int(self.max_iter, "max_iter"),
            convergence_epsilon=float(self.tol),
            add_loops=bool(self.add_loops),
        )
        est = EstimatorConfig(r=check_positive_int(self.n_keys, "n_keys", 2),
                              seed=int(self.random_state or 0),
                              cf_threshold=float(self.cf_threshold))
        return params, est

    def fit(self, X, y=None):
        a = check_adjacency(X)
        params, est = self._params()
        run = mcl_cluster(
            a,
            params,
            GridConfig(check_positive_int(self.grid, "grid")),
            math.inf if self.budget_bytes is None else float(self.budget_bytes),
            est,
            phases=self.phases,
            kernel=self.kernel,
            merge=MergeScheme(self.merge),
            thresholds=SelectorThresholds(),
            n_threads=check_positive_int(self.n_threads, "n_threads"),
        )
        self.labels_ = run.assignment.cluster_of.copy()
        self.n_clusters_ = run.assignment.num_clusters
        self.n_iter_ = len(run.history)
        self.converged_ = run.converged
        self.history_ = run.history
        self.flow_matrix_ = run.matrix
        return self
