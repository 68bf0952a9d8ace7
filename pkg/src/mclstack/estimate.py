"""Output-size estimation for SpGEMM.

The probabilistic estimator views ``C = AB`` as a three-layer graph: rows of
``A``, the shared inner dimension, and columns of ``B``. Every row of ``A``
gets ``r`` exponential keys; minima are propagated through ``A`` and then
``B``, and the number of rows reaching output column ``j`` is estimated from
its ``r`` minimum keys ``c`` as ``(r - 1) / (lam * sum(c))``; the ``lam``
factor keeps the estimate unbiased for any key rate. This costs
``O(r * (nnz(A) + nnz(B)))`` regardless of ``flops``.

Keys are drawn from a Philox counter-based generator so a seed pins the
sketch on every platform.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .exceptions import DimensionMismatchError
from .kernels import hash_spgemm_symbolic
from .sparse import CscMatrix

_U53 = 2.0 ** -53


class EstimateMethod(str, Enum):
    PROBABILISTIC = "probabilistic"
    EXACT_SYMBOLIC = "exact_symbolic"


@dataclass(frozen=True)
class EstimatorConfig:
    """Knobs of the output-size estimator.

    ``cf_threshold``: below this compression factor the exact symbolic pass is
    used. ``safety``: fraction of the memory budget the phase planner treats
    as usable, to absorb under-estimation.
    """

    r: int = 10
    lam: float = 1.0
    seed: int = 0
    cf_threshold: float = 2.0
    safety: float = 0.9

    def __post_init__(self):
        if not 2 <= self.r <= 64:
            raise ValueError("r must lie in [2, 64]")
        if not self.lam > 0:
            raise ValueError("lam must be positive")
        if not 0 < self.safety <= 1:
            raise ValueError("safety must lie in (0, 1]")


@dataclass(frozen=True, eq=False)
class KeySketch:
    keys: np.ndarray  # shape (nrows, r)
    r: int
    rng_seed: int
    lam: float


@dataclass(frozen=True, eq=False)
class NnzEstimate:
    per_column: np.ndarray
    total: float
    method: EstimateMethod
    # key-element operations performed (min updates plus final summation)
    work: int = 0


def gen_keys(nrows: int, cfg: EstimatorConfig) -> KeySketch:
    """Exponential keys by inverse-CDF sampling, ``-ln(u) / lam``.

    ``u`` is taken on the open grid ``(k + 1/2) * 2**-53`` so every key is
    strictly positive and finite.
    """
    if nrows < 1:
        raise ValueError("nrows must be at least 1")
    rng = np.random.Generator(np.random.Philox(cfg.seed))
    k = rng.integers(0, 2 ** 53, size=(nrows, cfg.r), dtype=np.int64)
    u = (k.astype(np.float64) + 0.5) * _U53
    keys = -np.log(u) / cfg.lam
    keys.setflags(write=False)
    return KeySketch(keys, cfg.r, cfg.seed, cfg.lam)


def _column_min(m: CscMatrix, src: np.ndarray) -> np.ndarray:
    """Per column of ``m``, the componentwise min of ``src`` over its row indices."""
    r = src.shape[1]
    out = np.full((m.ncols, r), np.inf)
    counts = m.column_nnz()
    nonempty = np.flatnonzero(counts)
    if nonempty.size:
        gathered = src[m.row_idx]
        out[nonempty] = np.minimum.reduceat(gathered, m.col_ptr[nonempty], axis=0)
    return out


def propagate_min(a: CscMatrix, sketch: KeySketch) -> np.ndarray:
    """Middle-layer keys: one row of ``r`` minima per column of ``a``; ``inf`` if empty."""
    if sketch.keys.shape[0] < a.nrows:
        raise ValueError("sketch does not cover every row of the matrix")
    return _column_min(a, sketch.keys)


def estimate_nnz(a: CscMatrix, b: CscMatrix, cfg: EstimatorConfig | None = None) -> NnzEstimate:
    cfg = cfg or EstimatorConfig()
    if a.ncols != b.nrows:
        raise DimensionMismatchError(f"cannot multiply {a.shape} by {b.shape}")
    if a.nrows == 0:
        return NnzEstimate(np.zeros(b.ncols), 0.0, EstimateMethod.PROBABILISTIC, 0)
    sketch = gen_keys(a.nrows, cfg)
    middle = propagate_min(a, sketch)
    final = _column_min(b, middle)
    reached = np.isfinite(final[:, 0])
    per_column = np.zeros(b.ncols)
    per_column[reached] = (cfg.r - 1) / (cfg.lam * final[reached].sum(axis=1))
    work = cfg.r * (a.nnz + b.nnz + int(np.count_nonzero(b.column_nnz())))
    return NnzEstimate(per_column, float(per_column.sum()), EstimateMethod.PROBABILISTIC, work)


def exact_symbolic_nnz(a: CscMatrix, b: CscMatrix) -> NnzEstimate:
    counts = hash_spgemm_symbolic(a, b).astype(np.float64)
    return NnzEstimate(counts, float(counts.sum()), EstimateMethod.EXACT_SYMBOLIC, 0)


def choose_estimator(cf_estimate: float, cfg: EstimatorConfig | None = None) -> EstimateMethod:
    cfg = cfg or EstimatorConfig()
    if cf_estimate < 0:
        raise ValueError("cf_estimate must be nonnegative")
    if cf_estimate < cfg.cf_threshold:
        return EstimateMethod.EXACT_SYMBOLIC
    return EstimateMethod.PROBABILISTIC
