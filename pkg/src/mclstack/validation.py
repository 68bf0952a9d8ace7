"""Input checks shared by the estimator and the command line."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
from sklearn.utils import check_array

from .exceptions import DimensionMismatchError
from .sparse import CscMatrix


def as_csc(X) -> CscMatrix:
    """Coerce a :class:`CscMatrix`, scipy sparse matrix, or 2-D array-like."""
    if isinstance(X, CscMatrix):
        return X
    X = check_array(X, accept_sparse="csc", dtype=np.float64, ensure_all_finite=True,
                    ensure_min_samples=1, ensure_min_features=1)
    if sp.issparse(X):
        return CscMatrix.from_scipy(X)
    return CscMatrix.from_dense(X)


def check_adjacency(X) -> CscMatrix:
    """A square, nonnegative weighted adjacency matrix."""
    m = as_csc(X)
    if m.nrows != m.ncols:
        raise DimensionMismatchError(f"adjacency matrix must be square, got {m.shape}")
    if m.nnz and m.values.min() < 0:
        raise ValueError("adjacency weights must be nonnegative")
    return m


def check_positive_int(value, name: str, minimum: int = 1) -> int:
    if isinstance(value, bool) or not isinstance(value, (int, np.integer)) or value < minimum:
        raise ValueError(f"{name} must be an integer >= {minimum}, got {value!r}")
    return int(value)
