"""Input checks shared by the estimators."""
from __future__ import annotations

import numpy as np
from sklearn.utils import check_array

from .sources import CauchyData


def check_cauchy_data(data, require_full: bool = False, require_dim: int | None = None) -> CauchyData:
    """Validate a :class:`CauchyData` instance before fitting."""
    if not isinstance(data, CauchyData):
        raise TypeError(f"expected CauchyData, got {type(data).__name__}")
    if len(data) == 0:
        raise ValueError("Cauchy data has no boundary nodes")
    check_array(data.points, ensure_min_samples=1)
    check_array(data.normals, ensure_min_samples=1)
    if data.normals.shape != data.points.shape:
        raise ValueError("normals and points must have the same shape")
    if not np.allclose(np.linalg.norm(data.normals, axis=1), 1.0, atol=1e-8):
        raise ValueError("normals must be unit vectors")
    if np.any(~np.isfinite(data.weights)) or np.any(data.weights < 0):
        raise ValueError("quadrature weights must be finite and nonnegative")
    if not (np.isfinite(data.f).any() or np.isfinite(data.g).any()):
        raise ValueError("no trace is observed at any node")
    if require_full and not data.is_full:
        raise ValueError("this estimator needs both traces at every node")
    if require_dim is not None and data.d != require_dim:
        raise ValueError(f"this estimator needs {require_dim}-dimensional data, got d={data.d}")
    return data


def check_points(X, d: int) -> np.ndarray:
    """Evaluation points as a float array of shape (n, d)."""
    X = check_array(X, dtype=float)
    if X.shape[1] != d:
        raise ValueError(f"expected points with {d} coordinates, got {X.shape[1]}")
    return X
