"""Input validation helpers for array-shaped arguments.

Centralised so the estimator API, metrics, and experiment drivers reject
malformed inputs with the same messages.
"""

import numpy as np

from .errors import ShapeMismatchError


def as_feature_array(X, name="X"):
    """Coerce to a float array of shape (n, M, K, 2) and check finiteness."""
    X = np.asarray(X)
    if X.ndim != 4 or X.shape[-1] != 2:
        raise ShapeMismatchError(
            f"{name} must have shape (n, M, K, 2), got {X.shape}"
        )
    X = X.astype(np.float32, copy=False) if X.dtype == np.float32 else np.asarray(X, dtype=np.float64)
    if not np.all(np.isfinite(X)):
        raise ValueError(f"{name} contains non-finite entries")
    return X


def as_position_array(y, n=None, name="y"):
    """Coerce to a float64 array of shape (n, 2) of planar positions in mm."""
    y = np.asarray(y, dtype=np.float64)
    if y.ndim != 2 or y.shape[1] != 2:
        raise ShapeMismatchError(f"{name} must have shape (n, 2), got {y.shape}")
    if n is not None and y.shape[0] != n:
        raise ValueError(f"{name} has {y.shape[0]} rows, expected {n}")
    if not np.all(np.isfinite(y)):
        raise ValueError(f"{name} contains non-finite entries")
    return y


def as_point3(p, name="point"):
    """Coerce to a finite float64 3-vector."""
    p = np.asarray(p, dtype=np.float64).reshape(-1)
    if p.shape != (3,):
        raise ValueError(f"{name} must be a 3-vector, got shape {p.shape}")
    if not np.all(np.isfinite(p)):
        raise ValueError(f"{name} contains non-finite entries")
    return p


def as_rect(area, name="area"):
    """Coerce to (x0, y0, width, height) with non-negative extents."""
    vals = tuple(float(v) for v in area)
    if len(vals) != 4:
        raise ValueError(f"{name} must be (x0, y0, width, height), got {area!r}")
    if vals[2] < 0 or vals[3] < 0:
        raise ValueError(f"{name} has negative extent: {vals}")
    return vals
