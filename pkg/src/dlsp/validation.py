"""Batch input checks shared by the estimator facade and the server."""

from __future__ import annotations

import numpy as np


def as_grid_batch(x, size: int | None = None) -> np.ndarray:
    """Coerce to (n, h, w, 1) float32.

    Accepts (n, h, w) or (n, h, w, 1).  Values must be finite and in [0, 1];
    ``size`` additionally pins the spatial extent.
    """
    arr = np.asarray(x, dtype=np.float32)
    if arr.ndim == 3:
        arr = arr[..., None]
    if arr.ndim != 4 or arr.shape[3] != 1:
        raise ValueError(f"want (n, h, w) or (n, h, w, 1), got shape {np.shape(x)}")
    if arr.shape[1] < 1 or arr.shape[2] < 1:
        raise ValueError(f"empty spatial dims in shape {arr.shape}")
    if size is not None and arr.shape[1:3] != (size, size):
        raise ValueError(f"want {size}x{size} grids, got {arr.shape[1]}x{arr.shape[2]}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("grid batch contains non-finite values")
    if arr.size and (arr.min() < 0.0 or arr.max() > 1.0):
        raise ValueError("grid values must lie in [0, 1]")
    return arr


def check_labels(y, n_classes: int) -> np.ndarray:
    arr = np.asarray(y)
    if arr.ndim != 1:
        raise ValueError(f"labels must be 1-d, got shape {arr.shape}")
    if not np.issubdtype(arr.dtype, np.integer):
        cast = arr.astype(np.int64)
        if not np.array_equal(cast, arr):
            raise ValueError("labels must be integers")
        arr = cast
    if arr.size and (arr.min() < 0 or arr.max() >= n_classes):
        raise ValueError(f"labels must lie in [0, {n_classes}), got [{arr.min()}, {arr.max()}]")
    return arr.astype(np.int64)
