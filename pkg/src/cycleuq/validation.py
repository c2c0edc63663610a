"""Input validation helpers used at the public API boundaries."""

import numpy as np

from .exceptions import DataError


def as_image(a, name: str = "image") -> np.ndarray:
    """Coerce to a 2D float64 array and reject non-finite pixels."""
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim != 2:
        raise DataError(f"{name} must be 2D, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise DataError(f"{name} must have at least one pixel per axis")
    if not np.all(np.isfinite(arr)):
        raise DataError("non-finite input")
    return arr


def check_same_shape(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise DataError(f"shape mismatch: {a.shape} vs {b.shape}")


def is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def check_pow2_shape(a: np.ndarray) -> None:
    if not (is_power_of_two(a.shape[0]) and is_power_of_two(a.shape[1])):
        raise DataError(f"unsupported size {a.shape}: dimensions must be powers of two")


def as_feature_matrix(X, n_features: int | None = None) -> np.ndarray:
    """Coerce to a 2D float64 sample matrix, optionally pinning the width."""
    arr = np.asarray(X, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2:
        raise DataError(f"feature matrix must be 2D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DataError("non-finite input")
    if n_features is not None and arr.shape[1] != n_features:
        raise DataError(f"expected {n_features} features, got {arr.shape[1]}")
    return arr


def as_binary_labels(y, n_samples: int | None = None) -> np.ndarray:
    arr = np.asarray(y)
    if arr.ndim != 1:
        raise DataError(f"labels must be 1D, got shape {arr.shape}")
    if not np.all(np.isin(arr, (0, 1))):
        raise DataError("labels must be binary 0/1")
    if n_samples is not None and arr.shape[0] != n_samples:
        raise DataError(f"expected {n_samples} labels, got {arr.shape[0]}")
    return arr.astype(np.int64)
