"""Measurement-noise injectors: additive Gaussian and salt-and-pepper.

Both are pure functions of (image, level, seed). Gaussian noise is
clamped back to [0, 1] after addition to keep inputs in the solvers'
nominal range; at the levels used here (sigma <= 0.1) the induced
non-Gaussianity is negligible. Salt-and-pepper corrupts an exact pixel
count so its level is a sharp, testable ratio.
"""

from dataclasses import dataclass

import numpy as np

from .exceptions import DataError
from .rng import make_rng
from .validation import as_image


@dataclass(frozen=True)
class NoiseSpec:
    kind: str  # "gaussian" | "snp" | "none"
    sigma: float
    seed: int

    def __post_init__(self):
        if self.kind not in ("gaussian", "snp", "none"):
            raise DataError(f"unknown noise kind {self.kind!r}")
        if self.kind == "gaussian" and self.sigma < 0:
            raise DataError(f"gaussian sigma must be >= 0, got {self.sigma}")
        if self.kind == "snp" and not 0.0 <= self.sigma <= 1.0:
            raise DataError(f"snp sigma must be in [0, 1], got {self.sigma}")


def add_gaussian(x, sigma: float, seed: int) -> np.ndarray:
    """Add i.i.d. N(0, sigma^2) to every pixel, then clamp to [0, 1]."""
    arr = as_image(x)
    if sigma < 0:
        raise DataError(f"gaussian sigma must be >= 0, got {sigma}")
    if sigma == 0:
        return arr.copy()
    rng = make_rng(seed)
    return np.clip(arr + rng.normal(0.0, sigma, size=arr.shape), 0.0, 1.0)


def add_snp(x, sigma: float, seed: int) -> np.ndarray:
    """Force exactly round(sigma * pixel_count) distinct pixels to 0 or 1."""
    arr = as_image(x)
    if not 0.0 <= sigma <= 1.0:
        raise DataError(f"snp sigma must be in [0, 1], got {sigma}")
    count = int(round(sigma * arr.size))
    if count == 0:
        return arr.copy()
    rng = make_rng(seed)
    flat = arr.copy().reshape(-1)
    idx = rng.choice(arr.size, size=count, replace=False)
    flat[idx] = rng.integers(0, 2, size=count).astype(np.float64)
    return flat.reshape(arr.shape)


def apply_noise(x, spec: NoiseSpec) -> np.ndarray:
    if spec.kind == "gaussian":
        return add_gaussian(x, spec.sigma, spec.seed)
    if spec.kind == "snp":
        return add_snp(x, spec.sigma, spec.seed)
    return as_image(x).copy()
