"""Deterministic physical forward models.

Two measurement operators are provided: circular motion-blur convolution
(implemented in the frequency domain) and s-times average pooling. Both
are linear, noise-free maps; measurement noise is injected separately so
cycle iterations stay deterministic.
"""

from dataclasses import dataclass

import numpy as np

from .exceptions import DataError
from .rng import make_rng
from .validation import as_image, check_pow2_shape

KERNEL_SUM_TOL = 1e-12


@dataclass(frozen=True)
class BlurKernel:
    """Odd-sized nonnegative convolution kernel with unit mass."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise DataError(f"kernel must be square, got shape {w.shape}")
        if w.shape[0] % 2 == 0:
            raise DataError(f"kernel size must be odd, got {w.shape[0]}")
        if np.any(w < 0):
            raise DataError("kernel weights must be nonnegative")
        if abs(w.sum() - 1.0) > KERNEL_SUM_TOL:
            raise DataError(f"kernel weights must sum to 1, got {w.sum()!r}")
        object.__setattr__(self, "weights", w)

    @property
    def size(self) -> int:
        return self.weights.shape[0]


@dataclass(frozen=True)
class Blur:
    kernel: BlurKernel


@dataclass(frozen=True)
class Pool:
    factor: int

    def __post_init__(self):
        if int(self.factor) < 1:
            raise DataError(f"pool factor must be >= 1, got {self.factor}")
        object.__setattr__(self, "factor", int(self.factor))


ForwardSpec = Blur | Pool


def fft2(a) -> np.ndarray:
    """2D DFT restricted to power-of-two dimensions."""
    arr = as_image(a)
    check_pow2_shape(arr)
    return np.fft.fft2(arr)


def ifft2(s) -> np.ndarray:
    spec = np.asarray(s, dtype=np.complex128)
    if spec.ndim != 2:
        raise DataError(f"spectrum must be 2D, got shape {spec.shape}")
    check_pow2_shape(spec)
    return np.real(np.fft.ifft2(spec))


def kernel_spectrum(kernel: BlurKernel, shape: tuple[int, int]) -> np.ndarray:
    """Transfer function of the kernel on an image of the given shape,
    with the kernel center placed at the origin (delta kernel -> all-ones).
    """
    height, width = shape
    if kernel.size > height or kernel.size > width:
        raise DataError(
            f"kernel size {kernel.size} exceeds image shape {shape}"
        )
    padded = np.zeros(shape, dtype=np.float64)
    padded[: kernel.size, : kernel.size] = kernel.weights
    center = kernel.size // 2
    padded = np.roll(padded, (-center, -center), axis=(0, 1))
    check_pow2_shape(padded)
    return np.fft.fft2(padded)


def _reflect(p: float, lo: float, hi: float) -> float:
    # Fold a coordinate back into [lo, hi] by mirroring at the borders.
    span = hi - lo
    if span <= 0:
        return lo
    q = (p - lo) % (2.0 * span)
    if q > span:
        q = 2.0 * span - q
    return lo + q


def generate_motion_kernel(seed: int, size: int, steps: int) -> BlurKernel:
    """Random motion-blur kernel from a sub-pixel random walk.

    The walk starts at the grid center and takes `steps` moves with
    slowly-turning heading; positions are reflected at the borders. The
    path is sampled linearly onto grid cells, smoothed with a 3x3 box,
    and normalized to unit mass. Deterministic for a fixed seed.
    """
    if size < 3 or size > 63 or size % 2 == 0:
        raise DataError(f"kernel size must be odd and within [3, 63], got {size}")
    if steps < 1:
        raise DataError(f"steps must be >= 1, got {steps}")
    rng = make_rng(seed, size, steps)
    grid = np.zeros((size, size), dtype=np.float64)
    center = float(size // 2)
    row, col = center, center
    heading = rng.uniform(0.0, 2.0 * np.pi)
    samples_per_step = 8
    for _ in range(steps):
        heading += rng.normal(0.0, 0.5)
        length = rng.uniform(0.2, 0.45)
        nrow = _reflect(row + length * np.sin(heading), 0.0, size - 1.0)
        ncol = _reflect(col + length * np.cos(heading), 0.0, size - 1.0)
        for j in range(1, samples_per_step + 1):
            t = j / samples_per_step
            qr = row + t * (nrow - row)
            qc = col + t * (ncol - col)
            cell = (int(round(qr)), int(round(qc)))
            grid[cell] += length / samples_per_step
        row, col = nrow, ncol

    padded = np.zeros((size + 2, size + 2), dtype=np.float64)
    padded[1:-1, 1:-1] = grid
    smoothed = np.zeros_like(grid)
    for i in range(3):
        for j in range(3):
            smoothed += padded[i : i + size, j : j + size]
    smoothed /= smoothed.sum()
    return BlurKernel(smoothed)


def blur_forward(y, kernel: BlurKernel) -> np.ndarray:
    """Circular (periodic) convolution with the kernel; preserves the mean."""
    arr = as_image(y)
    spectrum = kernel_spectrum(kernel, arr.shape)
    return np.real(np.fft.ifft2(np.fft.fft2(arr) * spectrum))


def pool_forward(y, factor: int) -> np.ndarray:
    """Block-average downsampling by `factor` along both axes."""
    arr = as_image(y)
    factor = int(factor)
    if factor < 1:
        raise DataError(f"pool factor must be >= 1, got {factor}")
    height, width = arr.shape
    if height % factor or width % factor:
        raise DataError(
            f"pool factor mismatch: {factor} does not divide shape {arr.shape}"
        )
    return arr.reshape(height // factor, factor, width // factor, factor).mean(axis=(1, 3))


def apply_forward(y, spec: ForwardSpec) -> np.ndarray:
    if isinstance(spec, Blur):
        return blur_forward(y, spec.kernel)
    if isinstance(spec, Pool):
        return pool_forward(y, spec.factor)
    raise DataError(f"unknown forward spec {spec!r}")


def save_kernel(path, kernel: BlurKernel) -> None:
    """Plain-text kernel: first line the size, then one row of weights per line."""
    lines = [str(kernel.size)]
    for row in kernel.weights:
        lines.append(" ".join(repr(v) for v in row))
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def load_kernel(path) -> BlurKernel:
    with open(path, "r", encoding="ascii") as fh:
        tokens = fh.read().split()
    if not tokens:
        raise DataError(f"empty kernel file {path}")
    size = int(tokens[0])
    values = [float(t) for t in tokens[1:]]
    if len(values) != size * size:
        raise DataError(
            f"kernel file {path} holds {len(values)} weights, expected {size * size}"
        )
    return BlurKernel(np.array(values, dtype=np.float64).reshape(size, size))
