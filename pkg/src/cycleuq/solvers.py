"""Deterministic inverse solvers standing in for trained reconstruction
networks: Wiener deconvolution for the deblur testbed and Landweber
(gradient-descent Tikhonov) upsampling for the super-resolution testbed.

Both are immutable after construction; `apply` is pure. A grid-search
calibration picks the regularization weight that makes a solver
approximately unbiased on its in-distribution data.
"""

import dataclasses
from dataclasses import dataclass

import numpy as np

from .exceptions import DataError, NumericalError
from .image import diff_norm
from .operators import BlurKernel, kernel_spectrum, pool_forward
from .validation import as_image

SPECTRUM_TOL = 1e-12


@dataclass(frozen=True)
class WienerSolver:
    """Regularized frequency-domain deconvolution for circular blur."""

    kernel: BlurKernel
    lam: float

    def __post_init__(self):
        if self.lam < 0:
            raise DataError(f"wiener lambda must be >= 0, got {self.lam}")

    def apply(self, x) -> np.ndarray:
        return wiener_apply(x, self.kernel, self.lam)


def wiener_apply(x, kernel: BlurKernel, lam: float) -> np.ndarray:
    """Per-frequency conj(H) * X / (|H|^2 + lambda). Linear in x."""
    arr = as_image(x)
    if lam < 0:
        raise DataError(f"wiener lambda must be >= 0, got {lam}")
    spectrum = kernel_spectrum(kernel, arr.shape)
    power = np.abs(spectrum) ** 2
    if lam == 0 and np.min(power) < SPECTRUM_TOL:
        raise NumericalError("singular spectrum: lambda=0 with vanishing |H|")
    out = np.conj(spectrum) * np.fft.fft2(arr) / (power + lam)
    return np.real(np.fft.ifft2(out))


def nn_upsample(x, factor: int) -> np.ndarray:
    """Nearest-neighbor upsampling (each pixel replicated factor x factor)."""
    arr = as_image(x)
    return np.repeat(np.repeat(arr, factor, axis=0), factor, axis=1)


def _pool_adjoint(z, factor: int) -> np.ndarray:
    return nn_upsample(z, factor) / float(factor * factor)


def _grad_penalty(y: np.ndarray) -> np.ndarray:
    # divergence of the forward-difference gradient with periodic wrap
    return (
        4.0 * y
        - np.roll(y, 1, axis=0)
        - np.roll(y, -1, axis=0)
        - np.roll(y, 1, axis=1)
        - np.roll(y, -1, axis=1)
    )


def landweber_objective(y, x, factor: int, lam: float) -> float:
    """0.5*||pool(y) - x||^2 + 0.5*lam*||grad y||^2 (periodic forward diff)."""
    arr_y = as_image(y)
    arr_x = as_image(x)
    residual = pool_forward(arr_y, factor) - arr_x
    gr = np.roll(arr_y, -1, axis=0) - arr_y
    gc = np.roll(arr_y, -1, axis=1) - arr_y
    return float(
        0.5 * np.sum(residual * residual)
        + 0.5 * lam * (np.sum(gr * gr) + np.sum(gc * gc))
    )


@dataclass(frozen=True)
class LandweberSolver:
    """Gradient descent on the pooled-data Tikhonov objective, started
    from a nearest-neighbor upsample of the measurement."""

    factor: int
    lam: float = 0.0
    steps: int = 60
    step_size: float | None = None
    clamp: bool = False

    def __post_init__(self):
        if self.factor < 1:
            raise DataError(f"pool factor must be >= 1, got {self.factor}")
        if self.lam < 0:
            raise DataError(f"landweber lambda must be >= 0, got {self.lam}")
        if self.steps < 0:
            raise DataError(f"steps must be >= 0, got {self.steps}")
        if self.step_size is not None and not 0 < self.step_size < self.stability_bound():
            raise DataError(
                f"step_size {self.step_size} violates the stability bound "
                f"(must be in (0, {self.stability_bound()}))"
            )

    def stability_bound(self) -> float:
        # normal operator norm: pooling contributes 1/factor^2, the
        # periodic Laplacian at most 8
        return 2.0 / (1.0 / self.factor**2 + 8.0 * self.lam)

    @property
    def effective_step_size(self) -> float:
        # None means "derive from the stability bound", so relaxing or
        # tightening lambda via dataclasses.replace stays safe
        return 0.5 * self.stability_bound() if self.step_size is None else self.step_size

    def apply(self, x) -> np.ndarray:
        return landweber_apply(x, self)


def landweber_apply(x, solver: LandweberSolver) -> np.ndarray:
    arr = as_image(x)
    factor = solver.factor
    step = solver.effective_step_size
    y = nn_upsample(arr, factor)
    for _ in range(solver.steps):
        residual = pool_forward(y, factor) - arr
        grad = _pool_adjoint(residual, factor)
        if solver.lam > 0:
            grad = grad + solver.lam * _grad_penalty(y)
        y = y - step * grad
        if solver.clamp:
            y = np.clip(y, 0.0, 1.0)
    if not np.all(np.isfinite(y)):
        raise NumericalError("landweber iteration diverged")
    return y


def calibrate_solver(proto, id_set, lambda_grid):
    """Pick the grid lambda minimizing mean reconstruction error over
    (measurement, truth) pairs; ties go to the larger lambda."""
    if not id_set:
        raise DataError("calibration set must be nonempty")
    if len(lambda_grid) == 0:
        raise DataError("lambda grid must be nonempty")
    best_lam = None
    best_err = np.inf
    for lam in sorted(float(v) for v in lambda_grid):
        candidate = dataclasses.replace(proto, lam=lam)
        err = float(np.mean([diff_norm(candidate.apply(x), y) for x, y in id_set]))
        if err <= best_err:
            best_err = err
            best_lam = lam
    return dataclasses.replace(proto, lam=best_lam)
