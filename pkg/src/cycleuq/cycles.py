"""Forward-backward cycle execution.

Starting from a measurement x, the solver and the physical forward model
are applied alternately: y0 = g(x), then x_n = F(y_{n-1}), y_n = g(x_n)
for n = 1..N, plus one extra forward pass x_{N+1} = F(y_N) so the
measurement-domain differences cover n = 1..N+1. The trace keeps every
intermediate image together with the adjacent-difference norms that the
downstream estimators consume.
"""

import csv
import os
from dataclasses import dataclass, field

import numpy as np

from .exceptions import DataError, NumericalError
from .image import diff_norm, write_pgm
from .operators import apply_forward
from .validation import as_image


@dataclass(frozen=True)
class CycleTrace:
    n_cycles: int
    x_seq: list  # N+2 measurement-domain images: x, x_1, ..., x_{N+1}
    y_seq: list  # N+1 signal-domain images: y_0, ..., y_N
    dy: np.ndarray = field(default=None)  # ||y_n - y_{n-1}||, n = 1..N
    dx: np.ndarray = field(default=None)  # ||x_n - x_{n-1}||, n = 1..N+1


@dataclass(frozen=True)
class GroundTruthError:
    eps0_norm: float


def run_cycles(x, solver, forward, n_cycles: int) -> CycleTrace:
    if n_cycles < 1:
        raise DataError(f"n_cycles must be >= 1, got {n_cycles}")
    x0 = as_image(x)
    x_seq = [x0]
    y_seq = [_checked(solver.apply(x0))]
    for _ in range(n_cycles):
        x_seq.append(_checked(apply_forward(y_seq[-1], forward)))
        y_seq.append(_checked(solver.apply(x_seq[-1])))
    x_seq.append(_checked(apply_forward(y_seq[-1], forward)))
    dy = np.array([diff_norm(y_seq[n], y_seq[n - 1]) for n in range(1, len(y_seq))])
    dx = np.array([diff_norm(x_seq[n], x_seq[n - 1]) for n in range(1, len(x_seq))])
    return CycleTrace(n_cycles=n_cycles, x_seq=x_seq, y_seq=y_seq, dy=dy, dx=dx)


def _checked(img: np.ndarray) -> np.ndarray:
    if not np.all(np.isfinite(img)):
        raise NumericalError("cycle diverged numerically")
    return img


def actual_uncertainty(trace: CycleTrace, ground_truth) -> GroundTruthError:
    """Norm of the inference error of the first reconstruction, y0 - truth."""
    return GroundTruthError(eps0_norm=diff_norm(trace.y_seq[0], ground_truth))


def trace_to_csv(trace: CycleTrace, path) -> None:
    """Columns (n, dy, dx); dy is empty on the final row n = N+1."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["n", "dy", "dx"])
        for n in range(1, trace.n_cycles + 2):
            dy = repr(float(trace.dy[n - 1])) if n <= trace.n_cycles else ""
            writer.writerow([n, dy, repr(float(trace.dx[n - 1]))])


def dump_trace_images(trace: CycleTrace, out_dir) -> None:
    os.makedirs(out_dir, exist_ok=True)
    for n, img in enumerate(trace.x_seq):
        write_pgm(os.path.join(out_dir, f"x_{n:02d}.pgm"), np.clip(img, 0.0, 1.0))
    for n, img in enumerate(trace.y_seq):
        write_pgm(os.path.join(out_dir, f"y_{n:02d}.pgm"), np.clip(img, 0.0, 1.0))
