"""Exponential regression on cycle-consistency sequences.

The adjacent-difference norms of a trace are fit to d_n = eps * k^n + b
by variable projection: for each candidate rate k the amplitude and
offset are solved in closed form, and the best grid rate is refined by
golden-section search. The fitted amplitude (uncertainty), offset (bias)
and the first measurement-domain difference make up the five-feature
vector used by the error predictor and the OOD classifier.
"""

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .cycles import CycleTrace, run_cycles
from .exceptions import DataError
from .operators import apply_forward  # noqa: F401  (re-export convenience)

K_MAX = 4.0
K_GRID_MIN = 1e-3
K_GRID_POINTS = 200
GOLDEN_TOL = 1e-6

FEATURE_NAMES = ("eps_x", "eps_y", "b_x", "b_y", "dx1")


@dataclass(frozen=True)
class ExpFit:
    k_hat: float
    eps_hat: float
    b_hat: float
    r_squared: float


@dataclass(frozen=True)
class FeatureVector:
    eps_x: float
    eps_y: float
    b_x: float
    b_y: float
    dx1: float

    def as_array(self) -> np.ndarray:
        return np.array([self.eps_x, self.eps_y, self.b_x, self.b_y, self.dx1])


def _k_grid() -> np.ndarray:
    # 200 log-spaced rates over (K_GRID_MIN, K_MAX], open at the left end
    return np.geomspace(K_GRID_MIN, K_MAX, K_GRID_POINTS + 1)[1:]


def _project(d: np.ndarray, n_idx: np.ndarray, k: float):
    """Closed-form least squares in (eps, b) at fixed k, with eps clipped
    at zero (a negative amplitude has no meaning for norm sequences)."""
    p = k ** n_idx
    s_pp = float(p @ p)
    s_p1 = float(p.sum())
    s_11 = float(len(d))
    t_p = float(p @ d)
    t_1 = float(d.sum())
    det = s_pp * s_11 - s_p1 * s_p1
    if det <= 0.0:
        eps, b = 0.0, t_1 / s_11
    else:
        eps = (t_p * s_11 - t_1 * s_p1) / det
        b = (s_pp * t_1 - s_p1 * t_p) / det
        if eps < 0.0:
            eps, b = 0.0, t_1 / s_11
    r = d - (eps * p + b)
    return eps, b, float(r @ r)


def fit_exponential(d, start_index: int) -> ExpFit:
    """Fit d_n = eps * k^n + b for n = start_index, start_index+1, ...

    Needs at least 3 points. An exactly constant sequence is
    unidentifiable between rate and offset; it is resolved as
    (k=1, eps=0, b=const), i.e. a converged cycle carries no marginal
    uncertainty and the residual offset is all bias.
    """
    d = np.asarray(d, dtype=np.float64)
    if d.ndim != 1 or len(d) < 3:
        raise DataError("underdetermined fit: need at least 3 points")
    if not np.all(np.isfinite(d)):
        raise DataError("non-finite input")
    if np.any(d < 0):
        raise DataError("difference norms must be nonnegative")
    n_idx = np.arange(start_index, start_index + len(d), dtype=np.float64)

    if d.max() == d.min():
        return ExpFit(k_hat=1.0, eps_hat=0.0, b_hat=float(d[0]), r_squared=1.0)

    grid = _k_grid()
    objectives = np.array([_project(d, n_idx, k)[2] for k in grid])
    best = int(np.argmin(objectives))
    lo = grid[best - 1] if best > 0 else grid[0]
    hi = grid[best + 1] if best < len(grid) - 1 else grid[-1]
    k_hat, _ = _golden_section(lambda k: _project(d, n_idx, k)[2], lo, hi)
    if _project(d, n_idx, k_hat)[2] > objectives[best]:
        k_hat = float(grid[best])
    eps_hat, b_hat, ss_res = _project(d, n_idx, k_hat)

    ss_tot = float(np.sum((d - d.mean()) ** 2))
    r_squared = 1.0 - ss_res / ss_tot
    return ExpFit(k_hat=float(k_hat), eps_hat=float(eps_hat), b_hat=float(b_hat),
                  r_squared=float(r_squared))


def _golden_section(fn, lo: float, hi: float, tol: float = GOLDEN_TOL):
    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = float(lo), float(hi)
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = fn(c), fn(d)
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = fn(d)
    return (c, fc) if fc < fd else (d, fd)


def extract_features(trace: CycleTrace) -> FeatureVector:
    """Five estimators from one trace: the signal-domain fit covers
    n = 1..N, the measurement-domain fit n = 2..N+1, and the first
    measurement difference is kept out of the regression as its own
    noise-sensitive measure."""
    if trace.n_cycles < 3:
        raise DataError("feature extraction needs at least 3 cycles")
    fit_y = fit_exponential(trace.dy, 1)
    fit_x = fit_exponential(trace.dx[1:], 2)
    return FeatureVector(
        eps_x=fit_x.eps_hat,
        eps_y=fit_y.eps_hat,
        b_x=fit_x.b_hat,
        b_y=fit_y.b_hat,
        dx1=float(trace.dx[0]),
    )


def featurize(x, solver, forward, n_cycles: int):
    """Run one cycle trace and return (features, trace)."""
    trace = run_cycles(x, solver, forward, n_cycles)
    return extract_features(trace), trace


def feature_matrix(inputs, solvers, forwards, n_cycles: int, jobs: int = 1,
                   with_traces: bool = False):
    """Feature rows for a batch of measurements, in input order.

    `solvers` and `forwards` may be single specs (shared by all inputs)
    or sequences aligned with `inputs`. Rows are computed concurrently
    when jobs > 1; aggregation order is fixed by the input order.
    """
    n = len(inputs)
    solver_list = solvers if isinstance(solvers, (list, tuple)) else [solvers] * n
    forward_list = forwards if isinstance(forwards, (list, tuple)) else [forwards] * n
    if len(solver_list) != n or len(forward_list) != n:
        raise DataError("solvers/forwards must match the number of inputs")

    def one(i):
        return featurize(inputs[i], solver_list[i], forward_list[i], n_cycles)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(one, range(n)))
    else:
        results = [one(i) for i in range(n)]
    features = np.array([fv.as_array() for fv, _ in results])
    if with_traces:
        return features, [tr for _, tr in results]
    return features


class CycleFeatureExtractor(BaseEstimator, TransformerMixin):
    """Stateless transformer mapping measurements to the five cycle
    features, for composition with scikit-learn pipelines."""

    def __init__(self, solver=None, forward=None, n_cycles=5, n_jobs=1):
        self.solver = solver
        self.forward = forward
        self.n_cycles = n_cycles
        self.n_jobs = n_jobs

    def fit(self, X=None, y=None):
        return self

    def transform(self, X) -> np.ndarray:
        if self.solver is None or self.forward is None:
            raise DataError("extractor needs a solver and a forward spec")
        return feature_matrix(list(X), self.solver, self.forward,
                              self.n_cycles, jobs=self.n_jobs)

    def get_feature_names_out(self, input_features=None):
        return np.array(FEATURE_NAMES)


def write_features_csv(path, features, labels, eps0=None) -> None:
    features = np.asarray(features, dtype=np.float64)
    header = list(FEATURE_NAMES) + ["label"] + (["eps0"] if eps0 is not None else [])
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i in range(features.shape[0]):
            row = [repr(float(v)) for v in features[i]] + [int(labels[i])]
            if eps0 is not None:
                row.append(repr(float(eps0[i])))
            writer.writerow(row)


def read_features_csv(path):
    """Returns (features, labels, eps0-or-None)."""
    with open(path, "r", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [row for row in reader if row]
    if header[: len(FEATURE_NAMES)] != list(FEATURE_NAMES):
        raise DataError(f"unexpected feature CSV header {header!r} in {path}")
    has_eps0 = "eps0" in header
    features = np.array([[float(v) for v in row[: len(FEATURE_NAMES)]] for row in rows])
    labels = np.array([int(row[len(FEATURE_NAMES)]) for row in rows])
    eps0 = None
    if has_eps0:
        idx = header.index("eps0")
        eps0 = np.array([float(row[idx]) for row in rows])
    return features, labels, eps0
