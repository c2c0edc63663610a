"""Numerical verification of the cycle-map contraction apparatus.

The composite map T(y) = solve(measure(y)) is probed for its extreme
stretch factors L (upper) and l (lower). For the linear Wiener/blur
cycle both are exact per-frequency multiplier gains; otherwise they are
estimated by power iteration and random probing of the finite-difference
Jacobian. Three checks then compare a concrete trace against the
recursive, upper, and lower bounds these constants imply.
"""

from dataclasses import dataclass, field

import numpy as np

from .cycles import CycleTrace, GroundTruthError
from .exceptions import DataError, NumericalError
from .image import l2_norm
from .operators import Blur, apply_forward, kernel_spectrum
from .rng import make_rng
from .solvers import WienerSolver
from .validation import as_image

RATIO_TOL = 1e-6


@dataclass(frozen=True)
class LipschitzEstimate:
    L_hat: float
    l_hat: float
    method: str  # exact_fourier | power_iteration | finite_difference_probe


@dataclass(frozen=True)
class BoundReport:
    passed: bool | None  # None when the check is inconclusive
    regime: str = ""
    ratios: np.ndarray = field(default=None)  # observed / allowed, per n
    precondition_held: bool | None = None


def cycle_gains(solver: WienerSolver, forward: Blur, shape) -> np.ndarray:
    """Per-frequency magnitudes of the solve-after-measure multiplier."""
    h_fwd = kernel_spectrum(forward.kernel, shape)
    h_sol = kernel_spectrum(solver.kernel, shape)
    return np.abs(h_fwd * np.conj(h_sol)) / (np.abs(h_sol) ** 2 + solver.lam)


def _cycle_map(solver, forward):
    def T(y):
        return solver.apply(apply_forward(y, forward))

    return T


def estimate_lipschitz(solver, forward, anchor, probes: int = 8, seed: int = 0,
                       method: str = "auto") -> LipschitzEstimate:
    anchor = as_image(anchor)
    if probes < 1:
        raise DataError(f"probes must be >= 1, got {probes}")
    linear = isinstance(solver, WienerSolver) and isinstance(forward, Blur)
    if method == "auto":
        method = "exact_fourier" if linear else "power_iteration"

    if method == "exact_fourier":
        if not linear:
            raise DataError("exact_fourier needs a Wiener solver and blur forward")
        gains = cycle_gains(solver, forward, anchor.shape)
        return LipschitzEstimate(L_hat=float(gains.max()), l_hat=float(gains.min()),
                                 method="exact_fourier")

    T = _cycle_map(solver, forward)
    base = T(anchor)
    delta = 1e-4

    def jacobian_apply(v):
        out = (T(anchor + delta * v) - base) / delta
        if not np.all(np.isfinite(out)):
            raise NumericalError("divergent power iteration")
        return out

    rng = make_rng(seed, 97)
    if method == "power_iteration":
        v = rng.standard_normal(anchor.shape)
        v /= l2_norm(v)
        l_estimate = np.inf
        estimate = 0.0
        for _ in range(200):
            w = jacobian_apply(v)
            norm = l2_norm(w)
            if norm == 0:
                estimate = 0.0
                break
            if abs(norm - estimate) <= 1e-12 * max(norm, 1.0):
                estimate = norm
                break
            estimate = norm
            v = w / norm
        for _ in range(probes):
            u = rng.standard_normal(anchor.shape)
            u /= l2_norm(u)
            l_estimate = min(l_estimate, l2_norm(jacobian_apply(u)))
        return LipschitzEstimate(L_hat=float(estimate), l_hat=float(min(l_estimate, estimate)),
                                 method="power_iteration")

    if method == "finite_difference_probe":
        lo, hi = np.inf, 0.0
        for _ in range(probes):
            u = rng.standard_normal(anchor.shape)
            u /= l2_norm(u)
            stretch = l2_norm(jacobian_apply(u))
            lo, hi = min(lo, stretch), max(hi, stretch)
        return LipschitzEstimate(L_hat=float(hi), l_hat=float(lo),
                                 method="finite_difference_probe")

    raise DataError(f"unknown lipschitz method {method!r}")


def check_recursive_bound(trace: CycleTrace, L_hat: float) -> BoundReport:
    """dy[n+1] <= L_hat * dy[n] for every adjacent pair."""
    dy = trace.dy
    ratios = []
    for n in range(len(dy) - 1):
        allowed = L_hat * dy[n] * (1.0 + RATIO_TOL)
        if allowed == 0:
            ratios.append(0.0 if dy[n + 1] == 0 else np.inf)
        else:
            ratios.append(dy[n + 1] / allowed)
    ratios = np.array(ratios) if ratios else np.zeros(0)
    return BoundReport(passed=bool(np.all(ratios <= 1.0)), regime="recursive",
                       ratios=ratios)


def check_upper_bound(trace: CycleTrace, L_hat: float, eps0: GroundTruthError,
                      precondition_held: bool | None = None) -> BoundReport:
    """dy[n] <= L^n * ((L+1)/L) * ||eps0|| for n = 1..N.

    The bound presumes an approximately unbiased solver; the caller
    states whether that held (calibrated, lambda <= 1e-6, noiseless
    in-distribution geometry) and the verdict records it.
    """
    if L_hat <= 0:
        raise DataError(f"L_hat must be positive, got {L_hat}")
    dy = trace.dy
    ratios = np.empty(len(dy))
    for n in range(1, len(dy) + 1):
        bound = (L_hat**n) * ((L_hat + 1.0) / L_hat) * eps0.eps0_norm * (1.0 + RATIO_TOL)
        if bound == 0:
            ratios[n - 1] = 0.0 if dy[n - 1] == 0 else np.inf
        else:
            ratios[n - 1] = dy[n - 1] / bound
    return BoundReport(passed=bool(np.all(ratios <= 1.0)), regime="upper",
                       ratios=ratios, precondition_held=precondition_held)


def check_lower_bound(trace: CycleTrace, l_hat: float, L_hat: float,
                      eps0: GroundTruthError) -> BoundReport:
    """Divergent regime (l >= 1): dy[n] >= l^n ((l-1)/l) ||eps0||.
    Convergent regime (L < 1):    dy[n] >= l^n ((1-L)/l) ||eps0||.
    Inconclusive when l < 1 <= L (neither hypothesis applies)."""
    if l_hat <= 0:
        raise DataError(f"l_hat must be positive, got {l_hat}")
    if l_hat >= 1.0:
        regime = "divergent"
        scale = (l_hat - 1.0) / l_hat
    elif L_hat < 1.0:
        regime = "convergent"
        scale = (1.0 - L_hat) / l_hat
    else:
        return BoundReport(passed=None, regime="inconclusive")
    dy = trace.dy
    ratios = np.empty(len(dy))
    for n in range(1, len(dy) + 1):
        bound = (l_hat**n) * scale * eps0.eps0_norm * (1.0 - RATIO_TOL)
        if dy[n - 1] == 0:
            ratios[n - 1] = 0.0 if bound <= 0 else np.inf
        else:
            ratios[n - 1] = bound / dy[n - 1]  # <= 1 when the bound holds
    return BoundReport(passed=bool(np.all(ratios <= 1.0)), regime=regime,
                       ratios=ratios)


def verification_report(trace: CycleTrace, estimate: LipschitzEstimate,
                        eps0: GroundTruthError,
                        precondition_held: bool | None = None) -> dict:
    """One trace's verdicts in the documented JSON layout."""
    eq6 = check_recursive_bound(trace, estimate.L_hat)
    eq7 = check_upper_bound(trace, estimate.L_hat, eps0,
                            precondition_held=precondition_held)
    low = check_lower_bound(trace, estimate.l_hat, estimate.L_hat, eps0)
    return {
        "L_hat": estimate.L_hat,
        "l_hat": estimate.l_hat,
        "method": estimate.method,
        "per_n_ratios": {
            "recursive": [float(r) for r in eq6.ratios],
            "upper": [float(r) for r in eq7.ratios],
            "lower": [float(r) for r in low.ratios] if low.ratios is not None else [],
        },
        "eq6_pass": eq6.passed,
        "eq7_pass": eq7.passed,
        "eq7_precondition_held": eq7.precondition_held,
        "eq9or10_regime": low.regime,
        "eq9or10_pass": low.passed,
    }
