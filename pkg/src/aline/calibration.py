"""Unsupervised temperature scaling by root-finding against estimated accuracy.

Solves for the temperature at which the mean max-softmax confidence equals the
(estimated) accuracy, via safeguarded Newton inside a bisection bracket. An
oracle grid sweep over labeled data gives the best-achievable ECE lower bound.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from aline import kernels, metrics
from aline.bundle import PredictionBundle
from aline.errors import AlineError, SolverError

TAU_MIN = 1e-3
TAU_MAX = 1e6
MAX_ITERATIONS = 200
DEFAULT_ORACLE_GRID = (0.05, 20.0, 200)


@dataclass(frozen=True)
class CalibrationResult:
    model_id: str
    tau: float
    target_accuracy: float
    achieved_mean_confidence: float
    ece_before: float | None
    ece_after: float | None
    oracle_tau: float | None
    oracle_ece: float | None
    solver_iterations: int
    clamped_target: bool


def mean_confidence_and_derivative(logits, tau: float) -> tuple[float, float]:
    """Mean max-softmax confidence at tau and its analytic d/dtau.

    Per row with argmax entry m: dp_m/dtau = (p_m / tau^2) (sum_j p_j z_j - z_m).
    """
    z = np.ascontiguousarray(logits, dtype=np.float64)
    zs = z / tau
    zs = zs - zs.max(axis=1, keepdims=True)
    e = np.exp(zs)
    p = e / e.sum(axis=1, keepdims=True)
    m = np.argmax(z, axis=1)
    rows = np.arange(len(z))
    p_m = p[rows, m]
    dp = (p_m / tau**2) * ((p * z).sum(axis=1) - z[rows, m])
    return float(p_m.mean()), float(dp.mean())


def solve_temperature(
    logits, target_accuracy: float, tolerance: float = 1e-6
) -> tuple[float, int, bool]:
    """Find tau with |mean max confidence - target| <= tolerance.

    Returns (tau, iterations, clamped_target). When the target lies outside
    the achievable confidence range over tau in [1e-3, 1e6] the nearest
    bracket endpoint is returned with clamped_target=True.
    """
    mat = np.asarray(logits, dtype=np.float64)
    if mat.ndim != 2 or mat.shape[0] == 0:
        raise AlineError("logits must be a nonempty matrix")
    if not np.isfinite(mat).all():
        raise AlineError("non-finite logits")
    if not (0.0 < target_accuracy < 1.0):
        raise AlineError(f"target accuracy must be in (0,1), got {target_accuracy}")
    if not tolerance > 0:
        raise AlineError("tolerance must be positive")

    def g(tau):
        return float(kernels.row_max_softmax(mat, tau).mean()) - target_accuracy

    iterations = 0
    # g is non-increasing in tau: bracket a sign change outward from tau=1.
    lo = hi = 1.0
    g1 = g(1.0)
    iterations += 1
    if abs(g1) <= tolerance:
        return 1.0, iterations, False
    if g1 > 0.0:  # confidence too high: increase tau
        g_hi = g1
        while g_hi > tolerance and hi < TAU_MAX:
            lo = hi
            hi = min(hi * 2.0, TAU_MAX)
            g_hi = g(hi)
            iterations += 1
        if g_hi > tolerance:
            # target below the flattest achievable confidence
            return TAU_MAX, iterations, True
        g_lo = g(lo)
        iterations += 1
    else:  # confidence too low: decrease tau
        g_lo = g1
        while g_lo < -tolerance and lo > TAU_MIN:
            hi = lo
            lo = max(lo / 2.0, TAU_MIN)
            g_lo = g(lo)
            iterations += 1
        if g_lo < -tolerance:
            # target above the sharpest achievable confidence
            return TAU_MIN, iterations, True
        g_hi = g(hi)
        iterations += 1

    # Safeguarded Newton: g(lo) >= 0 >= g(hi).
    x = 0.5 * (lo + hi)
    while iterations < MAX_ITERATIONS:
        val, dval = mean_confidence_and_derivative(mat, x)
        fx = val - target_accuracy
        iterations += 1
        if abs(fx) <= tolerance:
            return x, iterations, False
        if fx > 0.0:
            lo = x
        else:
            hi = x
        x_new = x - fx / dval if dval != 0.0 else np.inf
        x = x_new if lo < x_new < hi else 0.5 * (lo + hi)
    raise SolverError(
        f"temperature solve did not converge in {MAX_ITERATIONS} iterations "
        f"(target {target_accuracy}, bracket [{lo}, {hi}])"
    )


def oracle_temperature(
    logits,
    labels,
    grid_min: float = DEFAULT_ORACLE_GRID[0],
    grid_max: float = DEFAULT_ORACLE_GRID[1],
    grid_points: int = DEFAULT_ORACLE_GRID[2],
    num_bins: int = metrics.DEFAULT_ECE_BINS,
) -> tuple[float, float]:
    """Sweep log-spaced temperatures, returning the ECE-minimizing (tau, ece)."""
    if grid_points < 1:
        raise AlineError("grid_points must be >= 1")
    if not (0.0 < grid_min <= grid_max):
        raise AlineError(f"invalid grid [{grid_min}, {grid_max}]")
    if grid_points == 1:
        taus = np.array([grid_min])
    else:
        if grid_min == grid_max:
            raise AlineError("grid_min must be < grid_max for multi-point grids")
        taus = np.logspace(np.log10(grid_min), np.log10(grid_max), grid_points)
    eces = [metrics.ece(logits, labels, tau, num_bins).ece for tau in taus]
    best = int(np.argmin(eces))  # first minimum = lowest tau on ties
    return float(taus[best]), float(eces[best])


def _calibrate_one(
    model, target: float, ood_labels, tolerance: float, num_bins: int
) -> CalibrationResult:
    tau, iterations, clamped = solve_temperature(model.ood_logits, target, tolerance)
    achieved = metrics.mean_max_confidence(model.ood_logits, tau)
    ece_before = ece_after = oracle_tau = oracle_ece = None
    if ood_labels is not None:
        ece_before = metrics.ece(model.ood_logits, ood_labels, 1.0, num_bins).ece
        ece_after = metrics.ece(model.ood_logits, ood_labels, tau, num_bins).ece
        oracle_tau, oracle_ece = oracle_temperature(
            model.ood_logits, ood_labels, num_bins=num_bins
        )
    return CalibrationResult(
        model_id=model.model_id,
        tau=tau,
        target_accuracy=target,
        achieved_mean_confidence=achieved,
        ece_before=ece_before,
        ece_after=ece_after,
        oracle_tau=oracle_tau,
        oracle_ece=oracle_ece,
        solver_iterations=iterations,
        clamped_target=clamped,
    )


def calibrate_bundle(
    bundle: PredictionBundle,
    estimates,
    tolerance: float = 1e-6,
    num_bins: int = metrics.DEFAULT_ECE_BINS,
    num_threads: int = 1,
) -> list[CalibrationResult]:
    """Solve a temperature per model against its estimated OOD accuracy.

    ECE before/after and the oracle sweep need OOD labels; without them those
    fields are None. Per-model solves are independent, so num_threads > 1
    parallelizes across models with deterministic, model-ordered output.
    """
    for m in bundle.models:
        if m.model_id not in estimates.per_model:
            raise AlineError(f"no accuracy estimate for model {m.model_id!r}")
    jobs = [
        (m, estimates.per_model[m.model_id]) for m in bundle.models
    ]
    if num_threads > 1:
        with ThreadPoolExecutor(max_workers=num_threads) as pool:
            futures = [
                pool.submit(_calibrate_one, m, t, bundle.ood_labels, tolerance, num_bins)
                for m, t in jobs
            ]
            return [f.result() for f in futures]
    return [
        _calibrate_one(m, t, bundle.ood_labels, tolerance, num_bins) for m, t in jobs
    ]
