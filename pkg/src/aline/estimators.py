"""Label-free OOD accuracy estimators and validation-mode evaluation.

ALine-S maps each model's probit ID accuracy through the fitted agreement
line; ALine-D solves a least-squares system over all model pairs combining
OOD agreements with ID accuracy corrections. ATC, DOC, AC, and GDE are the
confidence/disagreement baselines.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from aline import metrics
from aline.bundle import PredictionBundle
from aline.errors import AlineError, DegenerateFitError
from aline.linefit import (
    AgreementLineFit,
    BundleStats,
    fit_agreement_line_from_stats,
)

ALINE_S = "ALINE_S"
ALINE_D = "ALINE_D"
ATC = "ATC"
DOC = "DOC"
AC = "AC"
GDE = "GDE"
ALL_METHODS = (ALINE_S, ALINE_D, ATC, DOC, AC, GDE)

RIDGE_COND_LIMIT = 1e12


@dataclass(frozen=True)
class EstimateReport:
    method: str
    per_model: dict[str, float]
    inputs_digest: str
    ensemble_level: float | None = None
    notes: tuple[str, ...] = ()


@dataclass(frozen=True)
class MaeReport:
    mae: dict[str, float]  # method -> MAE in percentage points
    per_model_errors: dict[str, dict[str, float]]  # method -> model -> |err| (pp)
    per_model_signed: dict[str, dict[str, float]]  # method -> model -> est - true (pp)


@dataclass(frozen=True)
class SummaryStats:
    minimum: float
    q1: float
    median: float
    q3: float
    maximum: float
    mean: float

    @classmethod
    def of(cls, values) -> "SummaryStats":
        v = np.asarray(values, dtype=np.float64)
        q1, med, q3 = np.percentile(v, [25, 50, 75])
        return cls(float(v.min()), float(q1), float(med), float(q3), float(v.max()), float(v.mean()))


@dataclass(frozen=True)
class AblationReport:
    # size -> method -> summary over sampled subsets
    summaries: dict[int, dict[str, SummaryStats]]
    # size -> method -> raw MAE samples (pp), one per subset
    raw: dict[int, dict[str, list[float]]]
    num_subsets_per_size: int
    seed: int


def _require_id_labels(bundle: PredictionBundle):
    if bundle.id_labels is None or len(bundle.id_labels) == 0:
        raise AlineError("ID labels are required")


def _aline_s_values(stats: BundleStats, fit: AgreementLineFit, indices) -> np.ndarray:
    x, _ = metrics.probit_counting_clamps(stats.id_accuracy[indices])
    return metrics.probit_inv(fit.fit.slope * x + fit.fit.bias)


def aline_s(bundle: PredictionBundle, agl_fit: AgreementLineFit) -> EstimateReport:
    """Per-model estimate Phi(slope * probit(ID accuracy) + bias)."""
    _require_id_labels(bundle)
    stats = BundleStats.from_bundle(bundle)
    vals = _aline_s_values(stats, agl_fit, np.arange(bundle.num_models))
    return EstimateReport(
        method=ALINE_S,
        per_model=dict(zip(stats.model_ids, map(float, vals))),
        inputs_digest=bundle.content_digest(),
    )


def _aline_d_values(stats: BundleStats, fit: AgreementLineFit, indices) -> tuple[np.ndarray, list[str]]:
    idx = list(indices)
    n = len(idx)
    if n < 3:
        raise AlineError("ALine-D requires at least 3 models")
    a_hat = fit.fit.slope
    x_acc, _ = metrics.probit_counting_clamps(stats.id_accuracy[idx])
    pairs = list(combinations(range(n), 2))
    m = len(pairs)
    A = np.zeros((m, n))
    b = np.zeros(m)
    for row, (j, k) in enumerate(pairs):
        A[row, j] = 0.5
        A[row, k] = 0.5
        gi, _ = metrics.probit_counting_clamps(stats.agr_id[idx[j], idx[k]])
        go, _ = metrics.probit_counting_clamps(stats.agr_ood[idx[j], idx[k]])
        b[row] = go + a_hat * ((x_acc[j] + x_acc[k]) / 2.0 - gi)
    ata = A.T @ A
    atb = A.T @ b
    notes = []
    cond = np.linalg.cond(ata)
    if not np.isfinite(cond) or cond > RIDGE_COND_LIMIT:
        ridge = 1e-8 * np.trace(ata) / n
        ata = ata + ridge * np.eye(n)
        notes.append(f"ill-conditioned normal equations (cond={cond:.3g}); added ridge {ridge:.3g}")
    try:
        w = np.linalg.solve(ata, atb)
    except np.linalg.LinAlgError as e:
        raise DegenerateFitError(f"ALine-D system is rank-deficient: {e}") from e
    return metrics.probit_inv(w), notes


def aline_d(bundle: PredictionBundle, agl_fit: AgreementLineFit) -> EstimateReport:
    """Least-squares estimates from all pairwise OOD agreement constraints."""
    _require_id_labels(bundle)
    stats = BundleStats.from_bundle(bundle)
    vals, notes = _aline_d_values(stats, agl_fit, range(bundle.num_models))
    return EstimateReport(
        method=ALINE_D,
        per_model=dict(zip(stats.model_ids, map(float, vals))),
        inputs_digest=bundle.content_digest(),
        notes=tuple(notes),
    )


def atc(bundle: PredictionBundle) -> EstimateReport:
    """Average thresholded confidence on negative-entropy scores.

    The threshold is the ceil(error_rate * N_id)-th smallest ID score; the OOD
    accuracy estimate is the fraction of OOD scores at or above it (the
    complement of the below-threshold error fraction).
    """
    _require_id_labels(bundle)
    per_model = {}
    for m in bundle.models:
        id_scores = metrics.negative_entropy_scores(m.id_logits)
        ood_scores = metrics.negative_entropy_scores(m.ood_logits)
        acc_id = metrics.accuracy(metrics.predictions(m.id_logits), bundle.id_labels)
        err = 1.0 - acc_id
        k = math.ceil(err * len(id_scores))
        if k == 0:
            t = -np.inf
        else:
            t = np.partition(id_scores, k - 1)[k - 1]
        per_model[m.model_id] = float(np.mean(ood_scores >= t))
    return EstimateReport(
        method=ATC,
        per_model=per_model,
        inputs_digest=bundle.content_digest(),
        notes=("threshold matched to ID error rate; estimate is the at-or-above-threshold fraction",),
    )


def doc(bundle: PredictionBundle) -> EstimateReport:
    """ID accuracy minus the ID-to-OOD drop in mean max confidence, clipped to [0,1]."""
    _require_id_labels(bundle)
    per_model = {}
    for m in bundle.models:
        acc_id = metrics.accuracy(metrics.predictions(m.id_logits), bundle.id_labels)
        gap = metrics.mean_max_confidence(m.id_logits, 1.0) - metrics.mean_max_confidence(
            m.ood_logits, 1.0
        )
        per_model[m.model_id] = float(np.clip(acc_id - gap, 0.0, 1.0))
    return EstimateReport(method=DOC, per_model=per_model, inputs_digest=bundle.content_digest())


def ac(bundle: PredictionBundle) -> EstimateReport:
    """Mean OOD max-softmax confidence at temperature 1."""
    per_model = {
        m.model_id: metrics.mean_max_confidence(m.ood_logits, 1.0) for m in bundle.models
    }
    return EstimateReport(method=AC, per_model=per_model, inputs_digest=bundle.content_digest())


def gde(bundle: PredictionBundle) -> EstimateReport:
    """Mean pairwise OOD agreement, ensemble-level and leave-one-in per model."""
    n = bundle.num_models
    if n < 2:
        raise AlineError("GDE requires at least 2 models")
    stats = BundleStats.from_bundle(bundle)
    agr = stats.agr_ood
    iu = np.triu_indices(n, k=1)
    ensemble = float(agr[iu].mean())
    per_model = {}
    for i, mid in enumerate(stats.model_ids):
        others = [agr[i, j] for j in range(n) if j != i]
        per_model[mid] = float(np.mean(others))
    return EstimateReport(
        method=GDE,
        per_model=per_model,
        inputs_digest=bundle.content_digest(),
        ensemble_level=ensemble,
    )


def estimate(bundle: PredictionBundle, methods=ALL_METHODS) -> list[EstimateReport]:
    """Run the requested estimators, fitting the agreement line once if needed."""
    reports = []
    fit = None
    if ALINE_S in methods or ALINE_D in methods:
        fit = fit_agreement_line_from_stats(BundleStats.from_bundle(bundle))
    for method in methods:
        if method == ALINE_S:
            reports.append(aline_s(bundle, fit))
        elif method == ALINE_D:
            reports.append(aline_d(bundle, fit))
        elif method == ATC:
            reports.append(atc(bundle))
        elif method == DOC:
            reports.append(doc(bundle))
        elif method == AC:
            reports.append(ac(bundle))
        elif method == GDE:
            reports.append(gde(bundle))
        else:
            raise AlineError(f"unknown estimation method {method!r}")
    return reports


def evaluate_estimates(reports, bundle: PredictionBundle) -> MaeReport:
    """MAE (percentage points) of each report against true OOD accuracies."""
    if bundle.ood_labels is None:
        raise AlineError("OOD labels are required for validation mode")
    stats = BundleStats.from_bundle(bundle)
    truth = dict(zip(stats.model_ids, stats.ood_accuracy))
    mae = {}
    abs_errors = {}
    signed = {}
    for rep in reports:
        diffs = {
            mid: (rep.per_model[mid] - truth[mid]) * 100.0 for mid in stats.model_ids
        }
        signed[rep.method] = diffs
        abs_errors[rep.method] = {mid: abs(d) for mid, d in diffs.items()}
        mae[rep.method] = float(np.mean([abs(d) for d in diffs.values()]))
    return MaeReport(mae=mae, per_model_errors=abs_errors, per_model_signed=signed)


def _subset_mae(stats: BundleStats, indices) -> dict[str, float]:
    fit = fit_agreement_line_from_stats(stats, indices)
    truth = stats.ood_accuracy[list(indices)]
    s_vals = _aline_s_values(stats, fit, list(indices))
    d_vals, _ = _aline_d_values(stats, fit, indices)
    return {
        ALINE_S: float(np.mean(np.abs(s_vals - truth)) * 100.0),
        ALINE_D: float(np.mean(np.abs(d_vals - truth)) * 100.0),
    }


def ablate_model_count(
    bundle: PredictionBundle, sizes, subsets_per_size: int, seed: int
) -> AblationReport:
    """MAE distributions of ALine-S/D over seeded random model subsets.

    Enumerates exhaustively whenever the number of subsets of a size does not
    exceed subsets_per_size.
    """
    if bundle.ood_labels is None:
        raise AlineError("OOD labels are required for the ablation")
    n = bundle.num_models
    for s in sizes:
        if s < 3 or s > n:
            raise AlineError(f"subset size {s} out of range [3, {n}]")
    stats = BundleStats.from_bundle(bundle)
    rng = np.random.default_rng(seed)
    summaries: dict[int, dict[str, SummaryStats]] = {}
    raw: dict[int, dict[str, list[float]]] = {}
    for s in sizes:
        total = math.comb(n, s)
        if total <= subsets_per_size:
            subsets = list(combinations(range(n), s))
        else:
            chosen = set()
            while len(chosen) < subsets_per_size:
                pick = tuple(sorted(rng.choice(n, size=s, replace=False).tolist()))
                chosen.add(pick)
            subsets = sorted(chosen)
        samples: dict[str, list[float]] = {ALINE_S: [], ALINE_D: []}
        for subset in subsets:
            maes = _subset_mae(stats, list(subset))
            for method, value in maes.items():
                samples[method].append(value)
        raw[s] = samples
        summaries[s] = {m: SummaryStats.of(v) for m, v in samples.items()}
    return AblationReport(
        summaries=summaries, raw=raw, num_subsets_per_size=subsets_per_size, seed=seed
    )
