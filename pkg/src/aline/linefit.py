"""OLS fitting in probit space: the pairwise agreement line and diagnostics."""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from aline import kernels, metrics
from aline.bundle import PredictionBundle
from aline.errors import DegenerateFitError

DEFAULT_R2_THRESHOLD = 0.85

FLAG_LOW_R2 = "LOW_R2"
FLAG_NEGATIVE_CORRELATION = "NEGATIVE_CORRELATION"
FLAG_TOO_FEW_MODELS = "TOO_FEW_MODELS"
FLAG_HEAVY_CLAMPING = "HEAVY_CLAMPING"


@dataclass(frozen=True)
class LineFit:
    slope: float
    bias: float
    r_squared: float
    n_points: int


@dataclass(frozen=True)
class AgreementLineFit:
    fit: LineFit
    # (model_id_j, model_id_k, probit ID agreement, probit OOD agreement)
    pair_points: tuple[tuple[str, str, float, float], ...]
    clamped_pairs: int


@dataclass(frozen=True)
class DiagnosticsReport:
    agreement_r2: float
    accuracy_r2: float | None
    accuracy_slope_sign: str | None  # "positive" / "negative"
    flags: tuple[str, ...]


def fit_line(xs, ys) -> LineFit:
    """Closed-form OLS fit y = slope * x + bias with R^2."""
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    if xs.shape != ys.shape:
        raise ValueError(f"length mismatch: {xs.shape} vs {ys.shape}")
    if xs.size < 2:
        raise ValueError("need at least 2 points")
    xm = xs.mean()
    ym = ys.mean()
    dx = xs - xm
    sxx = float(dx @ dx)
    if sxx == 0.0:
        raise DegenerateFitError("zero variance in x: all points share one abscissa")
    slope = float(dx @ (ys - ym)) / sxx
    bias = ym - slope * xm
    resid = ys - (slope * xs + bias)
    ss_res = float(resid @ resid)
    ss_tot = float((ys - ym) @ (ys - ym))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return LineFit(slope=slope, bias=float(bias), r_squared=float(r2), n_points=len(xs))


@dataclass(frozen=True)
class BundleStats:
    """Per-model accuracies and pairwise agreement matrices, computed once.

    Shared by the line fit, the estimators, and the ablation (which re-fits on
    subsets by indexing into these matrices instead of recomputing argmaxes).
    """

    model_ids: tuple[str, ...]
    id_accuracy: np.ndarray  # (n,)
    agr_id: np.ndarray  # (n, n)
    agr_ood: np.ndarray  # (n, n)
    ood_accuracy: np.ndarray | None  # (n,) when OOD labels exist
    id_preds: np.ndarray = field(repr=False)  # (n, N_id) int32
    ood_preds: np.ndarray = field(repr=False)  # (n, N_ood) int32

    @classmethod
    def from_bundle(cls, bundle: PredictionBundle) -> "BundleStats":
        id_preds = np.stack([metrics.predictions(m.id_logits) for m in bundle.models])
        ood_preds = np.stack([metrics.predictions(m.ood_logits) for m in bundle.models])
        id_acc = np.array(
            [metrics.accuracy(p, bundle.id_labels) for p in id_preds]
        )
        ood_acc = None
        if bundle.ood_labels is not None:
            ood_acc = np.array(
                [metrics.accuracy(p, bundle.ood_labels) for p in ood_preds]
            )
        return cls(
            model_ids=tuple(bundle.model_ids()),
            id_accuracy=id_acc,
            agr_id=kernels.pairwise_agreement(id_preds),
            agr_ood=kernels.pairwise_agreement(ood_preds),
            ood_accuracy=ood_acc,
            id_preds=id_preds,
            ood_preds=ood_preds,
        )


def fit_agreement_line_from_stats(stats: BundleStats, indices=None) -> AgreementLineFit:
    n = len(stats.model_ids)
    idx = list(range(n)) if indices is None else list(indices)
    if len(idx) < 3:
        # n = 2 yields a single pair point, which cannot determine a line
        raise DegenerateFitError("agreement line needs at least 3 models (2 pair points)")
    pairs = list(combinations(idx, 2))
    agr_id = np.array([stats.agr_id[j, k] for j, k in pairs])
    agr_ood = np.array([stats.agr_ood[j, k] for j, k in pairs])
    xs, clamped_x = metrics.probit_counting_clamps(agr_id)
    ys, clamped_y = metrics.probit_counting_clamps(agr_ood)
    clamped = int(
        np.count_nonzero(
            (agr_id < metrics.PROBIT_EPS)
            | (agr_id > 1 - metrics.PROBIT_EPS)
            | (agr_ood < metrics.PROBIT_EPS)
            | (agr_ood > 1 - metrics.PROBIT_EPS)
        )
    )
    if np.ptp(xs) == 0.0:
        raise DegenerateFitError(
            "degenerate agreement fit: all ID agreements identical after clamping"
        )
    fit = fit_line(xs, ys)
    points = tuple(
        (stats.model_ids[j], stats.model_ids[k], float(x), float(y))
        for (j, k), x, y in zip(pairs, xs, ys)
    )
    return AgreementLineFit(fit=fit, pair_points=points, clamped_pairs=clamped)


def fit_agreement_line(bundle: PredictionBundle) -> AgreementLineFit:
    """Probit-space OLS of OOD pairwise agreement against ID pairwise agreement."""
    return fit_agreement_line_from_stats(BundleStats.from_bundle(bundle))


def diagnose(
    bundle: PredictionBundle,
    agl_fit: AgreementLineFit | None,
    r2_threshold: float = DEFAULT_R2_THRESHOLD,
) -> DiagnosticsReport:
    """Health flags for the agreement/accuracy line geometry. Never raises.

    agl_fit may be None for bundles where the agreement line is not
    computable (n < 3); the report then carries NaN for its R-squared.
    """
    flags = []
    agreement_r2 = agl_fit.fit.r_squared if agl_fit is not None else float("nan")
    if not agreement_r2 >= r2_threshold:
        flags.append(FLAG_LOW_R2)
    if bundle.num_models < 3:
        flags.append(FLAG_TOO_FEW_MODELS)
    if agl_fit is not None and agl_fit.clamped_pairs > 0.1 * len(agl_fit.pair_points):
        flags.append(FLAG_HEAVY_CLAMPING)
    accuracy_r2 = None
    slope_sign = None
    if bundle.ood_labels is not None and bundle.num_models >= 2:
        stats = BundleStats.from_bundle(bundle)
        xs, _ = metrics.probit_counting_clamps(stats.id_accuracy)
        ys, _ = metrics.probit_counting_clamps(stats.ood_accuracy)
        try:
            acc_fit = fit_line(xs, ys)
        except DegenerateFitError:
            acc_fit = None
        if acc_fit is not None:
            accuracy_r2 = acc_fit.r_squared
            slope_sign = "negative" if acc_fit.slope < 0 else "positive"
            if slope_sign == "negative":
                flags.append(FLAG_NEGATIVE_CORRELATION)
    return DiagnosticsReport(
        agreement_r2=agreement_r2,
        accuracy_r2=accuracy_r2,
        accuracy_slope_sign=slope_sign,
        flags=tuple(flags),
    )
