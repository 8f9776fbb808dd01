"""Scalar/vector statistics: softmax, accuracy, agreement, ECE, probit pair."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr, ndtri

from aline import kernels

PROBIT_EPS = 1e-4
DEFAULT_ECE_BINS = 15


def _require_finite(arr, what="input"):
    if not np.isfinite(arr).all():
        raise ValueError(f"non-finite {what}")


def softmax_with_temperature(logit_row, tau: float) -> np.ndarray:
    """Numerically stable softmax of logit_row / tau."""
    row = np.asarray(logit_row, dtype=np.float64)
    if row.ndim != 1 or row.size == 0:
        raise ValueError("logit_row must be a nonempty 1-d vector")
    _require_finite(row, "logits")
    if not tau > 0:
        raise ValueError(f"tau must be positive, got {tau}")
    z = row / tau
    z -= z.max()
    e = np.exp(z)
    return e / e.sum()


def argmax_predict(logit_row) -> int:
    """Index of the maximum entry; ties broken by lowest index."""
    row = np.asarray(logit_row)
    if row.size == 0:
        raise ValueError("empty logit row")
    _require_finite(row, "logits")
    return int(np.argmax(row))


def predictions(logits) -> np.ndarray:
    """Row-wise argmax with lowest-index tie-breaking, as int32."""
    return np.argmax(np.asarray(logits), axis=1).astype(np.int32)


def accuracy(preds, labels) -> float:
    preds = np.asarray(preds)
    labels = np.asarray(labels)
    if preds.shape != labels.shape:
        raise ValueError(f"length mismatch: {preds.shape} vs {labels.shape}")
    if preds.size == 0:
        raise ValueError("empty input")
    return float(np.mean(preds == labels))


def agreement(preds_a, preds_b) -> float:
    """Fraction of positions where the two prediction vectors coincide."""
    a = np.asarray(preds_a)
    b = np.asarray(preds_b)
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.shape} vs {b.shape}")
    if a.size == 0:
        raise ValueError("empty input")
    return float(np.mean(a == b))


def mean_max_confidence(logits, tau: float) -> float:
    """Average over rows of the maximum softmax entry at temperature tau."""
    mat = np.asarray(logits, dtype=np.float64)
    if mat.ndim != 2 or mat.shape[0] == 0:
        raise ValueError("logits must be a nonempty matrix")
    _require_finite(mat, "logits")
    if not tau > 0:
        raise ValueError(f"tau must be positive, got {tau}")
    return float(kernels.row_max_softmax(mat, tau).mean())


def negative_entropy_scores(logits) -> np.ndarray:
    """Per-row sum_c p_c log p_c at temperature 1 (natural log)."""
    mat = np.asarray(logits, dtype=np.float64)
    if mat.ndim != 2 or mat.shape[0] == 0:
        raise ValueError("logits must be a nonempty matrix")
    _require_finite(mat, "logits")
    return kernels.row_neg_entropy(mat)


@dataclass(frozen=True)
class EceBreakdown:
    num_bins: int
    # (bin lower edge, count, mean confidence, mean accuracy) per bin
    per_bin: tuple[tuple[float, int, float, float], ...]
    ece: float


def ece(logits, labels, tau: float = 1.0, num_bins: int = DEFAULT_ECE_BINS) -> EceBreakdown:
    """Expected calibration error over equal-width confidence bins.

    A sample falls in the bin containing its max-softmax confidence at
    temperature tau; the last bin is upper-inclusive.
    """
    mat = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels)
    if mat.ndim != 2 or mat.shape[0] == 0:
        raise ValueError("logits must be a nonempty matrix")
    if mat.shape[0] != labels.shape[0]:
        raise ValueError(f"length mismatch: {mat.shape[0]} rows vs {labels.shape[0]} labels")
    if not tau > 0:
        raise ValueError(f"tau must be positive, got {tau}")
    if num_bins < 1:
        raise ValueError(f"num_bins must be >= 1, got {num_bins}")
    conf = kernels.row_max_softmax(mat, tau)
    correct = (predictions(mat) == labels).astype(np.float64)
    idx = np.minimum((conf * num_bins).astype(np.int64), num_bins - 1)
    counts = np.bincount(idx, minlength=num_bins)
    conf_sums = np.bincount(idx, weights=conf, minlength=num_bins)
    acc_sums = np.bincount(idx, weights=correct, minlength=num_bins)
    n = len(conf)
    per_bin = []
    total = 0.0
    for b in range(num_bins):
        cnt = int(counts[b])
        mean_conf = conf_sums[b] / cnt if cnt else 0.0
        mean_acc = acc_sums[b] / cnt if cnt else 0.0
        per_bin.append((b / num_bins, cnt, float(mean_conf), float(mean_acc)))
        if cnt:
            total += cnt / n * abs(mean_conf - mean_acc)
    return EceBreakdown(num_bins=num_bins, per_bin=tuple(per_bin), ece=float(total))


def probit(p):
    """Standard normal quantile of p, with endpoint clamping to [eps, 1-eps]."""
    arr = np.asarray(p, dtype=np.float64)
    _require_finite(arr, "probability")
    out = ndtri(np.clip(arr, PROBIT_EPS, 1.0 - PROBIT_EPS))
    return float(out) if np.isscalar(p) or arr.ndim == 0 else out


def probit_counting_clamps(p):
    """Like probit, also returning how many inputs hit the clamp."""
    arr = np.asarray(p, dtype=np.float64)
    _require_finite(arr, "probability")
    n_clamped = int(np.count_nonzero((arr < PROBIT_EPS) | (arr > 1.0 - PROBIT_EPS)))
    return ndtri(np.clip(arr, PROBIT_EPS, 1.0 - PROBIT_EPS)), n_clamped


def probit_inv(x):
    """Standard normal CDF."""
    arr = np.asarray(x, dtype=np.float64)
    _require_finite(arr, "probit value")
    out = ndtr(arr)
    return float(out) if np.isscalar(x) or arr.ndim == 0 else out
