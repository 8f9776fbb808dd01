"""Synthetic ensembles with a planted probit-linear ID/OOD accuracy structure.

A shared per-sample latent decides correctness for every model (nested
correctness), so pairwise agreements have a closed form that the tests use as
an oracle. Wrong predictions optionally share a per-sample wrong label, which
tunes how much models agree when both are wrong.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from aline import metrics
from aline.bundle import ModelRecord, PredictionBundle
from aline.errors import AlineError

LOGIT_JITTER_STD = 0.01


@dataclass(frozen=True)
class SynthConfig:
    num_models: int
    num_id_samples: int
    num_ood_samples: int
    num_classes: int
    slope: float
    bias: float
    id_accuracy_range: tuple[float, float] = (0.6, 0.95)
    noise: float = 0.0  # per-model probit jitter on the planted OOD accuracy
    error_sharing: float = 1.0  # P(wrong predictions share a per-sample wrong label)
    confidence_margin: float = 3.0  # logit margin of the predicted class
    seed: int = 0

    def check(self):
        lo, hi = self.id_accuracy_range
        if self.num_models < 2:
            raise AlineError("need at least 2 models")
        if self.num_classes < 2:
            raise AlineError("need at least 2 classes")
        if self.num_id_samples < 1 or self.num_ood_samples < 1:
            raise AlineError("sample counts must be positive")
        if not (0.0 < lo < hi < 1.0):
            raise AlineError(f"id_accuracy_range must satisfy 0 < lo < hi < 1, got {self.id_accuracy_range}")
        if self.noise < 0:
            raise AlineError("noise must be >= 0")
        if not (0.0 <= self.error_sharing <= 1.0):
            raise AlineError("error_sharing must be in [0, 1]")
        if not self.confidence_margin > 0:
            raise AlineError("confidence_margin must be positive")


@dataclass(frozen=True)
class SynthTruth:
    id_accuracy: np.ndarray  # planted p_i
    ood_accuracy: np.ndarray  # planted q_i
    id_latents: np.ndarray  # per-sample u used for ID correctness
    ood_latents: np.ndarray


def analytic_agreement(p_i: float, p_j: float, kappa: float, num_classes: int) -> float:
    """Expected agreement of two nested models with accuracies p_i, p_j.

    Both are correct with mass min(p); both wrong with mass 1 - max(p), in
    which case they agree with probability kappa + (1 - kappa)/(C - 1).
    """
    if not (0.0 < p_i < 1.0 and 0.0 < p_j < 1.0):
        raise AlineError("accuracies must be in (0, 1)")
    p_lo, p_hi = min(p_i, p_j), max(p_i, p_j)
    share = kappa + (1.0 - kappa) / (num_classes - 1)
    return p_lo + (1.0 - p_hi) * share


def _split_predictions(rng, accs, num_samples, num_classes, kappa):
    """Labels and per-model predictions for one split under the nested model."""
    n = len(accs)
    u = rng.random(num_samples)
    labels = rng.integers(0, num_classes, num_samples).astype(np.uint32)
    share_flag = rng.random(num_samples) < kappa
    shared_wrong = (labels + rng.integers(1, num_classes, num_samples)) % num_classes
    preds = np.empty((n, num_samples), dtype=np.int64)
    for i in range(n):
        own_wrong = (labels + rng.integers(1, num_classes, num_samples)) % num_classes
        wrong = np.where(share_flag, shared_wrong, own_wrong)
        preds[i] = np.where(u < accs[i], labels, wrong)
    return u, labels, preds


def _logits_for(rng, preds, num_classes, margin):
    """Margin-m logits for the predicted class plus argmax-preserving jitter."""
    num_samples = len(preds)
    logits = rng.normal(0.0, LOGIT_JITTER_STD, (num_samples, num_classes))
    logits[np.arange(num_samples), preds] += margin
    while True:
        flipped = np.flatnonzero(np.argmax(logits, axis=1) != preds)
        if len(flipped) == 0:
            break
        redraw = rng.normal(0.0, LOGIT_JITTER_STD, (len(flipped), num_classes))
        redraw[np.arange(len(flipped)), preds[flipped]] += margin
        logits[flipped] = redraw
    return logits.astype(np.float32)


def _generate(config: SynthConfig) -> tuple[PredictionBundle, SynthTruth]:
    config.check()
    rng = np.random.default_rng(config.seed)
    lo, hi = config.id_accuracy_range
    p = np.linspace(lo, hi, config.num_models)
    eps = rng.normal(0.0, config.noise, config.num_models) if config.noise > 0 else np.zeros(config.num_models)
    q = metrics.probit_inv(config.slope * metrics.probit(p) + config.bias + eps)
    if np.any(q <= 0.0) or np.any(q >= 1.0):
        raise AlineError(f"infeasible config: planted OOD accuracies outside (0,1): {q}")
    id_u, id_labels, id_preds = _split_predictions(
        rng, p, config.num_id_samples, config.num_classes, config.error_sharing
    )
    ood_u, ood_labels, ood_preds = _split_predictions(
        rng, q, config.num_ood_samples, config.num_classes, config.error_sharing
    )
    models = []
    for i in range(config.num_models):
        id_logits = _logits_for(rng, id_preds[i], config.num_classes, config.confidence_margin)
        ood_logits = _logits_for(rng, ood_preds[i], config.num_classes, config.confidence_margin)
        models.append(
            ModelRecord(
                model_id=f"synth_{i:03d}",
                metadata={
                    "planted_id_accuracy": f"{p[i]:.6f}",
                    "planted_ood_accuracy": f"{q[i]:.6f}",
                    "generator": "nested-correctness",
                },
                id_logits=id_logits,
                ood_logits=ood_logits,
            )
        )
    bundle = PredictionBundle(
        num_classes=config.num_classes,
        id_labels=id_labels,
        ood_labels=ood_labels,
        models=tuple(models),
        dataset_names=("synth-id", "synth-ood"),
    )
    truth = SynthTruth(id_accuracy=p, ood_accuracy=q, id_latents=id_u, ood_latents=ood_u)
    return bundle, truth


def generate_ensemble(config: SynthConfig) -> tuple[PredictionBundle, SynthTruth]:
    """Planted-line ensemble; requires a positive slope."""
    if config.slope <= 0:
        raise AlineError("generate_ensemble requires slope > 0; use generate_anticorrelated")
    return _generate(config)


def generate_anticorrelated(config: SynthConfig) -> tuple[PredictionBundle, SynthTruth]:
    """Same construction with a negative slope: higher-ID models are worse OOD."""
    if config.slope >= 0:
        raise AlineError("generate_anticorrelated requires slope < 0")
    return _generate(config)
