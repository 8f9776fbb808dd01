"""Model/hyperparameter selection by ID accuracy, with validation-mode gaps."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from aline import metrics
from aline.bundle import PredictionBundle
from aline.errors import AlineError

CRITERION_ID_ACCURACY = "ID_ACCURACY"


@dataclass(frozen=True)
class SelectionReport:
    criterion: str
    chosen_model_id: str
    chosen_id_accuracy: float
    ranking: tuple[tuple[str, float], ...]  # (model_id, ID accuracy), descending
    gap_to_ood_best: float | None
    ood_best_model_id: str | None


@dataclass(frozen=True)
class GapTable:
    per_bundle: dict[str, float]  # name -> gap in percentage points
    mean_gap: float


def select_by_id_accuracy(bundle: PredictionBundle) -> SelectionReport:
    """Pick the model with the highest ID accuracy; ties go to the smaller id."""
    if bundle.num_models < 1:
        raise AlineError("bundle has no models")
    accs = {
        m.model_id: metrics.accuracy(metrics.predictions(m.id_logits), bundle.id_labels)
        for m in bundle.models
    }
    ranking = tuple(sorted(accs.items(), key=lambda kv: (-kv[1], kv[0])))
    chosen_id, chosen_acc = ranking[0]
    gap = None
    ood_best = None
    if bundle.ood_labels is not None:
        ood_accs = {
            m.model_id: metrics.accuracy(
                metrics.predictions(m.ood_logits), bundle.ood_labels
            )
            for m in bundle.models
        }
        ood_best = min(ood_accs, key=lambda mid: (-ood_accs[mid], mid))
        gap = ood_accs[ood_best] - ood_accs[chosen_id]
    return SelectionReport(
        criterion=CRITERION_ID_ACCURACY,
        chosen_model_id=chosen_id,
        chosen_id_accuracy=chosen_acc,
        ranking=ranking,
        gap_to_ood_best=gap,
        ood_best_model_id=ood_best,
    )


def selection_gap_table(bundles: dict[str, PredictionBundle]) -> GapTable:
    """Per-bundle OOD-accuracy gap (pp) between the ID-selected and OOD-best models."""
    gaps = {}
    for name, bundle in bundles.items():
        if bundle.ood_labels is None:
            raise AlineError(f"bundle {name!r} has no OOD labels")
        report = select_by_id_accuracy(bundle)
        gaps[name] = report.gap_to_ood_best * 100.0
    return GapTable(per_bundle=gaps, mean_gap=float(np.mean(list(gaps.values()))))
