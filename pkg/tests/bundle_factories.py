"""Synthetic bundle builders shared across test modules."""

import numpy as np

from aline.bundle import ModelRecord, PredictionBundle


def random_bundle(seed=0, n_models=4, n_id=50, n_ood=40, num_classes=5, with_ood_labels=True):
    rng = np.random.default_rng(seed)
    models = tuple(
        ModelRecord(
            model_id=f"m{i}",
            metadata={"arch": f"net{i}", "seed": str(seed)},
            id_logits=rng.normal(size=(n_id, num_classes)).astype(np.float32),
            ood_logits=rng.normal(size=(n_ood, num_classes)).astype(np.float32),
        )
        for i in range(n_models)
    )
    return PredictionBundle(
        num_classes=num_classes,
        id_labels=rng.integers(0, num_classes, n_id).astype(np.uint32),
        ood_labels=rng.integers(0, num_classes, n_ood).astype(np.uint32) if with_ood_labels else None,
        models=models,
        dataset_names=("test-id", "test-ood"),
    )


def mirrored_ood_bundle(bundle: PredictionBundle) -> PredictionBundle:
    """Copy of the bundle whose OOD split is the ID split.

    All pairwise agreement constraints then lie exactly on the identity line.
    """
    models = tuple(
        ModelRecord(
            model_id=m.model_id,
            metadata=m.metadata,
            id_logits=m.id_logits,
            ood_logits=m.id_logits,
        )
        for m in bundle.models
    )
    return PredictionBundle(
        num_classes=bundle.num_classes,
        id_labels=bundle.id_labels,
        ood_labels=bundle.id_labels,
        models=models,
        dataset_names=bundle.dataset_names,
    )
