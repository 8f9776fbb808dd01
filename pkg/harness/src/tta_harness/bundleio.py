"""Independent writer for the prediction-bundle interchange format.

Deliberately does not import the estimation toolkit: producing the same bytes
from a second implementation is part of the format's conformance story.
Layout: manifest.json plus `ALGT` float32 logits files (4-byte magic, u32
version, u64 rows, u32 cols, little-endian row-major payload) and `ALBL`
uint32 label files (magic, u32 version, u64 count).
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

SCHEMA_VERSION = 1
FILE_VERSION = 1


def _write_logits(path: Path, mat: np.ndarray) -> None:
    mat = np.ascontiguousarray(mat, dtype="<f4")
    with open(path, "wb") as f:
        f.write(b"ALGT")
        f.write(struct.pack("<IQI", FILE_VERSION, mat.shape[0], mat.shape[1]))
        f.write(mat.tobytes())


def _write_labels(path: Path, labels: np.ndarray) -> None:
    labels = np.ascontiguousarray(labels, dtype="<u4")
    with open(path, "wb") as f:
        f.write(b"ALBL")
        f.write(struct.pack("<IQ", FILE_VERSION, len(labels)))
        f.write(labels.tobytes())


def write_bundle_dir(
    out,
    num_classes: int,
    dataset_names: tuple[str, str],
    id_labels: np.ndarray,
    ood_labels: np.ndarray,
    models: list[dict],
) -> None:
    """models: [{model_id, metadata, id_logits, ood_logits}], order preserved."""
    root = Path(out)
    root.mkdir(parents=True, exist_ok=True)
    _write_labels(root / "id_labels.bin", id_labels)
    _write_labels(root / "ood_labels.bin", ood_labels)
    entries = []
    for i, m in enumerate(models):
        id_rel = f"model_{i:03d}_id.bin"
        ood_rel = f"model_{i:03d}_ood.bin"
        _write_logits(root / id_rel, m["id_logits"])
        _write_logits(root / ood_rel, m["ood_logits"])
        entries.append(
            {
                "model_id": m["model_id"],
                "metadata": dict(sorted(m["metadata"].items())),
                "id_logits": id_rel,
                "ood_logits": ood_rel,
            }
        )
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "num_classes": num_classes,
        "id_dataset": dataset_names[0],
        "ood_dataset": dataset_names[1],
        "id_labels": "id_labels.bin",
        "ood_labels": "ood_labels.bin",
        "models": entries,
    }
    (root / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", "utf-8"
    )
