"""Prediction-bundle data model and its bit-exact on-disk interchange format.

A bundle directory holds manifest.json plus one binary logits file per model
per split and binary label files. Logits are little-endian float32 behind an
`ALGT` header, labels little-endian uint32 behind an `ALBL` header, so the
same bytes round-trip across languages and runs.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from aline.errors import BundleFormatError, BundleInvariantError

SCHEMA_VERSION = 1
LOGITS_MAGIC = b"ALGT"
LABELS_MAGIC = b"ALBL"
FILE_VERSION = 1


@dataclass(frozen=True)
class ModelRecord:
    model_id: str
    metadata: dict[str, str]
    id_logits: np.ndarray  # (N_id, C) float32
    ood_logits: np.ndarray  # (N_ood, C) float32


@dataclass(frozen=True)
class PredictionBundle:
    num_classes: int
    id_labels: np.ndarray  # (N_id,) uint32
    ood_labels: np.ndarray | None  # (N_ood,) uint32 or None
    models: tuple[ModelRecord, ...]
    dataset_names: tuple[str, str]

    @property
    def num_models(self) -> int:
        return len(self.models)

    @property
    def num_id_samples(self) -> int:
        return len(self.id_labels)

    @property
    def num_ood_samples(self) -> int:
        return self.models[0].ood_logits.shape[0]

    def model_ids(self) -> list[str]:
        return [m.model_id for m in self.models]

    def model(self, model_id: str) -> ModelRecord:
        for m in self.models:
            if m.model_id == model_id:
                return m
        raise KeyError(model_id)

    def subset(self, model_ids) -> "PredictionBundle":
        """New bundle restricted to the given models, in the given order."""
        by_id = {m.model_id: m for m in self.models}
        return PredictionBundle(
            num_classes=self.num_classes,
            id_labels=self.id_labels,
            ood_labels=self.ood_labels,
            models=tuple(by_id[mid] for mid in model_ids),
            dataset_names=self.dataset_names,
        )

    def content_digest(self) -> str:
        """SHA-256 over all numeric content and metadata, hex-encoded."""
        h = hashlib.sha256()
        h.update(struct.pack("<I", self.num_classes))
        for name in self.dataset_names:
            h.update(name.encode("utf-8") + b"\0")
        h.update(np.ascontiguousarray(self.id_labels, dtype="<u4").tobytes())
        if self.ood_labels is not None:
            h.update(np.ascontiguousarray(self.ood_labels, dtype="<u4").tobytes())
        for m in self.models:
            h.update(m.model_id.encode("utf-8") + b"\0")
            for k in sorted(m.metadata):
                h.update(k.encode("utf-8") + b"\0" + m.metadata[k].encode("utf-8") + b"\0")
            h.update(np.ascontiguousarray(m.id_logits, dtype="<f4").tobytes())
            h.update(np.ascontiguousarray(m.ood_logits, dtype="<f4").tobytes())
        return h.hexdigest()


@dataclass
class ValidationReport:
    ok: bool
    issues: list[tuple[str, str]] = field(default_factory=list)  # (severity, message)


def _check_invariants(bundle: PredictionBundle) -> list[str]:
    """Return error messages for every violated structural invariant."""
    errors = []
    c = bundle.num_classes
    if c < 1:
        errors.append(f"num_classes must be positive, got {c}")
    if len(bundle.models) == 0:
        errors.append("bundle has no models")
        return errors
    n_id = len(bundle.id_labels)
    n_ood = bundle.models[0].ood_logits.shape[0]
    if n_id == 0:
        errors.append("empty ID split")
    if n_ood == 0:
        errors.append("empty OOD split")
    if np.any(bundle.id_labels >= c):
        errors.append(f"ID label out of range [0, {c - 1}]")
    if bundle.ood_labels is not None:
        if len(bundle.ood_labels) != n_ood:
            errors.append(
                f"OOD labels length {len(bundle.ood_labels)} != OOD rows {n_ood}"
            )
        if np.any(bundle.ood_labels >= c):
            errors.append(f"OOD label out of range [0, {c - 1}]")
    seen = set()
    for m in bundle.models:
        if m.model_id in seen:
            errors.append(f"duplicate model_id {m.model_id!r}")
        seen.add(m.model_id)
        for split, mat, rows in (
            ("id", m.id_logits, n_id),
            ("ood", m.ood_logits, n_ood),
        ):
            if mat.ndim != 2 or mat.shape[1] != c:
                errors.append(
                    f"model {m.model_id!r} {split} logits have shape {mat.shape}, "
                    f"expected (*, {c})"
                )
            elif mat.shape[0] != rows:
                errors.append(
                    f"model {m.model_id!r} {split} logits have {mat.shape[0]} rows, "
                    f"expected {rows}"
                )
            if not np.isfinite(mat).all():
                bad = np.argwhere(~np.isfinite(np.asarray(mat)))
                errors.append(
                    f"model {m.model_id!r} {split} logits non-finite at "
                    f"row {bad[0][0]}, col {bad[0][1]}"
                )
        for k in m.metadata:
            if not k:
                errors.append(f"model {m.model_id!r} has an empty metadata key")
    return errors


def validate_bundle(bundle: PredictionBundle) -> ValidationReport:
    """Report invariant violations (errors) and suspicious content (warnings)."""
    issues = [("error", msg) for msg in _check_invariants(bundle)]
    if bundle.num_models < 3:
        issues.append(("warning", "ALine-D requires at least 3 models"))
    if bundle.ood_labels is None:
        issues.append(("warning", "no OOD labels: validation mode unavailable"))
    for m in bundle.models:
        if m.id_logits.size and np.ptp(m.id_logits) == 0:
            issues.append(("warning", f"model {m.model_id!r} has constant ID logits"))
        if m.ood_logits.size and np.ptp(m.ood_logits) == 0:
            issues.append(("warning", f"model {m.model_id!r} has constant OOD logits"))
    ok = not any(sev == "error" for sev, _ in issues)
    return ValidationReport(ok=ok, issues=issues)


# --- binary files ---------------------------------------------------------


def _write_matrix(path: Path, mat: np.ndarray) -> None:
    rows, cols = mat.shape
    with open(path, "wb") as f:
        f.write(LOGITS_MAGIC)
        f.write(struct.pack("<I", FILE_VERSION))
        f.write(struct.pack("<Q", rows))
        f.write(struct.pack("<I", cols))
        f.write(np.ascontiguousarray(mat, dtype="<f4").tobytes())


def _read_matrix(path: Path) -> np.ndarray:
    try:
        raw = path.read_bytes()
    except OSError as e:
        raise BundleFormatError(f"cannot read logits file {path}: {e}") from e
    if len(raw) < 20 or raw[:4] != LOGITS_MAGIC:
        raise BundleFormatError(f"{path}: bad magic, expected ALGT")
    version, = struct.unpack_from("<I", raw, 4)
    if version != FILE_VERSION:
        raise BundleFormatError(f"{path}: unsupported version {version}")
    rows, = struct.unpack_from("<Q", raw, 8)
    cols, = struct.unpack_from("<I", raw, 16)
    expected = 20 + 4 * rows * cols
    if len(raw) != expected:
        raise BundleFormatError(
            f"{path}: file size {len(raw)} does not match header "
            f"({rows}x{cols} -> {expected} bytes)"
        )
    return np.frombuffer(raw, dtype="<f4", offset=20).reshape(rows, cols).copy()


def _write_labels(path: Path, labels: np.ndarray) -> None:
    with open(path, "wb") as f:
        f.write(LABELS_MAGIC)
        f.write(struct.pack("<I", FILE_VERSION))
        f.write(struct.pack("<Q", len(labels)))
        f.write(np.ascontiguousarray(labels, dtype="<u4").tobytes())


def _read_labels(path: Path) -> np.ndarray:
    try:
        raw = path.read_bytes()
    except OSError as e:
        raise BundleFormatError(f"cannot read labels file {path}: {e}") from e
    if len(raw) < 16 or raw[:4] != LABELS_MAGIC:
        raise BundleFormatError(f"{path}: bad magic, expected ALBL")
    version, = struct.unpack_from("<I", raw, 4)
    if version != FILE_VERSION:
        raise BundleFormatError(f"{path}: unsupported version {version}")
    count, = struct.unpack_from("<Q", raw, 8)
    if len(raw) != 16 + 4 * count:
        raise BundleFormatError(f"{path}: file size does not match header count {count}")
    return np.frombuffer(raw, dtype="<u4", offset=16).copy()


# --- directory-level load / write ----------------------------------------


def load_bundle(path) -> PredictionBundle:
    """Load and fully verify a bundle directory written by write_bundle."""
    root = Path(path)
    manifest_path = root / "manifest.json"
    try:
        manifest = json.loads(manifest_path.read_text("utf-8"))
    except OSError as e:
        raise BundleFormatError(f"cannot read {manifest_path}: {e}") from e
    except json.JSONDecodeError as e:
        raise BundleFormatError(f"corrupt manifest {manifest_path}: {e}") from e
    try:
        if manifest["schema_version"] != SCHEMA_VERSION:
            raise BundleFormatError(
                f"unsupported schema_version {manifest['schema_version']}"
            )
        num_classes = int(manifest["num_classes"])
        dataset_names = (str(manifest["id_dataset"]), str(manifest["ood_dataset"]))
        id_labels = _read_labels(root / manifest["id_labels"])
        ood_labels = None
        if manifest["ood_labels"] is not None:
            ood_labels = _read_labels(root / manifest["ood_labels"])
        models = []
        for entry in manifest["models"]:
            id_logits = _read_matrix(root / entry["id_logits"])
            ood_logits = _read_matrix(root / entry["ood_logits"])
            for name, mat in (("id_logits", id_logits), ("ood_logits", ood_logits)):
                if mat.shape[1] != num_classes:
                    raise BundleFormatError(
                        f"{root / entry[name]}: header says cols={mat.shape[1]} "
                        f"but manifest declares num_classes={num_classes}"
                    )
            models.append(
                ModelRecord(
                    model_id=str(entry["model_id"]),
                    metadata={str(k): str(v) for k, v in entry["metadata"].items()},
                    id_logits=id_logits,
                    ood_logits=ood_logits,
                )
            )
    except KeyError as e:
        raise BundleFormatError(f"manifest {manifest_path} missing key {e}") from e
    bundle = PredictionBundle(
        num_classes=num_classes,
        id_labels=id_labels,
        ood_labels=ood_labels,
        models=tuple(models),
        dataset_names=dataset_names,
    )
    errors = _check_invariants(bundle)
    if errors:
        raise BundleInvariantError("; ".join(errors))
    return bundle


def write_bundle(bundle: PredictionBundle, path) -> None:
    """Write a bundle directory; refuses before touching disk if invalid."""
    errors = _check_invariants(bundle)
    if errors:
        raise BundleInvariantError("refusing to write invalid bundle: " + "; ".join(errors))
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    _write_labels(root / "id_labels.bin", bundle.id_labels)
    ood_labels_rel = None
    if bundle.ood_labels is not None:
        _write_labels(root / "ood_labels.bin", bundle.ood_labels)
        ood_labels_rel = "ood_labels.bin"
    entries = []
    for i, m in enumerate(bundle.models):
        id_rel = f"model_{i:03d}_id.bin"
        ood_rel = f"model_{i:03d}_ood.bin"
        _write_matrix(root / id_rel, m.id_logits)
        _write_matrix(root / ood_rel, m.ood_logits)
        entries.append(
            {
                "model_id": m.model_id,
                "metadata": dict(sorted(m.metadata.items())),
                "id_logits": id_rel,
                "ood_logits": ood_rel,
            }
        )
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "num_classes": bundle.num_classes,
        "id_dataset": bundle.dataset_names[0],
        "ood_dataset": bundle.dataset_names[1],
        "id_labels": "id_labels.bin",
        "ood_labels": ood_labels_rel,
        "models": entries,
    }
    (root / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", "utf-8"
    )
