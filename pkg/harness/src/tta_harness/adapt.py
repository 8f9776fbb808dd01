"""Test-time adaptation loops and bundle export.

Three methods share one streaming loop over the OOD split:

- NONE: plain evaluation, no state changes (the vanilla baseline).
- BN_ADAPT: batch-norm running statistics are reset and re-estimated from the
  OOD batches (cumulative averaging); batch outputs are recorded under the
  test-batch statistics. No parameters change.
- TENT: identical statistics handling, plus gradient steps that minimize the
  mean prediction entropy of each batch, updating only the batch-norm affine
  parameters, online across batches (no re-initialization between batches).

ID logits are recorded after the OOD stream finishes, in evaluation mode with
the adapted state; the choice is recorded in each model's metadata.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
import torch
from torch import nn

from tta_harness import bundleio
from tta_harness.data import DataConfig, Splits, make_splits
from tta_harness.train import checkpoint_path, load_checkpoint, prepare_checkpoints

METHOD_NONE = "NONE"
METHOD_BN_ADAPT = "BN_ADAPT"
METHOD_TENT = "TENT"
METHODS = (METHOD_NONE, METHOD_BN_ADAPT, METHOD_TENT)

SWEEP_AXES = ("learning_rate", "adapt_steps", "batch_size", "checkpoint")


@dataclass(frozen=True)
class AdaptationConfig:
    method: str
    checkpoint: str  # architecture name resolved inside the checkpoint directory
    learning_rate: float = 1e-3
    adapt_steps: int = 1
    batch_size: int = 64
    seed: int = 0

    def check(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; choose from {METHODS}")
        if self.batch_size < 1:
            raise ValueError("batch_size must be positive")
        if self.method == METHOD_TENT:
            if self.learning_rate < 0:
                raise ValueError("TENT learning_rate must be >= 0")
            if self.adapt_steps < 1:
                raise ValueError("TENT adapt_steps must be >= 1")


@dataclass(frozen=True)
class AdaptationOutcome:
    config: AdaptationConfig
    model_id: str
    failure: str | None
    id_accuracy: float | None
    entropy_before: float | None
    entropy_after: float | None


class DivergenceError(RuntimeError):
    pass


def _bn_modules(model: nn.Module):
    return [m for m in model.modules() if isinstance(m, nn.modules.batchnorm._BatchNorm)]


def _mean_entropy(logits: torch.Tensor) -> torch.Tensor:
    logp = torch.log_softmax(logits, dim=1)
    return -(logp.exp() * logp).sum(1).mean()


def _eval_logits(model: nn.Module, x: torch.Tensor, batch_size: int) -> np.ndarray:
    model.eval()
    out = []
    with torch.no_grad():
        for i in range(0, len(x), batch_size):
            out.append(model(x[i : i + batch_size]))
    return torch.cat(out).numpy().astype(np.float32)


def _prepare_bn_for_adaptation(model: nn.Module):
    """Reset running statistics and switch to cumulative averaging."""
    for bn in _bn_modules(model):
        bn.reset_running_stats()
        bn.momentum = None


def run_adaptation(
    model: nn.Module, config: AdaptationConfig, ood_x: torch.Tensor
) -> np.ndarray:
    """Stream the OOD split through the model, returning the adapted logits.

    Mutates the model (statistics and, for TENT, affine parameters); callers
    load a fresh checkpoint per config.
    """
    config.check()
    torch.manual_seed(config.seed)
    bs = config.batch_size
    if config.method == METHOD_NONE:
        return _eval_logits(model, ood_x, bs)

    _prepare_bn_for_adaptation(model)
    model.train()
    if config.method == METHOD_BN_ADAPT:
        with torch.no_grad():
            chunks = [model(ood_x[i : i + bs]) for i in range(0, len(ood_x), bs)]
        return torch.cat(chunks).numpy().astype(np.float32)

    # TENT: gradients flow only into the batch-norm affine parameters
    for p in model.parameters():
        p.requires_grad_(False)
    params = []
    for bn in _bn_modules(model):
        for p in (bn.weight, bn.bias):
            if p is not None:
                p.requires_grad_(True)
                params.append(p)
    opt = torch.optim.SGD(params, lr=config.learning_rate, momentum=0.9)
    chunks = []
    for i in range(0, len(ood_x), bs):
        batch = ood_x[i : i + bs]
        for _ in range(config.adapt_steps):
            loss = _mean_entropy(model(batch))
            if not torch.isfinite(loss):
                raise DivergenceError(
                    f"non-finite adaptation loss at batch offset {i}"
                )
            opt.zero_grad()
            loss.backward()
            opt.step()
        # accumulate the batch's logits after its updates; with lr=0 the
        # extra forward only re-averages the same batch statistics, so the
        # stream degenerates exactly to the statistics-only method
        with torch.no_grad():
            chunks.append(model(batch))
    return torch.cat(chunks).numpy().astype(np.float32)


def _model_id(config: AdaptationConfig) -> str:
    base = f"{config.checkpoint}-{config.method.lower()}"
    if config.method == METHOD_TENT:
        base += f"-lr{config.learning_rate:g}-k{config.adapt_steps}"
    return f"{base}-b{config.batch_size}"


def run_config(
    config: AdaptationConfig,
    data_config: DataConfig,
    checkpoint_dir,
    splits: Splits,
) -> tuple[dict | None, AdaptationOutcome]:
    """One adaptation run -> (bundle model entry or None, outcome record)."""
    model = load_checkpoint(checkpoint_path(checkpoint_dir, config.checkpoint), data_config)
    entropy_before = float(
        _mean_entropy(torch.from_numpy(_eval_logits(model, splits.ood_x, config.batch_size)))
    )
    try:
        ood_logits = run_adaptation(model, config, splits.ood_x)
    except DivergenceError as e:
        outcome = AdaptationOutcome(
            config=config,
            model_id=_model_id(config),
            failure=str(e),
            id_accuracy=None,
            entropy_before=entropy_before,
            entropy_after=None,
        )
        return None, outcome
    id_logits = _eval_logits(model, splits.id_x, config.batch_size)
    id_accuracy = float(np.mean(id_logits.argmax(1) == splits.id_y.numpy()))
    entropy_after = float(_mean_entropy(torch.from_numpy(ood_logits)))
    metadata = {
        "method": config.method,
        "checkpoint": config.checkpoint,
        "learning_rate": f"{config.learning_rate:g}",
        "adapt_steps": str(config.adapt_steps),
        "batch_size": str(config.batch_size),
        "seed": str(config.seed),
        "id_eval": "post-adaptation, evaluation mode",
        "id_accuracy": f"{id_accuracy:.6f}",
        "ood_entropy_before": f"{entropy_before:.6f}",
        "ood_entropy_after": f"{entropy_after:.6f}",
    }
    entry = {
        "model_id": _model_id(config),
        "metadata": metadata,
        "id_logits": id_logits,
        "ood_logits": ood_logits,
    }
    outcome = AdaptationOutcome(
        config=config,
        model_id=entry["model_id"],
        failure=None,
        id_accuracy=id_accuracy,
        entropy_before=entropy_before,
        entropy_after=entropy_after,
    )
    return entry, outcome


def adapt_and_export(
    configs: list[AdaptationConfig],
    data_config: DataConfig,
    checkpoint_dir,
    out,
    splits: Splits | None = None,
) -> list[AdaptationOutcome]:
    """Run every config against one dataset pair and write a single bundle.

    A diverging config is recorded in export_report.json and skipped; the
    remaining models are still exported.
    """
    if not configs:
        raise ValueError("configs must be nonempty")
    for c in configs:
        c.check()
    if splits is None:
        splits = make_splits(data_config)
    prepare_checkpoints(
        checkpoint_dir, sorted({c.checkpoint for c in configs}), data_config, splits
    )
    entries = []
    outcomes = []
    seen_ids = set()
    for config in configs:
        entry, outcome = run_config(config, data_config, checkpoint_dir, splits)
        if entry is not None:
            if entry["model_id"] in seen_ids:
                entry["model_id"] += f"-{len(entries)}"
            seen_ids.add(entry["model_id"])
            entries.append(entry)
        outcomes.append(outcome)
    if not entries:
        raise RuntimeError("every adaptation config failed; nothing to export")
    bundleio.write_bundle_dir(
        out,
        num_classes=data_config.num_classes,
        dataset_names=("synthetic-id", f"synthetic-ood-severity{data_config.severity:g}"),
        id_labels=splits.id_y.numpy().astype(np.uint32),
        ood_labels=splits.ood_y.numpy().astype(np.uint32),
        models=entries,
    )
    report = [
        {
            "model_id": o.model_id,
            "status": "failed" if o.failure else "exported",
            "failure": o.failure,
            "id_accuracy": o.id_accuracy,
        }
        for o in outcomes
    ]
    (Path(out) / "export_report.json").write_text(
        json.dumps(report, indent=2) + "\n", "utf-8"
    )
    return outcomes


def sweep(
    grid: dict[str, list],
    base: AdaptationConfig,
    data_config: DataConfig,
    checkpoint_dir,
    out,
    splits: Splits | None = None,
) -> dict[str, Path]:
    """One bundle per axis, each varying only that axis around the base config."""
    for axis in grid:
        if axis not in SWEEP_AXES:
            raise ValueError(f"unknown sweep axis {axis!r}; choose from {SWEEP_AXES}")
        if not grid[axis]:
            raise ValueError(f"axis {axis!r} has no values")
    if splits is None:
        splits = make_splits(data_config)
    written = {}
    for axis, values in grid.items():
        configs = [replace(base, **{axis: v}) for v in values]
        axis_out = Path(out) / axis
        adapt_and_export(configs, data_config, checkpoint_dir, axis_out, splits=splits)
        written[axis] = axis_out
    return written
