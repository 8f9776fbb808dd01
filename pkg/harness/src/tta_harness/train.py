"""Quick CPU training of the source checkpoints the adaptation methods start from."""

from __future__ import annotations

from pathlib import Path

import torch
from torch import nn

from tta_harness.data import DataConfig, Splits, make_splits
from tta_harness.models import build_model


def _accuracy(model: nn.Module, x, y, batch_size=256) -> float:
    model.eval()
    hits = 0
    with torch.no_grad():
        for i in range(0, len(x), batch_size):
            hits += int((model(x[i : i + batch_size]).argmax(1) == y[i : i + batch_size]).sum())
    return hits / len(x)


def train_checkpoint(
    arch: str,
    data_config: DataConfig,
    splits: Splits,
    path: Path,
    epochs: int = 2,
    lr: float = 1e-3,
    batch_size: int = 64,
    seed: int = 0,
) -> float:
    """Train one source model and save its weights; returns ID test accuracy."""
    torch.manual_seed(seed)
    model = build_model(arch, data_config.num_classes, data_config.channels)
    opt = torch.optim.Adam(model.parameters(), lr=lr)
    loss_fn = nn.CrossEntropyLoss()
    n = len(splits.train_x)
    model.train()
    for epoch in range(epochs):
        perm = torch.randperm(n, generator=torch.Generator().manual_seed(seed * 1000 + epoch))
        for i in range(0, n, batch_size):
            idx = perm[i : i + batch_size]
            opt.zero_grad()
            loss = loss_fn(model(splits.train_x[idx]), splits.train_y[idx])
            loss.backward()
            opt.step()
    acc = _accuracy(model, splits.id_x, splits.id_y)
    path.parent.mkdir(parents=True, exist_ok=True)
    torch.save({"arch": arch, "state_dict": model.state_dict(), "id_accuracy": acc}, path)
    return acc


def checkpoint_path(directory, arch: str) -> Path:
    return Path(directory) / f"{arch}.pt"


def prepare_checkpoints(
    directory,
    archs,
    data_config: DataConfig,
    splits: Splits | None = None,
    epochs: int = 2,
    seed: int = 0,
) -> dict[str, Path]:
    """Train any missing checkpoints; returns arch -> checkpoint path."""
    if splits is None:
        splits = make_splits(data_config)
    paths = {}
    for i, arch in enumerate(archs):
        path = checkpoint_path(directory, arch)
        if not path.exists():
            train_checkpoint(arch, data_config, splits, path, epochs=epochs, seed=seed + i)
        paths[arch] = path
    return paths


def load_checkpoint(path, data_config: DataConfig) -> nn.Module:
    payload = torch.load(path, map_location="cpu", weights_only=True)
    model = build_model(payload["arch"], data_config.num_classes, data_config.channels)
    model.load_state_dict(payload["state_dict"])
    return model
