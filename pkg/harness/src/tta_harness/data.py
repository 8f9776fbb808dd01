"""Synthetic image-classification data with a controllable distribution shift.

Each class is a fixed random template image; samples are the template plus
pixel noise. The OOD split adds Gaussian corruption noise on top, which
degrades accuracy the way the corrupted test sets used for shift studies do,
while staying small enough to train on a CPU in seconds.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch


@dataclass(frozen=True)
class DataConfig:
    num_classes: int = 10
    image_size: int = 16
    channels: int = 3
    num_train: int = 4000
    num_id: int = 2000
    num_ood: int = 2000
    base_noise: float = 1.0  # pixel noise shared by every split
    severity: float = 2.0  # extra Gaussian corruption on the OOD split
    seed: int = 0

    def check(self):
        if self.num_classes < 2:
            raise ValueError("need at least 2 classes")
        if min(self.num_train, self.num_id, self.num_ood) < 1:
            raise ValueError("split sizes must be positive")
        if self.severity < 0 or self.base_noise < 0:
            raise ValueError("noise levels must be >= 0")


@dataclass(frozen=True)
class Splits:
    train_x: torch.Tensor
    train_y: torch.Tensor
    id_x: torch.Tensor
    id_y: torch.Tensor
    ood_x: torch.Tensor
    ood_y: torch.Tensor


def _sample(rng, templates, labels, noise, corruption):
    x = templates[labels] + rng.normal(0.0, noise, templates[labels].shape)
    if corruption > 0:
        x = x + rng.normal(0.0, corruption, x.shape)
    return x.astype(np.float32)


def make_splits(config: DataConfig) -> Splits:
    """Deterministic train/ID-test/OOD-test splits for the config's seed."""
    config.check()
    rng = np.random.default_rng(config.seed)
    shape = (config.num_classes, config.channels, config.image_size, config.image_size)
    templates = rng.normal(0.0, 1.0, shape)

    def split(n, corruption):
        labels = rng.integers(0, config.num_classes, n)
        x = _sample(rng, templates, labels, config.base_noise, corruption)
        return torch.from_numpy(x), torch.from_numpy(labels.astype(np.int64))

    train_x, train_y = split(config.num_train, 0.0)
    id_x, id_y = split(config.num_id, 0.0)
    ood_x, ood_y = split(config.num_ood, config.severity)
    return Splits(train_x, train_y, id_x, id_y, ood_x, ood_y)
