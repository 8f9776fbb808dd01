"""Three small convolutional classifiers with batch normalization.

All normalization layers are BatchNorm2d so the statistics-replacement and
entropy-minimization adaptation methods have something to act on.
"""

from __future__ import annotations

import torch
from torch import nn

ARCHITECTURES = ("bn_small", "bn_wide", "bn_deep")


def _block(c_in, c_out, stride=1):
    return nn.Sequential(
        nn.Conv2d(c_in, c_out, 3, stride=stride, padding=1, bias=False),
        nn.BatchNorm2d(c_out),
        nn.ReLU(inplace=True),
    )


class ConvNet(nn.Module):
    def __init__(self, widths, num_classes, channels):
        super().__init__()
        layers = []
        c = channels
        for i, w in enumerate(widths):
            layers.append(_block(c, w, stride=2 if i > 0 else 1))
            c = w
        self.features = nn.Sequential(*layers)
        self.pool = nn.AdaptiveAvgPool2d(1)
        self.head = nn.Linear(c, num_classes)

    def forward(self, x):
        h = self.pool(self.features(x)).flatten(1)
        return self.head(h)


def build_model(arch: str, num_classes: int, channels: int = 3) -> nn.Module:
    widths = {
        "bn_small": (16, 32),
        "bn_wide": (32, 64),
        "bn_deep": (16, 32, 64),
    }
    if arch not in widths:
        raise ValueError(f"unknown architecture {arch!r}; choose from {ARCHITECTURES}")
    return ConvNet(widths[arch], num_classes, channels)
