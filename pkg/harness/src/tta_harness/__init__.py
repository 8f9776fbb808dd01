"""Test-time adaptation harness: adapts small classifiers on shifted data and
exports their logits as prediction bundles."""

__version__ = "0.1.0"
