"""Backend selector for the hot kernels.

Prefers the compiled Cython extension, falling back to the pure-numpy
implementation when the extension was not built. Set ALINE_KERNELS=python to
force the fallback (used by the benchmark and backend-parity tests).
"""

import os

import numpy as np

if os.environ.get("ALINE_KERNELS", "").lower() == "python":
    from aline import _kernels_py as _impl

    BACKEND = "python"
else:
    try:
        from aline import _kernels as _impl  # type: ignore[attr-defined]

        BACKEND = "compiled"
    except ImportError:
        from aline import _kernels_py as _impl

        BACKEND = "python"


def pairwise_agreement(preds):
    preds = np.ascontiguousarray(preds, dtype=np.int32)
    return _impl.pairwise_agreement(preds)


def row_max_softmax(logits, tau):
    logits = np.ascontiguousarray(logits, dtype=np.float64)
    return _impl.row_max_softmax(logits, float(tau))


def row_neg_entropy(logits):
    logits = np.ascontiguousarray(logits, dtype=np.float64)
    return _impl.row_neg_entropy(logits)
