"""Pure-numpy fallback for the compiled kernels in aline._kernels.

Kept signature-compatible so aline.kernels can swap backends at import time.
"""

import numpy as np


def pairwise_agreement(preds):
    """n x N prediction matrix -> n x n matrix of pairwise agreement fractions."""
    preds = np.asarray(preds)
    n, num = preds.shape
    out = np.ones((n, n), dtype=np.float64)
    for i in range(n):
        for j in range(i + 1, n):
            frac = np.count_nonzero(preds[i] == preds[j]) / num
            out[i, j] = frac
            out[j, i] = frac
    return out


def row_max_softmax(logits, tau):
    """Per-row maximum softmax probability at temperature tau."""
    z = np.asarray(logits, dtype=np.float64) / tau
    z = z - z.max(axis=1, keepdims=True)
    return 1.0 / np.exp(z).sum(axis=1)


def row_neg_entropy(logits):
    """Per-row sum_c p_c log p_c with p = softmax at temperature 1."""
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    s = e.sum(axis=1, keepdims=True)
    p = e / s
    logp = z - np.log(s)
    return np.where(p > 0.0, p * logp, 0.0).sum(axis=1)
