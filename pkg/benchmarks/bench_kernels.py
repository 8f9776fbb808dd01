"""Timing comparison of the compiled kernels against the numpy fallback.

Run with:  python3 benchmarks/bench_kernels.py
"""

import time

import numpy as np

from aline import _kernels_py

try:
    from aline import _kernels as _compiled
except ImportError:
    _compiled = None


def _bench(fn, *args, repeats=7):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    rng = np.random.default_rng(0)
    preds = rng.integers(0, 100, (20, 50_000)).astype(np.int32)
    logits = np.ascontiguousarray(rng.normal(size=(200_000, 10)) * 4)

    cases = [
        ("pairwise_agreement (20 x 50k)", "pairwise_agreement", (preds,)),
        ("row_max_softmax (200k x 10)", "row_max_softmax", (logits, 1.3)),
        ("row_neg_entropy (200k x 10)", "row_neg_entropy", (logits,)),
    ]
    print(f"{'kernel':38s} {'python':>10s} {'compiled':>10s} {'speedup':>8s}")
    for label, name, args in cases:
        t_py = _bench(getattr(_kernels_py, name), *args)
        if _compiled is None:
            print(f"{label:38s} {t_py * 1e3:9.2f}ms  (extension not built)")
            continue
        t_c = _bench(getattr(_compiled, name), *args)
        np.testing.assert_allclose(
            getattr(_compiled, name)(*args), getattr(_kernels_py, name)(*args), atol=1e-12
        )
        print(f"{label:38s} {t_py * 1e3:9.2f}ms {t_c * 1e3:9.2f}ms {t_py / t_c:7.1f}x")


if __name__ == "__main__":
    main()
