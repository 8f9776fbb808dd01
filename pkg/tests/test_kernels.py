"""Backend parity: the compiled kernels and the numpy fallback must agree."""

import math
import subprocess
import sys

import numpy as np
import pytest

from aline import _kernels_py, kernels

try:
    from aline import _kernels as _compiled
except ImportError:
    _compiled = None

needs_compiled = pytest.mark.skipif(
    _compiled is None, reason="compiled extension not built"
)


def _agreement_loop(preds):
    """Slow reference: direct double loop over model pairs and samples."""
    n, N = preds.shape
    out = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            out[i, j] = np.mean(preds[i] == preds[j])
    return out


class TestPythonBackendOracles:
    def test_pairwise_agreement_matches_loop(self):
        rng = np.random.default_rng(0)
        preds = rng.integers(0, 7, (5, 200)).astype(np.int32)
        np.testing.assert_allclose(
            _kernels_py.pairwise_agreement(preds), _agreement_loop(preds), atol=1e-15
        )

    def test_row_max_softmax_matches_rowwise(self):
        rng = np.random.default_rng(1)
        logits = rng.normal(size=(40, 6)) * 5
        for tau in (0.3, 1.0, 7.0):
            got = _kernels_py.row_max_softmax(logits, tau)
            for i, row in enumerate(logits):
                z = row / tau
                e = np.exp(z - z.max())
                assert got[i] == pytest.approx((e / e.sum()).max(), abs=1e-13)

    def test_row_neg_entropy_matches_sum(self):
        rng = np.random.default_rng(2)
        logits = rng.normal(size=(30, 5)) * 4
        got = _kernels_py.row_neg_entropy(logits)
        for i, row in enumerate(logits):
            e = np.exp(row - row.max())
            p = e / e.sum()
            assert got[i] == pytest.approx(
                sum(pc * math.log(pc) for pc in p if pc > 0), abs=1e-12
            )


@needs_compiled
class TestBackendParity:
    def test_pairwise_agreement(self):
        rng = np.random.default_rng(3)
        for n, N, C in [(2, 1, 2), (3, 50, 4), (8, 999, 100)]:
            preds = rng.integers(0, C, (n, N)).astype(np.int32)
            np.testing.assert_array_equal(
                _compiled.pairwise_agreement(preds),
                _kernels_py.pairwise_agreement(preds),
            )

    def test_row_max_softmax(self):
        rng = np.random.default_rng(4)
        for tau in (1e-2, 1.0, 1e3):
            logits = np.ascontiguousarray(rng.normal(size=(60, 9)) * 10)
            np.testing.assert_allclose(
                _compiled.row_max_softmax(logits, tau),
                _kernels_py.row_max_softmax(logits, tau),
                atol=1e-13,
            )

    def test_row_neg_entropy(self):
        rng = np.random.default_rng(5)
        logits = np.ascontiguousarray(rng.normal(size=(60, 9)) * 10)
        np.testing.assert_allclose(
            _compiled.row_neg_entropy(logits),
            _kernels_py.row_neg_entropy(logits),
            atol=1e-12,
        )

    def test_extreme_logits_stay_finite(self):
        logits = np.ascontiguousarray(
            [[700.0, -700.0, 0.0], [1e4, 1e4, 1e4], [-1e4, 0.0, 0.0]]
        )
        for impl in (_compiled, _kernels_py):
            assert np.isfinite(impl.row_max_softmax(logits, 1.0)).all()
            assert np.isfinite(impl.row_neg_entropy(logits)).all()


class TestBackendSelection:
    def test_wrapper_accepts_non_contiguous_input(self):
        rng = np.random.default_rng(6)
        wide = rng.integers(0, 5, (4, 200)).astype(np.int32)
        view = wide[:, ::2]  # non-contiguous
        np.testing.assert_array_equal(
            kernels.pairwise_agreement(view),
            _kernels_py.pairwise_agreement(np.ascontiguousarray(view)),
        )

    def test_env_var_forces_python_backend(self):
        code = "import aline.kernels as k; print(k.BACKEND)"
        out = subprocess.run(
            [sys.executable, "-c", code],
            env={"PATH": "/usr/bin:/bin", "ALINE_KERNELS": "python"},
            capture_output=True,
            text=True,
            check=True,
        )
        assert out.stdout.strip() == "python"

    @needs_compiled
    def test_default_backend_is_compiled(self):
        code = "import aline.kernels as k; print(k.BACKEND)"
        out = subprocess.run(
            [sys.executable, "-c", code],
            env={"PATH": "/usr/bin:/bin"},
            capture_output=True,
            text=True,
            check=True,
        )
        assert out.stdout.strip() == "compiled"
