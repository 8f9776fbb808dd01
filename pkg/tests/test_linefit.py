import numpy as np
import pytest

from aline import linefit, metrics
from aline.errors import DegenerateFitError
from aline.synth import SynthConfig, generate_anticorrelated, generate_ensemble
from bundle_factories import random_bundle


class TestFitLine:
    def test_exact_line(self):
        xs = np.linspace(-2, 3, 20)
        fit = linefit.fit_line(xs, 2 * xs + 1)
        assert fit.slope == pytest.approx(2.0, abs=1e-12)
        assert fit.bias == pytest.approx(1.0, abs=1e-12)
        assert fit.r_squared == pytest.approx(1.0, abs=1e-12)

    def test_two_points_interpolate(self):
        fit = linefit.fit_line([0.0, 1.0], [3.0, 5.0])
        assert fit.slope == pytest.approx(2.0)
        assert fit.bias == pytest.approx(3.0)
        assert fit.r_squared == pytest.approx(1.0)

    def test_matches_normal_equations_oracle(self):
        rng = np.random.default_rng(2)
        xs = rng.normal(size=50)
        ys = 0.7 * xs - 0.2 + rng.normal(size=50) * 0.3
        fit = linefit.fit_line(xs, ys)
        # independent closed-form solve of [slope, bias]
        A = np.column_stack([xs, np.ones(50)])
        slope, bias = np.linalg.solve(A.T @ A, A.T @ ys)
        assert fit.slope == pytest.approx(slope, abs=1e-12)
        assert fit.bias == pytest.approx(bias, abs=1e-12)

    def test_degenerate_x(self):
        with pytest.raises(DegenerateFitError):
            linefit.fit_line([1.0, 1.0, 1.0], [0.0, 1.0, 2.0])

    def test_order_invariant(self):
        rng = np.random.default_rng(4)
        xs = rng.normal(size=30)
        ys = rng.normal(size=30)
        fit1 = linefit.fit_line(xs, ys)
        perm = rng.permutation(30)
        fit2 = linefit.fit_line(xs[perm], ys[perm])
        assert fit1.slope == pytest.approx(fit2.slope, abs=1e-12)
        assert fit1.bias == pytest.approx(fit2.bias, abs=1e-12)

    def test_residuals_zero_on_exact_points(self):
        xs = np.linspace(0, 1, 7)
        ys = -0.5 * xs + 0.3
        fit = linefit.fit_line(xs, ys)
        resid = ys - (fit.slope * xs + fit.bias)
        assert np.abs(resid).max() < 1e-10


class TestAgreementLine:
    def test_pair_point_count(self):
        b = random_bundle(n_models=6)
        fit = linefit.fit_agreement_line(b)
        assert len(fit.pair_points) == 15
        assert fit.fit.n_points == 15

    def test_identical_models_degenerate(self):
        from aline.bundle import ModelRecord, PredictionBundle

        b = random_bundle(n_models=3)
        m = b.models[0]
        clones = tuple(
            ModelRecord(f"c{i}", {"a": "x"}, m.id_logits, m.ood_logits) for i in range(3)
        )
        same = PredictionBundle(
            num_classes=b.num_classes,
            id_labels=b.id_labels,
            ood_labels=b.ood_labels,
            models=clones,
            dataset_names=b.dataset_names,
        )
        with pytest.raises(DegenerateFitError):
            linefit.fit_agreement_line(same)

    def test_planted_line_recovery_low_sharing(self):
        cfg = SynthConfig(
            num_models=10,
            num_id_samples=20000,
            num_ood_samples=20000,
            num_classes=10,
            slope=0.8,
            bias=-0.3,
            noise=0.0,
            error_sharing=0.0,
            seed=12,
        )
        bundle, _ = generate_ensemble(cfg)
        fit = linefit.fit_agreement_line(bundle)
        assert fit.fit.slope == pytest.approx(0.8, abs=0.05)
        assert fit.fit.r_squared > 0.95

    def test_permutation_invariance(self):
        b = random_bundle(n_models=5)
        fit1 = linefit.fit_agreement_line(b)
        fit2 = linefit.fit_agreement_line(b.subset(["m3", "m0", "m4", "m1", "m2"]))
        assert fit1.fit.slope == pytest.approx(fit2.fit.slope, abs=1e-12)
        assert fit1.fit.bias == pytest.approx(fit2.fit.bias, abs=1e-12)
        assert fit1.fit.r_squared == pytest.approx(fit2.fit.r_squared, abs=1e-12)

    def test_r2_matches_independent_residual_loop(self):
        b = random_bundle(n_models=6, n_id=200, n_ood=150)
        fit = linefit.fit_agreement_line(b)
        xs = np.array([p[2] for p in fit.pair_points])
        ys = np.array([p[3] for p in fit.pair_points])
        ss_res = sum((y - (fit.fit.slope * x + fit.fit.bias)) ** 2 for x, y in zip(xs, ys))
        ss_tot = sum((y - ys.mean()) ** 2 for y in ys)
        assert fit.fit.r_squared == pytest.approx(1 - ss_res / ss_tot, abs=1e-12)


class TestDiagnose:
    def _planted(self, **overrides):
        cfg = SynthConfig(
            num_models=10,
            num_id_samples=20000,
            num_ood_samples=20000,
            num_classes=10,
            slope=overrides.pop("slope", 0.8),
            bias=overrides.pop("bias", -0.3),
            noise=0.0,
            error_sharing=0.0,
            seed=5,
            **overrides,
        )
        return cfg

    def test_healthy_bundle_no_flags(self):
        bundle, _ = generate_ensemble(self._planted())
        fit = linefit.fit_agreement_line(bundle)
        report = linefit.diagnose(bundle, fit)
        assert report.flags == ()
        assert report.agreement_r2 > 0.95
        assert report.accuracy_slope_sign == "positive"

    def test_anticorrelated_flag(self):
        cfg = SynthConfig(
            num_models=8,
            num_id_samples=5000,
            num_ood_samples=5000,
            num_classes=10,
            slope=-0.8,
            bias=0.5,
            id_accuracy_range=(0.5, 0.9),
            error_sharing=0.0,
            seed=6,
        )
        bundle, _ = generate_anticorrelated(cfg)
        fit = linefit.fit_agreement_line(bundle)
        report = linefit.diagnose(bundle, fit)
        assert linefit.FLAG_NEGATIVE_CORRELATION in report.flags
        assert report.accuracy_slope_sign == "negative"

    def test_too_few_models(self):
        b = random_bundle(n_models=2, n_id=300, n_ood=300)
        with pytest.raises(DegenerateFitError):
            linefit.fit_agreement_line(b)
        report = linefit.diagnose(b, None)
        assert linefit.FLAG_TOO_FEW_MODELS in report.flags

    def test_low_r2_flag_threshold(self):
        b = random_bundle(n_models=6, n_id=100, n_ood=100)
        fit = linefit.fit_agreement_line(b)
        report = linefit.diagnose(b, fit, r2_threshold=1.1)
        assert linefit.FLAG_LOW_R2 in report.flags
