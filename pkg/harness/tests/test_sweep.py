import pytest

from aline.bundle import load_bundle
from tta_harness.adapt import AdaptationConfig, sweep

BASE = AdaptationConfig(method="TENT", checkpoint="bn_small", learning_rate=1e-3)


def test_single_axis_one_model_per_value(tmp_path, data_config, checkpoint_dir, splits):
    lrs = [1e-5, 3e-5, 1e-4, 3e-4, 1e-3, 3e-3, 1e-2]
    written = sweep(
        {"learning_rate": lrs}, BASE, data_config, checkpoint_dir, tmp_path, splits=splits
    )
    assert set(written) == {"learning_rate"}
    bundle = load_bundle(written["learning_rate"])
    assert bundle.num_models == len(lrs)
    assert [float(m.metadata["learning_rate"]) for m in bundle.models] == lrs
    # only the swept axis varies
    for key in ("adapt_steps", "batch_size", "method", "checkpoint"):
        assert len({m.metadata[key] for m in bundle.models}) == 1


def test_multiple_axes_one_bundle_each(tmp_path, data_config, checkpoint_dir, splits):
    written = sweep(
        {"adapt_steps": [1, 2, 3], "batch_size": [32, 64]},
        BASE,
        data_config,
        checkpoint_dir,
        tmp_path,
        splits=splits,
    )
    steps = load_bundle(written["adapt_steps"])
    assert [int(m.metadata["adapt_steps"]) for m in steps.models] == [1, 2, 3]
    sizes = load_bundle(written["batch_size"])
    assert [int(m.metadata["batch_size"]) for m in sizes.models] == [32, 64]


def test_checkpoint_axis(tmp_path, data_config, checkpoint_dir, splits):
    written = sweep(
        {"checkpoint": ["bn_small", "bn_wide", "bn_deep"]},
        BASE,
        data_config,
        checkpoint_dir,
        tmp_path,
        splits=splits,
    )
    bundle = load_bundle(written["checkpoint"])
    assert [m.metadata["checkpoint"] for m in bundle.models] == [
        "bn_small",
        "bn_wide",
        "bn_deep",
    ]


def test_unknown_axis_rejected(tmp_path, data_config, checkpoint_dir, splits):
    with pytest.raises(ValueError, match="unknown sweep axis"):
        sweep({"momentum": [0.9]}, BASE, data_config, checkpoint_dir, tmp_path, splits=splits)
    with pytest.raises(ValueError, match="no values"):
        sweep({"batch_size": []}, BASE, data_config, checkpoint_dir, tmp_path, splits=splits)
