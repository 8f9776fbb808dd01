import pytest

from tta_harness.data import DataConfig, make_splits
from tta_harness.train import prepare_checkpoints

ARCHS = ("bn_small", "bn_wide", "bn_deep")


@pytest.fixture(scope="session")
def data_config():
    return DataConfig(
        num_train=2000, num_id=800, num_ood=800, base_noise=1.5, severity=2.0, seed=0
    )


@pytest.fixture(scope="session")
def splits(data_config):
    return make_splits(data_config)


@pytest.fixture(scope="session")
def checkpoint_dir(tmp_path_factory, data_config, splits):
    d = tmp_path_factory.mktemp("checkpoints")
    prepare_checkpoints(d, ARCHS, data_config, splits, epochs=4)
    return d
