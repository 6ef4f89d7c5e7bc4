import numpy as np
import pytest

from apps.data import SRDataset
from apps.networks import ArchConfig, build_models
from apps.tensor import Tensor
from apps.training import TrainConfig


@pytest.fixture
def rng():
    return np.random.default_rng(7)


@pytest.fixture
def toy_config():
    return ArchConfig.toy()


@pytest.fixture
def toy_models(toy_config):
    return build_models(toy_config, seed=0)


@pytest.fixture(scope="module")
def toy_dataset():
    """Four 32px faces at scale 4."""
    return SRDataset.from_generated(seed=1, count=4, image_size=32, scale_factor=4)


@pytest.fixture
def train_config():
    return TrainConfig(
        batch_size=2,
        steps_phase1=4,
        steps_phase2=4,
        seed=5,
        plateau_window=1000,
        log_interval=1,
        checkpoint_interval=2,
    )


@pytest.fixture
def batch(toy_dataset):
    return toy_dataset.batch([0, 1])


@pytest.fixture
def eps(rng, toy_config):
    return rng.standard_normal((2, *toy_config.latent_shape)).astype(np.float32)


@pytest.fixture
def constant_images():
    def _make(value, batch=2, size=4):
        return Tensor(np.full((batch, 3, size, size), value))

    return _make
