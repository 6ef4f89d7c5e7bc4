import numpy as np
import pytest

from apps.networks import ArchConfig, build_models
from apps.tensor import Tensor, use_dtype


@pytest.fixture
def rng():
    return np.random.default_rng(2024)


@pytest.fixture
def toy_config():
    """32x32 images, 16 channels, 2 encoder ResBlocks, a 16x4x4 latent."""
    return ArchConfig.toy()


@pytest.fixture
def toy_models(toy_config):
    return build_models(toy_config, seed=0)


@pytest.fixture
def float64_models(toy_config):
    with use_dtype(np.float64):
        yield build_models(toy_config, seed=0)


@pytest.fixture
def make_image(rng):
    def _make(config, batch=2, dtype=None):
        return Tensor(
            rng.uniform(-1, 1, size=(batch, *config.image_shape)), dtype=dtype
        )

    return _make


@pytest.fixture
def float64():
    with use_dtype(np.float64):
        yield
