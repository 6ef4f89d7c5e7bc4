import numpy as np
import pytest

from apps.data import SRDataset
from apps.networks import ArchConfig, build_models


@pytest.fixture
def rng():
    return np.random.default_rng(31)


@pytest.fixture(scope="module")
def toy_models():
    return build_models(ArchConfig.toy(), seed=0).eval()


@pytest.fixture(scope="module")
def toy_dataset():
    return SRDataset.from_generated(seed=2, count=3, image_size=32, scale_factor=4)


@pytest.fixture
def sample(toy_dataset):
    return toy_dataset.x[0], toy_dataset.y[0]
