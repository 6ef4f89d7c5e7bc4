import numpy as np
import pytest

from apps.data import write_dataset


@pytest.fixture
def rng():
    return np.random.default_rng(99)


@pytest.fixture
def dataset_dir(tmp_path):
    """Six 16px samples at scale 4 written to disk."""
    write_dataset(tmp_path / "data", seed=3, count=6, image_size=16, scale_factor=4)
    return tmp_path / "data"
