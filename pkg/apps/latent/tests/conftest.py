import numpy as np
import pytest

from apps.latent import DiagGaussian
from apps.tensor import Tensor


@pytest.fixture
def rng():
    return np.random.default_rng(7)


@pytest.fixture
def bounded_gaussian():
    """Random DiagGaussian with mu and log_var in [-1, 1], as the tanh heads emit."""

    def _make(rng, shape=(1, 4, 2, 2), requires_grad=False, dtype=np.float64):
        return DiagGaussian(
            Tensor(rng.uniform(-1, 1, size=shape), requires_grad, dtype=dtype),
            Tensor(rng.uniform(-1, 1, size=shape), requires_grad, dtype=dtype),
        )

    return _make
