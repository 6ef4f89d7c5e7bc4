import numpy as np
import pytest

from apps.tensor import Tensor, use_dtype


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def float64():
    """Run the test body with 64-bit tensors (gradient-check precision)."""
    with use_dtype(np.float64):
        yield


@pytest.fixture
def make_tensor(rng):
    def _make(*shape, requires_grad=True, scale=1.0):
        return Tensor(rng.normal(size=shape) * scale, requires_grad=requires_grad)

    return _make
