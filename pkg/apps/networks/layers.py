"""
layers.py

Building blocks for the three networks:
- Module: parameter/buffer registry with train/eval propagation
- Conv2d, ConvTranspose2d, BatchNorm2d, Activation
- ConvBlock (Conv-BN-ReLU), DeconvBlock (Deconv-BN-ReLU), ResBlock
- GaussianHead: Conv-BN-LeakyReLU-Conv-BN-Tanh
- trace_shapes: record per-layer output sizes under their table labels
"""

from __future__ import annotations

import contextlib
import logging
from typing import Iterator, Optional

import numpy as np

from apps.abstract.choices import ActivationKind
from apps.abstract.exceptions import ShapeError
from apps.tensor import BatchNormState, Tensor, activation, batch_norm2d
from apps.tensor import conv2d, conv_transpose2d
from apps.tensor.tensor import default_dtype

logger = logging.getLogger(__name__)

_trace: Optional[list] = None


@contextlib.contextmanager
def trace_shapes() -> Iterator[list]:
    """
    Collect (label, output shape without batch axis) for every labelled layer run
    inside the block.
    """
    global _trace
    previous, _trace = _trace, []
    try:
        yield _trace
    finally:
        _trace = previous


def kaiming_normal(
    rng: np.random.Generator, shape: tuple, fan_in: int
) -> np.ndarray:
    return (rng.standard_normal(shape) * np.sqrt(2.0 / fan_in)).astype(default_dtype())


class Module:
    """
    Base class for layers and networks.

    Attributes holding a Module or a gradient-requiring Tensor are registered as
    children and parameters, in assignment order.
    """

    def __init__(self, label: Optional[str] = None):
        object.__setattr__(self, "_parameters", {})
        object.__setattr__(self, "_modules", {})
        object.__setattr__(self, "_buffers", {})
        self.label = label
        self.training = True

    def __setattr__(self, name, value):
        if isinstance(value, Module):
            self._modules[name] = value
        elif isinstance(value, Tensor) and value.requires_grad:
            self._parameters[name] = value
        elif isinstance(value, BatchNormState):
            self._buffers[name] = value
        object.__setattr__(self, name, value)

    def forward(self, *args):
        raise NotImplementedError

    def __call__(self, *args):
        out = self.forward(*args)
        if _trace is not None and self.label is not None:
            _trace.append((self.label, tuple(out.shape[1:])))
        return out

    def children(self) -> Iterator[tuple[str, Module]]:
        return iter(self._modules.items())

    def named_parameters(self, prefix: str = "") -> dict[str, Tensor]:
        named = {f"{prefix}{name}": p for name, p in self._parameters.items()}
        for name, child in self.children():
            named.update(child.named_parameters(f"{prefix}{name}."))
        return named

    def named_buffers(self, prefix: str = "") -> dict[str, BatchNormState]:
        named = {f"{prefix}{name}": b for name, b in self._buffers.items()}
        for name, child in self.children():
            named.update(child.named_buffers(f"{prefix}{name}."))
        return named

    def parameters(self) -> list[Tensor]:
        return list(self.named_parameters().values())

    def num_parameters(self) -> int:
        return int(sum(p.size for p in self.parameters()))

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.grad = None

    def train(self, mode: bool = True) -> Module:
        self.training = mode
        for _, child in self.children():
            child.train(mode)
        return self

    def eval(self) -> Module:
        return self.train(False)

    def state(self) -> dict[str, np.ndarray]:
        """
        Flat name -> array view of parameters and running statistics.
        """
        arrays = {name: p.data for name, p in self.named_parameters().items()}
        for name, buffer in self.named_buffers().items():
            arrays[f"{name}.running_mean"] = buffer.running_mean
            arrays[f"{name}.running_var"] = buffer.running_var
            arrays[f"{name}.num_batches_tracked"] = np.array(
                [buffer.num_batches_tracked], dtype=np.int64
            )
        return arrays

    def load_state(self, arrays: dict[str, np.ndarray]) -> None:
        expected = self.state()
        missing = sorted(set(expected) - set(arrays))
        if missing:
            raise ShapeError(f"state is missing entries: {', '.join(missing[:5])}")
        for name, p in self.named_parameters().items():
            if arrays[name].shape != p.shape:
                raise ShapeError(
                    f"{name}: stored shape {arrays[name].shape} vs model {p.shape}"
                )
            p.data = np.array(arrays[name], dtype=p.dtype)
            p.grad = None
        for name, buffer in self.named_buffers().items():
            buffer.running_mean = np.array(arrays[f"{name}.running_mean"])
            buffer.running_var = np.array(arrays[f"{name}.running_var"])
            buffer.num_batches_tracked = int(arrays[f"{name}.num_batches_tracked"][0])


class Sequential(Module):
    def __init__(self, *layers: Module, label: Optional[str] = None):
        super().__init__(label)
        self.layers = list(layers)
        for index, layer in enumerate(layers):
            setattr(self, str(index), layer)

    def forward(self, x):
        for layer in self.layers:
            x = layer(x)
        return x

    def __len__(self):
        return len(self.layers)


class Conv2d(Module):
    def __init__(
        self,
        rng: np.random.Generator,
        in_channels: int,
        out_channels: int,
        kernel: int = 3,
        stride: int = 1,
        padding: int = 1,
        label: Optional[str] = None,
    ):
        super().__init__(label)
        self.stride, self.padding = stride, padding
        shape = (out_channels, in_channels, kernel, kernel)
        self.weight = Tensor(
            kaiming_normal(rng, shape, in_channels * kernel * kernel),
            requires_grad=True,
        )
        # zero-initialized; redundant with the following BN shift where one exists
        self.bias = Tensor(np.zeros(out_channels), requires_grad=True)

    def forward(self, x):
        return conv2d(x, self.weight, self.bias, self.stride, self.padding)


class ConvTranspose2d(Module):
    def __init__(
        self,
        rng: np.random.Generator,
        in_channels: int,
        out_channels: int,
        kernel: int = 4,
        stride: int = 2,
        padding: int = 1,
        label: Optional[str] = None,
    ):
        super().__init__(label)
        self.stride, self.padding = stride, padding
        shape = (in_channels, out_channels, kernel, kernel)
        self.weight = Tensor(
            kaiming_normal(rng, shape, in_channels * kernel * kernel // stride**2),
            requires_grad=True,
        )
        self.bias = Tensor(np.zeros(out_channels), requires_grad=True)

    def forward(self, x):
        return conv_transpose2d(x, self.weight, self.bias, self.stride, self.padding)


class BatchNorm2d(Module):
    def __init__(self, channels: int, label: Optional[str] = None):
        super().__init__(label)
        self.gamma = Tensor(np.ones(channels), requires_grad=True)
        self.beta = Tensor(np.zeros(channels), requires_grad=True)
        self.running = BatchNormState.initialized(channels)

    def forward(self, x):
        return batch_norm2d(x, self.gamma, self.beta, self.running, self.training)


class Activation(Module):
    def __init__(self, kind: ActivationKind, label: Optional[str] = None):
        super().__init__(label)
        self.kind = ActivationKind(kind)

    def forward(self, x):
        return activation(x, self.kind)


class ConvBlock(Module):
    """
    Conv-BN-ReLU.
    """

    def __init__(self, rng, in_channels, out_channels, stride=1, label=None):
        super().__init__(label)
        self.conv = Conv2d(rng, in_channels, out_channels, 3, stride, 1)
        self.bn = BatchNorm2d(out_channels)

    def forward(self, x):
        return activation(self.bn(self.conv(x)), ActivationKind.RELU)


class DeconvBlock(Module):
    """
    Deconv-BN-ReLU; a 4x4, stride-2, padding-1 kernel doubles the spatial extent.
    """

    def __init__(self, rng, in_channels, out_channels, label=None):
        super().__init__(label)
        self.deconv = ConvTranspose2d(rng, in_channels, out_channels, 4, 2, 1)
        self.bn = BatchNorm2d(out_channels)

    def forward(self, x):
        return activation(self.bn(self.deconv(x)), ActivationKind.RELU)


class ResBlock(Module):
    """
    x + BN(conv(ReLU(BN(conv(x))))), both convolutions 3x3 at constant width.
    """

    def __init__(self, rng, channels, label=None):
        super().__init__(label)
        self.conv1 = Conv2d(rng, channels, channels)
        self.bn1 = BatchNorm2d(channels)
        self.conv2 = Conv2d(rng, channels, channels)
        self.bn2 = BatchNorm2d(channels)

    def forward(self, x):
        h = activation(self.bn1(self.conv1(x)), ActivationKind.RELU)
        return x + self.bn2(self.conv2(h))


class GaussianHead(Module):
    """
    One output head of the latent encoders: Conv-BN-LeakyReLU-Conv-BN-Tanh.
    """

    def __init__(self, rng, in_channels, hidden, out_channels, labels: dict):
        super().__init__()
        self.layers = Sequential(
            Conv2d(rng, in_channels, hidden, label=labels["conv_in"]),
            BatchNorm2d(hidden, label=labels["bn_in"]),
            Activation(ActivationKind.LEAKY_RELU, label=labels["leaky"]),
            Conv2d(rng, hidden, out_channels, label=labels["conv_out"]),
            BatchNorm2d(out_channels, label=labels["bn_out"]),
            Activation(ActivationKind.TANH, label=labels["tanh"]),
        )

    def forward(self, x):
        return self.layers(x)
