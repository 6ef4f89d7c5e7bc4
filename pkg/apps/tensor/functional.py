"""
functional.py

Differentiable operations over Tensor:
- elementwise arithmetic with numpy broadcasting
- reductions and reshape
- activations (relu, leaky_relu, tanh)
- conv2d and conv_transpose2d (im2col through sliding windows)
- batch_norm2d with running statistics
"""

from __future__ import annotations

import contextlib
import logging
from dataclasses import dataclass, field
from typing import Iterator, Optional, Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from apps.abstract.choices import ActivationKind
from apps.abstract.exceptions import ConfigurationError, ShapeError
from apps.tensor.tensor import Context, Function, Tensor, default_dtype

logger = logging.getLogger(__name__)

Operand = Union[Tensor, float, int, np.ndarray]

BN_MOMENTUM = 0.1
BN_EPSILON = 1e-5
LEAKY_SLOPE = 0.2

_track_statistics = True


def _lift(value: Operand, like: Tensor) -> Tensor:
    if isinstance(value, Tensor):
        return value
    return Tensor(np.asarray(value, dtype=like.dtype), dtype=like.dtype)


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, extent in enumerate(shape):
        if extent == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


# ---------------------------------------------------------------- elementwise


class Add(Function):
    @staticmethod
    def forward(ctx: Context, a, b):
        ctx.save_for_backward(a.shape, b.shape)
        return a + b

    @staticmethod
    def backward(ctx: Context, grad):
        a_shape, b_shape = ctx.saved
        return _unbroadcast(grad, a_shape), _unbroadcast(grad, b_shape)


class Sub(Function):
    @staticmethod
    def forward(ctx: Context, a, b):
        ctx.save_for_backward(a.shape, b.shape)
        return a - b

    @staticmethod
    def backward(ctx: Context, grad):
        a_shape, b_shape = ctx.saved
        return _unbroadcast(grad, a_shape), _unbroadcast(-grad, b_shape)


class Mul(Function):
    @staticmethod
    def forward(ctx: Context, a, b):
        ctx.save_for_backward(a, b)
        return a * b

    @staticmethod
    def backward(ctx: Context, grad):
        a, b = ctx.saved
        return _unbroadcast(grad * b, a.shape), _unbroadcast(grad * a, b.shape)


class Neg(Function):
    @staticmethod
    def forward(ctx: Context, a):
        return -a

    @staticmethod
    def backward(ctx: Context, grad):
        return (-grad,)


class Power(Function):
    @staticmethod
    def forward(ctx: Context, a, exponent: float):
        ctx.save_for_backward(a, exponent)
        return a**exponent

    @staticmethod
    def backward(ctx: Context, grad):
        a, exponent = ctx.saved
        return (grad * exponent * a ** (exponent - 1),)


class Exp(Function):
    @staticmethod
    def forward(ctx: Context, a):
        out = np.exp(a)
        ctx.save_for_backward(out)
        return out

    @staticmethod
    def backward(ctx: Context, grad):
        (out,) = ctx.saved
        return (grad * out,)


class Abs(Function):
    @staticmethod
    def forward(ctx: Context, a):
        ctx.save_for_backward(np.sign(a))
        return np.abs(a)

    @staticmethod
    def backward(ctx: Context, grad):
        (sign,) = ctx.saved
        return (grad * sign,)


def add(a: Operand, b: Operand) -> Tensor:
    if not isinstance(a, Tensor):
        a, b = b, a
    return Add.apply(a, _lift(b, a))


def sub(a: Operand, b: Operand) -> Tensor:
    if isinstance(a, Tensor):
        return Sub.apply(a, _lift(b, a))
    return Sub.apply(_lift(a, b), b)


def mul(a: Operand, b: Operand) -> Tensor:
    if not isinstance(a, Tensor):
        a, b = b, a
    return Mul.apply(a, _lift(b, a))


def neg(a: Tensor) -> Tensor:
    return Neg.apply(a)


def power(a: Tensor, exponent: float) -> Tensor:
    return Power.apply(a, exponent)


def exp(a: Tensor) -> Tensor:
    return Exp.apply(a)


def absolute(a: Tensor) -> Tensor:
    return Abs.apply(a)


# ---------------------------------------------------------------- reductions


class Sum(Function):
    @staticmethod
    def forward(ctx: Context, a):
        ctx.save_for_backward(a.shape)
        return np.asarray(a.sum(), dtype=a.dtype)

    @staticmethod
    def backward(ctx: Context, grad):
        (shape,) = ctx.saved
        return (np.broadcast_to(grad, shape).copy(),)


class Mean(Function):
    @staticmethod
    def forward(ctx: Context, a):
        ctx.save_for_backward(a.shape, a.size)
        return np.asarray(a.mean(), dtype=a.dtype)

    @staticmethod
    def backward(ctx: Context, grad):
        shape, size = ctx.saved
        return (np.broadcast_to(grad / size, shape).astype(grad.dtype),)


class Reshape(Function):
    @staticmethod
    def forward(ctx: Context, a, shape: tuple):
        ctx.save_for_backward(a.shape)
        return a.reshape(shape)

    @staticmethod
    def backward(ctx: Context, grad):
        (shape,) = ctx.saved
        return (grad.reshape(shape),)


def sum(a: Tensor) -> Tensor:  # noqa: A001
    return Sum.apply(a)


def mean(a: Tensor) -> Tensor:
    return Mean.apply(a)


def reshape(a: Tensor, shape: tuple) -> Tensor:
    if int(np.prod(shape)) != a.size:
        raise ShapeError(f"cannot reshape {a.shape} into {shape}")
    return Reshape.apply(a, tuple(shape))


# ---------------------------------------------------------------- activations


class ReLU(Function):
    @staticmethod
    def forward(ctx: Context, a):
        mask = a > 0
        ctx.save_for_backward(mask)
        return np.where(mask, a, 0).astype(a.dtype)

    @staticmethod
    def backward(ctx: Context, grad):
        (mask,) = ctx.saved
        return (grad * mask,)


class LeakyReLU(Function):
    @staticmethod
    def forward(ctx: Context, a, slope: float):
        mask = a > 0
        ctx.save_for_backward(mask, slope)
        return np.where(mask, a, a * slope).astype(a.dtype)

    @staticmethod
    def backward(ctx: Context, grad):
        mask, slope = ctx.saved
        return (np.where(mask, grad, grad * slope).astype(grad.dtype),)


class Tanh(Function):
    @staticmethod
    def forward(ctx: Context, a):
        out = np.tanh(a)
        ctx.save_for_backward(out)
        return out

    @staticmethod
    def backward(ctx: Context, grad):
        (out,) = ctx.saved
        return (grad * (1 - out * out),)


def relu(a: Tensor) -> Tensor:
    return ReLU.apply(a)


def leaky_relu(a: Tensor, slope: float = LEAKY_SLOPE) -> Tensor:
    return LeakyReLU.apply(a, slope)


def tanh(a: Tensor) -> Tensor:
    return Tanh.apply(a)


def activation(
    a: Tensor, kind: Union[ActivationKind, str], slope: float = LEAKY_SLOPE
) -> Tensor:
    """
    Apply an elementwise activation by name.

    Args:
        a: Input tensor.
        kind: One of ActivationKind values.
        slope: Negative-side slope, used by leaky_relu only.

    Returns:
        The activated tensor.
    """
    kind = ActivationKind(kind)
    if kind is ActivationKind.RELU:
        return relu(a)
    if kind is ActivationKind.LEAKY_RELU:
        return leaky_relu(a, slope)
    return tanh(a)


# ---------------------------------------------------------------- convolution


def conv_output_size(size: int, kernel: int, stride: int, padding: int) -> int:
    return (size + 2 * padding - kernel) // stride + 1


def conv_transpose_output_size(size: int, kernel: int, stride: int, padding: int) -> int:
    return (size - 1) * stride - 2 * padding + kernel


def _pad(x: np.ndarray, padding: int) -> np.ndarray:
    if padding == 0:
        return x
    return np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))


def _windows(xp: np.ndarray, kh: int, kw: int, stride: int) -> np.ndarray:
    # (B, C, Ho, Wo, Kh, Kw) view
    return sliding_window_view(xp, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride]


def _scatter_windows(
    cols: np.ndarray, out_shape: tuple, stride: int
) -> np.ndarray:
    """
    Sum (B, Ho, Wo, C, Kh, Kw) window contributions back onto a (B, C, H, W) grid.
    """
    batch, ho, wo, channels, kh, kw = cols.shape
    out = np.zeros(out_shape, dtype=cols.dtype)
    for i in range(kh):
        for j in range(kw):
            out[:, :, i : i + stride * ho : stride, j : j + stride * wo : stride] += (
                cols[:, :, :, :, i, j].transpose(0, 3, 1, 2)
            )
    return out


class Conv2d(Function):
    @staticmethod
    def forward(ctx: Context, x, weight, bias, stride: int, padding: int):
        kh, kw = weight.shape[2:]
        xp = _pad(x, padding)
        windows = _windows(xp, kh, kw, stride)
        out = np.tensordot(windows, weight, axes=([1, 4, 5], [1, 2, 3]))
        out = out.transpose(0, 3, 1, 2) + bias.reshape(1, -1, 1, 1)
        ctx.save_for_backward(windows, weight, xp.shape, x.shape, stride, padding)
        return np.ascontiguousarray(out, dtype=x.dtype)

    @staticmethod
    def backward(ctx: Context, grad):
        windows, weight, padded_shape, x_shape, stride, padding = ctx.saved
        grad_weight = np.tensordot(grad, windows, axes=([0, 2, 3], [0, 2, 3]))
        grad_bias = grad.sum(axis=(0, 2, 3))
        # (B, Ho, Wo, Cin, Kh, Kw)
        cols = np.tensordot(grad, weight, axes=([1], [0]))
        grad_padded = _scatter_windows(cols, padded_shape, stride)
        h, w = x_shape[2:]
        grad_x = grad_padded[:, :, padding : padding + h, padding : padding + w]
        return (
            np.ascontiguousarray(grad_x),
            grad_weight.astype(weight.dtype),
            grad_bias.astype(weight.dtype),
        )


def conv2d(
    x: Tensor,
    weight: Tensor,
    bias: Optional[Tensor] = None,
    stride: int = 1,
    padding: int = 0,
) -> Tensor:
    """
    2-D cross-correlation over a batch of images.

    Args:
        x: Input of shape B x Cin x H x W.
        weight: Kernel of shape Cout x Cin x Kh x Kw.
        bias: Optional bias of shape Cout.
        stride: Positive step between windows.
        padding: Zero padding added on every spatial side.

    Returns:
        Output of shape B x Cout x H' x W'.
    """
    if stride < 1 or padding < 0:
        raise ConfigurationError(f"invalid stride {stride} / padding {padding}")
    if x.ndim != 4 or weight.ndim != 4:
        raise ShapeError(
            f"conv2d expects 4-D input and weight, got {x.shape} and {weight.shape}"
        )
    cout, cin, kh, kw = weight.shape
    if x.shape[1] != cin:
        raise ShapeError(
            f"conv2d channel mismatch: input {x.shape} vs weight {weight.shape}"
        )
    if kh > x.shape[2] + 2 * padding or kw > x.shape[3] + 2 * padding:
        raise ShapeError(
            f"conv2d kernel larger than padded input: input {x.shape} vs weight "
            f"{weight.shape} with padding {padding}"
        )
    if bias is None:
        bias = Tensor(np.zeros(cout, dtype=weight.dtype), dtype=weight.dtype)
    elif bias.shape != (cout,):
        raise ShapeError(f"conv2d bias {bias.shape} does not match weight {weight.shape}")
    return Conv2d.apply(x, weight, bias, stride=stride, padding=padding)


class ConvTranspose2d(Function):
    @staticmethod
    def forward(ctx: Context, x, weight, bias, stride: int, padding: int):
        batch, cin, h, w = x.shape
        _, cout, kh, kw = weight.shape
        full_h = (h - 1) * stride + kh
        full_w = (w - 1) * stride + kw
        # (B, H, W, Cout, Kh, Kw)
        cols = np.tensordot(x, weight, axes=([1], [0]))
        full = _scatter_windows(cols, (batch, cout, full_h, full_w), stride)
        out = full[:, :, padding : full_h - padding, padding : full_w - padding]
        out = out + bias.reshape(1, -1, 1, 1)
        ctx.save_for_backward(x, weight, stride, padding)
        return np.ascontiguousarray(out, dtype=x.dtype)

    @staticmethod
    def backward(ctx: Context, grad):
        x, weight, stride, padding = ctx.saved
        kh, kw = weight.shape[2:]
        windows = _windows(_pad(grad, padding), kh, kw, stride)
        # windows: (B, Cout, H, W, Kh, Kw)
        grad_x = np.tensordot(windows, weight, axes=([1, 4, 5], [1, 2, 3]))
        grad_x = grad_x.transpose(0, 3, 1, 2)
        grad_weight = np.tensordot(x, windows, axes=([0, 2, 3], [0, 2, 3]))
        grad_bias = grad.sum(axis=(0, 2, 3))
        return (
            np.ascontiguousarray(grad_x, dtype=x.dtype),
            grad_weight.astype(weight.dtype),
            grad_bias.astype(weight.dtype),
        )


def conv_transpose2d(
    x: Tensor,
    weight: Tensor,
    bias: Optional[Tensor] = None,
    stride: int = 1,
    padding: int = 0,
) -> Tensor:
    """
    Transposed 2-D convolution (the adjoint of conv2d with respect to its input).

    Args:
        x: Input of shape B x Cin x H x W.
        weight: Kernel of shape Cin x Cout x Kh x Kw.
        bias: Optional bias of shape Cout.
        stride: Positive upsampling step.
        padding: Rows/columns cropped from every side of the full output.

    Returns:
        Output of shape B x Cout x ((H-1)*stride - 2*padding + Kh) x (same for W).
    """
    if stride < 1 or padding < 0:
        raise ConfigurationError(f"invalid stride {stride} / padding {padding}")
    if x.ndim != 4 or weight.ndim != 4:
        raise ShapeError(
            f"conv_transpose2d expects 4-D input and weight, got {x.shape} and "
            f"{weight.shape}"
        )
    cin, cout, kh, kw = weight.shape
    if x.shape[1] != cin:
        raise ShapeError(
            f"conv_transpose2d channel mismatch: input {x.shape} vs weight "
            f"{weight.shape}"
        )
    out_h = conv_transpose_output_size(x.shape[2], kh, stride, padding)
    out_w = conv_transpose_output_size(x.shape[3], kw, stride, padding)
    if out_h < 1 or out_w < 1:
        raise ShapeError(
            f"conv_transpose2d padding {padding} crops input {x.shape} with weight "
            f"{weight.shape} to nothing"
        )
    if bias is None:
        bias = Tensor(np.zeros(cout, dtype=weight.dtype), dtype=weight.dtype)
    elif bias.shape != (cout,):
        raise ShapeError(
            f"conv_transpose2d bias {bias.shape} does not match weight {weight.shape}"
        )
    return ConvTranspose2d.apply(x, weight, bias, stride=stride, padding=padding)


# ---------------------------------------------------------------- batch norm


@dataclass
class BatchNormState:
    """
    Running statistics of one batch-norm layer.

    A state without arrays is uninitialized and cannot serve eval mode.
    """

    running_mean: Optional[np.ndarray] = None
    running_var: Optional[np.ndarray] = None
    momentum: float = BN_MOMENTUM
    num_batches_tracked: int = field(default=0)

    @classmethod
    def initialized(cls, channels: int, dtype: Optional[type] = None) -> BatchNormState:
        dtype = dtype or default_dtype()
        return cls(
            running_mean=np.zeros(channels, dtype=dtype),
            running_var=np.ones(channels, dtype=dtype),
        )

    @property
    def is_initialized(self) -> bool:
        return self.running_mean is not None and self.running_var is not None

    def update(self, batch_mean: np.ndarray, batch_var_unbiased: np.ndarray) -> None:
        m = self.momentum
        if not self.is_initialized:
            self.running_mean = batch_mean.copy()
            self.running_var = batch_var_unbiased.copy()
        else:
            self.running_mean = ((1 - m) * self.running_mean + m * batch_mean).astype(
                self.running_mean.dtype
            )
            self.running_var = (
                (1 - m) * self.running_var + m * batch_var_unbiased
            ).astype(self.running_var.dtype)
        self.num_batches_tracked += 1


@contextlib.contextmanager
def frozen_statistics() -> Iterator[None]:
    """
    Keep train-mode batch norm from folding batch statistics into running state.
    """
    global _track_statistics
    previous = _track_statistics
    _track_statistics = False
    try:
        yield
    finally:
        _track_statistics = previous


class BatchNorm2d(Function):
    @staticmethod
    def forward(ctx: Context, x, gamma, beta, mean, var, eps: float, training: bool):
        inv_std = 1.0 / np.sqrt(var + eps)
        x_hat = (x - mean.reshape(1, -1, 1, 1)) * inv_std.reshape(1, -1, 1, 1)
        out = gamma.reshape(1, -1, 1, 1) * x_hat + beta.reshape(1, -1, 1, 1)
        ctx.save_for_backward(x_hat, gamma, inv_std, training)
        return out.astype(x.dtype)

    @staticmethod
    def backward(ctx: Context, grad):
        x_hat, gamma, inv_std, training = ctx.saved
        grad_gamma = (grad * x_hat).sum(axis=(0, 2, 3))
        grad_beta = grad.sum(axis=(0, 2, 3))
        g_hat = grad * gamma.reshape(1, -1, 1, 1)
        if training:
            count = grad.shape[0] * grad.shape[2] * grad.shape[3]
            sum_g = g_hat.sum(axis=(0, 2, 3), keepdims=True)
            sum_gx = (g_hat * x_hat).sum(axis=(0, 2, 3), keepdims=True)
            grad_x = (
                inv_std.reshape(1, -1, 1, 1)
                / count
                * (count * g_hat - sum_g - x_hat * sum_gx)
            )
        else:
            grad_x = g_hat * inv_std.reshape(1, -1, 1, 1)
        return (
            grad_x.astype(grad.dtype),
            grad_gamma.astype(gamma.dtype),
            grad_beta.astype(gamma.dtype),
        )


def batch_norm2d(
    x: Tensor,
    gamma: Tensor,
    beta: Tensor,
    state: BatchNormState,
    training: bool,
    eps: float = BN_EPSILON,
) -> Tensor:
    """
    Per-channel batch normalization of a B x C x H x W tensor.

    Train mode normalizes by the biased batch statistics and folds the unbiased
    variance into the running state; eval mode uses the running state only.

    Args:
        x: Input tensor.
        gamma: Per-channel scale of shape C.
        beta: Per-channel shift of shape C.
        state: Running statistics, updated in place in train mode.
        training: True for batch statistics, False for running statistics.
        eps: Variance regularizer.

    Returns:
        The normalized tensor.
    """
    if x.ndim != 4:
        raise ShapeError(f"batch_norm2d expects a 4-D input, got {x.shape}")
    channels = x.shape[1]
    if gamma.shape != (channels,) or beta.shape != (channels,):
        raise ShapeError(
            f"batch_norm2d affine shapes {gamma.shape}/{beta.shape} do not match "
            f"input {x.shape}"
        )
    if training:
        count = x.shape[0] * x.shape[2] * x.shape[3]
        if count < 2:
            raise ShapeError(
                f"batch_norm2d train mode needs at least 2 values per channel, "
                f"input {x.shape}"
            )
        batch_mean = x.data.mean(axis=(0, 2, 3))
        batch_var = x.data.var(axis=(0, 2, 3))
        if _track_statistics:
            state.update(batch_mean, batch_var * count / (count - 1))
        mean, var = batch_mean, batch_var
    else:
        if not state.is_initialized:
            raise ConfigurationError(
                "batch_norm2d eval mode requires initialized running statistics"
            )
        mean, var = state.running_mean, state.running_var
    return BatchNorm2d.apply(
        x,
        gamma,
        beta,
        mean=np.asarray(mean, dtype=x.dtype),
        var=np.asarray(var, dtype=x.dtype),
        eps=eps,
        training=training,
    )
