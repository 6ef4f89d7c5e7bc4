"""
resample.py

Separable cubic-convolution resampling (a = -0.5) and the degradation that turns
an HR image into the network input x.
"""

from __future__ import annotations

import functools
import logging

import numpy as np

from apps.abstract.exceptions import ConfigurationError, ShapeError

logger = logging.getLogger(__name__)

CUBIC_A = -0.5


def cubic_kernel(t: np.ndarray, a: float = CUBIC_A) -> np.ndarray:
    """
    Keys cubic convolution kernel, zero outside |t| < 2.
    """
    t = np.abs(np.asarray(t, dtype=np.float64))
    near = ((a + 2) * t - (a + 3)) * t * t + 1
    far = ((a * t - 5 * a) * t + 8 * a) * t - 4 * a
    return np.where(t <= 1, near, np.where(t < 2, far, 0.0))


@functools.lru_cache(maxsize=64)
def resample_matrix(in_size: int, out_size: int, antialias: bool = False) -> np.ndarray:
    """
    Row-stochastic out_size x in_size matrix of one 1-D resampling pass.

    Sample centers are aligned at half pixels; taps that fall outside the input
    are clamped to the nearest edge pixel. With antialias, downsampling widens
    the kernel by the inverse scale.
    """
    if in_size < 1 or out_size < 1:
        raise ConfigurationError(f"cannot resample {in_size} -> {out_size} pixels")
    scale = out_size / in_size
    stretch = scale if antialias and scale < 1 else 1.0
    radius = 2.0 / stretch

    centers = (np.arange(out_size) + 0.5) / scale - 0.5
    first = np.floor(centers - radius).astype(int) + 1
    taps = int(np.ceil(2 * radius))
    positions = first[:, None] + np.arange(taps)[None, :]
    weights = cubic_kernel((centers[:, None] - positions) * stretch)
    weights /= weights.sum(axis=1, keepdims=True)

    matrix = np.zeros((out_size, in_size))
    rows = np.repeat(np.arange(out_size), taps)
    np.add.at(matrix, (rows, np.clip(positions, 0, in_size - 1).ravel()), weights.ravel())
    matrix.setflags(write=False)
    return matrix


def bicubic_resample(img: np.ndarray, out_size: int, antialias: bool = False) -> np.ndarray:
    """
    Resample the two trailing (square) axes of ``img`` to ``out_size``.

    Args:
        img: (..., H, W) array.
        out_size: Target height and width.
        antialias: Widen the kernel when shrinking.

    Returns:
        Array of shape (..., out_size, out_size) in the input dtype.
    """
    img = np.asarray(img)
    if img.ndim < 2 or img.shape[-1] != img.shape[-2]:
        raise ShapeError(f"bicubic_resample expects square trailing axes, got {img.shape}")
    size = img.shape[-1]
    if out_size == size:
        return img.copy()
    rows = resample_matrix(size, out_size, antialias)
    out = np.matmul(np.matmul(rows, img.astype(np.float64)), rows.T)
    return out.astype(img.dtype)


def downsample(hr: np.ndarray, scale_factor: int, antialias: bool = False) -> np.ndarray:
    size = hr.shape[-1]
    if scale_factor < 1 or size % scale_factor:
        raise ConfigurationError(
            f"image size {size} is not divisible by scale factor {scale_factor}"
        )
    return bicubic_resample(hr, size // scale_factor, antialias)


def degrade(hr: np.ndarray, scale_factor: int, antialias: bool = False) -> np.ndarray:
    """
    x = bicubic_up(bicubic_down(hr, size / scale), size).
    """
    lr = downsample(hr, scale_factor, antialias)
    return bicubic_resample(lr, hr.shape[-1])
