"""
inference.py

Rendering helpers shared by the studies and the infer command. Every function
puts the networks it touches in eval mode and runs without recording a tape.
"""

from __future__ import annotations

import logging
from typing import Optional

import numpy as np

from apps.abstract.choices import InferMode
from apps.abstract.exceptions import ConfigurationError, ShapeError
from apps.latent import DiagGaussian, sample
from apps.networks import (
    AttributePredictor,
    SREncoderDecoder,
    forward_deterministic,
    forward_icap,
    forward_sr,
)
from apps.tensor import Tensor, no_grad

logger = logging.getLogger(__name__)

RENDER_CHUNK = 32


def draw_rng(seed: int, sample_id: int, draw: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, sample_id, draw]))


def draw_noise(seed: int, sample_id: int, draw: int, shape: tuple) -> np.ndarray:
    """Standard-normal noise for one draw of one sample."""
    return draw_rng(seed, sample_id, draw).standard_normal(shape)


def as_batch(image: np.ndarray) -> Tensor:
    image = np.asarray(image)
    if image.ndim == 3:
        image = image[None]
    if image.ndim != 4:
        raise ShapeError(f"expected a (C, H, W) or (B, C, H, W) image, got {image.shape}")
    return Tensor(image)


def predict(omega: AttributePredictor, x: np.ndarray) -> DiagGaussian:
    omega.eval()
    with no_grad():
        return forward_icap(omega, as_batch(x))


def render(theta: SREncoderDecoder, x: np.ndarray, z: np.ndarray) -> np.ndarray:
    """
    f_theta(x, z) for one image and a stack of latents, in chunks.

    Args:
        x: (C, H, W) input.
        z: (N, *latent_shape) latents.

    Returns:
        (N, C, H, W) renders.
    """
    theta.eval()
    z = np.asarray(z)
    outputs = []
    with no_grad():
        for start in range(0, len(z), RENDER_CHUNK):
            chunk = z[start : start + RENDER_CHUNK]
            xs = np.repeat(np.asarray(x)[None], len(chunk), axis=0)
            outputs.append(forward_sr(theta, Tensor(xs), Tensor(chunk)).data)
    return np.concatenate(outputs)


def _chunks(x: np.ndarray):
    batch = as_batch(x).data
    for start in range(0, len(batch), RENDER_CHUNK):
        yield Tensor(batch[start : start + RENDER_CHUNK])


def render_deterministic(theta: SREncoderDecoder, x: np.ndarray) -> np.ndarray:
    """f_theta(x, 0) for a batch (or a single image)."""
    theta.eval()
    with no_grad():
        return np.concatenate([forward_deterministic(theta, c).data for c in _chunks(x)])


def render_mean(
    theta: SREncoderDecoder, omega: AttributePredictor, x: np.ndarray
) -> np.ndarray:
    """f_theta(x, mu_pred) for a batch (or a single image)."""
    theta.eval()
    outputs = []
    with no_grad():
        for chunk in _chunks(x):
            outputs.append(forward_sr(theta, chunk, predict(omega, chunk.data).mode()).data)
    return np.concatenate(outputs)


def sample_latents(
    g: DiagGaussian, seed: int, sample_id: int, draws: range
) -> np.ndarray:
    """
    Reparameterized latents for the given draw indices of a single-sample
    distribution; each draw's noise depends only on (seed, sample_id, draw).
    """
    shape = g.shape
    if shape[0] != 1:
        raise ShapeError(f"expected a single-sample distribution, got batch {shape[0]}")
    latents = [
        sample(g, draw_noise(seed, sample_id, draw, shape)).data[0] for draw in draws
    ]
    return np.stack(latents) if latents else np.zeros((0, *shape[1:]))


def parse_mode(text: str) -> tuple[InferMode, int]:
    """
    "mean", "deterministic" or "sample:k" to (mode, k).
    """
    name, _, count = text.partition(":")
    try:
        mode = InferMode(name)
    except ValueError:
        raise ConfigurationError(
            f"unknown inference mode {text!r}; use mean, deterministic or sample:k"
        ) from None
    if mode != InferMode.SAMPLE:
        if count:
            raise ConfigurationError(f"mode {name} takes no count")
        return mode, 0
    try:
        k = int(count)
    except ValueError:
        raise ConfigurationError(
            f"sample mode needs a count, as in sample:3, got {text!r}"
        ) from None
    if k < 1:
        raise ConfigurationError(f"sample count must be >= 1, got {k}")
    return mode, k


def infer(
    theta: SREncoderDecoder,
    omega: Optional[AttributePredictor],
    x: np.ndarray,
    mode: InferMode,
    k: int = 0,
    seed: int = 0,
) -> dict[str, np.ndarray]:
    """
    Render one (C, H, W) input.

    Returns:
        Named images: {"deterministic"} or {"mean"} or {"mean", "sample_1", ...}.
    """
    mode = InferMode(mode)
    if mode == InferMode.DETERMINISTIC:
        return {"deterministic": render_deterministic(theta, x)[0]}
    if omega is None:
        raise ConfigurationError(f"{mode} inference needs trained omega parameters")
    images = {"mean": render_mean(theta, omega, x)[0]}
    if mode == InferMode.SAMPLE:
        z = sample_latents(predict(omega, x), seed, 0, range(k))
        for index, image in enumerate(render(theta, x, z), start=1):
            images[f"sample_{index}"] = image
    return images
