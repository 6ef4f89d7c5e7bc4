"""
gaussian.py

Diagonal-Gaussian latent algebra:
- DiagGaussian: (mu, log_var) pair over a spatial latent
- sample: reparameterized draw z = mu + exp(log_var / 2) * eps
- kl_divergence: closed-form KL between two diagonal Gaussians
- interpolate: convex combination of two latents
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Union

import numpy as np

from apps.abstract.exceptions import ConfigurationError, ShapeError
from apps.tensor import Tensor
from apps.tensor import functional as F

logger = logging.getLogger(__name__)

# houses z_0, z_res, z_pred, z_start, z_end and z_inter
LatentVector = Tensor

KL_REDUCTIONS = ("sum", "mean")


@dataclass
class DiagGaussian:
    """
    Diagonal Gaussian parameterized by its mean and log-variance.

    Both fields come out of a tanh head, so they lie in [-1, 1] and the implied
    standard deviation lies in [exp(-1/2), exp(1/2)].
    """

    mu: Tensor
    log_var: Tensor

    def __post_init__(self):
        if self.mu.shape != self.log_var.shape:
            raise ShapeError(
                f"mu {self.mu.shape} and log_var {self.log_var.shape} differ in shape"
            )

    @property
    def shape(self) -> tuple:
        return self.mu.shape

    @property
    def std(self) -> Tensor:
        return F.exp(self.log_var * 0.5)

    @property
    def variance(self) -> Tensor:
        return F.exp(self.log_var)

    def mode(self) -> LatentVector:
        return self.mu

    def detach(self) -> DiagGaussian:
        return DiagGaussian(self.mu.detach(), self.log_var.detach())

    def select(self, index: int) -> DiagGaussian:
        """Detached single-sample view, keeping the batch axis."""
        return DiagGaussian(
            Tensor(self.mu.data[index : index + 1], dtype=self.mu.dtype),
            Tensor(self.log_var.data[index : index + 1], dtype=self.log_var.dtype),
        )


def standard_normal_like(g: DiagGaussian, rng: np.random.Generator) -> np.ndarray:
    """
    Draw eps ~ N(0, I) shaped like the distribution, from a caller-seeded generator.
    """
    return rng.standard_normal(g.shape).astype(g.mu.dtype)


def sample(g: DiagGaussian, eps: Union[np.ndarray, Tensor]) -> LatentVector:
    """
    Reparameterized sample, differentiable with respect to mu and log_var.

    Args:
        g: The distribution.
        eps: Standard-normal noise shaped like the distribution.

    Returns:
        z = mu + exp(log_var / 2) * eps
    """
    eps = eps if isinstance(eps, Tensor) else Tensor(eps, dtype=g.mu.dtype)
    if eps.shape != g.shape:
        raise ShapeError(f"eps {eps.shape} does not match distribution {g.shape}")
    return g.mu + g.std * eps


def sample_n(g: DiagGaussian, rng: np.random.Generator, n: int) -> list[LatentVector]:
    """
    Draw a stream of n latents. Prefixes of the stream are reproducible, so the
    first k draws of an n-stream equal a k-stream from the same generator state.
    """
    return [sample(g, standard_normal_like(g, rng)) for _ in range(n)]


def kl_divergence(q: DiagGaussian, g: DiagGaussian, reduction: str = "sum") -> Tensor:
    """
    Closed-form D_KL(q || g) between diagonal Gaussians.

    Per element: 0.5 * [(log v_g - log v_q) + (v_q + (mu_q - mu_g)^2) / v_g - 1],
    written with exp(log v_q - log v_g) so that kl(q, q) is exactly zero.

    Args:
        q: Approximating distribution (receives gradients).
        g: Target distribution; detach it to block gradients.
        reduction: "sum" over all elements, or "mean" over elements.

    Returns:
        Scalar tensor, non-negative.
    """
    if q.shape != g.shape:
        raise ShapeError(f"kl_divergence shapes differ: {q.shape} vs {g.shape}")
    if reduction not in KL_REDUCTIONS:
        raise ConfigurationError(f"unknown KL reduction {reduction!r}")
    log_ratio = g.log_var - q.log_var
    diff = q.mu - g.mu
    terms = (
        log_ratio
        + F.exp(q.log_var - g.log_var)
        + diff * diff * F.exp(g.log_var * -1.0)
        - 1.0
    ) * 0.5
    return terms.sum() if reduction == "sum" else terms.mean()


def interpolate(
    z_start: LatentVector, z_end: LatentVector, alpha: float
) -> LatentVector:
    """
    Convex combination z_start + alpha * (z_end - z_start).

    Args:
        z_start: Latent at alpha = 0.
        z_end: Latent at alpha = 1.
        alpha: Mixing weight in [0, 1].

    Returns:
        The interpolated latent.
    """
    if z_start.shape != z_end.shape:
        raise ShapeError(
            f"interpolate shapes differ: {z_start.shape} vs {z_end.shape}"
        )
    if not 0.0 <= alpha <= 1.0:
        raise ConfigurationError(f"alpha must lie in [0, 1], got {alpha}")
    alpha = float(alpha)
    # (1 - a) * s + a * e hits both endpoints exactly
    return z_start * (1.0 - alpha) + z_end * alpha
