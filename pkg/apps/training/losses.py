"""
losses.py

Training objectives. All losses are per-sample sums averaged over the batch:
- loss_deterministic: squared L2 between y and the z = 0 render
- loss_stochastic: L1 between y and the render at a latent sampled from the
  residual encoder
- loss_phase1: deterministic + lambda * stochastic, sharing theta
- loss_phase2: KL between the predictor and the frozen residual encoder
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Union

import numpy as np

from apps.latent import DiagGaussian, kl_divergence, sample
from apps.networks import (
    AttributePredictor,
    ResidualEncoder,
    SREncoderDecoder,
    forward_deterministic,
    forward_icap,
    forward_ren,
    forward_sr,
)
from apps.tensor import Tensor, no_grad

logger = logging.getLogger(__name__)


@dataclass
class Phase1Losses:
    total: Tensor
    deterministic: Tensor
    stochastic: Tensor

    def as_record(self) -> dict:
        return {
            "L_d": self.deterministic.item(),
            "L_s": self.stochastic.item(),
            "L_total": self.total.item(),
        }


def squared_error(pred: Tensor, target: Tensor) -> Tensor:
    """Sum of squared differences per sample, averaged over the batch."""
    diff = target - pred
    return (diff * diff).sum() / pred.shape[0]


def absolute_error(pred: Tensor, target: Tensor) -> Tensor:
    """Sum of absolute differences per sample, averaged over the batch."""
    return (target - pred).abs().sum() / pred.shape[0]


def residual(y: Tensor, y_d: Tensor, detach: bool = True) -> Tensor:
    """r = y - y_d; a detached y_d makes r plain data for the residual encoder."""
    return y - (y_d.detach() if detach else y_d)


def loss_deterministic(theta: SREncoderDecoder, x: Tensor, y: Tensor) -> Tensor:
    return squared_error(forward_deterministic(theta, x), y)


def _stochastic_from(
    theta: SREncoderDecoder,
    phi: ResidualEncoder,
    x: Tensor,
    y: Tensor,
    r: Tensor,
    eps: Union[np.ndarray, Tensor],
) -> tuple[Tensor, DiagGaussian]:
    g_res = forward_ren(phi, r)
    z_res = sample(g_res, eps)
    return absolute_error(forward_sr(theta, x, z_res), y), g_res


def loss_stochastic(
    theta: SREncoderDecoder,
    phi: ResidualEncoder,
    x: Tensor,
    y: Tensor,
    eps: Union[np.ndarray, Tensor],
    detach_residual: bool = True,
) -> Tensor:
    r = residual(y, forward_deterministic(theta, x), detach_residual)
    loss, _ = _stochastic_from(theta, phi, x, y, r, eps)
    return loss


def loss_phase1(
    theta: SREncoderDecoder,
    phi: ResidualEncoder,
    x: Tensor,
    y: Tensor,
    eps: Union[np.ndarray, Tensor],
    lambda_s: float = 1.0,
    detach_residual: bool = True,
) -> Phase1Losses:
    """
    L_d + lambda * L_s with one deterministic render shared by L_d and the residual.
    """
    y_d = forward_deterministic(theta, x)
    l_d = squared_error(y_d, y)
    l_s, _ = _stochastic_from(
        theta, phi, x, y, residual(y, y_d, detach_residual), eps
    )
    return Phase1Losses(total=l_d + l_s * lambda_s, deterministic=l_d, stochastic=l_s)


def residual_target(
    theta: SREncoderDecoder, phi: ResidualEncoder, x: Tensor, y: Tensor
) -> DiagGaussian:
    """
    g_phi(. | y - y_d) with gradients blocked into both theta and phi.
    """
    with no_grad():
        r = y - forward_deterministic(theta, x)
        return forward_ren(phi, r).detach()


def loss_phase2(
    omega: AttributePredictor,
    phi: ResidualEncoder,
    theta: SREncoderDecoder,
    x: Tensor,
    y: Tensor,
    reduction: str = "sum",
) -> Tensor:
    """
    KL(q_omega(. | x) || g_phi(. | r)); gradients reach omega only.

    With the "sum" reduction the KL is summed over latent elements and averaged
    over the batch; "mean" averages over every element.
    """
    target = residual_target(theta, phi, x, y)
    kl = kl_divergence(forward_icap(omega, x), target, reduction)
    return kl / x.shape[0] if reduction == "sum" else kl
