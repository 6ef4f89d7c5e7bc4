"""
models.py

The three networks of the framework:
- SREncoderDecoder (parameters theta): encoder, decoder and the latent deconv branch
- ResidualEncoder (parameters phi): residual image -> DiagGaussian
- AttributePredictor (parameters omega): LR input -> DiagGaussian

Every layer carries the label of its row in the architecture tables, numbered in
table order across all three networks, so shape traces can be compared row by row.
"""

from __future__ import annotations

import logging
from collections import defaultdict
from dataclasses import dataclass

import numpy as np

from apps.abstract.choices import ActivationKind
from apps.abstract.exceptions import ShapeError
from apps.latent import DiagGaussian
from apps.networks.config import ArchConfig
from apps.networks.layers import (
    Activation,
    BatchNorm2d,
    Conv2d,
    ConvBlock,
    DeconvBlock,
    GaussianHead,
    Module,
    ResBlock,
    Sequential,
)
from apps.tensor import Tensor

logger = logging.getLogger(__name__)

NETWORK_NAMES = ("theta", "phi", "omega")


class Labeler:
    """
    Hands out ConvBlock1, ConvBlock2, ... per prefix in call order.
    """

    def __init__(self):
        self.counts = defaultdict(int)

    def __call__(self, prefix: str) -> str:
        self.counts[prefix] += 1
        return f"{prefix}{self.counts[prefix]}"

    def head(self) -> dict:
        return {
            "conv_in": self("Conv"),
            "bn_in": self("BatchNorm"),
            "leaky": self("LeakyReLU"),
            "conv_out": self("Conv"),
            "bn_out": self("BatchNorm"),
            "tanh": self("Tanh"),
        }


def _check_image(config: ArchConfig, x: Tensor, name: str) -> None:
    expected = config.image_shape
    if x.ndim != 4 or tuple(x.shape[1:]) != expected:
        raise ShapeError(f"{name} has shape {x.shape}, expected (B, *{expected})")


def _check_latent(config: ArchConfig, z: Tensor, batch: int) -> None:
    expected = (batch, *config.latent_shape)
    if tuple(z.shape) != expected:
        raise ShapeError(f"latent has shape {z.shape}, expected {expected}")


class SREncoderDecoder(Module):
    """
    f_theta: y = decoder(encoder(x) + branch(z)).

    With z = 0 this is the deterministic path; with a sampled z it is the
    stochastic path. Both share every parameter.
    """

    def __init__(self, config: ArchConfig, rng: np.random.Generator, label: Labeler):
        super().__init__()
        self.config = config
        b, c, lc = config.base_channels, config.color_channels, config.latent_channels

        self.encoder = Sequential(
            ConvBlock(rng, c, b, stride=2, label=label("ConvBlock")),
            Sequential(
                *(ResBlock(rng, b) for _ in range(config.enc_res_blocks)),
                label=label("ResBlock"),
            ),
            Conv2d(rng, b, b, label=label("Conv")),
        )
        # BatchNorm1 opens the decoder, after the latent branch has been added
        self.decoder = Sequential(
            BatchNorm2d(b, label=label("BatchNorm")),
            ConvBlock(rng, b, b, label=label("ConvBlock")),
            DeconvBlock(rng, b, b, label=label("DeconvBlock")),
            Sequential(
                *(ResBlock(rng, b) for _ in range(config.dec_res_blocks)),
                label=label("ResBlock"),
            ),
            Conv2d(rng, b, c, label=label("ConvBlock")),
            Activation(ActivationKind.TANH, label=label("Tanh")),
        )
        branch = []
        for depth in range(config.branch_depth):
            branch.append(
                DeconvBlock(rng, lc if depth == 0 else b, b, label=label("DeconvBlock"))
            )
            branch.append(ResBlock(rng, b, label=label("ResBlock")))
        self.branch = Sequential(*branch)

    def forward(self, x: Tensor, z: Tensor) -> Tensor:
        _check_image(self.config, x, "SR input")
        _check_latent(self.config, z, x.shape[0])
        return self.decoder(self.encoder(x) + self.branch(z))


class AttributePredictor(Module):
    """
    q_omega: predicts the latent distribution of the stochastic attributes from
    the LR input alone.
    """

    def __init__(self, config: ArchConfig, rng: np.random.Generator, label: Labeler):
        super().__init__()
        self.config = config
        b, c, lc = config.base_channels, config.color_channels, config.latent_channels

        trunk = []
        for depth in range(config.down_depth):
            trunk.append(
                ConvBlock(rng, c if depth == 0 else b, b, stride=2, label=label("ConvBlock"))
            )
            trunk.append(ResBlock(rng, b, label=label("ResBlock")))
        trunk.append(Conv2d(rng, b, lc, label=label("Conv")))
        self.trunk = Sequential(*trunk)

        labels = label.head()
        self.mu_head = GaussianHead(rng, lc, config.head_channels, lc, labels)
        self.log_var_head = GaussianHead(rng, lc, config.head_channels, lc, labels)

    def forward(self, x: Tensor) -> DiagGaussian:
        _check_image(self.config, x, "predictor input")
        h = self.trunk(x)
        return DiagGaussian(self.mu_head(h), self.log_var_head(h))


class ResidualEncoder(Module):
    """
    g_phi: encodes the residual y - y_d into a Gaussian over the latent map.
    """

    def __init__(self, config: ArchConfig, rng: np.random.Generator, label: Labeler):
        super().__init__()
        self.config = config
        b, c, lc = config.base_channels, config.color_channels, config.latent_channels

        self.trunk = Sequential(
            Sequential(
                *(
                    ConvBlock(rng, c if depth == 0 else b, b, stride=2)
                    for depth in range(config.down_depth)
                ),
                label=label("ConvBlock"),
            ),
            Conv2d(rng, b, lc, label=label("Conv")),
            BatchNorm2d(lc, label=label("BatchNorm")),
        )
        labels = label.head()
        self.mu_head = GaussianHead(rng, lc, config.head_channels, lc, labels)
        self.log_var_head = GaussianHead(rng, lc, config.head_channels, lc, labels)

    def forward(self, r: Tensor) -> DiagGaussian:
        _check_image(self.config, r, "residual")
        h = self.trunk(r)
        return DiagGaussian(self.mu_head(h), self.log_var_head(h))


@dataclass
class ModelBundle:
    """
    The parameter sets theta, phi and omega built from one ArchConfig.
    """

    config: ArchConfig
    theta: SREncoderDecoder
    phi: ResidualEncoder
    omega: AttributePredictor

    def networks(self) -> dict[str, Module]:
        return {"theta": self.theta, "phi": self.phi, "omega": self.omega}

    def train(self, mode: bool = True) -> ModelBundle:
        for network in self.networks().values():
            network.train(mode)
        return self

    def eval(self) -> ModelBundle:
        return self.train(False)

    def state(self) -> dict[str, np.ndarray]:
        arrays = {}
        for prefix, network in self.networks().items():
            arrays.update(
                {f"{prefix}.{name}": value for name, value in network.state().items()}
            )
        return arrays

    def load_state(self, arrays: dict[str, np.ndarray], names=NETWORK_NAMES) -> None:
        for prefix in names:
            head = f"{prefix}."
            self.networks()[prefix].load_state(
                {k[len(head):]: v for k, v in arrays.items() if k.startswith(head)}
            )

    def num_parameters(self) -> dict[str, int]:
        return {name: net.num_parameters() for name, net in self.networks().items()}


def build_models(config: ArchConfig, seed: int) -> ModelBundle:
    """
    Build theta, phi and omega with Kaiming fan-in weights, zero biases and unit
    batch-norm scales.

    Each network draws from its own child of the seed, so changing one network's
    shape never reshuffles the others' initial weights.

    Args:
        config: Validated architecture configuration.
        seed: Initialization seed.

    Returns:
        ModelBundle in train mode.
    """
    config.validate()
    rng_theta, rng_omega, rng_phi = (
        np.random.default_rng(child) for child in np.random.SeedSequence(seed).spawn(3)
    )
    label = Labeler()
    theta = SREncoderDecoder(config, rng_theta, label)
    omega = AttributePredictor(config, rng_omega, label)
    phi = ResidualEncoder(config, rng_phi, label)
    bundle = ModelBundle(config=config, theta=theta, phi=phi, omega=omega)
    logger.info(f"built networks with parameter counts {bundle.num_parameters()}")
    return bundle


def zero_latent(config: ArchConfig, batch: int) -> Tensor:
    return Tensor(np.zeros((batch, *config.latent_shape)))


def forward_sr(theta: SREncoderDecoder, x: Tensor, z: Tensor) -> Tensor:
    return theta(x, z)


def forward_deterministic(theta: SREncoderDecoder, x: Tensor) -> Tensor:
    return theta(x, zero_latent(theta.config, x.shape[0]))


def forward_ren(phi: ResidualEncoder, r: Tensor) -> DiagGaussian:
    return phi(r)


def forward_icap(omega: AttributePredictor, x: Tensor) -> DiagGaussian:
    return omega(x)
