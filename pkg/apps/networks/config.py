from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields

from apps.abstract.exceptions import ConfigurationError


@dataclass(frozen=True)
class ArchConfig:
    """
    Parameterization of the three networks.

    The defaults are the full-scale face network: 128x128 images, 64 channels,
    12 encoder and 3 decoder residual blocks and a 64x8x8 latent.
    """

    image_size: int = 128
    scale_factor: int = 8
    base_channels: int = 64
    enc_res_blocks: int = 12
    dec_res_blocks: int = 3
    latent_channels: int = 64
    latent_size: int = 8
    color_channels: int = 3

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        for item in fields(self):
            value = getattr(self, item.name)
            minimum = 0 if item.name.endswith("res_blocks") else 1
            if not isinstance(value, int) or value < minimum:
                raise ConfigurationError(
                    f"ArchConfig.{item.name} must be an integer >= {minimum}, got {value!r}"
                )
        if self.image_size % self.latent_size:
            raise ConfigurationError(
                f"image_size {self.image_size} is not a multiple of latent_size "
                f"{self.latent_size}"
            )
        ratio = self.image_size // self.latent_size
        if ratio < 2 or ratio & (ratio - 1):
            raise ConfigurationError(
                f"image_size / latent_size = {ratio} must be a power of two >= 2"
            )
        if self.branch_depth == 0 and self.latent_channels != self.base_channels:
            raise ConfigurationError(
                "latent_size equals the encoder size, so latent_channels must equal "
                "base_channels"
            )
        if self.image_size % self.scale_factor:
            raise ConfigurationError(
                f"image_size {self.image_size} is not divisible by scale_factor "
                f"{self.scale_factor}"
            )

    @property
    def encoder_size(self) -> int:
        return self.image_size // 2

    @property
    def down_depth(self) -> int:
        """Stride-2 blocks from image_size down to latent_size."""
        return int(math.log2(self.image_size // self.latent_size))

    @property
    def branch_depth(self) -> int:
        """Stride-2 deconv blocks from latent_size up to encoder_size."""
        return self.down_depth - 1

    @property
    def head_channels(self) -> int:
        return max(1, self.latent_channels // 2)

    @property
    def latent_shape(self) -> tuple:
        return (self.latent_channels, self.latent_size, self.latent_size)

    @property
    def image_shape(self) -> tuple:
        return (self.color_channels, self.image_size, self.image_size)

    def as_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def full_scale(cls, **overrides) -> ArchConfig:
        return cls(**overrides)

    @classmethod
    def toy(cls, **overrides) -> ArchConfig:
        values = dict(
            image_size=32,
            scale_factor=4,
            base_channels=16,
            enc_res_blocks=2,
            dec_res_blocks=1,
            latent_channels=16,
            latent_size=4,
        )
        values.update(overrides)
        return cls(**values)
