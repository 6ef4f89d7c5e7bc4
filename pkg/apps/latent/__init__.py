from apps.latent.gaussian import (
    DiagGaussian,
    LatentVector,
    interpolate,
    kl_divergence,
    sample,
    sample_n,
    standard_normal_like,
)

__all__ = [
    "DiagGaussian",
    "LatentVector",
    "interpolate",
    "kl_divergence",
    "sample",
    "sample_n",
    "standard_normal_like",
]
