from apps.networks.config import ArchConfig
from apps.networks.layers import Module, trace_shapes
from apps.networks.models import (
    AttributePredictor,
    ModelBundle,
    ResidualEncoder,
    SREncoderDecoder,
    build_models,
    forward_deterministic,
    forward_icap,
    forward_ren,
    forward_sr,
    zero_latent,
)

__all__ = [
    "ArchConfig",
    "AttributePredictor",
    "Module",
    "ModelBundle",
    "ResidualEncoder",
    "SREncoderDecoder",
    "build_models",
    "forward_deterministic",
    "forward_icap",
    "forward_ren",
    "forward_sr",
    "trace_shapes",
    "zero_latent",
]
