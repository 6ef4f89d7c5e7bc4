from .base import *  # noqa

# Full-scale face network: 128x128 at x8, 64 channels, a 64x8x8 latent.
ARCH_DEFAULTS = {
    "image_size": 128,
    "scale_factor": 8,
    "base_channels": 64,
    "enc_res_blocks": 12,
    "dec_res_blocks": 3,
    "latent_channels": 64,
    "latent_size": 8,
    "color_channels": 3,
}

TRAIN_DEFAULTS = {
    "lr_phase1": 2.5e-4,
    "lr_phase2": 5e-3,
    "lambda_s": 1.0,
    "batch_size": 16,
    "steps_phase1": 100000,
    "steps_phase2": 50000,
    "seed": 0,
    "log_interval": METRIC_INTERVAL,  # noqa
    "checkpoint_interval": CHECKPOINT_INTERVAL,  # noqa
}
