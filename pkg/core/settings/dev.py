from .base import *  # noqa

# Desk scale: 32x32 faces at x4 that train in minutes on a CPU.
ARCH_DEFAULTS = {
    "image_size": 32,
    "scale_factor": 4,
    "base_channels": 16,
    "enc_res_blocks": 2,
    "dec_res_blocks": 1,
    "latent_channels": 16,
    "latent_size": 4,
    "color_channels": 3,
}

TRAIN_DEFAULTS = {
    "lr_phase1": 2.5e-4,
    "lr_phase2": 5e-3,
    "lambda_s": 1.0,
    "batch_size": 16,
    "steps_phase1": 2000,
    "steps_phase2": 1000,
    "seed": 0,
    "log_interval": METRIC_INTERVAL,  # noqa
    "checkpoint_interval": CHECKPOINT_INTERVAL,  # noqa
}
