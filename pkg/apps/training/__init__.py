from apps.training.checkpoint import (
    Checkpoint,
    inspect_checkpoint,
    latest_checkpoint,
    load_checkpoint,
    read_checkpoint_manifest,
    save_checkpoint,
)
from apps.training.config import TrainConfig
from apps.training.losses import (
    Phase1Losses,
    loss_deterministic,
    loss_phase1,
    loss_phase2,
    loss_stochastic,
    residual_target,
)
from apps.training.optim import Adam, OptimizerState, adam_step
from apps.training.trainer import MetricStream, Trainer, path_mse, run_phase1, run_phase2

__all__ = [
    "Adam",
    "Checkpoint",
    "MetricStream",
    "OptimizerState",
    "Phase1Losses",
    "TrainConfig",
    "Trainer",
    "adam_step",
    "inspect_checkpoint",
    "latest_checkpoint",
    "load_checkpoint",
    "loss_deterministic",
    "loss_phase1",
    "loss_phase2",
    "loss_stochastic",
    "path_mse",
    "read_checkpoint_manifest",
    "residual_target",
    "run_phase1",
    "run_phase2",
    "save_checkpoint",
]
