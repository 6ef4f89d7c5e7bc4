from __future__ import annotations

from dataclasses import asdict, dataclass, fields

from apps.abstract.exceptions import ConfigurationError
from apps.latent.gaussian import KL_REDUCTIONS


@dataclass(frozen=True)
class TrainConfig:
    """
    Hyperparameters of both training phases.

    ``lambda_s`` weighs the stochastic-path loss against the deterministic one;
    the config-file key for it is ``lambda``.
    """

    lr_phase1: float = 2.5e-4
    lr_phase2: float = 5e-3
    lambda_s: float = 1.0
    batch_size: int = 16
    steps_phase1: int = 2000
    steps_phase2: int = 1000
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    detach_residual: bool = True
    kl_reduction: str = "sum"
    plateau_window: int = 500
    plateau_tolerance: float = 1e-4
    log_interval: int = 50
    checkpoint_interval: int = 500

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.lr_phase1 <= 0 or self.lr_phase2 <= 0:
            raise ConfigurationError(
                f"learning rates must be > 0, got {self.lr_phase1} and {self.lr_phase2}"
            )
        if self.lambda_s < 0:
            raise ConfigurationError(f"lambda must be >= 0, got {self.lambda_s}")
        for name in ("beta1", "beta2"):
            if not 0 <= getattr(self, name) < 1:
                raise ConfigurationError(f"{name} must lie in [0, 1)")
        if self.adam_eps <= 0:
            raise ConfigurationError("adam_eps must be > 0")
        for name in ("batch_size", "plateau_window", "log_interval", "checkpoint_interval"):
            if getattr(self, name) < 1:
                raise ConfigurationError(f"{name} must be >= 1, got {getattr(self, name)}")
        for name in ("steps_phase1", "steps_phase2", "seed"):
            if getattr(self, name) < 0:
                raise ConfigurationError(f"{name} must be >= 0, got {getattr(self, name)}")
        if self.plateau_tolerance < 0:
            raise ConfigurationError("plateau_tolerance must be >= 0")
        if self.kl_reduction not in KL_REDUCTIONS:
            raise ConfigurationError(
                f"kl_reduction must be one of {', '.join(KL_REDUCTIONS)}, "
                f"got {self.kl_reduction!r}"
            )

    def lr(self, phase) -> float:
        return self.lr_phase1 if str(phase) == "phase1" else self.lr_phase2

    def steps(self, phase) -> int:
        return self.steps_phase1 if str(phase) == "phase1" else self.steps_phase2

    def as_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, values: dict) -> TrainConfig:
        known = {item.name for item in fields(cls)}
        return cls(**{k: v for k, v in values.items() if k in known})
