"""
trainer.py

Two-phase training:
- phase 1 updates theta and phi on L_d + lambda * L_s
- phase 2 freezes theta and phi and updates omega on the KL to the residual encoder

Batch order and noise are pure functions of (seed, phase, step), so a run resumed
from a checkpoint replays exactly the steps the uninterrupted run would take.
"""

from __future__ import annotations

import json
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np

from apps.abstract.choices import Phase
from apps.abstract.exceptions import ConfigurationError, NumericalError
from apps.data import SRDataset
from apps.networks import ArchConfig, ModelBundle, build_models, forward_deterministic
from apps.networks import forward_ren, forward_sr
from apps.tensor import backward, no_grad
from apps.training.checkpoint import Checkpoint, save_checkpoint
from apps.training.config import TrainConfig
from apps.training.losses import loss_phase1, loss_phase2
from apps.training.optim import Adam, OptimizerState

logger = logging.getLogger(__name__)
metrics_logger = logging.getLogger("stochsr.metrics")

PHASE_STREAM = {Phase.PHASE1: 1, Phase.PHASE2: 2}
METRICS_FILE = "metrics.jsonl"


class MetricStream:
    """
    One JSON object per record, logged on ``stochsr.metrics`` and appended to
    ``metrics.jsonl`` in the run directory when there is one.
    """

    def __init__(self, run_dir: Optional[Union[str, Path]] = None):
        self.path = Path(run_dir) / METRICS_FILE if run_dir is not None else None
        self.records: list[dict] = []

    def emit(self, record: dict) -> None:
        self.records.append(record)
        line = json.dumps(record, sort_keys=True)
        metrics_logger.info(line)
        if self.path is not None:
            try:
                self.path.parent.mkdir(parents=True, exist_ok=True)
                with open(self.path, "a", encoding="utf-8") as handle:
                    handle.write(line + "\n")
            except OSError as exc:
                raise ConfigurationError(
                    f"cannot write metrics to {self.path}: {exc.strerror}"
                ) from exc


@dataclass
class Plateau:
    """
    Early stop when the mean loss of the last window improves on the previous
    window by less than ``tolerance`` (relative).
    """

    window: int
    tolerance: float
    losses: list[float] = field(default_factory=list)

    def update(self, loss: float) -> bool:
        self.losses.append(loss)
        if len(self.losses) < 2 * self.window:
            return False
        previous = float(np.mean(self.losses[-2 * self.window : -self.window]))
        current = float(np.mean(self.losses[-self.window :]))
        improvement = (previous - current) / max(abs(previous), 1e-12)
        return improvement < self.tolerance


class Trainer:
    """
    Owns the models, the optimizer of the current phase and the step counter.
    """

    def __init__(
        self,
        models: ModelBundle,
        dataset: SRDataset,
        config: TrainConfig,
        phase: Phase,
        run_dir: Optional[Union[str, Path]] = None,
        step: int = 0,
        optimizer_state: Optional[OptimizerState] = None,
    ):
        if dataset.image_size != models.config.image_size:
            raise ConfigurationError(
                f"dataset images are {dataset.image_size}px but the networks expect "
                f"{models.config.image_size}px"
            )
        self.models = models
        self.dataset = dataset
        self.config = config
        self.phase = Phase(phase)
        self.run_dir = Path(run_dir) if run_dir is not None else None
        self.step = step
        self.stream = MetricStream(self.run_dir)
        self.optimizer = Adam(
            self._trainable(),
            lr=config.lr(self.phase),
            betas=(config.beta1, config.beta2),
            eps=config.adam_eps,
            state=optimizer_state,
        )
        self.batches_per_epoch = math.ceil(len(dataset) / config.batch_size)
        self.started = time.perf_counter()
        self.stopped_early = False

    def _trainable(self) -> dict:
        names = ("theta", "phi") if self.phase == Phase.PHASE1 else ("omega",)
        params = {}
        for name in names:
            network = self.models.networks()[name]
            params.update(
                {f"{name}.{key}": p for key, p in network.named_parameters().items()}
            )
        return params

    def _set_modes(self) -> None:
        if self.phase == Phase.PHASE1:
            self.models.theta.train()
            self.models.phi.train()
            self.models.omega.eval()
        else:
            self.models.theta.eval()
            self.models.phi.eval()
            self.models.omega.train()

    def batch_indices(self, step: int) -> np.ndarray:
        epoch, position = divmod(step, self.batches_per_epoch)
        order = np.random.default_rng(
            np.random.SeedSequence([self.config.seed, PHASE_STREAM[self.phase], epoch])
        ).permutation(len(self.dataset))
        size = self.config.batch_size
        return order[position * size : (position + 1) * size]

    def noise(self, step: int, shape: tuple) -> np.ndarray:
        rng = np.random.default_rng(
            np.random.SeedSequence([self.config.seed, PHASE_STREAM[self.phase], step, 1])
        )
        return rng.standard_normal(shape)

    def train_step(self) -> dict:
        """
        One optimizer step on the batch assigned to the current step.
        """
        self._set_modes()
        x, y = self.dataset.batch(self.batch_indices(self.step))
        self.optimizer.zero_grad()
        try:
            if self.phase == Phase.PHASE1:
                eps = self.noise(self.step, (x.shape[0], *self.models.config.latent_shape))
                losses = loss_phase1(
                    self.models.theta,
                    self.models.phi,
                    x,
                    y,
                    eps.astype(x.dtype),
                    self.config.lambda_s,
                    self.config.detach_residual,
                )
                total, record = losses.total, losses.as_record()
            else:
                total = loss_phase2(
                    self.models.omega,
                    self.models.phi,
                    self.models.theta,
                    x,
                    y,
                    self.config.kl_reduction,
                )
                record = {"KL": total.item()}
        except NumericalError as exc:
            logger.error(f"{self.phase} aborted at step {self.step + 1}: {exc}")
            raise NumericalError(str(exc), step=self.step + 1) from exc

        if not np.isfinite(total.item()):
            logger.error(f"{self.phase} loss is {total.item()} at step {self.step + 1}")
            raise NumericalError(f"non-finite {self.phase} loss", step=self.step + 1)
        backward(total)
        applied = self.optimizer.step()
        self.step += 1
        return {
            "phase": str(self.phase),
            "step": self.step,
            **record,
            "skipped": not applied,
            "wall_time": round(time.perf_counter() - self.started, 3),
        }

    def run(self, steps: Optional[int] = None) -> Checkpoint:
        """
        Train until the phase budget (or ``steps`` total) is reached or the loss
        plateaus, then return the final checkpoint.
        """
        budget = self.config.steps(self.phase) if steps is None else steps
        plateau = Plateau(self.config.plateau_window, self.config.plateau_tolerance)
        logger.info(f"{self.phase}: training from step {self.step} to {budget}")
        while self.step < budget:
            record = self.train_step()
            loss = record.get("L_total", record.get("KL"))
            if self.step % self.config.log_interval == 0 or self.step == budget:
                self.stream.emit(record)
            if self.run_dir is not None and self.step % self.config.checkpoint_interval == 0:
                save_checkpoint(self.checkpoint(), self.checkpoint_path())
            if plateau.update(loss):
                logger.warning(
                    f"{self.phase}: loss plateaued at step {self.step}, stopping early"
                )
                self.stopped_early = True
                self.stream.emit(record)
                break

        final = self.checkpoint(complete=True)
        if self.phase == Phase.PHASE1:
            final.metadata["fit"] = path_mse(self.models, self.dataset, self.config.batch_size)
            logger.info(f"phase1 fit: {final.metadata['fit']}")
        if self.run_dir is not None:
            save_checkpoint(final, self.run_dir / f"{self.phase}.ssrc")
        return final

    def checkpoint_path(self) -> Path:
        return self.run_dir / f"{self.phase}-step{self.step:06d}.ssrc"

    def checkpoint(self, complete: bool = False) -> Checkpoint:
        prefix = f"optim.{self.phase}"
        tensors = dict(self.models.state())
        tensors.update(self.optimizer.state.arrays(prefix))
        return Checkpoint(
            arch=self.models.config,
            train=self.config,
            phase=self.phase,
            step=self.step,
            tensors={k: np.array(v) for k, v in tensors.items()},
            optimizer_steps={str(self.phase): self.optimizer.state.step},
            rng_state={"seed": self.config.seed, "stream": PHASE_STREAM[self.phase],
                       "next_step": self.step},
            complete=complete,
            metadata={"stopped_early": self.stopped_early},
        )

    @classmethod
    def from_checkpoint(
        cls,
        checkpoint: Checkpoint,
        dataset: SRDataset,
        run_dir: Optional[Union[str, Path]] = None,
        config: Optional[TrainConfig] = None,
    ) -> Trainer:
        """
        Resume the phase a checkpoint was taken in.
        """
        models = build_models(checkpoint.arch, checkpoint.train.seed)
        models.load_state(checkpoint.tensors)
        prefix = f"optim.{checkpoint.phase}"
        state = OptimizerState.from_arrays(
            checkpoint.optimizer_steps.get(str(checkpoint.phase), 0),
            checkpoint.tensors,
            prefix,
        )
        return cls(
            models,
            dataset,
            config or checkpoint.train,
            checkpoint.phase,
            run_dir=run_dir,
            step=checkpoint.step,
            optimizer_state=state,
        )


def path_mse(models: ModelBundle, dataset: SRDataset, batch_size: int = 16) -> dict:
    """
    Mean squared error against y of the deterministic path and of the stochastic
    path rendered at z = mu_res, in eval mode.
    """
    models.eval()
    totals = {"deterministic": 0.0, "stochastic": 0.0}
    with no_grad():
        for start in range(0, len(dataset), batch_size):
            x, y = dataset.batch(np.arange(start, min(start + batch_size, len(dataset))))
            y_d = forward_deterministic(models.theta, x)
            g_res = forward_ren(models.phi, y - y_d)
            y_s = forward_sr(models.theta, x, g_res.mode())
            totals["deterministic"] += float(((y.data - y_d.data) ** 2).sum())
            totals["stochastic"] += float(((y.data - y_s.data) ** 2).sum())
    count = dataset.y.size
    return {name: value / count for name, value in totals.items()}


def run_phase1(
    config: TrainConfig,
    dataset: SRDataset,
    arch: ArchConfig,
    run_dir: Optional[Union[str, Path]] = None,
) -> Checkpoint:
    models = build_models(arch, config.seed)
    return Trainer(models, dataset, config, Phase.PHASE1, run_dir=run_dir).run()


def run_phase2(
    config: TrainConfig,
    checkpoint: Checkpoint,
    dataset: SRDataset,
    run_dir: Optional[Union[str, Path]] = None,
) -> Checkpoint:
    """
    Train omega against the frozen theta and phi of a completed phase-1 checkpoint.
    """
    checkpoint.require_trained("theta", "phi")
    models = build_models(checkpoint.arch, config.seed)
    models.load_state(checkpoint.tensors, names=("theta", "phi"))
    return Trainer(models, dataset, config, Phase.PHASE2, run_dir=run_dir).run()
