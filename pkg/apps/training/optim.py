"""
optim.py

Bias-corrected Adam over named parameter tensors.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from apps.abstract.exceptions import ShapeError
from apps.tensor import Tensor

logger = logging.getLogger(__name__)


@dataclass
class OptimizerState:
    """
    First and second moments per parameter name, plus the number of applied steps.
    """

    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)

    def arrays(self, prefix: str) -> dict[str, np.ndarray]:
        named = {f"{prefix}.m.{name}": value for name, value in self.m.items()}
        named.update({f"{prefix}.v.{name}": value for name, value in self.v.items()})
        return named

    @classmethod
    def from_arrays(cls, step: int, arrays: dict[str, np.ndarray], prefix: str):
        state = cls(step=step)
        for key, value in arrays.items():
            if key.startswith(f"{prefix}.m."):
                state.m[key[len(prefix) + 3 :]] = value
            elif key.startswith(f"{prefix}.v."):
                state.v[key[len(prefix) + 3 :]] = value
        return state


def adam_step(
    params: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    state: OptimizerState,
    lr: float,
    betas: tuple[float, float] = (0.9, 0.999),
    eps: float = 1e-8,
) -> bool:
    """
    One in-place Adam update.

    Parameters without a gradient are left alone. If any gradient is non-finite
    nothing is updated, the state is untouched and False is returned.
    """
    grads = {name: g for name, g in grads.items() if g is not None}
    for name, g in grads.items():
        if g.shape != params[name].shape:
            raise ShapeError(f"{name}: gradient {g.shape} vs parameter {params[name].shape}")
    if not all(np.all(np.isfinite(g)) for g in grads.values()):
        return False

    beta1, beta2 = betas
    state.step += 1
    correction1 = 1.0 - beta1**state.step
    correction2 = 1.0 - beta2**state.step
    for name, g in grads.items():
        param = params[name]
        m = state.m.setdefault(name, np.zeros_like(param))
        v = state.v.setdefault(name, np.zeros_like(param))
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * (g * g)
        update = (lr / correction1) * m / (np.sqrt(v / correction2) + eps)
        param -= update.astype(param.dtype)
    return True


class Adam:
    """
    Adam bound to a set of named tensors.
    """

    def __init__(
        self,
        params: dict[str, Tensor],
        lr: float,
        betas: tuple[float, float] = (0.9, 0.999),
        eps: float = 1e-8,
        state: OptimizerState | None = None,
    ):
        self.params = params
        self.lr = lr
        self.betas = betas
        self.eps = eps
        self.state = state or OptimizerState()
        self.skipped = 0

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.grad = None

    def step(self) -> bool:
        applied = adam_step(
            {name: p.data for name, p in self.params.items()},
            {name: p.grad for name, p in self.params.items()},
            self.state,
            self.lr,
            self.betas,
            self.eps,
        )
        if not applied:
            self.skipped += 1
            logger.warning(
                f"non-finite gradient, skipped optimizer step {self.state.step + 1}"
            )
        return applied
