"""
gradcheck.py

Central finite-difference verification of analytic gradients.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from apps.abstract.exceptions import NumericalError, ShapeError
from apps.tensor.functional import frozen_statistics
from apps.tensor.tensor import Tensor, backward, no_grad

logger = logging.getLogger(__name__)


@dataclass
class GradCheckReport:
    """
    Outcome of one gradient check.
    """

    max_rel_error: float
    worst_index: Optional[tuple]
    analytic: np.ndarray
    numeric: np.ndarray
    checked: int
    tolerance: float
    nonfinite: list[tuple] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.nonfinite and self.max_rel_error < self.tolerance


def _evaluate(f: Callable[[Tensor], Tensor], point: Tensor) -> float:
    try:
        with no_grad():
            value = float(f(point).data)
    except NumericalError:
        return float("nan")
    return value


@frozen_statistics()
def gradient_check(
    f: Callable[[Tensor], Tensor],
    point: Union[Tensor, np.ndarray],
    step: float = 1e-5,
    tolerance: float = 1e-6,
    max_coordinates: Optional[int] = None,
    seed: int = 0,
) -> GradCheckReport:
    """
    Compare the tape gradient of ``f`` at ``point`` with central differences.

    The point is perturbed in place and restored, so it may be a model parameter
    that ``f`` closes over. Arrays are promoted to 64-bit tensors. Batch-norm
    running statistics are left as they were.

    Args:
        f: Scalar-valued function of the point.
        point: Where to evaluate the gradient.
        step: Finite-difference half-width.
        tolerance: Pass threshold on the max relative error.
        max_coordinates: Check only this many randomly chosen coordinates.
        seed: Seed for the coordinate subset.

    Returns:
        GradCheckReport with the worst element and any non-finite coordinates.
    """
    if not isinstance(point, Tensor):
        point = Tensor(np.asarray(point, dtype=np.float64), dtype=np.float64)
    point.requires_grad = True
    point.grad = None

    out = f(point)
    if out.size != 1:
        raise ShapeError(f"gradient_check needs a scalar function, got {out.shape}")
    backward(out)
    analytic = (
        np.zeros_like(point.data) if point.grad is None else point.grad.copy()
    )

    indices = list(np.ndindex(point.shape))
    if max_coordinates is not None and max_coordinates < len(indices):
        rng = np.random.default_rng(seed)
        chosen = rng.choice(len(indices), size=max_coordinates, replace=False)
        indices = [indices[i] for i in sorted(chosen)]

    numeric = np.zeros_like(analytic, dtype=np.float64)
    nonfinite: list[tuple] = []
    for index in indices:
        original = point.data[index].copy()
        point.data[index] = original + step
        upper = _evaluate(f, point)
        point.data[index] = original - step
        lower = _evaluate(f, point)
        point.data[index] = original
        if not (np.isfinite(upper) and np.isfinite(lower)):
            nonfinite.append(index)
            continue
        numeric[index] = (upper - lower) / (2 * step)
    point.grad = None

    skipped = set(nonfinite)
    checked = [i for i in indices if i not in skipped]
    scale = max((abs(numeric[i]) for i in checked), default=0.0)
    floor = max(1e-8, 1e-2 * scale)
    worst_index, worst = None, 0.0
    for index in checked:
        a, n = float(analytic[index]), float(numeric[index])
        rel = abs(a - n) / max(abs(a), abs(n), floor)
        if rel > worst or worst_index is None:
            worst, worst_index = rel, index

    if nonfinite:
        logger.warning(f"gradient_check: {len(nonfinite)} non-finite coordinates")
    return GradCheckReport(
        max_rel_error=worst,
        worst_index=worst_index,
        analytic=analytic,
        numeric=numeric,
        checked=len(checked),
        tolerance=tolerance,
        nonfinite=nonfinite,
    )
