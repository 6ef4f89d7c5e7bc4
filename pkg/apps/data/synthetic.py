"""
synthetic.py

Procedural face-like images whose attributes fall into three known categories:
- deterministic: head ellipse, face tone, eye positions (survive downsampling)
- partially alive: eyebrow curvature and thickness (low frequency, partly lost)
- fully lost: high-frequency cheek texture drawn from its own seed
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass

import numpy as np

from apps.abstract.exceptions import ConfigurationError

logger = logging.getLogger(__name__)

HEAD_AXES_RANGE = ((0.55, 0.75), (0.70, 0.90))
FACE_TONE_RANGE = (0.15, 0.85)
EYE_SPREAD_RANGE = (0.22, 0.34)
EYE_HEIGHT_RANGE = (-0.20, -0.05)
CURVATURE_RANGE = (-1.0, 1.0)
THICKNESS_RANGE = (0.025, 0.07)
TEXTURE_AMPLITUDE = 0.18

SKIN = np.array([0.95, 0.75, 0.60])
EYE_COLOR = np.array([-0.85, -0.85, -0.80])
BROW_COLOR = np.array([-0.70, -0.75, -0.80])
MOUTH_COLOR = np.array([0.40, -0.55, -0.45])


@dataclass(frozen=True)
class SyntheticSpec:
    """
    Ground-truth attribute record of one rendered image.
    """

    seed: int
    index: int
    head_axes: tuple[float, float]
    face_tone: float
    background: tuple[float, float, float]
    eye_spread: float
    eye_height: float
    eyebrow_curvature: float
    eyebrow_thickness: float
    texture_seed: int

    def to_record(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_record(cls, record: str) -> SyntheticSpec:
        values = json.loads(record)
        values["head_axes"] = tuple(values["head_axes"])
        values["background"] = tuple(values["background"])
        return cls(**values)


def draw_spec(seed: int, index: int) -> SyntheticSpec:
    """
    Attributes of image ``index`` of a set; independent of the set's size.
    """
    rng = np.random.default_rng(np.random.SeedSequence([seed, index]))
    (ax_lo, ax_hi), (ay_lo, ay_hi) = HEAD_AXES_RANGE
    return SyntheticSpec(
        seed=seed,
        index=index,
        head_axes=(float(rng.uniform(ax_lo, ax_hi)), float(rng.uniform(ay_lo, ay_hi))),
        face_tone=float(rng.uniform(*FACE_TONE_RANGE)),
        background=tuple(float(v) for v in rng.uniform(-0.9, -0.2, size=3)),
        eye_spread=float(rng.uniform(*EYE_SPREAD_RANGE)),
        eye_height=float(rng.uniform(*EYE_HEIGHT_RANGE)),
        eyebrow_curvature=float(rng.uniform(*CURVATURE_RANGE)),
        eyebrow_thickness=float(rng.uniform(*THICKNESS_RANGE)),
        texture_seed=int(rng.integers(0, 2**31 - 1)),
    )


def _soft(distance: np.ndarray, edge: float) -> np.ndarray:
    """1 inside (distance < 0), 0 outside, with a tanh ramp of width ``edge``."""
    return 0.5 * (1.0 - np.tanh(distance / edge))


def _paint(canvas: np.ndarray, mask: np.ndarray, color: np.ndarray) -> None:
    canvas *= 1.0 - mask
    canvas += mask * color[:, None, None]


def render(spec: SyntheticSpec, image_size: int) -> np.ndarray:
    """
    Render a spec to a 3 x S x S float32 image in [-1, 1].
    """
    coords = (np.arange(image_size) + 0.5) / image_size * 2.0 - 1.0
    v, u = np.meshgrid(coords, coords, indexing="ij")
    edge = 2.0 / image_size

    canvas = np.broadcast_to(
        np.asarray(spec.background)[:, None, None], (3, image_size, image_size)
    ).copy()

    ax, ay = spec.head_axes
    head_radius = np.sqrt((u / ax) ** 2 + ((v - 0.05) / ay) ** 2)
    head = _soft(head_radius - 1.0, edge * 2)
    skin = 2.0 * spec.face_tone * SKIN - 0.6
    _paint(canvas, head, np.clip(skin, -1.0, 1.0))

    # cheek texture only exists on skin below the eyes
    texture_rng = np.random.default_rng(spec.texture_seed)
    texture = texture_rng.standard_normal((image_size, image_size)) * TEXTURE_AMPLITUDE
    cheeks = head * _soft(spec.eye_height + 0.1 - v, edge) * _soft(v - 0.35, edge)
    canvas += cheeks * texture

    for side in (-1.0, 1.0):
        cx = side * spec.eye_spread
        eye = _soft(np.hypot(u - cx, (v - spec.eye_height) * 1.6) - 0.07, edge)
        _paint(canvas, eye, EYE_COLOR)

        half_width = 0.13
        offset = np.clip((u - cx) / half_width, -1.0, 1.0)
        arc = spec.eye_height - 0.14 - 0.07 * spec.eyebrow_curvature * (1 - offset**2)
        brow = _soft(np.abs(v - arc) - spec.eyebrow_thickness, edge) * _soft(
            np.abs(u - cx) - half_width, edge
        )
        _paint(canvas, brow, BROW_COLOR)

    mouth = _soft(np.hypot((u / 0.22), (v - 0.45) / 0.05) - 1.0, edge * 4)
    _paint(canvas, mouth * head, MOUTH_COLOR)

    return np.clip(canvas, -1.0, 1.0).astype(np.float32)


def generate_synthetic(
    seed: int, count: int, image_size: int
) -> list[tuple[np.ndarray, SyntheticSpec]]:
    """
    Render ``count`` synthetic faces.

    Args:
        seed: Dataset seed; image i depends only on (seed, i).
        count: Number of images, at least 1.
        image_size: Square side in pixels.

    Returns:
        List of (HR image, spec) pairs.
    """
    if count < 1:
        raise ConfigurationError(f"count must be >= 1, got {count}")
    logger.info(f"rendering {count} synthetic faces at {image_size}px (seed {seed})")
    specs = (draw_spec(seed, index) for index in range(count))
    return [(render(spec, image_size), spec) for spec in specs]
