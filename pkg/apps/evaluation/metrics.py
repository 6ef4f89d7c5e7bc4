"""
metrics.py

Image quality metrics over [-1, 1] images shaped (C, H, W):
- psnr: 10 log10(peak^2 / MSE), capped for identical images
- ssim: mean local SSIM under an 11x11 Gaussian window, per channel then averaged
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Optional

import numpy as np
from scipy.signal import correlate

from apps.abstract.choices import PathKind
from apps.abstract.exceptions import ConfigurationError, ShapeError

logger = logging.getLogger(__name__)

# full dynamic range of [-1, 1]
PEAK = 2.0
PSNR_CAP = 99.0
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03
LUMA = np.array([0.299, 0.587, 0.114])


def _check_pair(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    a, b = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeError(f"cannot compare images of shape {a.shape} and {b.shape}")
    return a, b


def psnr(a: np.ndarray, b: np.ndarray, peak: float = PEAK, cap: float = PSNR_CAP) -> float:
    """
    Peak signal-to-noise ratio in dB. Identical images return ``cap``.
    """
    a, b = _check_pair(a, b)
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return cap
    return min(cap, 10.0 * math.log10(peak * peak / mse))


def gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    half = (size - 1) / 2.0
    y, x = np.ogrid[-half : half + 1, -half : half + 1]
    window = np.exp(-(x * x + y * y) / (2.0 * sigma * sigma))
    return window / window.sum()


def _filter(image: np.ndarray, window: np.ndarray) -> np.ndarray:
    return correlate(image, window, mode="valid")


def _ssim_channel(a: np.ndarray, b: np.ndarray, window: np.ndarray, peak: float) -> float:
    c1 = (SSIM_K1 * peak) ** 2
    c2 = (SSIM_K2 * peak) ** 2
    mu_a, mu_b = _filter(a, window), _filter(b, window)
    var_a = _filter(a * a, window) - mu_a * mu_a
    var_b = _filter(b * b, window) - mu_b * mu_b
    cov = _filter(a * b, window) - mu_a * mu_b
    ssim_map = ((2 * mu_a * mu_b + c1) * (2 * cov + c2)) / (
        (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
    )
    return float(ssim_map.mean())


def luminance(image: np.ndarray) -> np.ndarray:
    """BT.601 luma of a (3, H, W) image, kept as a single channel."""
    return np.tensordot(LUMA, image, axes=1)[None]


def ssim(
    a: np.ndarray,
    b: np.ndarray,
    peak: float = PEAK,
    luminance_only: bool = False,
    window_size: int = SSIM_WINDOW,
    sigma: float = SSIM_SIGMA,
) -> float:
    """
    Structural similarity of two (C, H, W) images over the valid window region.

    Raises:
        ShapeError: shapes differ or the image is smaller than the window.
    """
    a, b = _check_pair(a, b)
    if a.ndim == 2:
        a, b = a[None], b[None]
    if min(a.shape[-2:]) < window_size:
        raise ShapeError(
            f"image {a.shape[-2:]} is smaller than the {window_size}x{window_size} "
            "SSIM window"
        )
    if luminance_only and a.shape[0] == 3:
        a, b = luminance(a), luminance(b)
    window = gaussian_window(window_size, sigma)
    return float(np.mean([_ssim_channel(ca, cb, window, peak) for ca, cb in zip(a, b)]))


@dataclass
class MetricRecord:
    """
    One image comparison, tagged with what was compared.
    """

    sample_id: int
    scale_factor: int
    path: PathKind
    psnr: float
    ssim: float
    peak: float = PEAK
    extra: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        record = asdict(self)
        record["path"] = str(self.path)
        extra = record.pop("extra")
        record.update(extra)
        return record


def to_byte_range(image: np.ndarray) -> np.ndarray:
    """Map [-1, 1] onto [0, 255] without quantizing."""
    return (np.asarray(image, dtype=np.float64) + 1.0) * 127.5


@dataclass(frozen=True)
class Scorer:
    """
    How renders are scored against their targets.

    By default images are compared in [-1, 1] with peak 2.0; ``byte_range`` maps
    both onto [0, 255] and scores with peak 255. The SSIM constants scale with
    the peak, so the two settings are not interchangeable.
    """

    byte_range: bool = False
    luminance_only: bool = False
    cap: float = PSNR_CAP

    @property
    def peak(self) -> float:
        return 255.0 if self.byte_range else PEAK

    def _prepare(self, output, target) -> tuple[np.ndarray, np.ndarray]:
        if self.byte_range:
            return to_byte_range(output), to_byte_range(target)
        return output, target

    def psnr(self, output: np.ndarray, target: np.ndarray) -> float:
        return psnr(*self._prepare(output, target), peak=self.peak, cap=self.cap)

    def ssim(self, output: np.ndarray, target: np.ndarray) -> float:
        return ssim(
            *self._prepare(output, target), peak=self.peak, luminance_only=self.luminance_only
        )


def compare(
    output: np.ndarray,
    target: np.ndarray,
    sample_id: int,
    scale_factor: int,
    path: PathKind,
    scorer: Scorer = Scorer(),
    **extra,
) -> MetricRecord:
    """
    PSNR and SSIM of one render against its target, tagged with the peak used.
    """
    return MetricRecord(
        sample_id=sample_id,
        scale_factor=scale_factor,
        path=PathKind(path),
        psnr=scorer.psnr(output, target),
        ssim=scorer.ssim(output, target),
        peak=scorer.peak,
        extra=extra,
    )



class MetricTable:
    """
    Rows of plain values rendered as aligned text or as JSON lines.
    """

    def __init__(self, columns: Iterable[str], title: Optional[str] = None):
        self.columns = list(columns)
        self.title = title
        self.rows: list[dict] = []

    def add(self, **row) -> None:
        self.rows.append(row)

    def extend(self, rows: Iterable[dict]) -> None:
        for row in rows:
            self.add(**row)

    @staticmethod
    def _cell(value) -> str:
        if isinstance(value, float):
            return f"{value:.4f}"
        return "-" if value is None else str(value)

    def to_text(self) -> str:
        cells = [[self._cell(row.get(c)) for c in self.columns] for row in self.rows]
        widths = [
            max([len(c)] + [len(line[i]) for line in cells]) for i, c in enumerate(self.columns)
        ]
        lines = [self.title] if self.title else []
        lines.append("  ".join(c.ljust(w) for c, w in zip(self.columns, widths)).rstrip())
        lines.append("  ".join("-" * w for w in widths))
        lines += ["  ".join(v.rjust(w) for v, w in zip(line, widths)) for line in cells]
        return "\n".join(lines) + "\n"

    def to_jsonl(self) -> str:
        return "".join(json.dumps(row, sort_keys=True, default=str) + "\n" for row in self.rows)

    def write(self, out_dir, name: str) -> None:
        """Write ``<name>.txt`` and ``<name>.jsonl`` into out_dir."""
        out_dir = Path(out_dir)
        try:
            out_dir.mkdir(parents=True, exist_ok=True)
            (out_dir / f"{name}.txt").write_text(self.to_text(), encoding="utf-8")
            (out_dir / f"{name}.jsonl").write_text(self.to_jsonl(), encoding="utf-8")
        except OSError as exc:
            raise ConfigurationError(f"cannot write {name} to {out_dir}: {exc.strerror}") from exc
        logger.info(f"wrote {len(self.rows)} rows to {out_dir / name}.txt")
