"""
studies.py

Evaluation procedures over trained networks:
- residual_report: panels and metrics for the stochastic path driven by the true residual
- sampling_study / best_of_n: best PSNR over nested draws from the predicted distribution
- mean_vs_draws: the predicted-mean render against the average of a few draws
- traverse: renders along a straight line between two predicted latents
- benchmark: bicubic, deterministic and predicted-mean metrics per scale factor
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from apps.abstract.choices import PathKind
from apps.abstract.exceptions import ConfigurationError
from apps.data import SRDataset, write_image
from apps.evaluation.inference import (
    predict,
    render,
    render_deterministic,
    render_mean,
    sample_latents,
)
from apps.evaluation.metrics import MetricRecord, MetricTable, Scorer, compare
from apps.latent import interpolate
from apps.networks import (
    AttributePredictor,
    ModelBundle,
    ResidualEncoder,
    SREncoderDecoder,
    forward_ren,
)
from apps.tensor import Tensor, no_grad

logger = logging.getLogger(__name__)

PANELS = ("T", "input", "D", "residual_TD", "S", "residual_TS")
SAMPLING_NS = (10, 100, 1000)
TRAVERSAL_STEPS = 8
MEAN_VS_DRAWS = 3


@dataclass
class ResidualReport:
    """
    Outcome of rendering one sample through the residual-driven path.
    """

    sample_id: int
    panels: dict[str, np.ndarray]
    psnr_deterministic: float
    psnr_stochastic: float
    psnr_stochastic_mode: float
    norm_residual_td: float
    norm_residual_ts: float
    peak: float
    paths: dict[str, Path] = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "sample_id": self.sample_id,
            "psnr_D": self.psnr_deterministic,
            "psnr_S": self.psnr_stochastic,
            "psnr_S_mu": self.psnr_stochastic_mode,
            "l2_T_minus_D": self.norm_residual_td,
            "l2_T_minus_S": self.norm_residual_ts,
            "peak": self.peak,
        }


def residual_report(
    theta: SREncoderDecoder,
    phi: ResidualEncoder,
    x: np.ndarray,
    y: np.ndarray,
    out_dir: Optional[Union[str, Path]] = None,
    sample_id: int = 0,
    seed: int = 0,
    scorer: Scorer = Scorer(),
) -> ResidualReport:
    """
    Render D = f(x, 0) and S = f(x, z_res) with z_res drawn from g_phi(. | y - D).

    Residual panels are halved so that [-2, 2] fits the image range. When
    ``out_dir`` is given the panels are written to ``out_dir/<sample_id>/``.
    """
    theta.eval()
    phi.eval()
    d = render_deterministic(theta, x)
    with no_grad():
        g_res = forward_ren(phi, Tensor(y[None] - d))
        z_res = sample_latents(g_res, seed, sample_id, range(1))
    s = render(theta, x, z_res)[0]
    s_mode = render(theta, x, g_res.mode().data)[0]
    d = d[0]

    panels = {
        "T": y,
        "input": x,
        "D": d,
        "residual_TD": (y - d) / 2.0,
        "S": s,
        "residual_TS": (y - s) / 2.0,
    }
    report = ResidualReport(
        sample_id=sample_id,
        panels=panels,
        psnr_deterministic=scorer.psnr(d, y),
        psnr_stochastic=scorer.psnr(s, y),
        psnr_stochastic_mode=scorer.psnr(s_mode, y),
        norm_residual_td=float(np.linalg.norm(y - d)),
        norm_residual_ts=float(np.linalg.norm(y - s)),
        peak=scorer.peak,
    )
    if out_dir is not None:
        folder = Path(out_dir) / str(sample_id)
        report.paths = {
            name: write_image(np.clip(panel, -1.0, 1.0), folder / f"{name}.ppm")
            for name, panel in panels.items()
        }
    logger.info(
        f"sample {sample_id}: PSNR(D,T) {report.psnr_deterministic:.2f} dB, "
        f"PSNR(S,T) {report.psnr_stochastic:.2f} dB"
    )
    return report


@dataclass
class SamplingRow:
    sample_id: int
    n: int
    best_psnr: float
    best_ssim: float
    best_draw: int
    mean_psnr: float
    mean_ssim: float
    peak: float

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def sampling_study(
    theta: SREncoderDecoder,
    omega: AttributePredictor,
    x: np.ndarray,
    y: np.ndarray,
    ns: Sequence[int] = SAMPLING_NS,
    seed: int = 0,
    sample_id: int = 0,
    scorer: Scorer = Scorer(),
) -> list[SamplingRow]:
    """
    Best-of-n for every n in ``ns`` over nested prefixes of one draw stream.

    Selection is by PSNR; the SSIM reported is that of the selected render.
    """
    if not ns or min(ns) < 1:
        raise ConfigurationError(f"sample counts must be >= 1, got {list(ns)}")
    mean_render = render_mean(theta, omega, x)[0]
    mean_psnr, mean_ssim = scorer.psnr(mean_render, y), scorer.ssim(mean_render, y)

    g = predict(omega, x)
    renders = render(theta, x, sample_latents(g, seed, sample_id, range(max(ns))))
    scores = np.array([scorer.psnr(image, y) for image in renders])

    rows = []
    for n in sorted(ns):
        best = int(np.argmax(scores[:n]))
        rows.append(
            SamplingRow(
                sample_id=sample_id,
                n=n,
                best_psnr=float(scores[best]),
                best_ssim=scorer.ssim(renders[best], y),
                best_draw=best,
                mean_psnr=mean_psnr,
                mean_ssim=mean_ssim,
                peak=scorer.peak,
            )
        )
    return rows


def best_of_n(
    theta: SREncoderDecoder,
    omega: AttributePredictor,
    x: np.ndarray,
    y: np.ndarray,
    n: int,
    seed: int = 0,
    sample_id: int = 0,
    scorer: Scorer = Scorer(),
) -> SamplingRow:
    if n < 1:
        raise ConfigurationError(f"n must be >= 1, got {n}")
    return sampling_study(theta, omega, x, y, (n,), seed, sample_id, scorer)[0]


def traverse(
    theta: SREncoderDecoder,
    omega: AttributePredictor,
    x: np.ndarray,
    steps: int = TRAVERSAL_STEPS,
    seed: int = 0,
    sample_id: int = 0,
) -> list[np.ndarray]:
    """
    Draw z_start and z_end from q_omega(. | x) and render f(x, z) at
    alpha = i / (steps - 1) along the segment between them.
    """
    if steps < 2:
        raise ConfigurationError(f"a traversal needs at least 2 steps, got {steps}")
    g = predict(omega, x)
    z_start, z_end = (Tensor(z) for z in sample_latents(g, seed, sample_id, range(2)))
    latents = [
        interpolate(z_start, z_end, i / (steps - 1)).data for i in range(steps)
    ]
    return list(render(theta, x, np.stack(latents)))


def frame_distances(frames: Sequence[np.ndarray]) -> tuple[np.ndarray, float]:
    """
    L2 distance of each consecutive frame pair, and of the two endpoints.
    """
    steps = np.array(
        [np.linalg.norm(b - a) for a, b in zip(frames[:-1], frames[1:])]
    )
    return steps, float(np.linalg.norm(frames[-1] - frames[0]))


@dataclass
class ScaleRun:
    """
    A dataset at one scale factor, with the networks trained for it if any.
    """

    scale_factor: int
    dataset: SRDataset
    models: Optional[ModelBundle] = None


def evaluate_paths(run: ScaleRun, scorer: Scorer = Scorer()) -> list[MetricRecord]:
    """
    Per-sample metrics of the bicubic input and, when models are present, the
    deterministic and predicted-mean renders.
    """
    records = []
    paths = {PathKind.BICUBIC: run.dataset.x}
    if run.models is not None:
        paths[PathKind.DETERMINISTIC] = render_deterministic(run.models.theta, run.dataset.x)
        paths[PathKind.ICAP_MEAN] = render_mean(
            run.models.theta, run.models.omega, run.dataset.x
        )
    for kind, outputs in paths.items():
        for index, (output, target) in enumerate(zip(outputs, run.dataset.y)):
            records.append(
                compare(output, target, index, run.scale_factor, kind, scorer)
            )
    return records


def benchmark(
    runs: Sequence[ScaleRun], scorer: Scorer = Scorer()
) -> tuple[MetricTable, MetricTable]:
    """
    Mean PSNR/SSIM per scale factor and path, plus the per-scale SSIM gain of
    the predicted-mean path over the deterministic path.
    """
    table = MetricTable(("scale", "path", "psnr", "ssim", "count", "peak"), title="benchmark")
    gaps = MetricTable(("scale", "ssim_gap"), title="ssim gain of icap-mean over deterministic")
    for run in sorted(runs, key=lambda r: r.scale_factor):
        records = evaluate_paths(run, scorer)
        means = {}
        for kind in dict.fromkeys(r.path for r in records):
            chosen = [r for r in records if r.path == kind]
            means[kind] = float(np.mean([r.ssim for r in chosen]))
            table.add(
                scale=run.scale_factor,
                path=str(kind),
                psnr=float(np.mean([r.psnr for r in chosen])),
                ssim=means[kind],
                count=len(chosen),
                peak=scorer.peak,
            )
        if PathKind.ICAP_MEAN in means:
            gaps.add(
                scale=run.scale_factor,
                ssim_gap=means[PathKind.ICAP_MEAN] - means[PathKind.DETERMINISTIC],
            )
        logger.info(f"benchmarked x{run.scale_factor} on {len(run.dataset)} samples")
    return table, gaps


@dataclass
class MeanVsDraws:
    sample_id: int
    mean_psnr: float
    draws_psnr: float
    draws: int
    peak: float

    @property
    def mean_wins(self) -> bool:
        return self.mean_psnr > self.draws_psnr

    def as_dict(self) -> dict:
        return {**self.__dict__, "mean_wins": self.mean_wins}


def mean_vs_draws(
    theta: SREncoderDecoder,
    omega: AttributePredictor,
    x: np.ndarray,
    y: np.ndarray,
    draws: int = MEAN_VS_DRAWS,
    seed: int = 0,
    sample_id: int = 0,
    scorer: Scorer = Scorer(),
) -> MeanVsDraws:
    """
    PSNR of the predicted-mean render against the average PSNR of the first
    ``draws`` samples of the sampling-study stream.
    """
    if draws < 1:
        raise ConfigurationError(f"draws must be >= 1, got {draws}")
    mean_render = render_mean(theta, omega, x)[0]
    renders = render(theta, x, sample_latents(predict(omega, x), seed, sample_id, range(draws)))
    return MeanVsDraws(
        sample_id=sample_id,
        mean_psnr=scorer.psnr(mean_render, y),
        draws_psnr=float(np.mean([scorer.psnr(r, y) for r in renders])),
        draws=draws,
        peak=scorer.peak,
    )
