from apps.evaluation.inference import infer, parse_mode, render, render_deterministic, render_mean
from apps.evaluation.metrics import MetricRecord, MetricTable, Scorer, compare, psnr, ssim
from apps.evaluation.studies import (
    MeanVsDraws,
    ResidualReport,
    SamplingRow,
    ScaleRun,
    benchmark,
    best_of_n,
    evaluate_paths,
    frame_distances,
    mean_vs_draws,
    residual_report,
    sampling_study,
    traverse,
)

__all__ = [
    "MeanVsDraws",
    "MetricRecord",
    "MetricTable",
    "ResidualReport",
    "SamplingRow",
    "ScaleRun",
    "Scorer",
    "benchmark",
    "best_of_n",
    "compare",
    "evaluate_paths",
    "frame_distances",
    "infer",
    "mean_vs_draws",
    "parse_mode",
    "psnr",
    "render",
    "render_deterministic",
    "render_mean",
    "residual_report",
    "sampling_study",
    "ssim",
    "traverse",
]
