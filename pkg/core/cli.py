"""
cli.py

Command-line surface:

    gen-data   render a synthetic dataset and its manifest
    train      run phase 1, phase 2 or both, optionally resuming
    infer      super-resolve one image
    eval       benchmark, sampling, traversal or residual study
    inspect    print a checkpoint manifest

Any StochSRError is printed on stderr and mapped to its exit code.
"""

from __future__ import annotations

import argparse
import json
import logging
import logging.config
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from apps.abstract.choices import InferMode, Phase, Split, Study
from apps.abstract.exceptions import ConfigurationError, ShapeError, StochSRError
from apps.data import (
    SRDataset,
    bicubic_resample,
    manifest_checksum,
    read_image,
    write_dataset,
    write_image,
)
from apps.evaluation import (
    MetricTable,
    ScaleRun,
    Scorer,
    benchmark,
    frame_distances,
    infer,
    mean_vs_draws,
    parse_mode,
    residual_report,
    sampling_study,
    traverse,
)
from apps.evaluation.studies import MEAN_VS_DRAWS
from apps.networks import ModelBundle, build_models
from apps.training import (
    Checkpoint,
    Trainer,
    inspect_checkpoint,
    latest_checkpoint,
    load_checkpoint,
    run_phase1,
    run_phase2,
)
from core import settings
from core.config import RunConfig, parse_value, resolve_config

logger = logging.getLogger(__name__)

SEED_HELP = "draw seed (default: STOCHSR_SEED, else the checkpoint's training seed)"


def load_models(checkpoint: Checkpoint, *names: str) -> ModelBundle:
    """
    Networks rebuilt from a checkpoint, with ``names`` required to be trained.
    """
    checkpoint.require_trained(*names)
    models = build_models(checkpoint.arch, checkpoint.train.seed)
    models.load_state(checkpoint.tensors, names=names)
    return models.eval()


def load_dataset(path, config: Optional[RunConfig] = None) -> SRDataset:
    if not path:
        raise ConfigurationError("no dataset given; pass --data or set data_dir")
    dataset = SRDataset.from_manifest(path)
    if config is not None and dataset.scale_factor != config.arch.scale_factor:
        raise ConfigurationError(
            f"dataset {path} is at x{dataset.scale_factor} but the configuration "
            f"asks for x{config.arch.scale_factor}"
        )
    return dataset


def cmd_gen_data(args) -> int:
    count = args.count
    if count is None:
        count = settings.EVAL_COUNT if args.split == Split.EVAL else settings.TRAIN_COUNT
    manifest = write_dataset(
        args.out,
        seed=args.seed,
        count=count,
        image_size=args.size,
        scale_factor=args.scale,
        split=args.split,
        antialias=args.antialias,
    )
    print(f"{manifest}\t{manifest_checksum(manifest)}")
    return 0


def _resume_or_start(run_dir: Path, phase: Phase, dataset, config, start) -> Checkpoint:
    found = latest_checkpoint(run_dir, phase)
    if found is not None:
        checkpoint = load_checkpoint(found)
        if checkpoint.complete:
            logger.info(f"{phase} already complete in {found}, skipping")
            return checkpoint
        logger.info(f"resuming {phase} from {found} at step {checkpoint.step}")
        return Trainer.from_checkpoint(checkpoint, dataset, run_dir, config.train).run()
    return start()


def cmd_train(args) -> int:
    config = resolve_config(args.config, _train_overrides(args))
    run_dir = Path(config.options.run_dir or settings.RUN_ROOT / "run")
    config.write(run_dir)
    dataset = load_dataset(config.options.data_dir, config)
    phases = {"1": [Phase.PHASE1], "2": [Phase.PHASE2], "all": [Phase.PHASE1, Phase.PHASE2]}

    for phase in phases[args.phase]:
        if phase == Phase.PHASE1:

            def start():
                return run_phase1(config.train, dataset, config.arch, run_dir)

        else:
            phase1 = run_dir / f"{Phase.PHASE1}.ssrc"
            if not phase1.is_file():
                raise ConfigurationError(
                    f"phase 2 needs a completed phase-1 checkpoint at {phase1}"
                )

            def start():
                return run_phase2(config.train, load_checkpoint(phase1), dataset, run_dir)

        if args.resume:
            final = _resume_or_start(run_dir, phase, dataset, config, start)
        else:
            final = start()
        print(f"{phase}: step {final.step} -> {run_dir / f'{phase}.ssrc'}")
    return 0


def _train_overrides(args) -> dict:
    overrides = {
        "run_dir": args.run_dir,
        "data_dir": args.data,
        "seed": args.seed,
        "steps_phase1": args.steps_phase1,
        "steps_phase2": args.steps_phase2,
        "batch_size": args.batch_size,
    }
    for item in args.set or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigurationError(f"--set expects key=value, got {item!r}")
        overrides[key.strip()] = value
    return overrides


def _load_input(path, checkpoint: Checkpoint) -> np.ndarray:
    image = read_image(path)
    size = checkpoint.arch.image_size
    lr_size = size // checkpoint.arch.scale_factor
    if image.shape[1:] == (lr_size, lr_size):
        return bicubic_resample(image, size).astype(np.float32)
    if image.shape[1:] == (size, size):
        return image
    raise ShapeError(
        f"{path} is {image.shape[2]}x{image.shape[1]}; expected {lr_size}px (low "
        f"resolution) or {size}px (already upsampled)"
    )


def _draw_seed(args, checkpoint: Checkpoint) -> int:
    """--seed, then STOCHSR_SEED, then the seed the checkpoint was trained with."""
    if args.seed is not None:
        return args.seed
    if os.environ.get("STOCHSR_SEED"):
        return parse_value("STOCHSR_SEED", os.environ["STOCHSR_SEED"], int)
    return checkpoint.train.seed


def cmd_infer(args) -> int:
    mode, k = parse_mode(args.mode)
    checkpoint = load_checkpoint(args.checkpoint)
    names = ("theta",) if mode == InferMode.DETERMINISTIC else ("theta", "omega")
    models = load_models(checkpoint, *names)
    x = _load_input(args.input, checkpoint)
    seed = _draw_seed(args, checkpoint)
    images = infer(models.theta, models.omega, x, mode, k, seed)
    out = Path(args.out)
    for name, image in images.items():
        print(write_image(np.clip(image, -1.0, 1.0), out / f"{name}.ppm"))
    return 0


def _parse_scale_run(text: str) -> tuple[int, str, str]:
    scale, sep, rest = text.partition("=")
    checkpoint, sep2, dataset = rest.partition(":")
    if not sep or not sep2 or not scale.isdigit():
        raise ConfigurationError(
            f"--scale-run expects SCALE=CHECKPOINT:DATASET, got {text!r}"
        )
    return int(scale), checkpoint, dataset


def _eval_benchmark(args, out: Path) -> None:
    entries = [_parse_scale_run(text) for text in args.scale_run or []]
    if args.checkpoint or args.data:
        entries.append((None, args.checkpoint or "", args.data))
    if not entries:
        raise ConfigurationError("benchmark needs --data or at least one --scale-run")
    runs = []
    for scale, checkpoint, data in entries:
        dataset = load_dataset(data)
        models = None
        if not args.bicubic_only:
            if not checkpoint:
                raise ConfigurationError(f"no checkpoint for the x{dataset.scale_factor} run")
            models = load_models(load_checkpoint(checkpoint), "theta", "omega")
        runs.append(ScaleRun(scale or dataset.scale_factor, dataset, models))
    table, gaps = benchmark(runs, _scorer(args))
    table.write(out, "benchmark")
    print(table.to_text(), end="")
    if gaps.rows:
        gaps.write(out, "ssim_gap")
        print(gaps.to_text(), end="")


def _scorer(args) -> Scorer:
    return Scorer(args.byte_range, args.luminance_only, settings.PSNR_CAP)


def _samples(args, dataset: SRDataset) -> range:
    return range(min(len(dataset), args.count) if args.count else len(dataset))


def _eval_sampling(args, out: Path, models: ModelBundle, dataset: SRDataset, seed: int) -> None:
    ns = tuple(args.ns or settings.SAMPLING_NS)
    scorer = _scorer(args)
    rows = MetricTable(
        (
            "sample_id", "n", "best_psnr", "best_ssim", "best_draw", "mean_psnr", "mean_ssim",
            "peak",
        ),
        title="best of n",
    )
    versus = MetricTable(
        ("sample_id", "mean_psnr", "draws_psnr", "draws", "mean_wins", "peak"),
        title="predicted mean against the average of draws",
    )
    for index in _samples(args, dataset):
        x, y = dataset.x[index], dataset.y[index]
        study = sampling_study(models.theta, models.omega, x, y, ns, seed, index, scorer)
        rows.extend(row.as_dict() for row in study)
        versus.add(
            **mean_vs_draws(
                models.theta, models.omega, x, y, seed=seed, sample_id=index, scorer=scorer
            ).as_dict()
        )
    summary = MetricTable(
        ("n", "best_psnr", "best_ssim", "mean_psnr", "mean_ssim", "peak"), "mean"
    )
    for n in sorted(ns):
        chosen = [row for row in rows.rows if row["n"] == n]
        summary.add(
            n=n,
            peak=scorer.peak,
            **{
                key: float(np.mean([row[key] for row in chosen]))
                for key in ("best_psnr", "best_ssim", "mean_psnr", "mean_ssim")
            },
        )
    wins = np.mean([row["mean_wins"] for row in versus.rows])
    rows.write(out, "sampling")
    summary.write(out, "sampling_summary")
    versus.write(out, "mean_vs_draws")
    print(summary.to_text(), end="")
    print(f"predicted mean beats the {MEAN_VS_DRAWS}-draw average on {wins:.0%} of samples")


def _eval_traversal(args, out: Path, models: ModelBundle, dataset: SRDataset, seed: int) -> None:
    table = MetricTable(("sample_id", "max_step", "span"), title="traversal")
    for index in _samples(args, dataset):
        frames = traverse(models.theta, models.omega, dataset.x[index], args.steps, seed, index)
        for number, frame in enumerate(frames):
            write_image(frame, out / "traversal" / str(index) / f"frame_{number:02d}.ppm")
        steps, span = frame_distances(frames)
        table.add(sample_id=index, max_step=float(steps.max()), span=span)
    metadata = out / "traversal" / "metadata.json"
    try:
        metadata.parent.mkdir(parents=True, exist_ok=True)
        metadata.write_text(json.dumps({"steps": args.steps, "seed": seed}), encoding="utf-8")
    except OSError as exc:
        raise ConfigurationError(f"cannot write {metadata}: {exc.strerror}") from exc
    table.write(out, "traversal")
    print(table.to_text(), end="")


def _eval_residual(args, out: Path, models: ModelBundle, dataset: SRDataset, seed: int) -> None:
    table = MetricTable(
        (
            "sample_id", "psnr_D", "psnr_S", "psnr_S_mu", "l2_T_minus_D", "l2_T_minus_S",
            "peak",
        ),
        title="residual encoding",
    )
    for index in _samples(args, dataset):
        report = residual_report(
            models.theta, models.phi, dataset.x[index], dataset.y[index],
            out / "residual", index, seed, _scorer(args),
        )
        table.add(**report.as_dict())
    table.write(out, "residual")
    print(table.to_text(), end="")


def cmd_eval(args) -> int:
    try:
        study = Study(args.study)
    except ValueError:
        raise ConfigurationError(f"unknown study {args.study!r}") from None
    out = Path(args.out)
    if study == Study.BENCHMARK:
        _eval_benchmark(args, out)
        return 0

    if not args.checkpoint:
        raise ConfigurationError(f"the {study} study needs --checkpoint")
    checkpoint = load_checkpoint(args.checkpoint)
    dataset = load_dataset(args.data)
    seed = _draw_seed(args, checkpoint)
    if study == Study.RESIDUAL:
        _eval_residual(args, out, load_models(checkpoint, "theta", "phi"), dataset, seed)
    elif study == Study.SAMPLING:
        _eval_sampling(args, out, load_models(checkpoint, "theta", "omega"), dataset, seed)
    else:
        _eval_traversal(args, out, load_models(checkpoint, "theta", "omega"), dataset, seed)
    return 0


def cmd_inspect(args) -> int:
    print(inspect_checkpoint(args.checkpoint))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stochsr", description="Stochastic-attribute face super-resolution."
    )
    commands = parser.add_subparsers(dest="command", required=True)

    gen = commands.add_parser("gen-data", help="render a synthetic dataset")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--count", type=int, help="images (default 512 train / 300 eval)")
    gen.add_argument("--size", type=int, default=32, help="HR image size")
    gen.add_argument("--scale", type=int, default=4, help="downsampling factor")
    gen.add_argument("--split", choices=[str(s) for s in Split], default=str(Split.TRAIN))
    gen.add_argument("--antialias", action="store_true")
    gen.add_argument("--out", required=True)
    gen.set_defaults(handler=cmd_gen_data)

    train = commands.add_parser("train", help="train phase 1, phase 2 or both")
    train.add_argument("--config", help="key=value configuration file")
    train.add_argument("--phase", choices=["1", "2", "all"], default="all")
    train.add_argument("--resume", action="store_true", help="continue from the latest checkpoint")
    train.add_argument("--data", help="dataset directory (data_dir)")
    train.add_argument("--run-dir", help="output directory (run_dir)")
    train.add_argument("--seed", type=int)
    train.add_argument("--steps-phase1", type=int)
    train.add_argument("--steps-phase2", type=int)
    train.add_argument("--batch-size", type=int)
    train.add_argument("--set", action="append", metavar="KEY=VALUE", help="any config key")
    train.set_defaults(handler=cmd_train)

    inference = commands.add_parser("infer", help="super-resolve one image")
    inference.add_argument("--checkpoint", required=True)
    inference.add_argument("--input", required=True, help="P6 image, LR or upsampled")
    inference.add_argument("--mode", default="mean", help="mean, deterministic or sample:k")
    inference.add_argument("--seed", type=int, help=SEED_HELP)
    inference.add_argument("--out", required=True, help="output directory")
    inference.set_defaults(handler=cmd_infer)

    evaluate = commands.add_parser("eval", help="run an evaluation study")
    evaluate.add_argument("--study", default=str(Study.BENCHMARK),
                          help="benchmark, sampling, traversal or residual")
    evaluate.add_argument("--checkpoint")
    evaluate.add_argument("--data", help="held-out dataset directory")
    evaluate.add_argument("--out", required=True)
    evaluate.add_argument("--seed", type=int, help=SEED_HELP)
    evaluate.add_argument("--count", type=int, help="evaluate only the first COUNT samples")
    evaluate.add_argument("--ns", type=int, nargs="+", help="sample counts (default 10 100 1000)")
    evaluate.add_argument("--steps", type=int, default=settings.TRAVERSAL_STEPS)
    evaluate.add_argument("--scale-run", action="append", metavar="SCALE=CHECKPOINT:DATASET")
    evaluate.add_argument("--bicubic-only", action="store_true")
    evaluate.add_argument("--byte-range", action="store_true", help="compare in [0, 255]")
    evaluate.add_argument("--luminance-only", action="store_true")
    evaluate.set_defaults(handler=cmd_eval)

    inspect = commands.add_parser("inspect", help="print a checkpoint manifest")
    inspect.add_argument("checkpoint")
    inspect.set_defaults(handler=cmd_inspect)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    logging.config.dictConfig(settings.LOGGING)
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except StochSRError as exc:
        logger.error(f"{args.command} failed: {exc}")
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
