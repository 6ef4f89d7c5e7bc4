"""
dataset.py

On-disk dataset layout and the in-memory training set:
- write_dataset: render, degrade and write HR/LR P6 files plus a manifest
- read_manifest / manifest_checksum: parse and fingerprint a dataset directory
- SRDataset: stacked (x, y) arrays with seed-ordered minibatches
"""

from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Optional, Union

import numpy as np

from apps.abstract.choices import Split
from apps.abstract.exceptions import ConfigurationError, DataError
from apps.data.imageio import quantize, read_image, write_image
from apps.data.resample import bicubic_resample, downsample
from apps.data.synthetic import SyntheticSpec, generate_synthetic
from apps.tensor import Tensor

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.tsv"
HEADER_KEYS = ("image_size", "scale_factor", "split", "seed", "count")


@dataclass(frozen=True)
class ManifestEntry:
    hr_path: str
    lr_path: str
    spec: SyntheticSpec


@dataclass
class DatasetManifest:
    """
    Ordered dataset records plus the generation parameters.
    """

    image_size: int
    scale_factor: int
    split: Split
    seed: int
    entries: list[ManifestEntry] = field(default_factory=list)
    root: Optional[Path] = None

    @property
    def count(self) -> int:
        return len(self.entries)

    def header(self) -> str:
        values = {
            "image_size": self.image_size,
            "scale_factor": self.scale_factor,
            "split": str(self.split),
            "seed": self.seed,
            "count": self.count,
        }
        return "# " + " ".join(f"{key}={values[key]}" for key in HEADER_KEYS)

    def to_text(self) -> str:
        lines = [self.header()]
        lines += [f"{e.hr_path}\t{e.lr_path}\t{e.spec.to_record()}" for e in self.entries]
        return "\n".join(lines) + "\n"


def _parse_header(line: str) -> dict:
    if not line.startswith("#"):
        raise DataError("manifest does not start with a '#' header line", offset=0)
    values = {}
    for item in line[1:].split():
        key, sep, value = item.partition("=")
        if not sep:
            raise DataError(f"malformed manifest header item {item!r}", offset=0)
        values[key] = value
    missing = [key for key in HEADER_KEYS if key not in values]
    if missing:
        raise DataError(f"manifest header lacks {', '.join(missing)}", offset=0)
    return values


def read_manifest(path: Union[str, Path]) -> DatasetManifest:
    """
    Parse a manifest and check that every referenced file exists.

    Raises:
        DataError: with the byte offset of the offending line.
    """
    path = Path(path)
    if path.is_dir():
        path = path / MANIFEST_NAME
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read manifest {path}: {exc.strerror}") from exc

    lines = text.splitlines(keepends=True)
    if not lines:
        raise DataError(f"manifest {path} is empty", offset=0)
    header = _parse_header(lines[0].rstrip("\n"))
    try:
        manifest = DatasetManifest(
            image_size=int(header["image_size"]),
            scale_factor=int(header["scale_factor"]),
            split=Split(header["split"]),
            seed=int(header["seed"]),
            root=path.parent,
        )
    except ValueError as exc:
        raise DataError(f"malformed manifest header: {exc}", offset=0) from exc

    offset = len(lines[0].encode("utf-8"))
    for line in lines[1:]:
        fields = line.rstrip("\n").split("\t")
        if len(fields) != 3:
            raise DataError(f"manifest record has {len(fields)} fields, expected 3", offset)
        try:
            spec = SyntheticSpec.from_record(fields[2])
        except (ValueError, TypeError, KeyError) as exc:
            raise DataError(f"malformed spec record: {exc}", offset) from exc
        for name in fields[:2]:
            if not (manifest.root / name).is_file():
                raise DataError(f"manifest references missing file {name}", offset)
        manifest.entries.append(ManifestEntry(fields[0], fields[1], spec))
        offset += len(line.encode("utf-8"))

    if manifest.count != int(header["count"]):
        raise DataError(
            f"manifest declares {header['count']} records but lists {manifest.count}",
            offset=0,
        )
    return manifest


def manifest_checksum(path: Union[str, Path]) -> str:
    """
    sha256 over the manifest text and the bytes of every referenced file, in order.
    """
    manifest = read_manifest(path)
    digest = hashlib.sha256(manifest.to_text().encode("utf-8"))
    for entry in manifest.entries:
        for name in (entry.hr_path, entry.lr_path):
            digest.update((manifest.root / name).read_bytes())
    return digest.hexdigest()


def write_dataset(
    out_dir: Union[str, Path],
    seed: int,
    count: int,
    image_size: int,
    scale_factor: int,
    split: Split = Split.TRAIN,
    antialias: bool = False,
) -> Path:
    """
    Render a synthetic dataset into ``out_dir``.

    Layout: hr/NNNNN.ppm at image_size, lr/NNNNN.ppm at image_size / scale_factor,
    and manifest.tsv.

    Returns:
        Path of the manifest.
    """
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigurationError(f"cannot create {out_dir}: {exc.strerror}") from exc

    manifest = DatasetManifest(image_size, scale_factor, Split(split), seed, root=out_dir)
    for hr, spec in generate_synthetic(seed, count, image_size):
        name = f"{spec.index:05d}.ppm"
        write_image(hr, out_dir / "hr" / name)
        write_image(downsample(hr, scale_factor, antialias), out_dir / "lr" / name)
        manifest.entries.append(ManifestEntry(f"hr/{name}", f"lr/{name}", spec))

    path = out_dir / MANIFEST_NAME
    try:
        path.write_text(manifest.to_text(), encoding="utf-8")
    except OSError as exc:
        raise ConfigurationError(f"cannot write {path}: {exc.strerror}") from exc
    logger.info(f"wrote {manifest.count} samples to {out_dir}")
    return path


class SRDataset:
    """
    In-memory (x, y) pairs: x is the bicubic-upsampled LR input, y the HR target.
    """

    def __init__(
        self,
        x: np.ndarray,
        y: np.ndarray,
        specs: list[SyntheticSpec],
        scale_factor: int,
    ):
        if x.shape != y.shape or len(specs) != len(x):
            raise DataError(
                f"inconsistent dataset arrays: x {x.shape}, y {y.shape}, {len(specs)} specs"
            )
        if len(x) == 0:
            raise DataError("dataset is empty")
        self.x = x.astype(np.float32)
        self.y = y.astype(np.float32)
        self.specs = specs
        self.scale_factor = scale_factor

    def __len__(self) -> int:
        return len(self.x)

    @property
    def image_size(self) -> int:
        return self.x.shape[-1]

    @classmethod
    def from_manifest(cls, path: Union[str, Path]) -> SRDataset:
        manifest = read_manifest(path)
        lr_size = manifest.image_size // manifest.scale_factor
        xs, ys = [], []
        for entry in manifest.entries:
            hr = read_image(manifest.root / entry.hr_path)
            lr = read_image(manifest.root / entry.lr_path)
            if hr.shape[1:] != (manifest.image_size,) * 2 or lr.shape[1:] != (lr_size,) * 2:
                raise DataError(
                    f"{entry.hr_path}/{entry.lr_path} decode to {hr.shape}/{lr.shape}, "
                    f"expected {manifest.image_size}px and {lr_size}px"
                )
            ys.append(hr)
            xs.append(bicubic_resample(lr, manifest.image_size))
        specs = [entry.spec for entry in manifest.entries]
        return cls(np.stack(xs), np.stack(ys), specs, manifest.scale_factor)

    @classmethod
    def from_generated(
        cls, seed: int, count: int, image_size: int, scale_factor: int, antialias: bool = False
    ) -> SRDataset:
        """
        Same arrays from_manifest would load for write_dataset with these arguments.
        """
        xs, ys, specs = [], [], []
        for hr, spec in generate_synthetic(seed, count, image_size):
            lr = quantize(downsample(hr, scale_factor, antialias))
            ys.append(quantize(hr))
            xs.append(bicubic_resample(lr, image_size))
            specs.append(spec)
        return cls(np.stack(xs), np.stack(ys), specs, scale_factor)

    def subset(self, indices) -> SRDataset:
        indices = list(indices)
        return SRDataset(
            self.x[indices], self.y[indices], [self.specs[i] for i in indices], self.scale_factor
        )

    def batch(self, indices) -> tuple[Tensor, Tensor]:
        indices = np.asarray(indices)
        return Tensor(self.x[indices]), Tensor(self.y[indices])

    def batches(
        self, rng: np.random.Generator, batch_size: int
    ) -> Iterator[tuple[Tensor, Tensor]]:
        """
        One pass over a permutation drawn from ``rng``; the last batch may be short.
        """
        if batch_size < 1:
            raise ConfigurationError(f"batch_size must be >= 1, got {batch_size}")
        order = rng.permutation(len(self))
        for start in range(0, len(order), batch_size):
            yield self.batch(order[start : start + batch_size])
