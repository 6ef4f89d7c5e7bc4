"""
checkpoint.py

Binary checkpoint archive:

    b"SSRC" | version u32 LE | manifest length u64 LE | manifest (JSON, utf-8) | payload

The manifest lists every tensor as (name, dtype, shape, offset, nbytes, sha256)
with offsets relative to the payload start, followed by configs, step counters
and the data-order generator state. Payloads are raw little-endian arrays.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np

from apps.abstract.choices import Phase
from apps.abstract.exceptions import ConfigurationError, DataError
from apps.networks import ArchConfig
from apps.training.config import TrainConfig

logger = logging.getLogger(__name__)

MAGIC = b"SSRC"
FORMAT_VERSION = 1
PREAMBLE = struct.Struct("<4sIQ")


@dataclass
class Checkpoint:
    """
    Everything needed to resume or evaluate a run.

    ``tensors`` holds network state under ``theta.``, ``phi.`` and ``omega.`` and
    optimizer moments under ``optim.<phase>.``.
    """

    arch: ArchConfig
    train: TrainConfig
    phase: Phase
    step: int
    tensors: dict[str, np.ndarray]
    optimizer_steps: dict[str, int] = field(default_factory=dict)
    rng_state: dict = field(default_factory=dict)
    complete: bool = False
    metadata: dict = field(default_factory=dict)
    version: int = FORMAT_VERSION

    def network_state(self, name: str) -> dict[str, np.ndarray]:
        head = f"{name}."
        return {k[len(head):]: v for k, v in self.tensors.items() if k.startswith(head)}

    def has_network(self, name: str) -> bool:
        return any(k.startswith(f"{name}.") for k in self.tensors)

    def require_trained(self, *names: str) -> None:
        """
        theta and phi are trained once phase 1 completed; omega once phase 2 ran.
        """
        phase1_done = (self.phase == Phase.PHASE1 and self.complete) or (
            self.phase == Phase.PHASE2
        )
        for name in names:
            trained = phase1_done if name in ("theta", "phi") else (
                self.phase == Phase.PHASE2 and self.step > 0
            )
            if not trained or not self.has_network(name):
                raise ConfigurationError(
                    f"checkpoint (phase {self.phase}, step {self.step}) has no trained "
                    f"{name} parameters"
                )

    def manifest(self, entries: list[dict]) -> dict:
        return {
            "format_version": self.version,
            "arch": self.arch.as_dict(),
            "train": self.train.as_dict(),
            "phase": str(self.phase),
            "step": self.step,
            "complete": self.complete,
            "optimizer_steps": self.optimizer_steps,
            "rng_state": self.rng_state,
            "metadata": self.metadata,
            "tensors": entries,
        }


def _little_endian(array: np.ndarray) -> np.ndarray:
    array = np.ascontiguousarray(array)
    return array.astype(array.dtype.newbyteorder("<"), copy=False)


def save_checkpoint(checkpoint: Checkpoint, path: Union[str, Path]) -> Path:
    """
    Write the archive to ``path`` through a temporary sibling file.
    """
    path = Path(path)
    entries, payloads, offset = [], [], 0
    for name in sorted(checkpoint.tensors):
        array = _little_endian(checkpoint.tensors[name])
        raw = array.tobytes()
        entries.append(
            {
                "name": name,
                "dtype": array.dtype.str,
                "shape": list(array.shape),
                "offset": offset,
                "nbytes": len(raw),
                "sha256": hashlib.sha256(raw).hexdigest(),
            }
        )
        payloads.append(raw)
        offset += len(raw)

    manifest = json.dumps(checkpoint.manifest(entries), sort_keys=True).encode("utf-8")
    temporary = path.with_name(path.name + ".tmp")
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(temporary, "wb") as handle:
            handle.write(PREAMBLE.pack(MAGIC, checkpoint.version, len(manifest)))
            handle.write(manifest)
            for raw in payloads:
                handle.write(raw)
        os.replace(temporary, path)
    except OSError as exc:
        raise ConfigurationError(f"cannot write checkpoint {path}: {exc.strerror}") from exc
    logger.info(f"saved checkpoint {path} ({checkpoint.phase}, step {checkpoint.step})")
    return path


def read_checkpoint_manifest(path: Union[str, Path]) -> tuple[dict, int]:
    """
    Read and validate the preamble and manifest without touching tensor payloads.

    Returns:
        (manifest, payload start offset)

    Raises:
        DataError: bad magic, unsupported version, malformed manifest, or a file
            shorter than the manifest declares.
    """
    path = Path(path)
    try:
        size = path.stat().st_size
        with open(path, "rb") as handle:
            preamble = handle.read(PREAMBLE.size)
            if len(preamble) < PREAMBLE.size:
                raise DataError(f"{path}: truncated checkpoint preamble", offset=len(preamble))
            magic, version, length = PREAMBLE.unpack(preamble)
            if magic != MAGIC:
                raise DataError(f"{path}: not a checkpoint (magic {magic!r})", offset=0)
            if version < 1 or version > FORMAT_VERSION:
                raise DataError(f"{path}: unsupported checkpoint version {version}", offset=4)
            start = PREAMBLE.size + length
            if size < start:
                raise DataError(f"{path}: truncated checkpoint manifest", offset=size)
            raw = handle.read(length)
    except OSError as exc:
        raise DataError(f"cannot read checkpoint {path}: {exc.strerror}") from exc

    try:
        manifest = json.loads(raw.decode("utf-8"))
        entries = manifest["tensors"]
        payload = max((e["offset"] + e["nbytes"] for e in entries), default=0)
    except (ValueError, KeyError, TypeError) as exc:
        raise DataError(f"{path}: malformed checkpoint manifest: {exc}", PREAMBLE.size) from exc
    if size < start + payload:
        raise DataError(
            f"{path}: truncated checkpoint, {size - start} of {payload} payload bytes",
            offset=size,
        )
    return manifest, start


def load_checkpoint(path: Union[str, Path]) -> Checkpoint:
    """
    Load an archive written by save_checkpoint, verifying every tensor checksum.
    """
    manifest, start = read_checkpoint_manifest(path)
    tensors = {}
    with open(path, "rb") as handle:
        for entry in manifest["tensors"]:
            handle.seek(start + entry["offset"])
            raw = handle.read(entry["nbytes"])
            if hashlib.sha256(raw).hexdigest() != entry["sha256"]:
                raise DataError(
                    f"{path}: checksum mismatch for {entry['name']}",
                    offset=start + entry["offset"],
                )
            dtype = np.dtype(entry["dtype"])
            array = np.frombuffer(raw, dtype=dtype).reshape(entry["shape"])
            tensors[entry["name"]] = array.astype(dtype.newbyteorder("="))

    try:
        arch = ArchConfig(**manifest["arch"])
        train = TrainConfig(**manifest["train"])
    except (TypeError, ConfigurationError) as exc:
        raise DataError(f"{path}: invalid configuration in checkpoint: {exc}") from exc
    return Checkpoint(
        arch=arch,
        train=train,
        phase=Phase(manifest["phase"]),
        step=manifest["step"],
        tensors=tensors,
        optimizer_steps=manifest.get("optimizer_steps", {}),
        rng_state=manifest.get("rng_state", {}),
        complete=manifest.get("complete", False),
        metadata=manifest.get("metadata", {}),
        version=manifest["format_version"],
    )


def inspect_checkpoint(path: Union[str, Path]) -> str:
    """
    Human-readable summary: version, phase, configs, step counters and tensors.
    """
    manifest, _ = read_checkpoint_manifest(path)
    lines = [
        f"format version: {manifest['format_version']}",
        f"phase: {manifest['phase']} (step {manifest['step']}, "
        f"{'complete' if manifest.get('complete') else 'in progress'})",
        "arch: " + " ".join(f"{k}={v}" for k, v in manifest["arch"].items()),
        "train: " + " ".join(f"{k}={v}" for k, v in manifest["train"].items()),
        "optimizer steps: "
        + (" ".join(f"{k}={v}" for k, v in manifest["optimizer_steps"].items()) or "-"),
        f"tensors: {len(manifest['tensors'])}",
    ]
    width = max((len(e["name"]) for e in manifest["tensors"]), default=0)
    for entry in manifest["tensors"]:
        shape = "x".join(str(d) for d in entry["shape"]) or "scalar"
        lines.append(
            f"  {entry['name']:<{width}}  {entry['dtype']:<4}  {shape:<16}  "
            f"{entry['sha256'][:16]}"
        )
    return "\n".join(lines)


def latest_checkpoint(run_dir: Union[str, Path], phase: Optional[Phase] = None) -> Optional[Path]:
    """
    Most recent checkpoint in a run directory by (phase, step) order.
    """
    best, best_key = None, None
    for candidate in Path(run_dir).glob("*.ssrc"):
        try:
            manifest, _ = read_checkpoint_manifest(candidate)
        except DataError:
            logger.warning(f"ignoring unreadable checkpoint {candidate}")
            continue
        if phase is not None and manifest["phase"] != str(phase):
            continue
        key = (manifest["phase"], manifest["step"], manifest.get("complete", False))
        if best_key is None or key > best_key:
            best, best_key = candidate, key
    return best
