"""
config.py

Flat key=value run configuration.

Resolution order, lowest to highest: settings profile defaults, config file,
the STOCHSR_SEED environment variable (seed only), command-line overrides.
"""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Mapping, Optional, Union

from apps.abstract.exceptions import ConfigurationError
from apps.networks import ArchConfig
from apps.training import TrainConfig
from core import settings

logger = logging.getLogger(__name__)

# config-file key -> TrainConfig field, where they differ
TRAIN_ALIASES = {"lambda": "lambda_s"}

TRUE_WORDS = ("true", "1", "yes", "on")
FALSE_WORDS = ("false", "0", "no", "off")


@dataclass(frozen=True)
class RunOptions:
    """
    Where a training run reads its data and writes its outputs.
    """

    run_dir: str = ""
    data_dir: str = ""


def _defaults(cls) -> dict[str, Any]:
    return {item.name: getattr(cls(), item.name) for item in fields(cls)}


def key_types() -> dict[str, type]:
    """Every accepted key with the type its value is parsed as."""
    types = {}
    for cls in (ArchConfig, TrainConfig, RunOptions):
        for name, default in _defaults(cls).items():
            types[name] = type(default)
    for alias, name in TRAIN_ALIASES.items():
        types[alias] = types[name]
    return types


def canonical(values: Mapping[str, Any]) -> dict[str, Any]:
    """Rename config-file aliases to their field names."""
    return {TRAIN_ALIASES.get(key, key): value for key, value in values.items()}


def parse_value(key: str, text: str, kind: type) -> Any:
    """
    Parse one raw value into ``kind``.

    Raises:
        ConfigurationError: the text is not a valid ``kind``.
    """
    text = text.strip()
    try:
        if kind is bool:
            lowered = text.lower()
            if lowered in TRUE_WORDS:
                return True
            if lowered in FALSE_WORDS:
                return False
            raise ValueError(text)
        return kind(text)
    except ValueError:
        raise ConfigurationError(
            f"value {text!r} for {key} is not a valid {kind.__name__}"
        ) from None


def parse_config_text(text: str, source: str = "<config>") -> dict[str, Any]:
    """
    Parse key=value lines; '#' starts a comment and blank lines are skipped.

    Raises:
        ConfigurationError: naming the line of an unknown key or a malformed line.
    """
    types = key_types()
    values = {}
    for number, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, raw = line.partition("=")
        key = key.strip()
        if not sep:
            raise ConfigurationError(f"{source}:{number}: expected key=value, got {line!r}")
        if key not in types:
            raise ConfigurationError(f"{source}:{number}: unknown key {key!r}")
        values[key] = parse_value(key, raw, types[key])
    return values


def read_config_file(path: Union[str, Path]) -> dict[str, Any]:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc.strerror}") from exc
    return parse_config_text(text, str(path))


@dataclass(frozen=True)
class RunConfig:
    """
    Resolved view of everything one command needs.
    """

    arch: ArchConfig = field(default_factory=ArchConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    options: RunOptions = field(default_factory=RunOptions)

    def as_flat(self) -> dict[str, Any]:
        flat = {}
        flat.update(self.arch.as_dict())
        train = self.train.as_dict()
        for alias, name in TRAIN_ALIASES.items():
            train[alias] = train.pop(name)
        flat.update(train)
        flat.update({item.name: getattr(self.options, item.name) for item in fields(RunOptions)})
        return flat

    def to_text(self) -> str:
        lines = []
        for key, value in sorted(self.as_flat().items()):
            if isinstance(value, bool):
                value = "true" if value else "false"
            lines.append(f"{key}={value}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_flat(cls, values: Mapping[str, Any]) -> RunConfig:
        values = canonical(values)
        unknown = set(values) - {
            item.name for cls_ in (ArchConfig, TrainConfig, RunOptions) for item in fields(cls_)
        }
        if unknown:
            raise ConfigurationError(f"unknown configuration keys: {', '.join(sorted(unknown))}")

        def pick(target):
            return {k: v for k, v in values.items() if k in {f.name for f in fields(target)}}

        try:
            return cls(
                arch=ArchConfig(**pick(ArchConfig)),
                train=TrainConfig(**pick(TrainConfig)),
                options=RunOptions(**pick(RunOptions)),
            )
        except TypeError as exc:
            raise ConfigurationError(f"invalid configuration: {exc}") from exc

    def write(self, run_dir: Union[str, Path]) -> Path:
        """Write ``config.resolved`` into the run directory."""
        path = Path(run_dir) / settings.CONFIG_FILE_NAME
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(self.to_text(), encoding="utf-8")
        except OSError as exc:
            raise ConfigurationError(f"cannot write {path}: {exc.strerror}") from exc
        return path


def resolve_config(
    config_file: Optional[Union[str, Path]] = None,
    overrides: Optional[Mapping[str, Any]] = None,
    environ: Optional[Mapping[str, str]] = None,
) -> RunConfig:
    """
    Merge profile defaults, a config file, STOCHSR_SEED and explicit overrides.

    Overrides whose value is None are ignored, so unset command-line flags fall
    through to the lower layers.
    """
    environ = os.environ if environ is None else environ
    values: dict[str, Any] = {}
    values.update(settings.ARCH_DEFAULTS)
    values.update(canonical(settings.TRAIN_DEFAULTS))
    if config_file is not None:
        values.update(canonical(read_config_file(config_file)))
    if environ.get("STOCHSR_SEED"):
        values["seed"] = parse_value("STOCHSR_SEED", environ["STOCHSR_SEED"], int)
    types = key_types()
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key not in types:
            raise ConfigurationError(f"unknown configuration key {key!r}")
        if isinstance(value, str) and types[key] is not str:
            value = parse_value(key, value, types[key])
        values[TRAIN_ALIASES.get(key, key)] = value
    config = RunConfig.from_flat(values)
    logger.debug(f"resolved configuration: {config.as_flat()}")
    return config
