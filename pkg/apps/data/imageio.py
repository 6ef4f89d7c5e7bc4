"""
imageio.py

Binary P6 portable-pixmap codec. Internally images are float C x H x W arrays in
[-1, 1]; on disk they are 8-bit RGB with max value 255.
"""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Union

import numpy as np

from apps.abstract.exceptions import ConfigurationError, DataError, ShapeError

logger = logging.getLogger(__name__)

MAGIC = b"P6"
MAX_VALUE = 255
WHITESPACE = b" \t\n\r\v\f"


def to_bytes(img: np.ndarray) -> np.ndarray:
    """
    Map [-1, 1] to 0..255 with round-half-away-from-zero.
    """
    scaled = (np.asarray(img, dtype=np.float64) + 1.0) * (MAX_VALUE / 2.0)
    rounded = np.sign(scaled) * np.floor(np.abs(scaled) + 0.5)
    return np.clip(rounded, 0, MAX_VALUE).astype(np.uint8)


def from_bytes(values: np.ndarray) -> np.ndarray:
    return (values.astype(np.float32) / np.float32(MAX_VALUE / 2.0) - 1.0).astype(
        np.float32
    )


def quantize(img: np.ndarray) -> np.ndarray:
    """The values an image takes after a write/read round-trip."""
    return from_bytes(to_bytes(img))


def encode(img: np.ndarray) -> bytes:
    img = np.asarray(img)
    if img.ndim != 3 or img.shape[0] != 3:
        raise ShapeError(f"P6 images are 3 x H x W, got {img.shape}")
    height, width = img.shape[1:]
    header = f"P6\n{width} {height}\n{MAX_VALUE}\n".encode("ascii")
    return header + to_bytes(img).transpose(1, 2, 0).tobytes()


def _next_token(raw: bytes, pos: int) -> tuple[bytes, int, int]:
    """Return (token, start offset, offset after token), skipping comments."""
    while pos < len(raw):
        if raw[pos] in WHITESPACE:
            pos += 1
        elif raw[pos : pos + 1] == b"#":
            end = raw.find(b"\n", pos)
            pos = len(raw) if end < 0 else end + 1
        else:
            break
    start = pos
    while pos < len(raw) and raw[pos] not in WHITESPACE and raw[pos : pos + 1] != b"#":
        pos += 1
    return raw[start:pos], start, pos


def decode(raw: bytes) -> np.ndarray:
    """
    Decode a P6 byte string.

    Raises:
        DataError: malformed header, max value other than 255, or truncated
            payload; the message carries the byte offset of the problem.
    """
    if raw[:2] != MAGIC:
        raise DataError("not a binary P6 pixmap", offset=0)
    pos = 2
    fields = []
    for name in ("width", "height", "max value"):
        token, start, pos = _next_token(raw, pos)
        if not token.isdigit() or int(token) < 1:
            raise DataError(f"malformed {name} {token[:16]!r} in P6 header", offset=start)
        fields.append((int(token), start))
    (width, _), (height, _), (max_value, max_offset) = fields
    if max_value != MAX_VALUE:
        raise DataError(f"max value {max_value}, expected {MAX_VALUE}", offset=max_offset)
    if pos >= len(raw) or raw[pos] not in WHITESPACE:
        raise DataError("P6 header is not terminated by whitespace", offset=pos)
    payload_start = pos + 1
    expected = 3 * width * height
    available = len(raw) - payload_start
    if available < expected:
        raise DataError(
            f"truncated payload: {available} of {expected} bytes", offset=len(raw)
        )
    pixels = np.frombuffer(raw, dtype=np.uint8, count=expected, offset=payload_start)
    return from_bytes(pixels.reshape(height, width, 3).transpose(2, 0, 1))


def write_image(img: np.ndarray, path: Union[str, Path]) -> Path:
    path = Path(path)
    data = encode(img)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(data)
    except OSError as exc:
        raise ConfigurationError(f"cannot write image {path}: {exc.strerror}") from exc
    return path


def read_image(path: Union[str, Path]) -> np.ndarray:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise DataError(f"cannot read image {path}: {exc.strerror}") from exc
    try:
        return decode(raw)
    except DataError as exc:
        logger.error(f"{path}: {exc}")
        raise
