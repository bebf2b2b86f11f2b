"""Binary PGM (P5) reading and writing."""

from __future__ import annotations

import os
from pathlib import Path

import numpy as np


class PGMError(ValueError):
    pass


def _read_token(data: bytes, pos: int) -> tuple[bytes, int]:
    # header tokens are separated by whitespace; '#' starts a comment up to EOL
    n = len(data)
    while pos < n:
        c = data[pos : pos + 1]
        if c.isspace():
            pos += 1
        elif c == b"#":
            while pos < n and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
        else:
            break
    start = pos
    while pos < n and not data[pos : pos + 1].isspace() and data[pos : pos + 1] != b"#":
        pos += 1
    if start == pos:
        raise PGMError("truncated header")
    return data[start:pos], pos


def decode_pgm(data: bytes, name: str = "<bytes>") -> tuple[np.ndarray, int]:
    """Decode a P5 image. Returns (raw integer samples of shape (h, w), maxval)."""
    if data[:2] != b"P5":
        raise PGMError(f"{name}: not a binary PGM (magic {data[:2]!r})")
    pos = 2
    try:
        fields = []
        for _ in range(3):
            tok, pos = _read_token(data, pos)
            fields.append(int(tok))
    except (PGMError, ValueError) as exc:
        raise PGMError(f"{name}: malformed header ({exc})") from None
    width, height, maxval = fields
    if width < 1 or height < 1:
        raise PGMError(f"{name}: bad dimensions {width}x{height}")
    if not 0 < maxval < 65536:
        raise PGMError(f"{name}: maxval {maxval} out of range")
    if pos >= len(data) or not data[pos : pos + 1].isspace():
        raise PGMError(f"{name}: missing whitespace after maxval")
    pos += 1

    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    nbytes = width * height * dtype.itemsize
    raster = data[pos : pos + nbytes]
    if len(raster) < nbytes:
        raise PGMError(f"{name}: expected {nbytes} raster bytes, got {len(raster)}")
    samples = np.frombuffer(raster, dtype=dtype).reshape(height, width)
    if samples.max(initial=0) > maxval:
        raise PGMError(f"{name}: sample exceeds maxval {maxval}")
    return samples.astype(np.int64), maxval


def read_pgm(path: str | os.PathLike) -> np.ndarray:
    """Read a P5 file as a float64 (h, w) array normalized to [0, 1]."""
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise PGMError(f"{path}: unreadable ({exc.strerror})") from None
    samples, maxval = decode_pgm(data, str(path))
    return samples / float(maxval)


def encode_pgm(samples: np.ndarray, maxval: int = 255) -> bytes:
    samples = np.asarray(samples)
    if samples.ndim != 2:
        raise PGMError("PGM needs a 2-D array")
    if not 0 < maxval < 65536:
        raise PGMError(f"maxval {maxval} out of range")
    if samples.min(initial=0) < 0 or samples.max(initial=0) > maxval:
        raise PGMError("sample outside [0, maxval]")
    h, w = samples.shape
    dtype = ">u2" if maxval > 255 else "u1"
    header = f"P5\n{w} {h}\n{maxval}\n".encode("ascii")
    return header + samples.astype(dtype).tobytes()


def write_pgm(path: str | os.PathLike, intensities: np.ndarray, maxval: int = 255) -> None:
    """Write [0, 1] intensities, quantized to the nearest level of `maxval`."""
    x = np.clip(np.asarray(intensities, dtype=float), 0.0, 1.0)
    Path(path).write_bytes(encode_pgm(np.rint(x * maxval).astype(np.int64), maxval))
