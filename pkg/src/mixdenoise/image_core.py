"""Grayscale image I/O (binary and ASCII PGM) and quality metrics.

Images are plain ``numpy`` arrays of shape ``(height, width)`` holding
float64 intensities in row-major order, top-left origin. Quantization to
8-bit happens only when writing a file.
"""

from __future__ import annotations

import math
import os
import re

import numpy as np

D_MIN = 0.0
D_MAX = 255.0
PEAK = 255.0


class PGMError(ValueError):
    """Base class for PGM parse failures; ``offset`` is the byte position."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


class PGMHeaderError(PGMError):
    pass


class UnsupportedMaxvalError(PGMError):
    pass


class PGMTruncatedError(PGMError):
    pass


_WS = b" \t\r\n\v\f"


def _next_token(buf: bytes, pos: int) -> tuple[bytes, int, int]:
    """Return ``(token, start, end)`` of the next header token, skipping
    whitespace and ``#`` comments."""
    n = len(buf)
    while pos < n:
        c = buf[pos : pos + 1]
        if c in (b" ", b"\t", b"\r", b"\n", b"\v", b"\f"):
            pos += 1
        elif c == b"#":
            while pos < n and buf[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
        else:
            break
    start = pos
    while pos < n and buf[pos] not in _WS and buf[pos : pos + 1] != b"#":
        pos += 1
    return buf[start:pos], start, pos


def _header_int(buf: bytes, pos: int, what: str) -> tuple[int, int]:
    tok, start, end = _next_token(buf, pos)
    if not tok:
        raise PGMHeaderError(f"missing {what}", start)
    if not tok.isdigit():
        raise PGMHeaderError(f"malformed {what} {tok!r}", start)
    return int(tok), end


def decode_pgm(buf: bytes) -> np.ndarray:
    """Decode P2/P5 bytes with maxval 255 into a float64 array."""
    magic, start, pos = _next_token(buf, 0)
    if magic not in (b"P2", b"P5"):
        raise PGMHeaderError(f"bad magic number {magic[:8]!r}", start)
    width, pos = _header_int(buf, pos, "width")
    height, pos = _header_int(buf, pos, "height")
    if width < 1 or height < 1:
        raise PGMHeaderError(f"invalid dimensions {width}x{height}", pos)
    maxval_pos = pos
    maxval, pos = _header_int(buf, pos, "maxval")
    if maxval != 255:
        raise UnsupportedMaxvalError(f"unsupported maxval {maxval}", maxval_pos)
    count = width * height

    if magic == b"P5":
        if pos >= len(buf) or buf[pos] not in _WS:
            raise PGMHeaderError("expected whitespace after maxval", pos)
        pos += 1
        payload = buf[pos : pos + count]
        if len(payload) < count:
            raise PGMTruncatedError(
                f"truncated payload: expected {count} bytes, got {len(payload)}",
                pos + len(payload),
            )
        data = np.frombuffer(payload, dtype=np.uint8)
    else:
        values = []
        for m in re.finditer(rb"#[^\r\n]*|[^\s#]+", buf[pos:]):
            tok = m.group()
            if tok.startswith(b"#"):
                continue
            if not tok.isdigit() or int(tok) > 255:
                raise PGMHeaderError(f"bad sample {tok[:8]!r}", pos + m.start())
            values.append(int(tok))
            if len(values) == count:
                break
        if len(values) < count:
            raise PGMTruncatedError(
                f"truncated payload: expected {count} samples, got {len(values)}", len(buf)
            )
        data = np.asarray(values, dtype=np.uint8)
    return data.reshape(height, width).astype(np.float64)


def load_pgm(path: str | os.PathLike) -> np.ndarray:
    with open(path, "rb") as fh:
        return decode_pgm(fh.read())


def quantize(img: np.ndarray) -> np.ndarray:
    """Round half away from zero, then clip to [0, 255] as uint8."""
    img = np.asarray(img, dtype=np.float64)
    rounded = np.sign(img) * np.floor(np.abs(img) + 0.5)
    return np.clip(rounded, D_MIN, D_MAX).astype(np.uint8)


def encode_pgm(img: np.ndarray) -> bytes:
    check_image(img)
    q = quantize(img)
    h, w = q.shape
    return b"P5\n%d %d\n255\n" % (w, h) + q.tobytes()


def save_pgm(img: np.ndarray, path: str | os.PathLike) -> None:
    data = encode_pgm(img)
    with open(path, "wb") as fh:
        fh.write(data)


def check_image(img: np.ndarray) -> None:
    """Raise ``ValueError`` unless ``img`` is a finite, non-empty 2D array."""
    if img.ndim != 2 or img.shape[0] < 1 or img.shape[1] < 1:
        raise ValueError(f"expected a non-empty 2D image, got shape {img.shape}")
    if not np.all(np.isfinite(img)):
        raise ValueError("image contains NaN or Inf")


def _same_shape(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")


def mse(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    _same_shape(a, b)
    return float(np.mean((a - b) ** 2))


def psnr(reference: np.ndarray, test: np.ndarray) -> float:
    """Peak signal-to-noise ratio in dB with peak 255; ``inf`` when equal."""
    err = mse(reference, test)
    if err == 0.0:
        return math.inf
    return 10.0 * math.log10(PEAK**2 / err)


def clip(img: np.ndarray) -> np.ndarray:
    return np.clip(np.asarray(img, dtype=np.float64), D_MIN, D_MAX)
