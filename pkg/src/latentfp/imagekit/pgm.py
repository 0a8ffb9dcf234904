"""Binary PGM (P5, maxval 255) reader and writer.

Intensities in [0, 1] are stored as ``round(i * 255)`` with halves rounded up,
so a save/load/save cycle reproduces the file byte for byte.
"""
from __future__ import annotations

import os

import numpy as np


class PGMError(ValueError):
    """Base class for PGM parse failures."""


class PGMFormatError(PGMError):
    """Magic number is not ``P5``."""


class PGMHeaderError(PGMError):
    """Header is malformed."""


class PGMMaxvalError(PGMError):
    """Maxval other than 255."""


class PGMTruncatedError(PGMError):
    """Pixel payload shorter than the header promises."""


def encode(image) -> bytes:
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 2:
        raise ValueError(f"PGM stores 2-D images, got shape {img.shape}")
    if not np.all(np.isfinite(img)):
        raise ValueError("image contains non-finite values")
    q = np.floor(np.clip(img, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)
    h, w = img.shape
    return b"P5\n%d %d\n255\n" % (w, h) + q.tobytes()


def _tokens(buf: bytes, count: int) -> tuple[list[bytes], int]:
    """Read ``count`` whitespace-separated header tokens, skipping comments.

    Returns the tokens and the offset of the single whitespace byte after the
    last one.
    """
    toks: list[bytes] = []
    i, n = 0, len(buf)
    while len(toks) < count:
        while i < n and buf[i:i + 1].isspace():
            i += 1
        if i < n and buf[i:i + 1] == b"#":
            while i < n and buf[i:i + 1] not in (b"\n", b"\r"):
                i += 1
            continue
        if i >= n:
            raise PGMHeaderError("unexpected end of header")
        j = i
        while j < n and not buf[j:j + 1].isspace() and buf[j:j + 1] != b"#":
            j += 1
        toks.append(buf[i:j])
        i = j
    if i >= n or not buf[i:i + 1].isspace():
        raise PGMHeaderError("header must end with a single whitespace byte")
    return toks, i + 1


def decode(buf: bytes) -> np.ndarray:
    if buf[:2] != b"P5":
        raise PGMFormatError(f"unsupported PGM magic {buf[:2]!r}; only binary P5 is handled")
    toks, off = _tokens(buf, 4)
    try:
        w, h, maxval = (int(t) for t in toks[1:])
    except ValueError as exc:
        raise PGMHeaderError(f"non-integer header field in {toks[1:]!r}") from exc
    if w <= 0 or h <= 0:
        raise PGMHeaderError(f"invalid dimensions {w}x{h}")
    if maxval != 255:
        raise PGMMaxvalError(f"unsupported maxval {maxval}; expected 255")
    payload = buf[off:off + w * h]
    if len(payload) < w * h:
        raise PGMTruncatedError(f"payload has {len(payload)} bytes, expected {w * h}")
    return np.frombuffer(payload, dtype=np.uint8).reshape(h, w).astype(np.float64) / 255.0


def save_pgm(path: str | os.PathLike, image) -> None:
    with open(path, "wb") as fh:
        fh.write(encode(image))


def load_pgm(path: str | os.PathLike) -> np.ndarray:
    with open(path, "rb") as fh:
        return decode(fh.read())
