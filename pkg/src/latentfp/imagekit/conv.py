"""Kernels and 2-D convolution with exact adjoints.

Images are plain float ``numpy`` arrays whose last two axes are (rows, cols).
Any leading axes are treated as a batch, so the same kernel can be applied to
a stack of images in one call.

Coordinates follow the raster convention: ``x`` grows along columns (right),
``y`` grows along rows (down). An angle ``theta`` therefore names the unit
vector ``(cos theta, sin theta)`` in (x, y) with y pointing down.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np

BorderMode = Literal["replicate", "zero"]
BORDER_MODES = ("replicate", "zero")

DIRECTIONAL_ANGLES = (0, 45, 90, 135)


class DimensionError(ValueError):
    """Raised when array shapes are incompatible with an operation."""


@dataclass(frozen=True, eq=False)
class Kernel:
    """Odd-sided square filter; the anchor is the central tap."""

    taps: np.ndarray
    kind: str = "custom"
    # optional (column, row) factors with taps == outer(column, row)
    factors: tuple[np.ndarray, np.ndarray] | None = None

    def __post_init__(self):
        taps = np.asarray(self.taps, dtype=np.float64)
        if taps.ndim != 2 or taps.shape[0] != taps.shape[1]:
            raise DimensionError(f"kernel must be square, got shape {taps.shape}")
        if taps.shape[0] % 2 == 0:
            raise DimensionError(f"kernel side must be odd, got {taps.shape[0]}")
        taps.setflags(write=False)
        object.__setattr__(self, "taps", taps)
        if self.factors is not None:
            col, row = (np.asarray(f, dtype=np.float64).ravel() for f in self.factors)
            if not np.allclose(np.outer(col, row), taps, rtol=0, atol=1e-15):
                raise ValueError("kernel factors do not reproduce the taps")
            object.__setattr__(self, "factors", (col, row))

    @property
    def size(self) -> int:
        return self.taps.shape[0]

    @property
    def radius(self) -> int:
        return self.size // 2

    @property
    def anchor(self) -> tuple[int, int]:
        return (self.radius, self.radius)

    def flipped(self) -> "Kernel":
        f = None if self.factors is None else (self.factors[0][::-1].copy(), self.factors[1][::-1].copy())
        return Kernel(self.taps[::-1, ::-1].copy(), kind=self.kind + "-flipped", factors=f)


def gaussian_kernel(sigma: float) -> Kernel:
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    r = int(math.ceil(3.0 * sigma))
    ax = np.arange(-r, r + 1, dtype=np.float64)
    g = np.exp(-(ax**2) / (2.0 * sigma**2))
    g /= g.sum()
    return Kernel(np.outer(g, g), kind=f"gaussian({sigma:g})", factors=(g, g))


def directional_kernel(theta: int) -> Kernel:
    """3x3 Sobel-family derivative along ``theta`` degrees.

    Taps are stored for true convolution and scaled so that a ramp with unit
    slope along ``theta`` gives a response of exactly 1.
    """
    # correlation templates: positive weights on the +theta side
    if theta == 0:
        tpl = np.array([[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]], dtype=np.float64) / 8.0
    elif theta == 90:
        tpl = np.array([[-1, -2, -1], [0, 0, 0], [1, 2, 1]], dtype=np.float64) / 8.0
    elif theta == 45:
        tpl = np.array([[-2, -1, 0], [-1, 0, 1], [0, 1, 2]], dtype=np.float64)
        tpl *= math.sqrt(2.0) / 12.0
    elif theta == 135:
        tpl = np.array([[0, -1, -2], [1, 0, -1], [2, 1, 0]], dtype=np.float64)
        tpl *= math.sqrt(2.0) / 12.0
    else:
        raise ValueError(f"unsupported directional angle {theta!r}; use one of {DIRECTIONAL_ANGLES}")
    return Kernel(tpl[::-1, ::-1].copy(), kind=f"directional({theta})")


def motion_kernel(length: int, angle: float) -> Kernel:
    """Normalized one-pixel-wide line of ``length`` taps along ``angle`` degrees."""
    length = int(length)
    if length < 1:
        raise ValueError(f"motion length must be >= 1, got {length}")
    side = length if length % 2 == 1 else length + 1
    r = side // 2
    taps = np.zeros((side, side))
    a = math.radians(angle)
    for t in np.linspace(-(length - 1) / 2.0, (length - 1) / 2.0, length):
        col = int(math.floor(t * math.cos(a) + 0.5)) + r
        row = int(math.floor(t * math.sin(a) + 0.5)) + r
        taps[row, col] += 1.0
    return Kernel(taps / taps.sum(), kind=f"motion({length},{angle:g})")


def make_kernel(kind: str, **kw) -> Kernel:
    """Construct a kernel by name: ``gaussian(sigma)``, ``directional(theta)``,
    ``motion(length, angle)``."""
    if kind == "gaussian":
        return gaussian_kernel(kw["sigma"])
    if kind == "directional":
        return directional_kernel(kw["theta"])
    if kind == "motion":
        return motion_kernel(kw["length"], kw.get("angle", 0.0))
    raise ValueError(f"unknown kernel kind {kind!r}")


def _check(image: np.ndarray, kernel: Kernel, border: str) -> np.ndarray:
    if border not in BORDER_MODES:
        raise ValueError(f"border must be one of {BORDER_MODES}, got {border!r}")
    image = np.asarray(image, dtype=np.float64)
    if image.ndim < 2:
        raise DimensionError("image must have at least two dimensions")
    h, w = image.shape[-2:]
    if kernel.size > min(h, w):
        raise DimensionError(f"kernel side {kernel.size} exceeds image dimensions {h}x{w}")
    return image


def _pad(image: np.ndarray, r: int, border: str) -> np.ndarray:
    width = [(0, 0)] * (image.ndim - 2) + [(r, r), (r, r)]
    if border == "replicate":
        return np.pad(image, width, mode="edge")
    return np.pad(image, width, mode="constant")


def _valid_correlate(padded: np.ndarray, kernel: Kernel, flip: bool) -> np.ndarray:
    """Valid-mode cross-correlation of ``padded`` with the (optionally flipped) kernel."""
    k = kernel.size
    h = padded.shape[-2] - k + 1
    w = padded.shape[-1] - k + 1
    if kernel.factors is not None:
        col, row = kernel.factors
        if flip:
            col, row = col[::-1], row[::-1]
        tmp = np.zeros(padded.shape[:-2] + (h, padded.shape[-1]))
        for a in range(k):
            if col[a] != 0.0:
                tmp += col[a] * padded[..., a:a + h, :]
        out = np.zeros(padded.shape[:-2] + (h, w))
        for b in range(k):
            if row[b] != 0.0:
                out += row[b] * tmp[..., :, b:b + w]
        return out
    taps = kernel.taps[::-1, ::-1] if flip else kernel.taps
    out = np.zeros(padded.shape[:-2] + (h, w))
    for a in range(k):
        for b in range(k):
            if taps[a, b] != 0.0:
                out += taps[a, b] * padded[..., a:a + h, b:b + w]
    return out


def convolve2d(image: np.ndarray, kernel: Kernel, border: BorderMode) -> np.ndarray:
    """Same-size true convolution (kernel flipped) with the named border rule.

    ``out[i, j] = sum_{a, b} K[a, b] * x[i - a + r, j - b + r]`` where samples
    outside the image come from ``border``. The result is not clamped.
    """
    image = _check(image, kernel, border)
    r = kernel.radius
    return _valid_correlate(_pad(image, r, border), kernel, flip=True)


def correlate2d(image: np.ndarray, kernel: Kernel, border: BorderMode) -> np.ndarray:
    """Convolution with the flipped kernel. With ``border="zero"`` this is the
    exact adjoint of :func:`convolve2d`."""
    return convolve2d(image, kernel.flipped(), border)


def convolve2d_adjoint(grad: np.ndarray, kernel: Kernel, border: BorderMode) -> np.ndarray:
    """Exact adjoint of ``convolve2d(., kernel, border)`` applied to ``grad``.

    For the zero border this coincides with :func:`correlate2d`; for the
    replicate border the contributions that landed on padding are folded back
    onto the edge pixels they were copied from.
    """
    grad = _check(grad, kernel, border)
    r = kernel.radius
    if r == 0:
        return grad * kernel.taps[0, 0]
    lead = [(0, 0)] * (grad.ndim - 2)
    full = _valid_correlate(np.pad(grad, lead + [(2 * r, 2 * r)] * 2), kernel, flip=False)
    if border == "zero":
        return full[..., r:-r, r:-r]
    # fold replicate padding: rows first, then columns
    rows = full[..., r:-r, :].copy()
    rows[..., 0, :] += full[..., :r, :].sum(axis=-2)
    rows[..., -1, :] += full[..., -r:, :].sum(axis=-2)
    out = rows[..., r:-r].copy()
    out[..., 0] += rows[..., :r].sum(axis=-1)
    out[..., -1] += rows[..., -r:].sum(axis=-1)
    return out
