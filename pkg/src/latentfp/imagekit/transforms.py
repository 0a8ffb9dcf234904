"""Geometric, morphological and thresholding operations on gray images."""
from __future__ import annotations

import math

import numpy as np

from .conv import DimensionError


def as_image(image) -> np.ndarray:
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 2 or img.size == 0:
        raise DimensionError(f"expected a nonempty 2-D image, got shape {img.shape}")
    return img


def warp_affine(image, rotation_deg: float = 0.0, translation=(0.0, 0.0), fill: float = 1.0) -> np.ndarray:
    """Rotate about the image center, then translate, with bilinear sampling.

    Positive ``rotation_deg`` turns +x toward +y (clockwise on screen, since y
    points down). ``translation`` is ``(dx, dy)`` in pixels. Output samples
    whose source falls outside the image take ``fill``.
    """
    img = as_image(image)
    h, w = img.shape
    cx, cy = (w - 1) / 2.0, (h - 1) / 2.0
    dx, dy = translation
    a = math.radians(rotation_deg)
    c, s = math.cos(a), math.sin(a)
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    # inverse map: src = R^-1 (dst - center - t) + center
    u = xx - cx - dx
    v = yy - cy - dy
    sx = c * u + s * v + cx
    sy = -s * u + c * v + cy
    # snap round-off so exact grid maps stay exact
    sx = np.where(np.abs(sx - np.rint(sx)) < 1e-9, np.rint(sx), sx)
    sy = np.where(np.abs(sy - np.rint(sy)) < 1e-9, np.rint(sy), sy)

    inside = (sx >= 0) & (sx <= w - 1) & (sy >= 0) & (sy <= h - 1)
    x0 = np.clip(np.floor(sx).astype(int), 0, w - 1)
    y0 = np.clip(np.floor(sy).astype(int), 0, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = np.clip(sx - x0, 0.0, 1.0)
    fy = np.clip(sy - y0, 0.0, 1.0)
    top = img[y0, x0] * (1 - fx) + img[y0, x1] * fx
    bot = img[y1, x0] * (1 - fx) + img[y1, x1] * fx
    out = np.where(inside, top * (1 - fy) + bot * fy, fill)
    return np.clip(out, 0.0, 1.0)


def disc_offsets(radius: int) -> list[tuple[int, int]]:
    r = int(radius)
    return [(dy, dx) for dy in range(-r, r + 1) for dx in range(-r, r + 1) if dy * dy + dx * dx <= r * r]


def gray_dilate(image, radius: int) -> np.ndarray:
    """Grayscale dilation: maximum over a disc of the given radius.

    Samples outside the image are ignored.
    """
    img = as_image(image)
    if radius < 1:
        raise ValueError(f"radius must be >= 1, got {radius}")
    r = int(radius)
    h, w = img.shape
    padded = np.pad(img, r, mode="constant", constant_values=-np.inf)
    out = img.copy()
    for dy, dx in disc_offsets(r):
        np.maximum(out, padded[r + dy:r + dy + h, r + dx:r + dx + w], out=out)
    return out


def blend(foreground, background, alpha: float) -> np.ndarray:
    """``alpha * background + (1 - alpha) * foreground``, clamped to [0, 1]."""
    fg = as_image(foreground)
    bg = as_image(background)
    if fg.shape != bg.shape:
        raise DimensionError(f"blend shapes differ: {fg.shape} vs {bg.shape}")
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    return np.clip(fg + alpha * (bg - fg), 0.0, 1.0)


def box_mean(image, block: int) -> np.ndarray:
    """Mean over a ``block`` x ``block`` window with replicated borders."""
    img = as_image(image)
    r = block // 2
    p = np.pad(img, r + 1, mode="edge")
    p[0, :] = 0.0
    p[:, 0] = 0.0
    # zero guard row/col so the integral image starts at 0
    s = p.cumsum(axis=0).cumsum(axis=1)
    h, w = img.shape
    tot = (s[block:block + h, block:block + w] - s[0:h, block:block + w]
           - s[block:block + h, 0:w] + s[0:h, 0:w])
    return tot / float(block * block)


def adaptive_binarize(image, block: int = 17, offset: float = 0.02) -> np.ndarray:
    """Local-mean thresholding; dark ridges become 1, everything else 0."""
    img = as_image(image)
    if block < 3 or block % 2 == 0:
        raise ValueError(f"block must be odd and >= 3, got {block}")
    return (img < box_mean(img, block) - offset).astype(np.float64)
