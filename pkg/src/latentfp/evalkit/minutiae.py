"""Skeletonization and crossing-number minutiae extraction."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from ..energy import EnergyParams, fold_angle, orientation_field, structure_tensor
from ..imagekit import adaptive_binarize, as_image, box_mean, gray_dilate

ENDING, BIFURCATION = "ending", "bifurcation"


@dataclass(frozen=True)
class Minutia:
    x: int
    y: int
    kind: str
    direction: float  # ridge orientation, radians in (-pi/2, pi/2]


def _neighbors(img: np.ndarray) -> list[np.ndarray]:
    """P2..P9 clockwise from north, zero outside the image."""
    p = np.pad(img, 1)
    h, w = img.shape
    offs = [(-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1), (-1, -1)]
    return [p[1 + dy:1 + dy + h, 1 + dx:1 + dx + w] for dy, dx in offs]


def _check_binary(img: np.ndarray) -> np.ndarray:
    img = as_image(img)
    if not np.all((img == 0) | (img == 1)):
        raise ValueError("thinning needs a binary image with values in {0, 1}")
    return img.astype(np.uint8)


def thin(binary) -> np.ndarray:
    """Zhang-Suen thinning of the 1-valued set, iterated to a fixpoint."""
    img = _check_binary(binary)
    while True:
        changed = False
        for step in (0, 1):
            p2, p3, p4, p5, p6, p7, p8, p9 = _neighbors(img)
            seq = [p2, p3, p4, p5, p6, p7, p8, p9, p2]
            b = p2 + p3 + p4 + p5 + p6 + p7 + p8 + p9
            a = sum(((seq[i] == 0) & (seq[i + 1] == 1)).astype(np.uint8) for i in range(8))
            if step == 0:
                c1 = (p2 * p4 * p6) == 0
                c2 = (p4 * p6 * p8) == 0
            else:
                c1 = (p2 * p4 * p8) == 0
                c2 = (p2 * p6 * p8) == 0
            kill = (img == 1) & (b >= 2) & (b <= 6) & (a == 1) & c1 & c2
            if kill.any():
                img = img.copy()
                img[kill] = 0
                changed = True
        if not changed:
            return img.astype(np.float64)


def crossing_number(skeleton) -> np.ndarray:
    """Half the number of value changes around each pixel's 8-neighborhood."""
    img = _check_binary(skeleton).astype(np.int16)
    nb = _neighbors(img)
    total = sum(np.abs(nb[i] - nb[(i + 1) % 8]) for i in range(8))
    return total // 2


def extract_minutiae(skeleton, orientation, border_margin: int = 6, min_separation: float = 6.0,
                     mask=None) -> list[Minutia]:
    """Crossing-number minutiae on a one-pixel-wide skeleton.

    ``orientation`` is a structure-tensor field (direction across ridges);
    minutia directions are reported along the ridge, i.e. rotated by 90
    degrees. Points within ``border_margin`` of the image edge, or of the
    edge of the optional foreground ``mask``, are dropped, as is every point
    that has another minutia closer than ``min_separation``.
    """
    sk = _check_binary(skeleton)
    theta = np.asarray(orientation, dtype=np.float64)
    if theta.shape != sk.shape:
        raise ValueError(f"orientation shape {theta.shape} != skeleton shape {sk.shape}")
    cn = crossing_number(sk)
    h, w = sk.shape
    valid = np.zeros((h, w), dtype=bool)
    m = int(border_margin)
    valid[m:h - m, m:w - m] = True
    if mask is not None:
        fg = as_image(mask) > 0.5
        if m > 0:
            fg = (1.0 - gray_dilate(1.0 - fg, m)) > 0.5
        valid &= fg
    ys, xs = np.nonzero((sk == 1) & ((cn == 1) | (cn == 3)) & valid)
    if len(ys) == 0:
        return []
    d2 = (xs[:, None] - xs[None, :]) ** 2 + (ys[:, None] - ys[None, :]) ** 2
    np.fill_diagonal(d2, np.iinfo(d2.dtype).max)
    crowded = (d2 < min_separation**2).any(axis=1)
    ridge_dir = fold_angle(theta + np.pi / 2)
    return [Minutia(int(x), int(y), ENDING if cn[y, x] == 1 else BIFURCATION, float(ridge_dir[y, x]))
            for x, y, c in zip(xs, ys, crowded) if not c]


def foreground_mask(binary, block: int = 17, low: float = 0.08, high: float = 0.92) -> np.ndarray:
    """Region where the binary map holds ridge texture (neither blank nor solid)."""
    frac = box_mean(as_image(binary), block)
    return ((frac > low) & (frac < high)).astype(np.float64)


def minutiae_from_binary(binary, orientation_source=None, params: EnergyParams = EnergyParams(),
                         border_margin: int = 6, min_separation: float = 6.0) -> list[Minutia]:
    """Thin a ridge map (ridges = 1) and extract minutiae inside its foreground.

    The orientation field is estimated on ``orientation_source`` when given,
    otherwise on the binary map itself.
    """
    b = as_image(binary)
    src = b if orientation_source is None else as_image(orientation_source)
    theta = orientation_field(structure_tensor(src, params))
    return extract_minutiae(thin(b), theta, border_margin, min_separation, foreground_mask(b))


def minutiae_from_gray(image, params: EnergyParams = EnergyParams(), block: int = 17, offset: float = 0.02,
                       **kw) -> list[Minutia]:
    """Binarize a dark-ridge gray image, then extract minutiae."""
    img = as_image(image)
    return minutiae_from_binary(adaptive_binarize(img, block, offset), img, params, **kw)


def minutiae_from_reconstruction(image, threshold: float = 0.5, params: EnergyParams = EnergyParams(),
                                 **kw) -> list[Minutia]:
    """Minutiae of a bright-ridge network output: threshold, then extract.

    Orientation comes from the continuous output, which is smoother than its
    thresholded version.
    """
    img = as_image(image)
    return minutiae_from_binary((img > threshold).astype(np.float64), img, params, **kw)


def minutiae_to_csv(minutiae: list[Minutia]) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["x", "y", "kind", "direction_rad"])
    for mn in minutiae:
        wr.writerow([mn.x, mn.y, mn.kind, repr(mn.direction)])
    return buf.getvalue()


def minutiae_from_csv(text: str) -> list[Minutia]:
    rows = list(csv.DictReader(io.StringIO(text)))
    return [Minutia(int(r["x"]), int(r["y"]), r["kind"], float(r["direction_rad"])) for r in rows]
