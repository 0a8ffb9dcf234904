"""Latent-impression simulation: geometry, blur, ink spread, backgrounds, occlusion, noise."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from ..imagekit import as_image, blend, convolve2d, gray_dilate, motion_kernel, warp_affine


@dataclass
class DegradeParams:
    rotation_range: tuple[float, float] = (-15.0, 15.0)
    # None: +-10% of the image width (dx) and height (dy)
    translation_range: tuple[float, float] | None = None
    blur_length_range: tuple[int, int] = (3, 11)
    blur_angle_range: tuple[float, float] = (0.0, 180.0)
    dilation_radii: tuple[int, ...] = (0, 1, 2)
    alpha_range: tuple[float, float] = (0.3, 0.7)
    occlusion_count_range: tuple[int, int] = (0, 2)
    occlusion_area_range: tuple[float, float] = (0.05, 0.15)
    noise_sigma: float = 3.5e-3

    def __post_init__(self):
        pairs = {
            "rotation_range": self.rotation_range, "blur_length_range": self.blur_length_range,
            "blur_angle_range": self.blur_angle_range, "alpha_range": self.alpha_range,
            "occlusion_count_range": self.occlusion_count_range, "occlusion_area_range": self.occlusion_area_range,
        }
        if self.translation_range is not None:
            pairs["translation_range"] = self.translation_range
        for name, (lo, hi) in pairs.items():
            if lo > hi:
                raise ValueError(f"{name} is not well ordered: {lo} > {hi}")
        if not (0.0 <= self.alpha_range[0] and self.alpha_range[1] <= 1.0):
            raise ValueError("alpha_range must lie within [0, 1]")
        if self.blur_length_range[0] < 1:
            raise ValueError("blur lengths must be >= 1")
        if not self.dilation_radii or min(self.dilation_radii) < 0:
            raise ValueError("dilation_radii must be a nonempty list of radii >= 0")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")

    @classmethod
    def identity(cls) -> "DegradeParams":
        return cls((0.0, 0.0), (0.0, 0.0), (1, 1), (0.0, 0.0), (0,), (0.0, 0.0), (0, 0), (0.0, 0.0), 0.0)

    @classmethod
    def from_dict(cls, d: dict) -> "DegradeParams":
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown degrade parameters: {sorted(unknown)}")
        conv = {k: (tuple(v) if isinstance(v, list) else v) for k, v in d.items()}
        return cls(**conv)

    def to_dict(self) -> dict:
        return asdict(self)


def _smooth_noise(rng: np.random.Generator, h: int, w: int, cell: int) -> np.ndarray:
    gh, gw = h // cell + 2, w // cell + 2
    grid = rng.random((gh, gw))
    yy = np.arange(h) / cell
    xx = np.arange(w) / cell
    y0, x0 = np.floor(yy).astype(int), np.floor(xx).astype(int)
    fy, fx = yy - y0, xx - x0
    # smoothstep interpolation between lattice values
    fy = fy * fy * (3 - 2 * fy)
    fx = fx * fx * (3 - 2 * fx)
    a = grid[y0][:, x0]
    b = grid[y0][:, x0 + 1]
    c = grid[y0 + 1][:, x0]
    d = grid[y0 + 1][:, x0 + 1]
    top = a + (b - a) * fx[None, :]
    bot = c + (d - c) * fx[None, :]
    return top + (bot - top) * fy[:, None]


def procedural_background(rng: np.random.Generator, width: int, height: int) -> np.ndarray:
    """Paper-grain texture (a few octaves of value noise) with random line clutter."""
    img = np.zeros((height, width))
    amp, total = 1.0, 0.0
    for cell in (16, 8, 4, 2):
        img += amp * _smooth_noise(rng, height, width, cell)
        total += amp
        amp *= 0.55
    img /= total
    lo, hi = rng.uniform(0.35, 0.6), rng.uniform(0.8, 1.0)
    img = lo + (hi - lo) * (img - img.min()) / (np.ptp(img) + 1e-12)
    yy, xx = np.mgrid[0:height, 0:width].astype(np.float64)
    for _ in range(int(rng.integers(2, 7))):
        x0, y0 = rng.uniform(0, width), rng.uniform(0, height)
        ang = rng.uniform(0, np.pi)
        length = rng.uniform(0.2, 0.8) * max(width, height)
        ux, uy = np.cos(ang), np.sin(ang)
        along = (xx - x0) * ux + (yy - y0) * uy
        across = np.abs(-(xx - x0) * uy + (yy - y0) * ux)
        on = (np.abs(along) <= length / 2) & (across <= rng.uniform(0.5, 1.5))
        img = np.where(on, img * rng.uniform(0.3, 0.7), img)
    return np.clip(img, 0.0, 1.0)


def _draw(rng, lo, hi):
    return float(lo) if lo == hi else float(rng.uniform(lo, hi))


def degrade(master, params: DegradeParams = DegradeParams(), backgrounds=None, seed: int = 0):
    """Simulate a latent impression of ``master``.

    Stages, in order: rotation + translation, motion blur, ink spread (gray
    dilation of the dark ridge pattern), background blend, occlusion patches
    filled with background, additive Gaussian noise, clamp to [0, 1].

    Returns ``(latent, drawn)`` where ``drawn`` records every sampled value.
    An empty ``backgrounds`` list falls back to a procedural texture drawn
    from ``seed``.
    """
    img = as_image(master)
    h, w = img.shape
    rng = np.random.default_rng(seed)
    if not backgrounds:
        backgrounds = [procedural_background(rng, w, h)]
    if params.translation_range is None:
        tx, ty = 0.1 * w, 0.1 * h
        dx, dy = _draw(rng, -tx, tx), _draw(rng, -ty, ty)
    else:
        dx = _draw(rng, *params.translation_range)
        dy = _draw(rng, *params.translation_range)
    drawn = {
        "rotation": _draw(rng, *params.rotation_range),
        "translation": [dx, dy],
        "blur_length": int(rng.integers(params.blur_length_range[0], params.blur_length_range[1] + 1)),
        "blur_angle": _draw(rng, *params.blur_angle_range),
        "dilation_radius": int(params.dilation_radii[int(rng.integers(len(params.dilation_radii)))]),
        "alpha": _draw(rng, *params.alpha_range),
        "background": int(rng.integers(len(backgrounds))),
    }
    bg = as_image(backgrounds[drawn["background"]])
    if bg.shape != img.shape:
        raise ValueError(f"background shape {bg.shape} != master shape {img.shape}")

    out = img
    if drawn["rotation"] != 0.0 or dx != 0.0 or dy != 0.0:
        out = warp_affine(out, drawn["rotation"], (dx, dy), fill=1.0)
    if drawn["blur_length"] > 1:
        out = np.clip(convolve2d(out, motion_kernel(drawn["blur_length"], drawn["blur_angle"]), "replicate"), 0.0, 1.0)
    if drawn["dilation_radius"] > 0:
        out = 1.0 - gray_dilate(1.0 - out, drawn["dilation_radius"])
    if drawn["alpha"] > 0.0:
        out = blend(out, bg, drawn["alpha"])

    n_occ = int(rng.integers(params.occlusion_count_range[0], params.occlusion_count_range[1] + 1))
    rects = []
    for _ in range(n_occ):
        area = _draw(rng, *params.occlusion_area_range) * w * h
        aspect = float(rng.uniform(0.5, 2.0))
        rw = int(np.clip(round(np.sqrt(area * aspect)), 1, w))
        rh = int(np.clip(round(area / max(rw, 1)), 1, h))
        x0 = int(rng.integers(0, w - rw + 1))
        y0 = int(rng.integers(0, h - rh + 1))
        rects.append([x0, y0, rw, rh])
        out = out.copy()
        out[y0:y0 + rh, x0:x0 + rw] = bg[y0:y0 + rh, x0:x0 + rw]
    drawn["occlusions"] = rects

    drawn["noise_sigma"] = float(params.noise_sigma)
    if params.noise_sigma > 0:
        out = out + rng.normal(0.0, params.noise_sigma, size=out.shape)
    return np.clip(out, 0.0, 1.0), drawn


def aligned_target(target, drawn: dict) -> np.ndarray:
    """Warp a binary target with the geometry a latent was drawn with, so the
    pair is pixel-aligned; re-thresholded to {0, 1}."""
    t = as_image(target)
    rot = drawn.get("rotation", 0.0)
    dx, dy = drawn.get("translation", (0.0, 0.0))
    if rot == 0.0 and dx == 0.0 and dy == 0.0:
        return t.copy()
    return (warp_affine(t, rot, (dx, dy), fill=0.0) >= 0.5).astype(np.float64)
