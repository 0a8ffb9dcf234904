"""Synthetic master prints: zero-pole orientation model plus Gabor iteration."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..energy import fold_angle
from ..imagekit import Kernel

N_ORIENT_BINS = 24


@dataclass
class SingularityModel:
    loops: list[tuple[float, float]] = field(default_factory=list)
    deltas: list[tuple[float, float]] = field(default_factory=list)
    base: float = 0.0

    def validate(self, width: int, height: int) -> None:
        if len(self.loops) > 2 or len(self.deltas) > 2:
            raise ValueError("at most 2 loops and 2 deltas are supported")
        for x, y in self.loops + self.deltas:
            if not (0 <= x <= width - 1 and 0 <= y <= height - 1):
                raise ValueError(f"singular point ({x}, {y}) outside {width}x{height}")

    def to_dict(self) -> dict:
        return {"loops": [list(p) for p in self.loops], "deltas": [list(p) for p in self.deltas], "base": self.base}


def orientation_model(model: SingularityModel, width: int, height: int) -> np.ndarray:
    """Zero-pole field: ``base + (sum arg(p - loop) - sum arg(p - delta)) / 2``.

    Angles use the same convention as the structure-tensor orientation (the
    direction across the ridges), folded into (-pi/2, pi/2]. Pixels sitting
    exactly on a singular point take ``base``.
    """
    model.validate(width, height)
    yy, xx = np.mgrid[0:height, 0:width].astype(np.float64)
    acc = np.zeros((height, width))
    on_point = np.zeros((height, width), dtype=bool)
    for sign, pts in ((1.0, model.loops), (-1.0, model.deltas)):
        for px, py in pts:
            dx, dy = xx - px, yy - py
            hit = (dx == 0) & (dy == 0)
            on_point |= hit
            acc += sign * np.arctan2(dy, dx)
    theta = fold_angle(model.base + 0.5 * acc)
    return np.where(on_point, fold_angle(model.base), theta)


def random_singularities(rng: np.random.Generator, width: int, height: int) -> SingularityModel:
    """Draw a plausible class: arch, loop, or whorl-like double loop."""
    cx, cy = (width - 1) / 2.0, (height - 1) / 2.0
    kind = rng.choice(["arch", "loop", "loop", "whorl"])
    base = float(rng.uniform(-0.3, 0.3))

    def pt(mx, my, sx, sy):
        x = float(np.clip(cx + mx * width + rng.normal(0, sx * width), 0, width - 1))
        y = float(np.clip(cy + my * height + rng.normal(0, sy * height), 0, height - 1))
        return (x, y)

    if kind == "arch":
        return SingularityModel([], [], base)
    if kind == "loop":
        side = rng.choice([-1.0, 1.0])
        return SingularityModel([pt(0.0, -0.12, 0.06, 0.05)], [pt(0.2 * side, 0.3, 0.05, 0.05)], base)
    return SingularityModel([pt(-0.05, -0.08, 0.03, 0.03), pt(0.05, 0.08, 0.03, 0.03)],
                            [pt(-0.3, 0.32, 0.04, 0.04), pt(0.3, 0.32, 0.04, 0.04)], base)


def gabor_kernel(theta: float, period: float, sigma: float | None = None) -> Kernel:
    """Even-symmetric, zero-mean Gabor filter whose wave runs along ``theta``.

    Scaled so a matched unit-amplitude cosine comes out with unit amplitude.
    """
    sigma = 0.5 * period if sigma is None else sigma
    r = int(math.ceil(2.5 * sigma))
    ax = np.arange(-r, r + 1, dtype=np.float64)
    yy, xx = np.meshgrid(ax, ax, indexing="ij")
    u = xx * math.cos(theta) + yy * math.sin(theta)
    env = np.exp(-(xx**2 + yy**2) / (2 * sigma**2))
    wave = np.cos(2 * np.pi * u / period)
    g = env * wave
    g -= env * (g.sum() / env.sum())
    g /= (g * wave).sum()
    return Kernel(g, kind=f"gabor({theta:.3f},{period:g})")


def vignette(width: int, height: int, inner: float = 0.8, outer: float = 1.05) -> np.ndarray:
    """Smooth elliptical mask: 1 inside ``inner`` (normalized radius), 0 past ``outer``."""
    yy, xx = np.mgrid[0:height, 0:width].astype(np.float64)
    nx = (xx - (width - 1) / 2.0) / (width / 2.0)
    ny = (yy - (height - 1) / 2.0) / (height / 2.0)
    rad = np.hypot(nx, ny)
    t = np.clip((rad - inner) / (outer - inner), 0.0, 1.0)
    return 1.0 - t * t * (3 - 2 * t)


def synth_master(seed: int, model: SingularityModel, ridge_period: float = 10.0, iterations: int = 6,
                 width: int = 80, height: int = 64) -> np.ndarray:
    """Grow a ridge pattern from sparse random seeds by repeated oriented
    Gabor filtering, then fade it out toward the border.

    Returns an image in [0, 1] with dark ridges on a white background.
    """
    if ridge_period < 4:
        raise ValueError("ridge_period must be >= 4")
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    rng = np.random.default_rng(seed)
    theta = orientation_model(model, width, height)
    # each pixel blends the responses of its two nearest orientation bins
    pos = (theta + np.pi / 2) / np.pi * N_ORIENT_BINS
    lo = np.floor(pos).astype(int) % N_ORIENT_BINS
    hi = (lo + 1) % N_ORIENT_BINS
    frac = pos - np.floor(pos)
    angles = -np.pi / 2 + np.pi * np.arange(N_ORIENT_BINS) / N_ORIENT_BINS
    kernels = [gabor_kernel(a, ridge_period) for a in angles]
    r = kernels[0].radius
    shape = (height + 2 * r, width + 2 * r)
    spectra = {}
    for b in np.union1d(lo, hi):
        # circular layout with the kernel anchor at the origin
        pad = np.zeros(shape)
        pad[:2 * r + 1, :2 * r + 1] = kernels[b].taps
        spectra[b] = np.fft.rfft2(np.roll(pad, (-r, -r), axis=(0, 1)))

    f = np.zeros((height, width))
    n_seeds = max(4, int(width * height / (ridge_period**2) * 0.35))
    ys = rng.integers(0, height, n_seeds)
    xs = rng.integers(0, width, n_seeds)
    f[ys, xs] = rng.choice([-1.0, 1.0], n_seeds)
    for _ in range(iterations):
        fs = np.fft.rfft2(np.pad(f, r, mode="edge"))
        resp = np.zeros_like(f)
        for b, spec in spectra.items():
            full = np.fft.irfft2(fs * spec, s=shape)[r:r + height, r:r + width]
            resp += np.where(lo == b, 1.0 - frac, 0.0) * full + np.where(hi == b, frac, 0.0) * full
        scale = np.percentile(np.abs(resp), 90) + 1e-12
        f = np.clip(1.6 * resp / scale, -1.0, 1.0)
    ridges = 0.5 - 0.5 * f
    mask = vignette(width, height)
    return np.clip(mask * ridges + (1.0 - mask), 0.0, 1.0)
