"""Ridge similarity energies and their analytic gradients.

The objective compares a target ridge image with a reconstruction through
three terms:

* ``e_grad``: mean squared difference of directional derivatives, averaged
  over the orientation set;
* ``e_ori``: mean squared (wrapped) difference of the structure-tensor
  orientation fields;
* ``e_rel``: mean squared difference of the orientation reliability fields.

``e_total = e_grad + lam * (e_ori + e_rel)``. Gradients with respect to the
reconstruction are accumulated in reverse through every stage (directional
filters, products, Gaussian smoothing, atan2, the reliability ratio and its
guard), using :func:`~latentfp.imagekit.convolve2d_adjoint` for each filter.

Every function accepts a single image ``(H, W)`` or a stack ``(..., H, W)``;
energies are then returned per image.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple

import numpy as np

from .imagekit import DimensionError, Kernel, convolve2d, convolve2d_adjoint, directional_kernel, gaussian_kernel

BORDER = "replicate"
# tensor anisotropy below this counts as isotropic (theta := 0); filter
# round-off on flat patches sits near 1e-34
DEGENERATE_RHO = 1e-18


@dataclass(frozen=True)
class EnergyParams:
    orientation_set: tuple[int, ...] = (0, 45, 90, 135)
    sigma_s: float = 3.0
    sigma_o: float = 3.0
    lam: float = 0.1
    epsilon_r: float = 1e-8
    # fold angle differences into (-pi/2, pi/2] before squaring
    wrap_orientation: bool = True
    # "classical": I_min uses 2*Gxy (Kass-Witkin); "printed": coefficient 1
    imin_variant: str = "classical"

    def __post_init__(self):
        if not self.orientation_set:
            raise ValueError("orientation_set must be nonempty")
        if not (self.sigma_s > 0 and self.sigma_o > 0):
            raise ValueError("sigma_s and sigma_o must be positive")
        if self.lam < 0:
            raise ValueError("lam must be >= 0")
        if not self.epsilon_r > 0:
            raise ValueError("epsilon_r must be positive")
        if self.imin_variant not in ("classical", "printed"):
            raise ValueError(f"unknown imin_variant {self.imin_variant!r}")
        object.__setattr__(self, "orientation_set", tuple(int(t) for t in self.orientation_set))


class StructureTensor(NamedTuple):
    gxx: np.ndarray
    gxy: np.ndarray
    gyy: np.ndarray


@dataclass
class EnergyReport:
    e_grad: float
    e_ori: float
    e_rel: float
    e_total: float
    grad_total: np.ndarray
    n: int

    def csv_row(self) -> str:
        return f"{self.e_grad:.10g},{self.e_ori:.10g},{self.e_rel:.10g},{self.e_total:.10g}"


CSV_HEADER = "e_grad,e_ori,e_rel,e_total"


@lru_cache(maxsize=None)
def _directional(theta: int) -> Kernel:
    return directional_kernel(theta)


@lru_cache(maxsize=None)
def _gauss(sigma: float) -> Kernel:
    return gaussian_kernel(sigma)


def fold_angle(a):
    """Map angles onto the half-open interval (-pi/2, pi/2]."""
    y = np.mod(np.asarray(a, dtype=np.float64) + np.pi / 2, np.pi) - np.pi / 2
    return np.where(y <= -np.pi / 2, y + np.pi, y)


def _pair(target, recon):
    t = np.asarray(target, dtype=np.float64)
    r = np.asarray(recon, dtype=np.float64)
    if t.shape != r.shape:
        raise DimensionError(f"target shape {t.shape} != recon shape {r.shape}")
    if t.ndim < 2:
        raise DimensionError("images must be at least 2-D")
    return t, r


def _npix(a: np.ndarray) -> int:
    return a.shape[-1] * a.shape[-2]


def _scalar(v):
    return float(v) if np.ndim(v) == 0 else v


def directional_gradients(image, params: EnergyParams = EnergyParams()) -> list[np.ndarray]:
    img = np.asarray(image, dtype=np.float64)
    return [convolve2d(img, _directional(t), BORDER) for t in params.orientation_set]


def e_grad(target, recon, params: EnergyParams = EnergyParams()):
    """Directional-gradient MSE and its gradient with respect to ``recon``."""
    t, r = _pair(target, recon)
    n = _npix(r)
    diff = r - t
    value = np.zeros(r.shape[:-2])
    grad = np.zeros_like(r)
    for theta in params.orientation_set:
        k = _directional(theta)
        g = convolve2d(diff, k, BORDER)
        value = value + (g * g).sum(axis=(-2, -1)) / n
        grad += convolve2d_adjoint(g, k, BORDER)
    m = len(params.orientation_set)
    return _scalar(value / m), grad * (2.0 / (n * m))


def structure_tensor(image, params: EnergyParams = EnergyParams()) -> StructureTensor:
    return _forward(np.asarray(image, dtype=np.float64), params, tensor_only=True)["tensor"]


def orientation_field(tensor: StructureTensor) -> np.ndarray:
    """Dominant gradient orientation in (-pi/2, pi/2]; 0 where the tensor is
    isotropic (a = b = 0)."""
    a = tensor.gxx - tensor.gyy
    b = 2.0 * tensor.gxy
    flat = np.hypot(a, b) <= DEGENERATE_RHO
    return np.where(flat, 0.0, fold_angle(0.5 * np.arctan2(b, a)))


def reliability_field(tensor: StructureTensor, params: EnergyParams = EnergyParams()) -> np.ndarray:
    return _reliability(tensor, params)["R"]


def _reliability(tensor: StructureTensor, params: EnergyParams) -> dict:
    gxx, gxy, gyy = tensor
    a = gxx - gyy
    b = 2.0 * gxy
    theta = orientation_field(tensor)
    phx = np.cos(2.0 * theta)
    phy = np.sin(2.0 * theta)
    go = _gauss(params.sigma_o)
    fx = convolve2d(phx, go, BORDER)
    fy = convolve2d(phy, go, BORDER)
    c = 2.0 if params.imin_variant == "classical" else 1.0
    s = gxx + gyy
    imin = 0.5 * (s - a * fx - c * gxy * fy)
    imax = s - imin
    guard = imax > params.epsilon_r
    safe = np.where(guard, imax, 1.0)
    raw = np.where(guard, 1.0 - imin / safe, 0.0)
    R = np.clip(raw, 0.0, 1.0)
    return dict(a=a, b=b, theta=theta, phx=phx, phy=phy, fx=fx, fy=fy, c=c, s=s,
                imin=imin, imax=imax, safe=safe, guard=guard, raw=raw, R=R)


def _forward(img: np.ndarray, params: EnergyParams, tensor_only: bool = False) -> dict:
    kx, ky = _directional(0), _directional(90)
    gx = convolve2d(img, kx, BORDER)
    gy = convolve2d(img, ky, BORDER)
    gs = _gauss(params.sigma_s)
    tensor = StructureTensor(
        convolve2d(gx * gx, gs, BORDER),
        convolve2d(gx * gy, gs, BORDER),
        convolve2d(gy * gy, gs, BORDER),
    )
    cache = dict(gx=gx, gy=gy, tensor=tensor)
    if not tensor_only:
        cache.update(_reliability(tensor, params))
    return cache


def _backward(cache: dict, params: EnergyParams, d_theta: np.ndarray, d_R: np.ndarray) -> np.ndarray:
    """Reverse pass: gradient of ``<d_theta, Theta> + <d_R, R>`` w.r.t. the image."""
    gxx, gxy, gyy = cache["tensor"]
    a, b, c = cache["a"], cache["b"], cache["c"]
    fx, fy, safe, imin = cache["fx"], cache["fy"], cache["safe"], cache["imin"]
    raw, guard = cache["raw"], cache["guard"]

    # R = clip(1 - imin/imax) on the guarded branch; zero slope on flat sides
    live = guard & (raw >= 0.0) & (raw <= 1.0)
    d_q = np.where(live, -d_R, 0.0)
    d_imin = d_q / safe
    d_imax = np.where(live, -d_q * imin / (safe * safe), 0.0)
    # imax = s - imin
    d_s = d_imax.copy()
    d_imin = d_imin - d_imax
    # imin = (s - a*fx - c*gxy*fy) / 2
    d_s += 0.5 * d_imin
    d_a = -0.5 * d_imin * fx
    d_gxy = -0.5 * c * d_imin * fy
    d_fx = -0.5 * d_imin * a
    d_fy = -0.5 * c * d_imin * gxy
    go = _gauss(params.sigma_o)
    d_phx = convolve2d_adjoint(d_fx, go, BORDER)
    d_phy = convolve2d_adjoint(d_fy, go, BORDER)
    theta = cache["theta"]
    d_th = d_theta - 2.0 * np.sin(2.0 * theta) * d_phx + 2.0 * np.cos(2.0 * theta) * d_phy
    # theta = atan2(b, a) / 2; the fold is a constant shift almost everywhere
    rho2 = a * a + b * b
    nz = np.sqrt(rho2) > DEGENERATE_RHO
    inv = np.where(nz, 1.0 / np.where(nz, rho2, 1.0), 0.0)
    d_a = d_a - 0.5 * d_th * b * inv
    d_b = 0.5 * d_th * a * inv
    d_gxy = d_gxy + 2.0 * d_b
    d_gxx = d_s + d_a
    d_gyy = d_s - d_a

    gs = _gauss(params.sigma_s)
    d_pxx = convolve2d_adjoint(d_gxx, gs, BORDER)
    d_pxy = convolve2d_adjoint(d_gxy, gs, BORDER)
    d_pyy = convolve2d_adjoint(d_gyy, gs, BORDER)
    gx, gy = cache["gx"], cache["gy"]
    d_gx = 2.0 * gx * d_pxx + gy * d_pxy
    d_gy = 2.0 * gy * d_pyy + gx * d_pxy
    return convolve2d_adjoint(d_gx, _directional(0), BORDER) + convolve2d_adjoint(d_gy, _directional(90), BORDER)


def orientation_difference(theta_t, theta_r, params: EnergyParams = EnergyParams()):
    d = np.asarray(theta_t) - np.asarray(theta_r)
    return fold_angle(d) if params.wrap_orientation else d


def e_ori_rel(target, recon, params: EnergyParams = EnergyParams(), target_cache: dict | None = None):
    """Orientation and reliability MSEs plus the gradient of their sum.

    ``target_cache`` may carry a precomputed forward pass of ``target`` (see
    :func:`target_features`) to avoid recomputing it every call.
    """
    t, r = _pair(target, recon)
    n = _npix(r)
    ct = target_cache if target_cache is not None else _forward(t, params)
    cr = _forward(r, params)
    d = orientation_difference(ct["theta"], cr["theta"], params)
    dr = ct["R"] - cr["R"]
    e_ori = (d * d).sum(axis=(-2, -1)) / n
    e_rel = (dr * dr).sum(axis=(-2, -1)) / n
    grad = _backward(cr, params, -2.0 * d / n, -2.0 * dr / n)
    return _scalar(e_ori), _scalar(e_rel), grad


def target_features(target, params: EnergyParams = EnergyParams()) -> dict:
    return _forward(np.asarray(target, dtype=np.float64), params)


def total_energy(target, recon, params: EnergyParams = EnergyParams(), target_cache: dict | None = None) -> EnergyReport:
    t, r = _pair(target, recon)
    eg, gg = e_grad(t, r, params)
    if params.lam == 0.0:
        # orientation terms are still reported; they just carry no weight
        eo, er, _ = e_ori_rel(t, r, params, target_cache)
        grad = gg
    else:
        eo, er, go = e_ori_rel(t, r, params, target_cache)
        grad = gg + params.lam * go
    et = eg + params.lam * (eo + er)
    return EnergyReport(_scalar(eg), _scalar(eo), _scalar(er), _scalar(et), grad, _npix(r))


def stripes(height: int, width: int, angle_deg: float, period: float, phase: float = 0.0) -> np.ndarray:
    """Sinusoidal stripes whose intensity varies along ``angle_deg``; values in [0, 1]."""
    yy, xx = np.mgrid[0:height, 0:width].astype(np.float64)
    a = math.radians(angle_deg)
    u = xx * math.cos(a) + yy * math.sin(a)
    return 0.5 + 0.5 * np.cos(2.0 * np.pi * u / period + phase)
