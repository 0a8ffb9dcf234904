"""Forward/backward kernels for the autoencoder layers.

Tensors are NCHW arrays. Convolutions here are cross-correlations (the usual
neural-network convention) with zero padding. Each ``*_forward`` returns the
output and a cache; the matching ``*_backward`` consumes the cache.
"""
from __future__ import annotations

import numpy as np

BN_EPS = 1e-5
BN_MOMENTUM = 0.9


class ShapeError(ValueError):
    pass


def same_geometry(in_size: int, kernel: int, stride: int) -> tuple[int, int, int]:
    """Output size and (before, after) zero padding for ceil-mode convolution."""
    out = -(-in_size // stride)
    total = max((out - 1) * stride + kernel - in_size, 0)
    return out, total // 2, total - total // 2


def _taps(k: int):
    for p in range(k):
        for q in range(k):
            yield p, q


def conv2d_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray, stride: int = 2):
    """Strided convolution; output spatial size is ``ceil(in / stride)``.

    ``w`` has shape ``(out_channels, in_channels, k, k)``.
    """
    n, c, h, wd = x.shape
    co, ci, k, _ = w.shape
    if c != ci:
        raise ShapeError(f"input has {c} channels, layer expects {ci}")
    oh, pt, pb = same_geometry(h, k, stride)
    ow, pl, pr = same_geometry(wd, k, stride)
    xp = np.pad(x, ((0, 0), (0, 0), (pt, pb), (pl, pr)))
    out = np.zeros((n, co, oh, ow), dtype=x.dtype)
    for p, q in _taps(k):
        patch = xp[:, :, p:p + stride * (oh - 1) + 1:stride, q:q + stride * (ow - 1) + 1:stride]
        out += np.einsum("nchw,oc->nohw", patch, w[:, :, p, q], optimize=True)
    out += b.reshape(1, -1, 1, 1)
    cache = (x.shape, xp, w, stride, (pt, pl))
    return out, cache


def conv2d_backward(grad_out: np.ndarray, cache):
    xshape, xp, w, stride, (pt, pl) = cache
    n, c, h, wd = xshape
    co, ci, k, _ = w.shape
    oh, ow = grad_out.shape[2:]
    grad_xp = np.zeros_like(xp)
    grad_w = np.zeros_like(w)
    for p, q in _taps(k):
        sl = (slice(None), slice(None),
              slice(p, p + stride * (oh - 1) + 1, stride),
              slice(q, q + stride * (ow - 1) + 1, stride))
        grad_w[:, :, p, q] = np.einsum("nohw,nchw->oc", grad_out, xp[sl], optimize=True)
        grad_xp[sl] += np.einsum("nohw,oc->nchw", grad_out, w[:, :, p, q], optimize=True)
    grad_b = grad_out.sum(axis=(0, 2, 3))
    grad_x = grad_xp[:, :, pt:pt + h, pl:pl + wd]
    return grad_x, grad_w, grad_b


def conv_transpose2d_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray, stride: int = 2,
                             out_size: tuple[int, int] | None = None):
    """Fractionally-strided convolution, the adjoint of :func:`conv2d_forward`.

    ``out_size`` names the spatial size of the conv input this layer mirrors;
    it defaults to exactly ``stride`` times the input size. ``w`` has shape
    ``(out_channels, in_channels, k, k)``; with ``w = w_conv.transpose(1, 0, 2, 3)``
    this layer is the exact linear adjoint of the conv (bias aside).
    """
    n, c, h, wd = x.shape
    co, ci, k, _ = w.shape
    if c != ci:
        raise ShapeError(f"input has {c} channels, layer expects {ci}")
    H, W = out_size if out_size is not None else (h * stride, wd * stride)
    oh, pt, pb = same_geometry(H, k, stride)
    ow, pl, pr = same_geometry(W, k, stride)
    if (oh, ow) != (h, wd):
        raise ShapeError(f"input {h}x{wd} cannot be upsampled to {H}x{W} with stride {stride}")
    yp = np.zeros((n, co, H + pt + pb, W + pl + pr), dtype=x.dtype)
    for p, q in _taps(k):
        sl = (slice(None), slice(None),
              slice(p, p + stride * (h - 1) + 1, stride),
              slice(q, q + stride * (wd - 1) + 1, stride))
        yp[sl] += np.einsum("nchw,oc->nohw", x, w[:, :, p, q], optimize=True)
    out = yp[:, :, pt:pt + H, pl:pl + W] + b.reshape(1, -1, 1, 1)
    cache = (x, w, stride, (pt, pb, pl, pr))
    return out, cache


def conv_transpose2d_backward(grad_out: np.ndarray, cache):
    x, w, stride, (pt, pb, pl, pr) = cache
    n, c, h, wd = x.shape
    co, ci, k, _ = w.shape
    gp = np.pad(grad_out, ((0, 0), (0, 0), (pt, pb), (pl, pr)))
    grad_x = np.zeros_like(x)
    grad_w = np.zeros_like(w)
    for p, q in _taps(k):
        patch = gp[:, :, p:p + stride * (h - 1) + 1:stride, q:q + stride * (wd - 1) + 1:stride]
        grad_x += np.einsum("nohw,oc->nchw", patch, w[:, :, p, q], optimize=True)
        grad_w[:, :, p, q] = np.einsum("nohw,nchw->oc", patch, x, optimize=True)
    grad_b = grad_out.sum(axis=(0, 2, 3))
    return grad_x, grad_w, grad_b


def batchnorm_forward(x: np.ndarray, gamma: np.ndarray, beta: np.ndarray,
                      running_mean: np.ndarray, running_var: np.ndarray, mode: str = "train"):
    """Per-channel batch normalization.

    In train mode the running statistics are updated in place with momentum
    ``BN_MOMENTUM`` (``running = 0.9 * running + 0.1 * batch``).
    """
    if mode == "train":
        n, _, h, w = x.shape
        if n * h * w < 2:
            raise ShapeError("batchnorm in train mode needs at least two values per channel")
        mean = x.mean(axis=(0, 2, 3))
        var = x.var(axis=(0, 2, 3))
        running_mean *= BN_MOMENTUM
        running_mean += (1 - BN_MOMENTUM) * mean
        running_var *= BN_MOMENTUM
        running_var += (1 - BN_MOMENTUM) * var
    elif mode == "eval":
        mean, var = running_mean, running_var
    else:
        raise ValueError(f"mode must be 'train' or 'eval', got {mode!r}")
    inv_std = 1.0 / np.sqrt(var + BN_EPS)
    xhat = (x - mean.reshape(1, -1, 1, 1)) * inv_std.reshape(1, -1, 1, 1)
    out = gamma.reshape(1, -1, 1, 1) * xhat + beta.reshape(1, -1, 1, 1)
    return out, (xhat, inv_std, gamma, mode)


def batchnorm_backward(grad_out: np.ndarray, cache):
    xhat, inv_std, gamma, mode = cache
    grad_gamma = (grad_out * xhat).sum(axis=(0, 2, 3))
    grad_beta = grad_out.sum(axis=(0, 2, 3))
    g = grad_out * gamma.reshape(1, -1, 1, 1)
    if mode == "eval":
        return g * inv_std.reshape(1, -1, 1, 1), grad_gamma, grad_beta
    m = xhat.shape[0] * xhat.shape[2] * xhat.shape[3]
    mean_g = g.sum(axis=(0, 2, 3), keepdims=True) / m
    mean_gx = (g * xhat).sum(axis=(0, 2, 3), keepdims=True) / m
    grad_x = (g - mean_g - xhat * mean_gx) * inv_std.reshape(1, -1, 1, 1)
    return grad_x, grad_gamma, grad_beta


def activation_forward(x: np.ndarray, kind: str, negative_slope: float = 0.2):
    if kind == "relu":
        out = np.maximum(x, 0)
    elif kind == "leaky_relu":
        out = np.where(x > 0, x, negative_slope * x)
    elif kind == "sigmoid":
        # split by sign so exp never overflows
        e = np.exp(-np.abs(x))
        out = np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
    else:
        raise ValueError(f"unknown activation {kind!r}")
    return out.astype(x.dtype, copy=False), (x, out, kind, negative_slope)


def activation_backward(grad_out: np.ndarray, cache):
    x, out, kind, slope = cache
    if kind == "relu":
        return grad_out * (x > 0)
    if kind == "leaky_relu":
        return grad_out * np.where(x > 0, 1.0, slope).astype(x.dtype)
    return grad_out * out * (1 - out)

