"""Fully convolutional autoencoder built from the layer kernels."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import layers as L


@dataclass
class LayerSpec:
    kind: str
    in_channels: int = 0
    out_channels: int = 0
    kernel: int = 0
    stride: int = 1
    negative_slope: float = 0.2
    # conv_transpose only: spatial size of the encoder input it mirrors
    out_size: tuple[int, int] | None = None

    PARAM_KINDS = ("conv", "conv_transpose", "batchnorm")
    KINDS = ("conv", "conv_transpose", "batchnorm", "relu", "leaky_relu", "sigmoid")


class Layer:
    """One layer: spec, parameters, non-trainable buffers and the last cache."""

    def __init__(self, spec: LayerSpec, params: dict | None = None, buffers: dict | None = None):
        if spec.kind not in LayerSpec.KINDS:
            raise ValueError(f"unknown layer kind {spec.kind!r}")
        self.spec = spec
        self.params: dict[str, np.ndarray] = params or {}
        self.buffers: dict[str, np.ndarray] = buffers or {}
        self.grads: dict[str, np.ndarray] = {}
        self._cache = None

    def forward(self, x: np.ndarray, mode: str) -> np.ndarray:
        s, p = self.spec, self.params
        if s.kind == "conv":
            out, self._cache = L.conv2d_forward(x, p["weight"], p["bias"], s.stride)
        elif s.kind == "conv_transpose":
            out, self._cache = L.conv_transpose2d_forward(x, p["weight"], p["bias"], s.stride, s.out_size)
        elif s.kind == "batchnorm":
            out, self._cache = L.batchnorm_forward(
                x, p["gamma"], p["beta"], self.buffers["running_mean"], self.buffers["running_var"], mode)
        else:
            out, self._cache = L.activation_forward(x, s.kind, s.negative_slope)
        return out

    def backward(self, grad: np.ndarray) -> np.ndarray:
        kind = self.spec.kind
        if kind == "conv":
            gx, gw, gb = L.conv2d_backward(grad, self._cache)
            self.grads = {"weight": gw, "bias": gb}
        elif kind == "conv_transpose":
            gx, gw, gb = L.conv_transpose2d_backward(grad, self._cache)
            self.grads = {"weight": gw, "bias": gb}
        elif kind == "batchnorm":
            gx, gg, gbeta = L.batchnorm_backward(grad, self._cache)
            self.grads = {"gamma": gg, "beta": gbeta}
        else:
            gx = L.activation_backward(grad, self._cache)
        return gx


@dataclass
class CaeModel:
    layers: list[Layer]
    input_shape: tuple[int, int, int]
    bottleneck_shape: tuple[int, int, int]
    activations: list[np.ndarray] = field(default_factory=list, repr=False)

    def forward(self, x: np.ndarray, mode: str = "train") -> np.ndarray:
        if tuple(x.shape[1:]) != tuple(self.input_shape):
            raise L.ShapeError(f"input shape {x.shape[1:]} != model input {self.input_shape}")
        self.activations = []
        for layer in self.layers:
            x = layer.forward(x, mode)
            self.activations.append(x)
        return x

    def backward(self, grad: np.ndarray) -> np.ndarray:
        for layer in reversed(self.layers):
            grad = layer.backward(grad)
        return grad

    def named_parameters(self) -> list[tuple[str, np.ndarray]]:
        out = []
        for i, layer in enumerate(self.layers):
            for name, arr in layer.params.items():
                out.append((f"{i}.{layer.spec.kind}.{name}", arr))
        return out

    def parameters(self) -> list[np.ndarray]:
        return [a for _, a in self.named_parameters()]

    def gradients(self) -> list[np.ndarray]:
        return [layer.grads[name] for layer in self.layers for name in layer.params]

    def buffers(self) -> list[np.ndarray]:
        return [a for layer in self.layers for a in layer.buffers.values()]

    def first_nonfinite(self) -> str | None:
        """Name the first layer whose output or parameters are not finite."""
        for i, layer in enumerate(self.layers):
            for name, arr in layer.params.items():
                if not np.all(np.isfinite(arr)):
                    return f"layer {i} ({layer.spec.kind}) parameter {name}"
            if i < len(self.activations) and not np.all(np.isfinite(self.activations[i])):
                return f"layer {i} ({layer.spec.kind}) output"
        return None

    def astype(self, dtype) -> "CaeModel":
        """Copy of the model with parameters and buffers cast to ``dtype``."""
        layers = [Layer(l.spec,
                        {k: v.astype(dtype) for k, v in l.params.items()},
                        {k: v.astype(dtype) for k, v in l.buffers.items()}) for l in self.layers]
        return CaeModel(layers, self.input_shape, self.bottleneck_shape)

    @property
    def dtype(self):
        return self.layers[0].params["weight"].dtype


def _conv_layer(kind, ci, co, k, stride, rng, dtype, out_size=None, std=0.02) -> Layer:
    spec = LayerSpec(kind, ci, co, k, stride, out_size=out_size)
    w = (rng.standard_normal((co, ci, k, k)) * std).astype(dtype)
    return Layer(spec, {"weight": w, "bias": np.zeros(co, dtype=dtype)})


def _bn_layer(c, dtype) -> Layer:
    spec = LayerSpec("batchnorm", c, c)
    return Layer(spec,
                 {"gamma": np.ones(c, dtype=dtype), "beta": np.zeros(c, dtype=dtype)},
                 {"running_mean": np.zeros(c, dtype=dtype), "running_var": np.ones(c, dtype=dtype)})


def stage_channels(stages: int, bottleneck_channels: int) -> list[int]:
    chans = [bottleneck_channels >> (stages - 1 - i) for i in range(stages)]
    if chans[0] < 1:
        raise ValueError(f"{bottleneck_channels} bottleneck channels cannot be halved {stages - 1} times")
    return chans


def build_cae(input_shape=(1, 64, 80), stages: int = 4, bottleneck_channels: int = 128,
              kernel_size: int = 4, seed: int = 0, negative_slope: float = 0.2,
              final_kernel: int = 3, dtype=np.float32) -> CaeModel:
    """Encoder of ``stages`` x [conv s2, batchnorm, relu] doubling channels up
    to ``bottleneck_channels``; decoder mirrors it with transposed convs and
    leaky ReLU; a stride-1 conv plus sigmoid maps back to one channel.
    """
    c_in, h, w = input_shape
    if stages < 1:
        raise ValueError("stages must be >= 1")
    if h < 2**stages or w < 2**stages:
        raise ValueError(f"input {h}x{w} too small for {stages} stride-2 stages")
    rng = np.random.default_rng(seed)
    chans = stage_channels(stages, bottleneck_channels)
    sizes = [(h, w)]
    for _ in range(stages):
        sizes.append((-(-sizes[-1][0] // 2), -(-sizes[-1][1] // 2)))

    layers: list[Layer] = []
    prev = c_in
    for c in chans:
        layers += [_conv_layer("conv", prev, c, kernel_size, 2, rng, dtype), _bn_layer(c, dtype),
                   Layer(LayerSpec("relu", c, c))]
        prev = c
    dec_out = chans[-2::-1] + [chans[0]]
    for i, c in enumerate(dec_out):
        layers += [_conv_layer("conv_transpose", prev, c, kernel_size, 2, rng, dtype, out_size=sizes[stages - 1 - i]),
                   _bn_layer(c, dtype),
                   Layer(LayerSpec("leaky_relu", c, c, negative_slope=negative_slope))]
        prev = c
    layers += [_conv_layer("conv", prev, c_in, final_kernel, 1, rng, dtype), Layer(LayerSpec("sigmoid", c_in, c_in))]
    return CaeModel(layers, tuple(input_shape), (chans[-1],) + sizes[-1])


def reconstruct(model: CaeModel, image: np.ndarray) -> np.ndarray:
    """Eval-mode forward pass of one gray image.

    Inputs whose size differs from the model input are center-padded (with
    white, 1.0) or center-cropped to fit; the output is mapped back the same
    way so it always has the input's dimensions.
    """
    img = np.asarray(image, dtype=np.float64)
    _, H, W = model.input_shape
    fitted, undo = _center_fit(img, H, W)
    x = fitted[None, None].astype(model.dtype)
    out = model.forward(x, mode="eval")[0, 0].astype(np.float64)
    return undo(out)


def _center_fit(img: np.ndarray, H: int, W: int):
    h, w = img.shape
    canvas = np.ones((H, W))
    # overlap of the two centered rectangles
    oy, ox = (H - h) // 2, (W - w) // 2
    sy0, dy0 = max(0, -oy), max(0, oy)
    sx0, dx0 = max(0, -ox), max(0, ox)
    hh, ww = min(h, H), min(w, W)
    canvas[dy0:dy0 + hh, dx0:dx0 + ww] = img[sy0:sy0 + hh, sx0:sx0 + ww]

    def undo(out):
        back = np.zeros((h, w))
        back[sy0:sy0 + hh, sx0:sx0 + ww] = out[dy0:dy0 + hh, dx0:dx0 + ww]
        return back

    return canvas, undo
