"""Versioned binary checkpoints.

Layout (all integers little-endian)::

    b"RFCK"                     magic
    u32  version                currently 1
    u32  n                      byte length of the table that follows
    n    UTF-8 JSON             layer-spec table, shapes, Adam step, RNG state
    f32  blobs                  per layer: params then buffers, declaration order
    f32  blobs                  Adam first moments, then second moments (if any)
"""
from __future__ import annotations

import json
import os
import struct
from dataclasses import asdict, dataclass

import numpy as np

from .model import CaeModel, Layer, LayerSpec
from .optim import AdamState

MAGIC = b"RFCK"
VERSION = 1

PARAM_NAMES = {"conv": ("weight", "bias"), "conv_transpose": ("weight", "bias"), "batchnorm": ("gamma", "beta")}
BUFFER_NAMES = {"batchnorm": ("running_mean", "running_var")}


class CheckpointError(ValueError):
    pass


class CheckpointMagicError(CheckpointError):
    pass


class CheckpointVersionError(CheckpointError):
    pass


class CheckpointTruncatedError(CheckpointError):
    pass


@dataclass
class Checkpoint:
    model: CaeModel
    adam: AdamState | None = None
    rng_state: dict | None = None
    iteration: int = 0
    meta: dict | None = None


def _shapes(spec: LayerSpec) -> dict[str, tuple[int, ...]]:
    if spec.kind in ("conv", "conv_transpose"):
        return {"weight": (spec.out_channels, spec.in_channels, spec.kernel, spec.kernel), "bias": (spec.out_channels,)}
    if spec.kind == "batchnorm":
        c = spec.out_channels
        return {"gamma": (c,), "beta": (c,), "running_mean": (c,), "running_var": (c,)}
    return {}


def _f32(a: np.ndarray) -> bytes:
    return np.ascontiguousarray(a, dtype="<f4").tobytes()


def encode_checkpoint(ckpt: Checkpoint) -> bytes:
    model = ckpt.model
    table = {
        "input_shape": list(model.input_shape),
        "bottleneck_shape": list(model.bottleneck_shape),
        "layers": [asdict(l.spec) for l in model.layers],
        "adam_t": None if ckpt.adam is None else ckpt.adam.t,
        "rng_state": ckpt.rng_state,
        "iteration": ckpt.iteration,
        "meta": ckpt.meta or {},
    }
    head = json.dumps(table, sort_keys=True).encode("utf-8")
    parts = [MAGIC, struct.pack("<II", VERSION, len(head)), head]
    for layer in model.layers:
        for name in PARAM_NAMES.get(layer.spec.kind, ()):
            parts.append(_f32(layer.params[name]))
        for name in BUFFER_NAMES.get(layer.spec.kind, ()):
            parts.append(_f32(layer.buffers[name]))
    if ckpt.adam is not None:
        parts += [_f32(a) for a in ckpt.adam.m]
        parts += [_f32(a) for a in ckpt.adam.v]
    return b"".join(parts)


class _Reader:
    def __init__(self, buf: bytes):
        self.buf, self.pos = buf, 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.buf):
            raise CheckpointTruncatedError(f"checkpoint truncated at byte {len(self.buf)}, needed {self.pos + n}")
        out = self.buf[self.pos:self.pos + n]
        self.pos += n
        return out

    def array(self, shape) -> np.ndarray:
        count = int(np.prod(shape))
        return np.frombuffer(self.take(4 * count), dtype="<f4").astype(np.float32).reshape(shape)


def decode_checkpoint(buf: bytes) -> Checkpoint:
    if buf[:4] != MAGIC:
        raise CheckpointMagicError(f"bad checkpoint magic {buf[:4]!r}")
    r = _Reader(buf)
    r.take(4)
    version, n = struct.unpack("<II", r.take(8))
    if version != VERSION:
        raise CheckpointVersionError(f"unsupported checkpoint version {version}")
    try:
        table = json.loads(r.take(n).decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"unreadable layer table: {exc}") from exc
    layers = []
    for d in table["layers"]:
        if d.get("out_size") is not None:
            d["out_size"] = tuple(d["out_size"])
        spec = LayerSpec(**d)
        shapes = _shapes(spec)
        params = {k: r.array(shapes[k]) for k in PARAM_NAMES.get(spec.kind, ())}
        buffers = {k: r.array(shapes[k]) for k in BUFFER_NAMES.get(spec.kind, ())}
        layers.append(Layer(spec, params, buffers))
    model = CaeModel(layers, tuple(table["input_shape"]), tuple(table["bottleneck_shape"]))
    adam = None
    if table["adam_t"] is not None:
        shapes = [p.shape for p in model.parameters()]
        m = [r.array(s) for s in shapes]
        v = [r.array(s) for s in shapes]
        adam = AdamState(m, v, table["adam_t"])
    if r.pos != len(buf):
        raise CheckpointError(f"{len(buf) - r.pos} trailing bytes after checkpoint payload")
    return Checkpoint(model, adam, table["rng_state"], table["iteration"], table["meta"])


def save_checkpoint(path: str | os.PathLike, ckpt: Checkpoint) -> None:
    data = encode_checkpoint(ckpt)
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(data)
    os.replace(tmp, path)


def load_checkpoint(path: str | os.PathLike) -> Checkpoint:
    with open(path, "rb") as fh:
        return decode_checkpoint(fh.read())
