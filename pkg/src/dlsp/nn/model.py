"""Network description and the model built from it.

An ArchSpec pins the whole topology as data: a stack of valid (unpadded)
strided convolutions, each followed by ReLU, then a flatten, hidden
fully-connected layers with ReLU, and a linear classifier head.  Parameter
tensors are named conv1_w, conv1_b, ..., fc1_w, ...; the classifier is
fc<len(fcs)+1>.  Weights travel in a small tagged binary format so a file
written by one process can be validated against the architecture another
process expects.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, replace

import numpy as np

from .core import (
    conv_backward,
    conv_forward,
    conv_out_size,
    fc_backward,
    fc_forward,
    relu,
    relu_backward,
    softmax,
    softmax_cross_entropy,
)

WEIGHTS_MAGIC = b"DLSPW001"


class BadMagic(ValueError):
    """File does not start with the weights magic."""


class Truncated(ValueError):
    """File ended before the declared tensors were read."""


class ShapeMismatch(ValueError):
    """Input tensor does not match what the model expects."""


class ShapeMismatchWithArch(ShapeMismatch):
    """Stored tensors do not line up with the target architecture."""


@dataclass(frozen=True)
class ConvSpec:
    kernel: int
    stride: int
    out_channels: int

    def __post_init__(self):
        if self.kernel < 1 or self.stride < 1 or self.out_channels < 1:
            raise ValueError(f"bad conv spec {self}")


@dataclass(frozen=True)
class ArchSpec:
    """Topology of the classifier; defaults are the production network."""

    input_size: int = 101
    in_channels: int = 1
    convs: tuple = (
        ConvSpec(5, 2, 24),
        ConvSpec(5, 2, 36),
        ConvSpec(5, 2, 48),
        ConvSpec(3, 1, 64),
    )
    fcs: tuple = (256, 64)
    n_classes: int = 10

    def __post_init__(self):
        object.__setattr__(self, "convs", tuple(self.convs))
        object.__setattr__(self, "fcs", tuple(self.fcs))
        if self.input_size < 1 or self.in_channels < 1 or self.n_classes < 2:
            raise ValueError("degenerate architecture")
        self.spatial_sizes()  # raises if a conv does not fit

    def spatial_sizes(self) -> list:
        """Feature-map edge length after the input and after each conv."""
        sizes = [self.input_size]
        for conv in self.convs:
            sizes.append(conv_out_size(sizes[-1], conv.kernel, conv.stride))
        return sizes

    def flat_size(self) -> int:
        channels = self.convs[-1].out_channels if self.convs else self.in_channels
        return self.spatial_sizes()[-1] ** 2 * channels

    def tensor_shapes(self) -> dict:
        """Ordered name -> shape map for every parameter tensor."""
        shapes = {}
        c_in = self.in_channels
        for i, conv in enumerate(self.convs, start=1):
            shapes[f"conv{i}_w"] = (conv.kernel, conv.kernel, c_in, conv.out_channels)
            shapes[f"conv{i}_b"] = (conv.out_channels,)
            c_in = conv.out_channels
        width = self.flat_size()
        for i, out in enumerate(self.fcs, start=1):
            shapes[f"fc{i}_w"] = (width, out)
            shapes[f"fc{i}_b"] = (out,)
            width = out
        head = len(self.fcs) + 1
        shapes[f"fc{head}_w"] = (width, self.n_classes)
        shapes[f"fc{head}_b"] = (self.n_classes,)
        return shapes

    def param_count(self) -> int:
        return sum(int(np.prod(s)) for s in self.tensor_shapes().values())


REDUCED_ARCH = ArchSpec(
    input_size=16,
    convs=(ConvSpec(3, 2, 4), ConvSpec(3, 2, 6)),
    fcs=(),
    n_classes=3,
)


@dataclass(frozen=True)
class CnnModel:
    arch: ArchSpec
    params: dict

    @property
    def dtype(self):
        return next(iter(self.params.values())).dtype


def build_model(arch: ArchSpec = ArchSpec(), seed: int = 0) -> CnnModel:
    """He-initialised weights, zero biases, float32."""
    rng = np.random.default_rng(seed)
    params = {}
    for name, shape in arch.tensor_shapes().items():
        if name.endswith("_b"):
            params[name] = np.zeros(shape, dtype=np.float32)
            continue
        fan_in = int(np.prod(shape[:-1]))
        std = np.sqrt(2.0 / fan_in)
        params[name] = rng.normal(0.0, std, size=shape).astype(np.float32)
    return CnnModel(arch=arch, params=params)


def cast_model(model: CnnModel, dtype) -> CnnModel:
    return replace(model, params={k: v.astype(dtype) for k, v in model.params.items()})


def _check_input(arch: ArchSpec, x: np.ndarray):
    expected = (arch.input_size, arch.input_size, arch.in_channels)
    if x.ndim != 4 or x.shape[1:] != expected:
        raise ShapeMismatch(f"want (batch, {expected[0]}, {expected[1]}, {expected[2]}), got {x.shape}")


def forward_with_caches(model: CnnModel, x: np.ndarray):
    """Logits plus everything the backward pass needs."""
    x = np.ascontiguousarray(x, dtype=model.dtype)
    _check_input(model.arch, x)
    conv_caches = []
    h = x
    for i, conv in enumerate(model.arch.convs, start=1):
        h, c_conv = conv_forward(h, model.params[f"conv{i}_w"], model.params[f"conv{i}_b"], conv.stride)
        h, c_relu = relu(h)
        conv_caches.append((c_conv, c_relu))
    pre_flat_shape = h.shape
    d = h.reshape(h.shape[0], -1)
    fc_caches = []
    for i in range(1, len(model.arch.fcs) + 1):
        d, c_fc = fc_forward(d, model.params[f"fc{i}_w"], model.params[f"fc{i}_b"])
        d, c_relu = relu(d)
        fc_caches.append((c_fc, c_relu))
    head = len(model.arch.fcs) + 1
    logits, head_cache = fc_forward(d, model.params[f"fc{head}_w"], model.params[f"fc{head}_b"])
    return logits, (conv_caches, pre_flat_shape, fc_caches, head_cache)


def backward_from_logits(model: CnnModel, caches, dlogits: np.ndarray):
    """Gradient of a scalar through the network, given d(scalar)/d(logits).

    Returns (dx, grads) with grads keyed like model.params.
    """
    conv_caches, pre_flat_shape, fc_caches, head_cache = caches
    grads = {}
    head = len(model.arch.fcs) + 1
    d, grads[f"fc{head}_w"], grads[f"fc{head}_b"] = fc_backward(
        dlogits, head_cache, model.params[f"fc{head}_w"]
    )
    for i in range(len(model.arch.fcs), 0, -1):
        c_fc, c_relu = fc_caches[i - 1]
        d = relu_backward(d, c_relu)
        d, grads[f"fc{i}_w"], grads[f"fc{i}_b"] = fc_backward(d, c_fc, model.params[f"fc{i}_w"])
    d = d.reshape(pre_flat_shape)
    for i in range(len(model.arch.convs), 0, -1):
        c_conv, c_relu = conv_caches[i - 1]
        d = relu_backward(d, c_relu)
        d, grads[f"conv{i}_w"], grads[f"conv{i}_b"] = conv_backward(d, c_conv)
    return d, grads


def forward(model: CnnModel, x: np.ndarray) -> np.ndarray:
    logits, _ = forward_with_caches(model, x)
    return logits


def loss_and_grads(model: CnnModel, x: np.ndarray, y: np.ndarray):
    """Mean cross-entropy over the batch and gradients for every tensor."""
    logits, caches = forward_with_caches(model, x)
    loss, dlogits = softmax_cross_entropy(logits, np.asarray(y))
    _, grads = backward_from_logits(model, caches, dlogits)
    return loss, grads


def predict_proba(model: CnnModel, x: np.ndarray, batch_size: int = 256) -> np.ndarray:
    x = np.asarray(x)
    out = []
    for lo in range(0, x.shape[0], batch_size):
        out.append(softmax(forward(model, x[lo : lo + batch_size])))
    return np.concatenate(out, axis=0) if out else np.zeros((0, model.arch.n_classes))


def predict(model: CnnModel, x: np.ndarray, batch_size: int = 256) -> np.ndarray:
    """Class ids; ties resolve to the lower index."""
    x = np.asarray(x)
    out = []
    for lo in range(0, x.shape[0], batch_size):
        out.append(np.argmax(forward(model, x[lo : lo + batch_size]), axis=1))
    return np.concatenate(out, axis=0).astype(np.int64) if out else np.zeros(0, dtype=np.int64)


# ---------------------------------------------------------------------------
# Weights file


def save_weights(model: CnnModel, path):
    """Tagged little-endian container; tensor order follows the arch."""
    chunks = [WEIGHTS_MAGIC, struct.pack("<I", len(model.params))]
    for name in model.arch.tensor_shapes():
        arr = np.ascontiguousarray(model.params[name], dtype="<f4")
        encoded = name.encode("utf-8")
        chunks.append(struct.pack("<H", len(encoded)))
        chunks.append(encoded)
        chunks.append(struct.pack("<B", arr.ndim))
        chunks.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        chunks.append(arr.tobytes())
    with open(path, "wb") as fh:
        fh.write(b"".join(chunks))


def load_weights(path, arch: ArchSpec) -> CnnModel:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < len(WEIGHTS_MAGIC):
        raise Truncated("file shorter than the magic")
    if raw[: len(WEIGHTS_MAGIC)] != WEIGHTS_MAGIC:
        raise BadMagic(f"want {WEIGHTS_MAGIC!r}, got {raw[:len(WEIGHTS_MAGIC)]!r}")

    pos = len(WEIGHTS_MAGIC)

    def take(n: int, what: str) -> bytes:
        nonlocal pos
        if pos + n > len(raw):
            raise Truncated(f"file ended inside {what}")
        pos += n
        return raw[pos - n : pos]

    (count,) = struct.unpack("<I", take(4, "tensor count"))
    params = {}
    for _ in range(count):
        (name_len,) = struct.unpack("<H", take(2, "name length"))
        name = take(name_len, "tensor name").decode("utf-8")
        (ndim,) = struct.unpack("<B", take(1, f"{name} ndim"))
        shape = struct.unpack(f"<{ndim}I", take(4 * ndim, f"{name} dims"))
        n_items = int(np.prod(shape, dtype=np.int64)) if ndim else 1
        payload = take(4 * n_items, f"{name} payload")
        if name in params:
            raise ShapeMismatchWithArch(f"duplicate tensor {name}")
        params[name] = np.frombuffer(payload, dtype="<f4").reshape(shape).copy()
    if pos != len(raw):
        raise ValueError(f"{len(raw) - pos} trailing bytes after the last tensor")

    expected = arch.tensor_shapes()
    if set(params) != set(expected):
        missing = sorted(set(expected) - set(params))
        extra = sorted(set(params) - set(expected))
        raise ShapeMismatchWithArch(f"tensor names differ: missing {missing}, extra {extra}")
    for name, shape in expected.items():
        if params[name].shape != shape:
            raise ShapeMismatchWithArch(f"{name}: file has {params[name].shape}, arch wants {shape}")
    return CnnModel(arch=arch, params={name: params[name] for name in expected})
