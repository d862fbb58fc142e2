"""A small differentiable classifier written directly in numpy.

Supported layers are 1-D convolution, dense, ReLU, global average pooling
and a final softmax.  All parameters live in one flat float64 vector so
that optimizers and the finite-difference checker can treat the model as
``theta -> probabilities``.
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Sequence, Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ArgumentError, FormatError, NumericsError, ShapeError

__all__ = [
    "Conv1d",
    "Dense",
    "ReLU",
    "GlobalAvgPool",
    "Softmax",
    "Classifier",
    "GradientBundle",
    "default_architecture",
    "build_classifier",
    "forward",
    "backward",
    "loss_and_grad",
    "gradient_check",
    "sgd_step",
    "save_model",
    "load_model",
    "layers_from_config",
]


@dataclass(frozen=True)
class Conv1d:
    kernel: int
    channels: int
    stride: int = 1


@dataclass(frozen=True)
class Dense:
    units: int


@dataclass(frozen=True)
class ReLU:
    pass


@dataclass(frozen=True)
class GlobalAvgPool:
    pass


@dataclass(frozen=True)
class Softmax:
    pass


LayerSpec = Union[Conv1d, Dense, ReLU, GlobalAvgPool, Softmax]
_LAYER_TYPES = {cls.__name__.lower(): cls for cls in (Conv1d, Dense, ReLU, GlobalAvgPool, Softmax)}


def layer_to_dict(layer) -> dict:
    d = {"type": type(layer).__name__.lower()}
    d.update(layer.__dict__)
    return d


def layers_from_config(items: Sequence[dict]) -> list:
    """Build layer specs from dicts such as ``{"type": "conv1d", "kernel": 7, "channels": 16}``."""
    layers = []
    for item in items:
        item = dict(item)
        kind = str(item.pop("type")).lower().replace("_", "")
        if kind not in _LAYER_TYPES:
            raise ArgumentError(f"unknown layer type {kind!r}")
        layers.append(_LAYER_TYPES[kind](**item))
    return layers


def default_architecture(n_classes: int) -> list:
    # No global pooling: the readout must see where features occur, since
    # classes can differ only in the order of the same local shapes.
    return [
        Conv1d(7, 16), ReLU(),
        Conv1d(5, 16, stride=4), ReLU(),
        Dense(n_classes),
        Softmax(),
    ]


@dataclass
class _Slot:
    """Where one layer's weight and bias live inside the flat vector."""

    w_shape: tuple
    w_slice: slice
    b_slice: slice


@dataclass
class Classifier:
    layers: list
    params: np.ndarray
    input_shape: tuple
    n_classes: int
    _slots: list = field(default=None, repr=False)

    def __post_init__(self):
        self.input_shape = tuple(int(v) for v in self.input_shape)
        slots, n_params = _plan(self.layers, self.input_shape, self.n_classes)
        self.params = np.asarray(self.params, dtype=np.float64)
        if self.params.shape != (n_params,):
            raise ShapeError(f"expected {n_params} parameters, got {self.params.shape}")
        self._slots = slots

    @property
    def n_params(self) -> int:
        return self.params.size

    def weights(self, i: int):
        s = self._slots[i]
        return self.params[s.w_slice].reshape(s.w_shape), self.params[s.b_slice]

    def with_params(self, params: np.ndarray) -> "Classifier":
        return replace(self, params=np.array(params, dtype=np.float64), _slots=None)

    def __call__(self, batch: np.ndarray) -> np.ndarray:
        return forward(self, batch)


@dataclass
class GradientBundle:
    loss: float
    grad: np.ndarray


def _plan(layers, input_shape, n_classes):
    if not layers or not isinstance(layers[-1], Softmax):
        raise ShapeError("the final layer must be Softmax")
    dense = [l for l in layers[:-1] if not isinstance(l, ReLU)]
    if not dense or not isinstance(dense[-1], Dense) or dense[-1].units != n_classes:
        raise ShapeError(f"the layer before Softmax must be Dense({n_classes})")
    if len(input_shape) != 2:
        raise ShapeError("input_shape must be (n_dims, length)")
    shape = tuple(input_shape)
    slots, offset = [], 0
    for layer in layers:
        slot = None
        if isinstance(layer, Conv1d):
            if len(shape) != 2:
                raise ShapeError("Conv1d needs (channels, length) input")
            c_in, length = shape
            out_len = (length - layer.kernel) // layer.stride + 1
            if layer.kernel < 1 or layer.stride < 1 or out_len < 1:
                raise ShapeError(f"{layer} does not fit input length {length}")
            w_shape = (layer.channels, c_in, layer.kernel)
            n_w = int(np.prod(w_shape))
            slot = _Slot(w_shape, slice(offset, offset + n_w), slice(offset + n_w, offset + n_w + layer.channels))
            offset += n_w + layer.channels
            shape = (layer.channels, out_len)
        elif isinstance(layer, Dense):
            fan_in = int(np.prod(shape))
            w_shape = (fan_in, layer.units)
            n_w = fan_in * layer.units
            slot = _Slot(w_shape, slice(offset, offset + n_w), slice(offset + n_w, offset + n_w + layer.units))
            offset += n_w + layer.units
            shape = (layer.units,)
        elif isinstance(layer, GlobalAvgPool):
            if len(shape) != 2:
                raise ShapeError("GlobalAvgPool needs (channels, length) input")
            shape = (shape[0],)
        elif not isinstance(layer, (ReLU, Softmax)):
            raise ShapeError(f"unsupported layer {layer!r}")
        slots.append(slot)
    return slots, offset


def build_classifier(input_shape, n_classes: int, layers=None, seed: int = 0) -> Classifier:
    """Create a classifier with seeded He-uniform weights and zero biases."""
    layers = list(layers) if layers is not None else default_architecture(n_classes)
    slots, n_params = _plan(layers, input_shape, n_classes)
    rng = np.random.default_rng(seed)
    params = np.zeros(n_params)
    for layer, slot in zip(layers, slots):
        if slot is None:
            continue
        if isinstance(layer, Conv1d):
            fan_in = slot.w_shape[1] * slot.w_shape[2]
        else:
            fan_in = slot.w_shape[0]
        limit = np.sqrt(6.0 / fan_in)
        n_w = slot.w_slice.stop - slot.w_slice.start
        params[slot.w_slice] = rng.uniform(-limit, limit, n_w)
    return Classifier(layers, params, tuple(input_shape), n_classes)


# ---------------------------------------------------------------------------
# forward / backward


def _check_batch(model: Classifier, batch) -> np.ndarray:
    x = np.asarray(batch, dtype=np.float64)
    if x.ndim != 3 or x.shape[1:] != model.input_shape:
        raise ShapeError(f"batch shape {x.shape} does not match (B, {model.input_shape[0]}, {model.input_shape[1]})")
    return x


def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _forward(model: Classifier, x: np.ndarray):
    cache = []
    for i, layer in enumerate(model.layers):
        cache.append(x)
        if isinstance(layer, Conv1d):
            W, b = model.weights(i)
            win = sliding_window_view(x, layer.kernel, axis=2)[:, :, :: layer.stride, :]
            x = np.einsum("bclk,ock->bol", win, W) + b[None, :, None]
        elif isinstance(layer, Dense):
            W, b = model.weights(i)
            x = x.reshape(len(x), -1) @ W + b
        elif isinstance(layer, ReLU):
            x = np.maximum(x, 0.0)
        elif isinstance(layer, GlobalAvgPool):
            x = x.mean(axis=2)
        elif isinstance(layer, Softmax):
            x = _softmax(x)
    return x, cache


def _backward(model: Classifier, cache, out: np.ndarray, upstream: np.ndarray) -> np.ndarray:
    grad = np.zeros_like(model.params)
    g = upstream
    for i in range(len(model.layers) - 1, -1, -1):
        layer, x = model.layers[i], cache[i]
        if isinstance(layer, Softmax):
            g = out * (g - (g * out).sum(axis=1, keepdims=True))
        elif isinstance(layer, Dense):
            W, _ = model.weights(i)
            slot = model._slots[i]
            flat = x.reshape(len(x), -1)
            grad[slot.w_slice] = (flat.T @ g).ravel()
            grad[slot.b_slice] = g.sum(axis=0)
            g = (g @ W.T).reshape(x.shape)
        elif isinstance(layer, ReLU):
            g = g * (x > 0)
        elif isinstance(layer, GlobalAvgPool):
            g = np.repeat(g[:, :, None] / x.shape[2], x.shape[2], axis=2)
        elif isinstance(layer, Conv1d):
            W, _ = model.weights(i)
            slot = model._slots[i]
            win = sliding_window_view(x, layer.kernel, axis=2)[:, :, :: layer.stride, :]
            grad[slot.w_slice] = np.einsum("bol,bclk->ock", g, win).ravel()
            grad[slot.b_slice] = g.sum(axis=(0, 2))
            gx = np.zeros_like(x)
            out_len = g.shape[2]
            span = layer.stride * (out_len - 1) + 1
            for k in range(layer.kernel):
                gx[:, :, k:k + span:layer.stride] += np.einsum("bol,oc->bcl", g, W[:, :, k])
            g = gx
    return grad


def forward(model: Classifier, batch) -> np.ndarray:
    """Class probabilities, shape ``(B, n_classes)``."""
    x = _check_batch(model, batch)
    if len(x) == 0:
        return np.zeros((0, model.n_classes))
    return _forward(model, x)[0]


def backward(model: Classifier, batch, upstream, loss: float = 0.0) -> GradientBundle:
    """Gradient of ``sum(upstream * forward(batch))`` with respect to the parameters.

    ``loss`` is passed through to the returned bundle unchanged.
    """
    x = _check_batch(model, batch)
    upstream = np.asarray(upstream, dtype=np.float64)
    if upstream.shape != (len(x), model.n_classes):
        raise ShapeError(f"upstream shape {upstream.shape} != {(len(x), model.n_classes)}")
    if len(x) == 0:
        return GradientBundle(loss, np.zeros_like(model.params))
    out, cache = _forward(model, x)
    return GradientBundle(loss, _backward(model, cache, out, upstream))


LossFn = Callable[[np.ndarray, np.ndarray], tuple]


def loss_and_grad(model: Classifier, loss: LossFn, batch, labels) -> GradientBundle:
    """One forward and one backward pass for ``loss(probs, labels) -> (value, dvalue/dprobs)``."""
    x = _check_batch(model, batch)
    out, cache = _forward(model, x)
    value, dprobs = loss(out, np.asarray(labels))
    return GradientBundle(float(value), _backward(model, cache, out, dprobs))


def gradient_check(model: Classifier, loss: LossFn, batch, labels, h: float = 1e-5) -> float:
    """Largest ``|analytic - central difference| / max(1, |analytic|)`` over all parameters."""
    if not h > 0:
        raise ArgumentError(f"step h must be positive, got {h}")
    x = _check_batch(model, batch)
    labels = np.asarray(labels)
    analytic = loss_and_grad(model, loss, x, labels).grad
    theta = model.params.copy()
    worst = 0.0
    for j in range(theta.size):
        theta[j] += h
        up = loss(forward(model.with_params(theta), x), labels)[0]
        theta[j] -= 2 * h
        down = loss(forward(model.with_params(theta), x), labels)[0]
        theta[j] += h
        numeric = (up - down) / (2 * h)
        err = abs(analytic[j] - numeric) / max(1.0, abs(analytic[j]))
        worst = max(worst, err)
    return worst


def sgd_step(model: Classifier, grads: GradientBundle, lr: float) -> Classifier:
    """Return a new classifier with ``params - lr * grad``."""
    if not lr > 0:
        raise ArgumentError(f"learning rate must be positive, got {lr}")
    g = np.asarray(grads.grad, dtype=np.float64)
    if g.shape != model.params.shape:
        raise ShapeError("gradient does not match parameter vector")
    if not np.all(np.isfinite(g)):
        raise NumericsError("non-finite gradient")
    return model.with_params(model.params - lr * g)


# ---------------------------------------------------------------------------
# serialization: 8-byte little-endian header length, JSON header, raw <f8 params

_MAGIC = b"IMBLABM1"


def save_model(model: Classifier, path) -> Path:
    path = Path(path)
    header = {
        "layers": [layer_to_dict(l) for l in model.layers],
        "input_shape": list(model.input_shape),
        "n_classes": model.n_classes,
        "n_params": model.n_params,
        "dtype": "<f8",
        "shapes": [
            {"layer": i, "weight": list(s.w_shape), "bias": s.b_slice.stop - s.b_slice.start}
            for i, s in enumerate(model._slots) if s is not None
        ],
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        fh.write(model.params.astype("<f8").tobytes())
    return path


def load_model(path) -> Classifier:
    raw = Path(path).read_bytes()
    if raw[:8] != _MAGIC:
        raise FormatError(f"{path}: not an imblab model file")
    (n,) = struct.unpack("<Q", raw[8:16])
    header = json.loads(raw[16:16 + n].decode("utf-8"))
    params = np.frombuffer(raw[16 + n:], dtype="<f8").astype(np.float64)
    if params.size != header["n_params"]:
        raise FormatError(f"{path}: expected {header['n_params']} parameters, found {params.size}")
    return Classifier(layers_from_config(header["layers"]), params, tuple(header["input_shape"]), header["n_classes"])
