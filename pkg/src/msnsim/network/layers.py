"""Layer descriptions and their numpy forward/backward passes.

Tensors are NCHW.  Weights: Dense ``(out, in)``, Conv2D ``(out, in, k, k)``.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import ShapeMismatch


@dataclass(frozen=True)
class Dense:
    in_features: int
    out_features: int

    def out_shape(self, shape):
        if tuple(shape) != (self.in_features,):
            raise ShapeMismatch(f"Dense expects ({self.in_features},), got {tuple(shape)}")
        return (self.out_features,)

    def param_shapes(self):
        return (self.out_features, self.in_features), (self.out_features,)

    @property
    def fan_in(self):
        return self.in_features


@dataclass(frozen=True)
class Conv2D:
    in_channels: int
    out_channels: int
    kernel: int = 5
    stride: int = 1
    padding: int = 0

    def out_shape(self, shape):
        if len(shape) != 3 or shape[0] != self.in_channels:
            raise ShapeMismatch(f"Conv2D expects ({self.in_channels}, H, W), got {tuple(shape)}")
        _, h, w = shape
        ho = (h + 2 * self.padding - self.kernel) // self.stride + 1
        wo = (w + 2 * self.padding - self.kernel) // self.stride + 1
        if ho < 1 or wo < 1:
            raise ShapeMismatch(f"kernel {self.kernel} does not fit input {h}x{w}")
        return (self.out_channels, ho, wo)

    def param_shapes(self):
        k = self.kernel
        return (self.out_channels, self.in_channels, k, k), (self.out_channels,)

    @property
    def fan_in(self):
        return self.in_channels * self.kernel * self.kernel


@dataclass(frozen=True)
class MaxPool:
    size: int = 2

    def out_shape(self, shape):
        if len(shape) != 3:
            raise ShapeMismatch(f"MaxPool expects (C, H, W), got {tuple(shape)}")
        c, h, w = shape
        if h < self.size or w < self.size:
            raise ShapeMismatch("pooling window larger than input")
        return (c, h // self.size, w // self.size)


@dataclass(frozen=True)
class Tanh:
    alpha: float = 1.0

    def out_shape(self, shape):
        return tuple(shape)


@dataclass(frozen=True)
class Flatten:
    def out_shape(self, shape):
        return (int(np.prod(shape)),)


@dataclass(frozen=True)
class SoftmaxOutput:
    classes: int

    def out_shape(self, shape):
        if tuple(shape) != (self.classes,):
            raise ShapeMismatch(f"SoftmaxOutput expects ({self.classes},), got {tuple(shape)}")
        return tuple(shape)


LAYER_TYPES = {cls.__name__: cls for cls in (Dense, Conv2D, MaxPool, Tanh, Flatten, SoftmaxOutput)}


def layer_to_dict(layer) -> dict:
    return {"type": type(layer).__name__, **asdict(layer)}


def layer_from_dict(d: dict):
    d = dict(d)
    cls = LAYER_TYPES[d.pop("type")]
    return cls(**d)


def has_params(layer) -> bool:
    return isinstance(layer, (Dense, Conv2D))


# ---------------------------------------------------------------- convolution


def im2col(x: np.ndarray, k: int, stride: int, padding: int) -> tuple[np.ndarray, int, int]:
    """Patches as ``(B, Ho*Wo, C*k*k)`` with (c, ki, kj) ordering matching the kernel."""
    if padding:
        x = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    win = sliding_window_view(x, (k, k), axis=(2, 3))[:, :, ::stride, ::stride]
    b, c, ho, wo = win.shape[:4]
    cols = win.transpose(0, 2, 3, 1, 4, 5).reshape(b, ho * wo, c * k * k)
    return cols, ho, wo


def col2im(dcols: np.ndarray, x_shape, k: int, stride: int, padding: int, ho: int, wo: int):
    b, c, h, w = x_shape
    dx = np.zeros((b, c, h + 2 * padding, w + 2 * padding), dtype=dcols.dtype)
    d = dcols.reshape(b, ho, wo, c, k, k)
    for i in range(k):
        for j in range(k):
            dx[:, :, i:i + stride * ho:stride, j:j + stride * wo:stride] += d[:, :, :, :, i, j].transpose(0, 3, 1, 2)
    if padding:
        dx = dx[:, :, padding:-padding, padding:-padding]
    return dx


def conv_forward(layer: Conv2D, x, weight, bias):
    cols, ho, wo = im2col(x, layer.kernel, layer.stride, layer.padding)
    wm = weight.reshape(layer.out_channels, -1)
    out = cols @ wm.T + bias
    out = out.reshape(x.shape[0], ho, wo, layer.out_channels).transpose(0, 3, 1, 2)
    return out, (cols, x.shape, ho, wo)


def conv_backward(layer: Conv2D, cache, weight, dout):
    cols, x_shape, ho, wo = cache
    o = layer.out_channels
    dmat = dout.transpose(0, 2, 3, 1).reshape(x_shape[0], ho * wo, o)
    flat_cols = cols.reshape(-1, cols.shape[-1])
    flat_d = dmat.reshape(-1, o)
    dw = (flat_d.T @ flat_cols).reshape(weight.shape)
    db = flat_d.sum(axis=0)
    dcols = dmat @ weight.reshape(o, -1)
    dx = col2im(dcols, x_shape, layer.kernel, layer.stride, layer.padding, ho, wo)
    return dx, dw, db


# -------------------------------------------------------------------- pooling


def pool_forward(layer: MaxPool, x):
    s = layer.size
    b, c, h, w = x.shape
    ho, wo = h // s, w // s
    xr = x[:, :, :ho * s, :wo * s].reshape(b, c, ho, s, wo, s).transpose(0, 1, 2, 4, 3, 5)
    xr = xr.reshape(b, c, ho, wo, s * s)
    idx = np.argmax(xr, axis=-1)
    out = np.take_along_axis(xr, idx[..., None], axis=-1)[..., 0]
    return out, (x.shape, idx)


def pool_backward(layer: MaxPool, cache, dout):
    x_shape, idx = cache
    s = layer.size
    b, c, h, w = x_shape
    ho, wo = dout.shape[2:]
    g = np.zeros((b, c, ho, wo, s * s), dtype=dout.dtype)
    np.put_along_axis(g, idx[..., None], dout[..., None], axis=-1)
    g = g.reshape(b, c, ho, wo, s, s).transpose(0, 1, 2, 4, 3, 5).reshape(b, c, ho * s, wo * s)
    dx = np.zeros(x_shape, dtype=dout.dtype)
    dx[:, :, :ho * s, :wo * s] = g
    return dx


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)
