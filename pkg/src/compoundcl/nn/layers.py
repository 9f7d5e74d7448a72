"""Layer kinds and their forward/backward rules.

Everything is plain numpy. Layers are stateless descriptions; weights live
in a ParamSet keyed "<layer name>.w" / "<layer name>.b". Activations are
NHWC for spatial tensors and (N, D) after global average pooling.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from ..errors import ShapeError


@dataclass(frozen=True)
class Conv2D:
    name: str
    in_channels: int
    out_channels: int
    kernel: int = 3
    stride: int = 1
    padding: int | None = None  # None -> kernel // 2

    @property
    def pad(self) -> int:
        return self.kernel // 2 if self.padding is None else self.padding


@dataclass(frozen=True)
class ReLU:
    name: str


@dataclass(frozen=True)
class GlobalAvgPool:
    name: str


@dataclass(frozen=True)
class Dense:
    name: str
    fan_in: int
    fan_out: int


Layer = Union[Conv2D, ReLU, GlobalAvgPool, Dense]


def output_shape(layer: Layer, shape: tuple) -> tuple:
    """Shape (without batch axis) produced by ``layer`` on input ``shape``."""
    if isinstance(layer, Conv2D):
        if len(shape) != 3 or shape[2] != layer.in_channels:
            raise ShapeError(
                f"{layer.name}: expected (H, W, {layer.in_channels}) input, got {shape}"
            )
        h, w, _ = shape
        ho = (h + 2 * layer.pad - layer.kernel) // layer.stride + 1
        wo = (w + 2 * layer.pad - layer.kernel) // layer.stride + 1
        if ho <= 0 or wo <= 0:
            raise ShapeError(f"{layer.name}: kernel {layer.kernel} too large for input {shape}")
        return (ho, wo, layer.out_channels)
    if isinstance(layer, ReLU):
        return shape
    if isinstance(layer, GlobalAvgPool):
        if len(shape) != 3:
            raise ShapeError(f"{layer.name}: global average pooling needs a spatial input, got {shape}")
        return (shape[2],)
    if isinstance(layer, Dense):
        if len(shape) != 1 or shape[0] != layer.fan_in:
            raise ShapeError(f"{layer.name}: expected ({layer.fan_in},) input, got {shape}")
        return (layer.fan_out,)
    raise TypeError(f"unknown layer kind: {layer!r}")


def param_shapes(layer: Layer) -> dict[str, tuple]:
    """Parameter tensors owned by ``layer`` (weights as HWIO for convs)."""
    if isinstance(layer, Conv2D):
        return {
            f"{layer.name}.w": (layer.kernel, layer.kernel, layer.in_channels, layer.out_channels),
            f"{layer.name}.b": (layer.out_channels,),
        }
    if isinstance(layer, Dense):
        return {
            f"{layer.name}.w": (layer.fan_in, layer.fan_out),
            f"{layer.name}.b": (layer.fan_out,),
        }
    return {}


def _conv_patches(xp: np.ndarray, kernel: int, stride: int) -> np.ndarray:
    """Extract (N, Ho, Wo, k*k*C) patches from a padded NHWC tensor."""
    win = np.lib.stride_tricks.sliding_window_view(xp, (kernel, kernel), axis=(1, 2))
    win = win[:, ::stride, ::stride]  # (N, Ho, Wo, C, k, k)
    n, ho, wo = win.shape[:3]
    return win.transpose(0, 1, 2, 4, 5, 3).reshape(n, ho, wo, -1)


def conv_forward(layer: Conv2D, x: np.ndarray, w: np.ndarray, b: np.ndarray):
    p = layer.pad
    xp = np.pad(x, ((0, 0), (p, p), (p, p), (0, 0))) if p else x
    patches = _conv_patches(xp, layer.kernel, layer.stride)
    out = patches @ w.reshape(-1, layer.out_channels) + b
    cache = (patches, xp.shape)
    return out, cache


def conv_backward(layer: Conv2D, cache, w: np.ndarray, dout: np.ndarray):
    patches, xp_shape = cache
    n, ho, wo, cols = patches.shape
    dout2 = dout.reshape(-1, layer.out_channels)
    dw = (patches.reshape(-1, cols).T @ dout2).reshape(w.shape)
    db = dout2.sum(axis=0)
    dcols = (dout2 @ w.reshape(-1, layer.out_channels).T).reshape(
        n, ho, wo, layer.kernel, layer.kernel, layer.in_channels
    )
    dxp = np.zeros(xp_shape, dtype=dout.dtype)
    s = layer.stride
    for i in range(layer.kernel):
        for j in range(layer.kernel):
            dxp[:, i : i + s * ho : s, j : j + s * wo : s, :] += dcols[:, :, :, i, j, :]
    p = layer.pad
    dx = dxp[:, p : xp_shape[1] - p, p : xp_shape[2] - p, :] if p else dxp
    return dx, dw, db


def dense_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray):
    return x @ w + b, x


def dense_backward(cache, w: np.ndarray, dout: np.ndarray):
    x = cache
    dw = x.T @ dout
    db = dout.sum(axis=0)
    dx = dout @ w.T
    return dx, dw, db


def relu_forward(x: np.ndarray):
    mask = x > 0
    return x * mask, mask


def relu_backward(mask: np.ndarray, dout: np.ndarray):
    return dout * mask


def gap_forward(x: np.ndarray):
    n, h, w, c = x.shape
    return x.mean(axis=(1, 2)), (h, w)


def gap_backward(cache, dout: np.ndarray):
    h, w = cache
    scaled = dout / (h * w)
    return np.broadcast_to(scaled[:, None, None, :], (dout.shape[0], h, w, dout.shape[1])).copy()
