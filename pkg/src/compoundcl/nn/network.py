"""Sequential network assembly, forward pass, and backpropagation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InvalidStateError, ShapeError
from . import layers as L
from .params import ParamSet


@dataclass(frozen=True)
class Network:
    """An ordered layer stack with a fixed input shape (H, W, C)."""

    layers: tuple
    input_shape: tuple

    def __post_init__(self):
        shape = tuple(self.input_shape)
        for layer in self.layers:
            shape = L.output_shape(layer, shape)
        if not self.layers or not isinstance(self.layers[-1], L.Dense):
            raise ShapeError("network must end in a Dense logit layer")

    @property
    def output_width(self) -> int:
        return self.layers[-1].fan_out

    def layer_output_shapes(self) -> list[tuple]:
        shapes = []
        shape = tuple(self.input_shape)
        for layer in self.layers:
            shape = L.output_shape(layer, shape)
            shapes.append(shape)
        return shapes

    def layer(self, name: str):
        for layer in self.layers:
            if layer.name == name:
                return layer
        raise KeyError(f"no layer named {name!r}")


@dataclass
class Tape:
    """Per-layer caches from one forward pass, tied to a ParamSet version."""

    net: Network
    records: list
    outputs: list
    batch_size: int
    params_version: int


def forward(params: ParamSet, net: Network, batch: np.ndarray) -> tuple[np.ndarray, Tape]:
    """Run the network on an NHWC batch; returns logits and a backprop tape."""
    if batch.ndim != 4 or tuple(batch.shape[1:]) != tuple(net.input_shape):
        raise ShapeError(
            f"batch shape {batch.shape} does not match network input {net.input_shape}"
        )
    x = batch
    records = []
    outputs = []
    for layer in net.layers:
        if isinstance(layer, L.Conv2D):
            x, cache = L.conv_forward(layer, x, params.tensors[f"{layer.name}.w"], params.tensors[f"{layer.name}.b"])
        elif isinstance(layer, L.Dense):
            x, cache = L.dense_forward(x, params.tensors[f"{layer.name}.w"], params.tensors[f"{layer.name}.b"])
        elif isinstance(layer, L.ReLU):
            x, cache = L.relu_forward(x)
        elif isinstance(layer, L.GlobalAvgPool):
            x, cache = L.gap_forward(x)
        else:
            raise TypeError(f"unknown layer kind: {layer!r}")
        records.append(cache)
        outputs.append(x)
    return x, Tape(net, records, outputs, batch.shape[0], params.version)


def backward(params: ParamSet, tape: Tape, dlogits: np.ndarray, collect_activation_grads: bool = False):
    """Backpropagate ``dlogits`` through the tape.

    Returns a dict of gradients, one per parameter, with frozen parameters
    receiving exact zeros. With ``collect_activation_grads`` a second dict
    maps layer name -> gradient w.r.t. that layer's output.
    """
    if tape.params_version != params.version:
        raise InvalidStateError("tape is stale: parameters changed since the forward pass")
    if dlogits.shape != tape.outputs[-1].shape:
        raise ShapeError(f"loss gradient shape {dlogits.shape} != logits shape {tape.outputs[-1].shape}")
    grads: dict[str, np.ndarray] = {}
    act_grads: dict[str, np.ndarray] = {}
    g = dlogits
    for layer, cache in zip(reversed(tape.net.layers), reversed(tape.records)):
        if collect_activation_grads:
            act_grads[layer.name] = g
        if isinstance(layer, L.Conv2D):
            g, dw, db = L.conv_backward(layer, cache, params.tensors[f"{layer.name}.w"], g)
            grads[f"{layer.name}.w"] = dw
            grads[f"{layer.name}.b"] = db
        elif isinstance(layer, L.Dense):
            g, dw, db = L.dense_backward(cache, params.tensors[f"{layer.name}.w"], g)
            grads[f"{layer.name}.w"] = dw
            grads[f"{layer.name}.b"] = db
        elif isinstance(layer, L.ReLU):
            g = L.relu_backward(cache, g)
        elif isinstance(layer, L.GlobalAvgPool):
            g = L.gap_backward(cache, g)
    for name in params.frozen:
        if name in grads:
            grads[name] = np.zeros_like(grads[name])
    if collect_activation_grads:
        return grads, act_grads
    return grads
