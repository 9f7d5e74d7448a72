"""Minimal differentiable compute: layers, backprop, Adam, checkpoints."""

from .adam import adam_step
from .checkpoint import load_params, save_params
from .layers import Conv2D, Dense, GlobalAvgPool, ReLU
from .network import Network, Tape, backward, forward
from .params import ParamSet, glorot_bound, glorot_uniform, init_params

__all__ = [
    "Conv2D",
    "Dense",
    "GlobalAvgPool",
    "ReLU",
    "Network",
    "Tape",
    "ParamSet",
    "forward",
    "backward",
    "adam_step",
    "glorot_uniform",
    "glorot_bound",
    "init_params",
    "save_params",
    "load_params",
]
