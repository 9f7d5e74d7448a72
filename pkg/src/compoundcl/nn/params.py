"""Parameter storage, initialization, and freezing flags."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from ..errors import ShapeError
from ..rng import as_generator
from . import layers as L

DTYPE = np.float32


def glorot_uniform(fan_in: int, fan_out: int, seed_or_rng, shape=None, dtype=DTYPE) -> np.ndarray:
    """Uniform draw from [-L, L] with L = sqrt(6 / (fan_in + fan_out)).

    ``shape`` defaults to (fan_in, fan_out). Deterministic given the seed.
    """
    if fan_in <= 0 or fan_out <= 0:
        raise ValueError(f"fan counts must be positive, got ({fan_in}, {fan_out})")
    rng = as_generator(seed_or_rng)
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    if shape is None:
        shape = (fan_in, fan_out)
    return rng.uniform(-limit, limit, size=shape).astype(dtype)


def glorot_bound(fan_in: int, fan_out: int) -> float:
    return float(np.sqrt(6.0 / (fan_in + fan_out)))


@dataclass
class ParamSet:
    """Named parameter tensors plus per-tensor Adam state and frozen flags.

    ``version`` is bumped by any mutation; activation tapes remember the
    version they were recorded against so stale tapes are rejected.
    """

    tensors: dict[str, np.ndarray]
    frozen: set[str] = field(default_factory=set)
    adam_m: dict[str, np.ndarray] = field(default_factory=dict)
    adam_v: dict[str, np.ndarray] = field(default_factory=dict)
    adam_t: dict[str, int] = field(default_factory=dict)
    version: int = 0

    def __post_init__(self):
        for name, t in self.tensors.items():
            self.adam_m.setdefault(name, np.zeros_like(t))
            self.adam_v.setdefault(name, np.zeros_like(t))
            self.adam_t.setdefault(name, 0)

    def names(self) -> list[str]:
        return sorted(self.tensors)

    def clone(self) -> "ParamSet":
        return ParamSet(
            tensors={k: v.copy() for k, v in self.tensors.items()},
            frozen=set(self.frozen),
            adam_m={k: v.copy() for k, v in self.adam_m.items()},
            adam_v={k: v.copy() for k, v in self.adam_v.items()},
            adam_t=dict(self.adam_t),
            version=self.version,
        )

    def load_values(self, other: "ParamSet"):
        """Copy tensor values (not optimizer state) from a clone of self."""
        if set(other.tensors) != set(self.tensors):
            raise ShapeError("parameter sets have different tensors")
        for name, t in other.tensors.items():
            self.tensors[name] = t.copy()
        self.version += 1

    def reset_optimizer_state(self):
        for name, t in self.tensors.items():
            self.adam_m[name] = np.zeros_like(t)
            self.adam_v[name] = np.zeros_like(t)
            self.adam_t[name] = 0
        self.version += 1

    def set_frozen(self, names):
        self.frozen = set(names)
        unknown = self.frozen - set(self.tensors)
        if unknown:
            raise KeyError(f"cannot freeze unknown parameters: {sorted(unknown)}")
        self.version += 1

    def content_hash(self) -> str:
        """SHA-256 over names, shapes, and raw tensor bytes."""
        h = hashlib.sha256()
        for name in self.names():
            t = np.ascontiguousarray(self.tensors[name])
            h.update(name.encode())
            h.update(str(t.shape).encode())
            h.update(str(t.dtype).encode())
            h.update(t.tobytes())
        return h.hexdigest()


def init_params(net_layers, seed_or_rng, dtype=DTYPE) -> ParamSet:
    """Glorot-uniform weights and zero biases for every parametric layer.

    Conv fans follow the receptive-field convention (k*k*channels).
    """
    rng = as_generator(seed_or_rng)
    tensors: dict[str, np.ndarray] = {}
    for layer in net_layers:
        for pname, shape in L.param_shapes(layer).items():
            if pname.endswith(".b"):
                tensors[pname] = np.zeros(shape, dtype=dtype)
            elif isinstance(layer, L.Conv2D):
                fan_in = layer.kernel * layer.kernel * layer.in_channels
                fan_out = layer.kernel * layer.kernel * layer.out_channels
                tensors[pname] = glorot_uniform(fan_in, fan_out, rng, shape=shape, dtype=dtype)
            else:
                tensors[pname] = glorot_uniform(layer.fan_in, layer.fan_out, rng, shape=shape, dtype=dtype)
    return ParamSet(tensors=tensors)
