"""Student model lifecycle: backbone assembly, head expansion, teacher
snapshots, and layer freezing."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import nn
from .errors import ShapeError
from .nn import layers as L
from .registry import ClassRegistry
from .rng import as_generator

FREEZE_PHASES = ("basic-initial", "basic-finetune", "continual", "few-shot")


@dataclass(frozen=True)
class Architecture:
    """Compact convolutional backbone description.

    Each conv block halves the spatial resolution (stride-2 convolution
    followed by ReLU); a global average pool and one hidden dense layer
    feed the logit head.
    """

    input_size: int = 32
    channels: tuple = (16, 32, 64)
    hidden_units: int = 64
    kernel: int = 3

    def build(self, n_classes: int) -> nn.Network:
        layers = []
        in_ch = 3
        for i, out_ch in enumerate(self.channels, start=1):
            layers.append(L.Conv2D(f"block{i}", in_ch, out_ch, kernel=self.kernel, stride=2))
            layers.append(L.ReLU(f"act{i}"))
            in_ch = out_ch
        layers.append(L.GlobalAvgPool("gap"))
        layers.append(L.Dense("hidden", in_ch, self.hidden_units))
        layers.append(L.ReLU("act_hidden"))
        layers.append(L.Dense("head", self.hidden_units, n_classes))
        return nn.Network(tuple(layers), (self.input_size, self.input_size, 3))

    def conv_block_params(self, first_n: int | None = None) -> set:
        n = len(self.channels) if first_n is None else first_n
        names = set()
        for i in range(1, n + 1):
            names.update({f"block{i}.w", f"block{i}.b"})
        return names

    def to_dict(self) -> dict:
        return {
            "input_size": self.input_size,
            "channels": list(self.channels),
            "hidden_units": self.hidden_units,
            "kernel": self.kernel,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Architecture":
        return cls(
            input_size=d["input_size"],
            channels=tuple(d["channels"]),
            hidden_units=d["hidden_units"],
            kernel=d["kernel"],
        )


@dataclass
class ModelState:
    """Feature extractor + classification head + class registry."""

    arch: Architecture
    params: nn.ParamSet
    registry: ClassRegistry
    default_gradcam_layer: str = field(default="", repr=False)

    def __post_init__(self):
        if not self.default_gradcam_layer:
            self.default_gradcam_layer = f"act{len(self.arch.channels)}"

    @property
    def n_classes(self) -> int:
        return len(self.registry)

    def network(self) -> nn.Network:
        net = self.arch.build(self.n_classes)
        head_w = self.params.tensors["head.w"]
        if head_w.shape[1] != self.n_classes:
            raise ShapeError(
                f"head width {head_w.shape[1]} does not match registry size {self.n_classes}"
            )
        return net

    def forward(self, batch: np.ndarray):
        """Logits over all registered classes plus the backprop tape."""
        if np.max(np.abs(batch)) > 1.0 + 1e-5:
            raise ValueError("inputs must be normalized to [-1, 1] before the forward pass")
        return nn.forward(self.params, self.network(), batch)

    def logits(self, batch: np.ndarray) -> np.ndarray:
        return self.forward(batch)[0]

    def predict_proba(self, batch: np.ndarray, chunk: int = 256) -> np.ndarray:
        from .losses import softmax_with_temperature

        outs = [
            softmax_with_temperature(self.logits(batch[i : i + chunk]), 1.0)
            for i in range(0, len(batch), chunk)
        ]
        return np.concatenate(outs, axis=0)

    def predict(self, batch: np.ndarray, chunk: int = 256) -> np.ndarray:
        outs = [
            np.argmax(self.logits(batch[i : i + chunk]), axis=-1)
            for i in range(0, len(batch), chunk)
        ]
        return np.concatenate(outs, axis=0)

    def clone(self) -> "ModelState":
        return ModelState(
            self.arch, self.params.clone(), self.registry.clone(), self.default_gradcam_layer
        )


def new_model(arch: Architecture, basic_labels, seed_or_rng, dtype=np.float32) -> ModelState:
    """Fresh model whose registry holds the basic classes, in order."""
    registry = ClassRegistry(list(basic_labels))
    net = arch.build(len(registry))
    params = nn.init_params(net.layers, as_generator(seed_or_rng), dtype=dtype)
    return ModelState(arch, params, registry)


def expand_head(model: ModelState, new_label: str, seed_or_rng) -> ModelState:
    """Add one output node for ``new_label``; everything else is inherited.

    The new head column is Glorot-initialized with fan_in = hidden width
    and fan_out = 1; its bias starts at zero. Existing head columns, the
    feature extractor, and the optimizer state of existing entries are
    byte-identical to the input model.
    """
    out = model.clone()
    out.registry.add(new_label, compound=True)
    rng = as_generator(seed_or_rng)
    w = out.params.tensors["head.w"]
    col = nn.glorot_uniform(w.shape[0], 1, rng, shape=(w.shape[0], 1), dtype=w.dtype)
    out.params.tensors["head.w"] = np.concatenate([w, col], axis=1)
    b = out.params.tensors["head.b"]
    out.params.tensors["head.b"] = np.concatenate([b, np.zeros(1, dtype=b.dtype)])
    for store in (out.params.adam_m, out.params.adam_v):
        store["head.w"] = np.concatenate([store["head.w"], np.zeros_like(col)], axis=1)
        store["head.b"] = np.concatenate([store["head.b"], np.zeros(1, dtype=b.dtype)])
    out.params.version += 1
    return out


def apply_freezing(model: ModelState, phase: str) -> ModelState:
    """Set frozen flags for a training phase (in place).

    basic-initial freezes every conv block (train the dense top only),
    basic-finetune unfreezes everything, continual and few-shot freeze
    the first two conv blocks.
    """
    if phase not in FREEZE_PHASES:
        raise ValueError(f"unknown phase {phase!r}, expected one of {FREEZE_PHASES}")
    if phase == "basic-initial":
        frozen = model.arch.conv_block_params()
    elif phase == "basic-finetune":
        frozen = set()
    else:
        frozen = model.arch.conv_block_params(first_n=min(2, len(model.arch.channels)))
    model.params.set_frozen(frozen)
    return model


@dataclass(frozen=True)
class TeacherSnapshot:
    """Immutable copy of the basic-phase model used for distillation targets."""

    arch: Architecture
    params: nn.ParamSet
    registry: ClassRegistry

    @property
    def n_classes(self) -> int:
        return len(self.registry)

    def logits(self, batch: np.ndarray, chunk: int = 256) -> np.ndarray:
        net = self.arch.build(self.n_classes)
        outs = [
            nn.forward(self.params, net, batch[i : i + chunk])[0]
            for i in range(0, len(batch), chunk)
        ]
        return np.concatenate(outs, axis=0)

    def soft_targets(self, batch: np.ndarray, temperature: float) -> np.ndarray:
        from .losses import softmax_with_temperature

        return softmax_with_temperature(self.logits(batch), temperature)

    def content_hash(self) -> str:
        return self.params.content_hash()


def snapshot_teacher(model: ModelState) -> TeacherSnapshot:
    """Frozen deep copy of the current model; its weights never change."""
    params = model.params.clone()
    params.frozen = set(params.tensors)
    for t in params.tensors.values():
        t.setflags(write=False)
    return TeacherSnapshot(model.arch, params, model.registry.clone())


def student_forward(model: ModelState, batch: np.ndarray) -> np.ndarray:
    """Logits over all currently registered classes."""
    return model.logits(batch)


def teacher_forward(teacher: TeacherSnapshot, batch: np.ndarray) -> np.ndarray:
    """Logits over the basic classes only; callers zero-pad soft targets."""
    return teacher.logits(batch)
