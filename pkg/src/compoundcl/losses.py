"""Loss and schedule math for distillation-based continual training.

All loss values are computed in float64 regardless of input dtype; the
logit-gradient helper stays in the input dtype so it can feed float32
training or float64 gradient checks.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import ShapeError

PROB_FLOOR = 1e-12

# Per-iteration multiplier for the distillation weight schedule.
GAMMA_DECAY_FACTOR = math.exp(-1.0 / (1.0 + math.e))


def softmax_with_temperature(z: np.ndarray, temperature: float = 1.0) -> np.ndarray:
    """Temperature-scaled softmax along the last axis, with max-subtraction.

    Higher temperatures flatten the distribution; the ranking of entries
    always matches the ranking of the logits.
    """
    if temperature <= 0:
        raise ValueError(f"temperature must be positive, got {temperature}")
    z = np.asarray(z, dtype=np.float64)
    if not np.all(np.isfinite(z)):
        raise ValueError("logits must be finite")
    scaled = z / temperature
    scaled = scaled - scaled.max(axis=-1, keepdims=True)
    e = np.exp(scaled)
    return e / e.sum(axis=-1, keepdims=True)


def cross_entropy(y_onehot: np.ndarray, p: np.ndarray) -> float:
    """-sum(y * log p), with p clamped to at least 1e-12 before the log.

    Accepts single vectors or (N, k) batches; batches return the mean.
    """
    y = np.asarray(y_onehot, dtype=np.float64)
    p = np.asarray(p, dtype=np.float64)
    if y.shape != p.shape:
        raise ShapeError(f"target shape {y.shape} != prediction shape {p.shape}")
    logs = np.log(np.maximum(p, PROB_FLOOR))
    per_sample = -(y * logs).sum(axis=-1)
    return float(per_sample.mean())


def distillation_loss(teacher_soft: np.ndarray, student_soft: np.ndarray) -> float:
    """Soft-target cross-entropy -sum(t * log s) with the 0*log(s)=0 convention.

    The teacher distribution may be zero-padded up to the student width;
    padded entries contribute nothing. Batches return the mean.
    """
    t = np.asarray(teacher_soft, dtype=np.float64)
    s = np.asarray(student_soft, dtype=np.float64)
    if t.shape != s.shape:
        raise ShapeError(f"teacher shape {t.shape} != student shape {s.shape}")
    if np.any(t < 0):
        raise ValueError("teacher soft targets must be non-negative")
    logs = np.log(np.maximum(s, PROB_FLOOR))
    per_sample = -np.where(t > 0, t * logs, 0.0).sum(axis=-1)
    return float(per_sample.mean())


def combined_loss(
    y_onehot: np.ndarray,
    p: np.ndarray,
    teacher_soft: np.ndarray,
    student_soft: np.ndarray,
    gamma: float,
) -> float:
    """Convex combination (1 - gamma) * cross-entropy + gamma * distillation."""
    if not 0.0 <= gamma <= 1.0:
        raise ValueError(f"gamma must lie in [0, 1], got {gamma}")
    return (1.0 - gamma) * cross_entropy(y_onehot, p) + gamma * distillation_loss(
        teacher_soft, student_soft
    )


def gamma_decay(gamma_prev: float) -> float:
    """One decay step of the distillation weight; stays strictly positive."""
    if gamma_prev <= 0:
        raise ValueError(f"gamma must be positive to decay, got {gamma_prev}")
    return gamma_prev * GAMMA_DECAY_FACTOR


def zero_pad_targets(t: np.ndarray, width: int) -> np.ndarray:
    """Pad teacher probability rows with exact zeros up to ``width`` columns."""
    t = np.asarray(t)
    k = t.shape[-1]
    if width < k:
        raise ShapeError(f"cannot pad width-{k} targets down to {width}")
    if width == k:
        return t
    pad = [(0, 0)] * (t.ndim - 1) + [(0, width - k)]
    return np.pad(t, pad)


def combined_loss_grad(
    z: np.ndarray,
    y_onehot: np.ndarray,
    teacher_soft: np.ndarray,
    temperature: float,
    gamma: float,
) -> np.ndarray:
    """Gradient of the mean combined loss w.r.t. the logits ``z``.

    The hard term differentiates through a T=1 softmax, the distillation
    term through a temperature-T softmax without any T^2 rescaling.
    """
    if not 0.0 <= gamma <= 1.0:
        raise ValueError(f"gamma must lie in [0, 1], got {gamma}")
    z = np.atleast_2d(z)
    y = np.atleast_2d(y_onehot).astype(z.dtype, copy=False)
    n = z.shape[0]
    s1 = softmax_with_temperature(z, 1.0).astype(z.dtype)
    grad = (1.0 - gamma) * (s1 - y)
    if gamma > 0.0:
        if teacher_soft is None:
            raise ValueError("teacher soft targets are required when gamma > 0")
        t = np.atleast_2d(teacher_soft).astype(z.dtype, copy=False)
        if t.shape != z.shape:
            raise ShapeError(f"teacher shape {t.shape} != logits shape {z.shape}")
        st = softmax_with_temperature(z, temperature).astype(z.dtype)
        grad = grad + gamma * (st - t) / temperature
    return grad / n
