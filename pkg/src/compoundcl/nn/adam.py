"""Adam optimizer step over a ParamSet."""

from __future__ import annotations

import numpy as np

from ..errors import ShapeError
from .params import ParamSet

BETA1 = 0.9
BETA2 = 0.999
EPS = 1e-8


def adam_step(params: ParamSet, grads: dict, lr: float) -> ParamSet:
    """Apply one Adam update in place and return ``params``.

    Frozen tensors (values, moments, and step counters) are untouched;
    every other tensor's step counter advances even for zero gradients.
    """
    for name, t in params.tensors.items():
        if name in params.frozen:
            continue
        g = grads.get(name)
        if g is None:
            raise ShapeError(f"missing gradient for parameter {name!r}")
        if g.shape != t.shape:
            raise ShapeError(f"gradient shape {g.shape} != parameter shape {t.shape} for {name!r}")
        g = g.astype(t.dtype, copy=False)
        step = params.adam_t[name] + 1
        params.adam_t[name] = step
        m = params.adam_m[name]
        v = params.adam_v[name]
        m *= BETA1
        m += (1.0 - BETA1) * g
        v *= BETA2
        v += (1.0 - BETA2) * np.square(g)
        m_hat = m / (1.0 - BETA1**step)
        v_hat = v / (1.0 - BETA2**step)
        t -= (lr * m_hat / (np.sqrt(v_hat) + EPS)).astype(t.dtype, copy=False)
    params.version += 1
    return params
