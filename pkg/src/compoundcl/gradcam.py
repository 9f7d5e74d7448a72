"""Gradient-weighted class activation heatmaps for the conv backbone."""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from . import nn
from .model import ModelState


def _resize_bilinear(a: np.ndarray, out_hw: tuple) -> np.ndarray:
    h, w = a.shape
    oh, ow = out_hw
    if (h, w) == (oh, ow):
        return a.copy()
    out = ndimage.zoom(a, (oh / h, ow / w), order=1, mode="grid-constant", grid_mode=True)
    if out.shape != (oh, ow):  # guard against rounding in odd ratios
        out = out[:oh, :ow]
        out = np.pad(out, ((0, oh - out.shape[0]), (0, ow - out.shape[1])), mode="edge")
    return out


def gradcam(model: ModelState, image: np.ndarray, class_index: int, target_layer: str | None = None) -> np.ndarray:
    """Heatmap in [0, 1] with the same H x W as ``image``.

    Channel weights are the spatially averaged gradients of the class
    logit w.r.t. the target feature map; the weighted sum is rectified,
    peak-normalized, and bilinearly upsampled.
    """
    if not 0 <= class_index < model.n_classes:
        raise ValueError(f"class index {class_index} out of range [0, {model.n_classes})")
    layer_name = target_layer or model.default_gradcam_layer
    net = model.network()
    names = [l.name for l in net.layers]
    if layer_name not in names:
        raise ValueError(f"no layer named {layer_name!r}; have {names}")
    shapes = net.layer_output_shapes()
    if len(shapes[names.index(layer_name)]) != 3:
        raise ValueError(f"layer {layer_name!r} does not produce a spatial feature map")

    batch = image[None].astype(model.params.tensors["head.w"].dtype)
    logits, tape = nn.forward(model.params, net, batch)
    dlogits = np.zeros_like(logits)
    dlogits[0, class_index] = 1.0
    _, act_grads = nn.backward(model.params, tape, dlogits, collect_activation_grads=True)

    activation = tape.outputs[names.index(layer_name)][0]  # (h, w, c)
    grad = act_grads[layer_name][0]
    weights = grad.mean(axis=(0, 1))
    cam = np.maximum((activation * weights).sum(axis=-1), 0.0)
    heat = _resize_bilinear(cam.astype(np.float64), image.shape[:2])
    peak = heat.max()
    if peak > 0:
        heat = heat / peak
    return np.clip(heat, 0.0, 1.0)


def heatmap_to_u8(heat: np.ndarray) -> np.ndarray:
    return np.clip(np.rint(heat * 255.0), 0, 255).astype(np.uint8)


def save_heatmap(path, heat: np.ndarray):
    """Write the heatmap as 8-bit grayscale; .pgm gets binary P5, else PNG."""
    u8 = heatmap_to_u8(heat)
    path = str(path)
    if path.endswith(".pgm"):
        with open(path, "wb") as f:
            f.write(f"P5\n{u8.shape[1]} {u8.shape[0]}\n255\n".encode("ascii"))
            f.write(u8.tobytes())
    else:
        from PIL import Image

        Image.fromarray(u8, mode="L").save(path, format="PNG")


def save_overlay(path, image: np.ndarray, heat: np.ndarray, alpha: float = 0.5):
    """Blend the heatmap (red channel) over the normalized input image."""
    from PIL import Image

    base = np.clip((image + 1.0) * 127.5, 0, 255).astype(np.uint8)
    overlay = base.astype(np.float64)
    overlay[..., 0] = (1 - alpha) * overlay[..., 0] + alpha * 255.0 * heat
    Image.fromarray(np.clip(np.rint(overlay), 0, 255).astype(np.uint8), mode="RGB").save(
        str(path), format="PNG"
    )
