"""Pixel normalization and seeded train-time augmentation."""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from ..rng import as_generator


def normalize(image_u8: np.ndarray) -> np.ndarray:
    """Map 8-bit pixel values to [-1, 1] via p / 127.5 - 1."""
    return (np.asarray(image_u8, dtype=np.float32) / 127.5) - 1.0


def denormalize(image: np.ndarray) -> np.ndarray:
    """Inverse of :func:`normalize`, rounding back to uint8."""
    return np.clip(np.rint((np.asarray(image) + 1.0) * 127.5), 0, 255).astype(np.uint8)


def augment_with_params(image: np.ndarray, flip: bool, tx: float, ty: float, zoom: float) -> np.ndarray:
    """Apply an explicit flip / translate / zoom combination.

    Translation offsets are in pixels, zoom > 1 magnifies about the image
    center. Resampling is bilinear and anything mapped from outside the
    frame is filled with 0 (mid-gray in [-1, 1] space).
    """
    out = image[:, ::-1, :] if flip else image
    if zoom == 1.0 and tx == 0.0 and ty == 0.0:
        return out.copy()
    h, w = image.shape[:2]
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    # input_coord = (output_coord - center - t) / zoom + center
    matrix = np.diag([1.0 / zoom, 1.0 / zoom])
    offset = np.array([cy - (cy + ty) / zoom, cx - (cx + tx) / zoom])
    channels = [
        ndimage.affine_transform(
            out[..., c].astype(np.float64),
            matrix,
            offset=offset,
            order=1,
            mode="constant",
            cval=0.0,
            prefilter=False,
        )
        for c in range(out.shape[2])
    ]
    return np.stack(channels, axis=-1).astype(image.dtype)


def augment(
    image: np.ndarray,
    seed_or_rng,
    max_translate: float = 0.1,
    zoom_range: tuple = (0.9, 1.1),
) -> np.ndarray:
    """Random horizontal flip (p=0.5), translation up to +/-10% per axis,
    and zoom in [0.9, 1.1]. Deterministic given the seed."""
    rng = as_generator(seed_or_rng)
    flip = bool(rng.random() < 0.5)
    h, w = image.shape[:2]
    ty = float(rng.uniform(-max_translate, max_translate) * h)
    tx = float(rng.uniform(-max_translate, max_translate) * w)
    zoom = float(rng.uniform(zoom_range[0], zoom_range[1]))
    return augment_with_params(image, flip, tx, ty, zoom)
