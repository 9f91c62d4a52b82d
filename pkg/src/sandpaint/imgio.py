"""Image I/O helpers.

All internal math runs on linear-light float64 arrays in [0, 1], either
(H, W) grayscale or (H, W, 3) RGB.  PNG files are assumed gamma 2.2
encoded; a plain power law is used rather than the piecewise sRGB curve
(the difference is far below the 8-bit quantization noise these files
carry).
"""

from __future__ import annotations

import numpy as np
from PIL import Image

from .errors import IoError

GAMMA = 2.2

# Linear-light luma weights (Rec. 709 primaries).
LUMA = np.array([0.2126, 0.7152, 0.0722])


def linearize(encoded):
    return np.clip(np.asarray(encoded, dtype=np.float64), 0.0, 1.0) ** GAMMA


def delinearize(linear):
    return np.clip(np.asarray(linear, dtype=np.float64), 0.0, 1.0) ** (1.0 / GAMMA)


def to_luma(img):
    """Linear-light luma of an (H, W, 3) image; grayscale passes through."""
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim == 2:
        return arr
    if arr.ndim == 3 and arr.shape[2] == 3:
        return arr @ LUMA
    raise IoError("expected (H, W) or (H, W, 3), got shape %s" % (arr.shape,))


def load_image(path, linear=True, gray=False):
    """Load a PNG as linear float64 RGB in [0, 1]; gray=True returns luma."""
    img = Image.open(path).convert("RGB")
    rgb = np.asarray(img, dtype=np.float64) / 255.0
    if linear:
        rgb = linearize(rgb)
    return to_luma(rgb) if gray else rgb


def save_image(path, img, linear=True):
    """Save a float array in [0, 1] — (H, W) or (H, W, 3) — as an 8-bit PNG."""
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim not in (2, 3) or (arr.ndim == 3 and arr.shape[2] != 3):
        raise IoError("expected (H, W) or (H, W, 3), got shape %s" % (arr.shape,))
    if linear:
        arr = delinearize(arr)
    out = np.clip(np.round(arr * 255.0), 0, 255).astype(np.uint8)
    Image.fromarray(out, mode="L" if arr.ndim == 2 else "RGB").save(path)


def image_to_rgba(img, linear=True):
    """Expand a grayscale or RGB [0, 1] image to (H, W, 4) uint8 RGBA."""
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim == 2:
        arr = np.repeat(arr[:, :, None], 3, axis=2)
    if linear:
        arr = delinearize(arr)
    g = np.clip(np.round(arr * 255.0), 0, 255).astype(np.uint8)
    rgba = np.empty(arr.shape[:2] + (4,), dtype=np.uint8)
    rgba[..., :3] = g
    rgba[..., 3] = 255
    return rgba
