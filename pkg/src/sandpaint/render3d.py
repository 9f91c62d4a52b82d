"""Top-down subtractive rendering of particle states.

Each particle becomes an isotropic Gaussian footprint in pixel space
with sigma = volume^(1/3) / px_to_m, splatted through the same density
accumulator as the 2D rasterizer and composited subtractively per
channel. Footprint amplitude spreads absorption * mass over the
footprint area, so optical depth tracks the amount of deposited sand
regardless of how finely it was sampled.
"""

import numpy as np

from .raster import CUTOFF_SIGMA, FlatKernels, splat_density

DEFAULT_PX_TO_M = 1.0 / 128.0
# Per-kg optical coefficient, calibrated so strokes lifted with default
# LiftConfig render at roughly their 2D darkness.
DEFAULT_ABSORPTION = 1600.0


def particle_kernels(cloud, px_to_m, absorption):
    """Flatten a particle cloud into 2D splat kernels (top-down view)."""
    sigma = np.cbrt(cloud.volumes) / px_to_m
    alpha = absorption * cloud.masses / (2.0 * np.pi * sigma**2)
    return FlatKernels(
        centers=cloud.positions[:, :2] / px_to_m,
        rotations=np.zeros(len(cloud)),
        sx=sigma,
        sy=sigma.copy(),
        alpha=alpha,
        stroke_index=cloud.source.astype(np.int64),
        slices=[],
    )


def render_3d(
    state,
    painting_meta,
    width=None,
    height=None,
    px_to_m=DEFAULT_PX_TO_M,
    absorption=DEFAULT_ABSORPTION,
    cutoff=CUTOFF_SIGMA,
):
    """Orthographic top-down render of the sand state.

    painting_meta supplies background and c_sand (a Painting works); the
    canvas size defaults to the painting's. Returns an (H, W, 3) image.
    """
    w = int(width if width is not None else painting_meta.width)
    h = int(height if height is not None else painting_meta.height)
    background = np.asarray(painting_meta.background, dtype=np.float64)
    c_sand = np.asarray(painting_meta.c_sand, dtype=np.float64)
    flat = particle_kernels(state.cloud, px_to_m, absorption)
    density, _ = splat_density(flat, w, h, cutoff)
    return np.maximum(
        background[None, None, :] - c_sand[None, None, :] * density[:, :, None],
        0.0,
    )
