"""Differentiable subtractive rasterizer.

Kernels darken the canvas per channel: C(x) = max(b - c_sand * D(x), 0)
where D is the scalar accumulated density sum_k G_k(x).  The accumulation
is order independent, so kernels are flattened into plain arrays and
splatted through variable-size bounding boxes expanded into a single
(pixel, kernel) pair list.  The backward pass evaluates the closed form
derivatives of G and reduces them per kernel with bincount; channels
clamped at zero receive zero gradient.
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np

from .errors import DimensionMismatch, NonFiniteGradient
from .model import Painting, activate_opacity, activate_scale, opacity_grad, scale_grad

CUTOFF_SIGMA = 3.0

# Pairs are processed in chunks to bound peak memory.
PAIR_CHUNK = 1 << 21


@dataclasses.dataclass
class FlatKernels:
    """Per-kernel arrays for every active kernel, in stroke order."""

    centers: np.ndarray    # (N, 2)
    rotations: np.ndarray  # (N,)
    sx: np.ndarray         # (N,) activated
    sy: np.ndarray         # (N,)
    alpha: np.ndarray      # (N,) activated, shared within a stroke
    stroke_index: np.ndarray  # (N,) index into `slices`
    slices: list           # [(stroke, start, end)] flatten bookkeeping

    @property
    def count(self):
        return self.centers.shape[0]


@dataclasses.dataclass
class RenderResult:
    image: np.ndarray          # (H, W, 3)
    density: np.ndarray        # (H, W) scalar absorption field
    flat: FlatKernels
    background: np.ndarray     # (3,)
    c_sand: np.ndarray         # (3,)
    pairs: list | None = None  # cached chunk tuples for the backward pass


@dataclasses.dataclass
class StrokeGrads:
    centers: np.ndarray      # (K, 2)
    rotations: np.ndarray    # (K,)
    raw_scale: np.ndarray    # (2,)
    raw_opacity: float


def resolve_active(painting, active):
    """Normalize the active spec to a list of (stroke, kernel_prefix).

    active=None renders everything; otherwise a {stroke_id: prefix} dict
    where only listed strokes render and prefix counts kernels from the
    start of the curve.
    """
    if active is None:
        return [(s, s.num_kernels) for s in painting.strokes]
    out = []
    for s in painting.strokes:
        if s.stroke_id in active:
            k = int(np.clip(active[s.stroke_id], 0, s.num_kernels))
            if k > 0:
                out.append((s, k))
    return out


def flatten(painting, active=None):
    picked = resolve_active(painting, active)
    slices = []
    centers, rotations, sx, sy, alpha, sidx = [], [], [], [], [], []
    start = 0
    for i, (s, k) in enumerate(picked):
        scale = activate_scale(s.raw_scale)
        a = float(activate_opacity(np.asarray(s.raw_opacity)))
        centers.append(s.centers[:k])
        rotations.append(s.rotations[:k])
        sx.append(np.full(k, scale[0]))
        sy.append(np.full(k, scale[1]))
        alpha.append(np.full(k, a))
        sidx.append(np.full(k, i, dtype=np.int64))
        slices.append((s, start, start + k))
        start += k
    if not centers:
        z = np.zeros(0)
        return FlatKernels(z.reshape(0, 2), z, z, z, z, z.astype(np.int64), slices)
    return FlatKernels(
        np.concatenate(centers, axis=0),
        np.concatenate(rotations),
        np.concatenate(sx),
        np.concatenate(sy),
        np.concatenate(alpha),
        np.concatenate(sidx),
        slices,
    )


def bounding_box(center, theta, sx, sy, width, height, cutoff=CUTOFF_SIGMA):
    """Half-open pixel box [(x0, x1), (y0, y1)] covering Mahalanobis <= cutoff.

    Half extents are cutoff * sqrt(diag(Sigma)); every pixel whose center
    lies within the cutoff ellipse is inside the box.
    """
    c, s = math.cos(theta), math.sin(theta)
    hx = cutoff * math.sqrt((c * sx) ** 2 + (s * sy) ** 2)
    hy = cutoff * math.sqrt((s * sx) ** 2 + (c * sy) ** 2)
    x0 = min(max(0, int(math.floor(center[0] - hx))), width)
    x1 = min(width, max(x0, int(math.ceil(center[0] + hx)) + 1))
    y0 = min(max(0, int(math.floor(center[1] - hy))), height)
    y1 = min(height, max(y0, int(math.ceil(center[1] + hy)) + 1))
    return (x0, x1), (y0, y1)


def _boxes(flat, width, height, cutoff):
    """Vectorized bounding boxes: (x0, nx, y0, ny) arrays."""
    c = np.cos(flat.rotations)
    s = np.sin(flat.rotations)
    hx = cutoff * np.sqrt((c * flat.sx) ** 2 + (s * flat.sy) ** 2)
    hy = cutoff * np.sqrt((s * flat.sx) ** 2 + (c * flat.sy) ** 2)
    cx, cy = flat.centers[:, 0], flat.centers[:, 1]
    x0 = np.clip(np.floor(cx - hx).astype(np.int64), 0, width)
    x1 = np.clip(np.ceil(cx + hx).astype(np.int64) + 1, 0, width)
    y0 = np.clip(np.floor(cy - hy).astype(np.int64), 0, height)
    y1 = np.clip(np.ceil(cy + hy).astype(np.int64) + 1, 0, height)
    return x0, np.maximum(x1 - x0, 0), y0, np.maximum(y1 - y0, 0)


def _pair_chunks(flat, width, height, cutoff):
    """Yield (kernel_idx, px, py) chunks covering every kernel's box."""
    x0, nx, y0, ny = _boxes(flat, width, height, cutoff)
    counts = nx * ny
    total = int(counts.sum())
    if total == 0:
        return
    starts = np.concatenate(([0], np.cumsum(counts)))
    kidx_all = np.repeat(np.arange(flat.count, dtype=np.int64), counts)
    offs_all = np.arange(total, dtype=np.int64) - np.repeat(starts[:-1], counts)
    for lo in range(0, total, PAIR_CHUNK):
        hi = min(lo + PAIR_CHUNK, total)
        k = kidx_all[lo:hi]
        off = offs_all[lo:hi]
        nxk = nx[k]
        px = x0[k] + off % nxk
        py = y0[k] + off // nxk
        yield k, px, py


def _kernel_terms(flat, k, px, py):
    """Per-pair exponential and the u-vector reused by all derivatives."""
    dx = px - flat.centers[k, 0]
    dy = py - flat.centers[k, 1]
    c = np.cos(flat.rotations[k])
    s = np.sin(flat.rotations[k])
    sx = flat.sx[k]
    sy = flat.sy[k]
    ux = (c * dx + s * dy) / (sx * sx)
    uy = (-s * dx + c * dy) / (sy * sy)
    # exponent -0.5 d^T Sigma^-1 d written through u to share work
    e = np.exp(-0.5 * (ux * ux * sx * sx + uy * uy * sy * sy))
    return e, ux, uy, c, s


def splat_density(flat, width, height, cutoff=CUTOFF_SIGMA, keep_pairs=False):
    """Accumulate the scalar density field of flattened kernels.

    Returns (density, pairs) where pairs caches the per-chunk terms for
    a later backward pass (None unless keep_pairs).
    """
    density = np.zeros(height * width, dtype=np.float64)
    pairs = [] if keep_pairs else None
    for k, px, py in _pair_chunks(flat, width, height, cutoff):
        e, ux, uy, c, s = _kernel_terms(flat, k, px, py)
        g = flat.alpha[k] * e
        density += np.bincount(
            py * width + px, weights=g, minlength=height * width
        )
        if keep_pairs:
            pairs.append((k, px, py, e, ux, uy, c, s))
    return density.reshape(height, width), pairs


def render(painting, active=None, cutoff=CUTOFF_SIGMA, keep_pairs=False):
    """Rasterize; returns a RenderResult with image and raw density."""
    flat = flatten(painting, active)
    h, w = painting.height, painting.width
    density, pairs = splat_density(flat, w, h, cutoff, keep_pairs)
    image = np.maximum(
        painting.background[None, None, :] - painting.c_sand[None, None, :] * density[:, :, None],
        0.0,
    )
    return RenderResult(image, density, flat, painting.background, painting.c_sand, pairs)


def render_image(painting, active=None, cutoff=CUTOFF_SIGMA):
    return render(painting, active, cutoff).image


def backward(result, grad_image, cutoff=CUTOFF_SIGMA):
    """Backpropagate dL/dimage to per-stroke raw-parameter gradients.

    Returns {stroke_id: StrokeGrads}.  Raises NonFiniteGradient if any
    output entry is not finite.
    """
    flat = result.flat
    h, w = result.density.shape
    grad_image = np.asarray(grad_image, dtype=np.float64)
    if grad_image.shape != (h, w, 3):
        raise DimensionMismatch(
            "grad image %s does not match canvas %s" % (grad_image.shape, (h, w, 3))
        )
    # clamp subgradient: channels pinned at zero pass nothing through
    raw = result.background[None, None, :] - result.c_sand[None, None, :] * result.density[:, :, None]
    live = raw > 0.0
    grad_density = np.sum(
        np.where(live, -result.c_sand[None, None, :] * grad_image, 0.0), axis=2
    ).reshape(-1)

    n = flat.count
    g_cx = np.zeros(n)
    g_cy = np.zeros(n)
    g_rot = np.zeros(n)
    g_sx = np.zeros(n)
    g_sy = np.zeros(n)
    g_alpha = np.zeros(n)

    def accumulate(k, px, py, e, ux, uy, c, s):
        up = grad_density[py * w + px]
        ge = up * flat.alpha[k] * e
        sx = flat.sx[k]
        sy = flat.sy[k]
        # dG/dmu = G * R u ; dG/dtheta = G (sx^2 - sy^2) ux uy
        g_cx[:] += np.bincount(k, weights=ge * (c * ux - s * uy), minlength=n)
        g_cy[:] += np.bincount(k, weights=ge * (s * ux + c * uy), minlength=n)
        g_rot[:] += np.bincount(k, weights=ge * (sx * sx - sy * sy) * ux * uy, minlength=n)
        g_sx[:] += np.bincount(k, weights=ge * sx * ux * ux, minlength=n)
        g_sy[:] += np.bincount(k, weights=ge * sy * uy * uy, minlength=n)
        g_alpha[:] += np.bincount(k, weights=up * e, minlength=n)

    if result.pairs is not None:
        for chunk in result.pairs:
            accumulate(*chunk)
    else:
        for k, px, py in _pair_chunks(flat, w, h, cutoff):
            e, ux, uy, c, s = _kernel_terms(flat, k, px, py)
            accumulate(k, px, py, e, ux, uy, c, s)

    grads = {}
    for stroke, start, end in flat.slices:
        centers = np.stack([g_cx[start:end], g_cy[start:end]], axis=1)
        dsx = float(g_sx[start:end].sum())
        dsy = float(g_sy[start:end].sum())
        raw_scale = np.array([dsx, dsy]) * scale_grad(stroke.raw_scale)
        raw_opacity = float(g_alpha[start:end].sum()) * float(
            opacity_grad(np.asarray(stroke.raw_opacity))
        )
        sg = StrokeGrads(centers, g_rot[start:end].copy(), raw_scale, raw_opacity)
        bad = (
            not np.all(np.isfinite(sg.centers))
            or not np.all(np.isfinite(sg.rotations))
            or not np.all(np.isfinite(sg.raw_scale))
            or not math.isfinite(sg.raw_opacity)
        )
        if bad:
            raise NonFiniteGradient("stroke %d produced non-finite gradients" % stroke.stroke_id)
        grads[stroke.stroke_id] = sg
    return grads
