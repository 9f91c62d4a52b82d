"""Evaluation metrics: PSNR, SSIM, texture features, and process convergence.

All image inputs are linear-light float arrays in [0, 1], grayscale (H, W)
or RGB (H, W, 3); RGB is reduced to luma where a metric is defined on a
single channel. The texture comparison (gtc) uses co-occurrence contrast
and entropy; its relative-L1 combination is this package's definition.
The convergence comparison (ddc) replaces learned perceptual distances
with pluggable frame distances, including precomputed ones from CSV.
"""

from __future__ import annotations

import csv
import dataclasses
import math

import numpy as np
from scipy.signal import convolve2d

from .errors import DegenerateReference, DimensionMismatch, DomainError, EmptySequence
from .imgio import to_luma

DEFAULT_LEVELS = 32
DEFAULT_OFFSETS = [(0, 1), (1, 0), (1, 1), (1, -1)]

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_C1 = 0.01**2
SSIM_C2 = 0.03**2

PSNR_CAP_DB = 100.0


def _check_pair(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionMismatch("image shapes %s vs %s" % (a.shape, b.shape))
    return a, b


def psnr(a, b):
    """Peak signal-to-noise ratio in dB with peak 1.0, capped at 100 dB."""
    a, b = _check_pair(a, b)
    mse = float(np.mean((a - b) ** 2))
    if mse <= 0.0:
        return PSNR_CAP_DB
    return min(PSNR_CAP_DB, -10.0 * math.log10(mse))


def _gaussian_window(size, sigma):
    ax = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    g = np.exp(-(ax * ax) / (2.0 * sigma * sigma))
    w = np.outer(g, g)
    return w / w.sum()


def ssim(a, b):
    """Mean structural similarity on luma; 11x11 Gaussian window, sigma 1.5."""
    a = to_luma(np.asarray(a, dtype=np.float64))
    b = to_luma(np.asarray(b, dtype=np.float64))
    if a.shape != b.shape:
        raise DimensionMismatch("luma shapes %s vs %s" % (a.shape, b.shape))
    if min(a.shape) < SSIM_WINDOW:
        raise DimensionMismatch(
            "image %s smaller than the %dx%d window" % (a.shape, SSIM_WINDOW, SSIM_WINDOW)
        )
    w = _gaussian_window(SSIM_WINDOW, SSIM_SIGMA)

    def win(img):
        return convolve2d(img, w, mode="valid")

    mu_a = win(a)
    mu_b = win(b)
    var_a = win(a * a) - mu_a * mu_a
    var_b = win(b * b) - mu_b * mu_b
    cov = win(a * b) - mu_a * mu_b
    num = (2.0 * mu_a * mu_b + SSIM_C1) * (2.0 * cov + SSIM_C2)
    den = (mu_a * mu_a + mu_b * mu_b + SSIM_C1) * (var_a + var_b + SSIM_C2)
    return float(np.clip(np.mean(num / den), -1.0, 1.0))


@dataclasses.dataclass
class GlcmFeatures:
    contrast: float
    entropy: float
    levels: int
    offsets: list


def _quantize(img, levels):
    luma = to_luma(np.asarray(img, dtype=np.float64))
    return np.minimum((luma * levels).astype(np.int64), levels - 1)


def glcm_matrix(img, levels, offset):
    """Symmetrized, normalized co-occurrence matrix for one (dr, dc) offset."""
    if levels < 2:
        raise DomainError("levels must be >= 2, got %d" % levels)
    q = _quantize(img, levels)
    h, w = q.shape
    dr, dc = offset
    r0, r1 = max(0, -dr), h - max(0, dr)
    c0, c1 = max(0, -dc), w - max(0, dc)
    if r1 <= r0 or c1 <= c0:
        raise DomainError("offset %s leaves no pixel pairs on %s" % (offset, q.shape))
    src = q[r0:r1, c0:c1].ravel()
    dst = q[r0 + dr : r1 + dr, c0 + dc : c1 + dc].ravel()
    counts = np.bincount(src * levels + dst, minlength=levels * levels)
    m = counts.reshape(levels, levels).astype(np.float64)
    m = m + m.T
    return m / m.sum()


def glcm_features(img, levels=DEFAULT_LEVELS, offsets=None):
    """Co-occurrence contrast and entropy averaged over the offset set."""
    if offsets is None:
        offsets = list(DEFAULT_OFFSETS)
    if levels < 2:
        raise DomainError("levels must be >= 2, got %d" % levels)
    idx = np.arange(levels, dtype=np.float64)
    diff2 = (idx[:, None] - idx[None, :]) ** 2
    contrasts = []
    entropies = []
    for off in offsets:
        p = glcm_matrix(img, levels, off)
        contrasts.append(float(np.sum(p * diff2)))
        nz = p[p > 0.0]
        entropies.append(float(-np.sum(nz * np.log2(nz))))
    return GlcmFeatures(
        contrast=float(np.mean(contrasts)),
        entropy=float(np.mean(entropies)),
        levels=levels,
        offsets=list(offsets),
    )


def gtc(generated, reference, levels=DEFAULT_LEVELS, offsets=None):
    """Relative texture deficiency of `generated` against `reference`.

    0.5 * (|c_g - c_r| / c_r + |e_g - e_r| / e_r) on averaged co-occurrence
    features. Normalization is by the reference, so the measure is
    deliberately asymmetric.
    """
    f_ref = glcm_features(reference, levels, offsets)
    if f_ref.contrast <= 0.0 or f_ref.entropy <= 0.0:
        raise DegenerateReference(
            "reference has contrast %r, entropy %r" % (f_ref.contrast, f_ref.entropy)
        )
    f_gen = glcm_features(generated, levels, offsets)
    return 0.5 * (
        abs(f_gen.contrast - f_ref.contrast) / f_ref.contrast
        + abs(f_gen.entropy - f_ref.entropy) / f_ref.entropy
    )


def dtw(a, b):
    """Optimal alignment cost: absolute-difference local cost, full DP table."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.size == 0 or b.size == 0:
        raise EmptySequence("dtw needs two non-empty sequences")
    n, m = len(a), len(b)
    cost = np.abs(a[:, None] - b[None, :])
    d = np.full((n + 1, m + 1), np.inf)
    d[0, 0] = 0.0
    for i in range(1, n + 1):
        row = d[i]
        prev = d[i - 1]
        ci = cost[i - 1]
        for j in range(1, m + 1):
            row[j] = ci[j - 1] + min(prev[j], row[j - 1], prev[j - 1])
    return float(d[n, m])


def frame_distance(frame, target, mode):
    if mode == "l2":
        a, b = _check_pair(frame, target)
        return float(np.sqrt(np.mean((a - b) ** 2)))
    if mode == "one_minus_ssim":
        return 1.0 - ssim(frame, target)
    raise DomainError("unknown frame distance %r" % (mode,))


def convergence_curve(frames, target, frame_dist="l2"):
    """Per-frame distance to the target, in frame order."""
    return np.array([frame_distance(f, target, frame_dist) for f in frames])


def load_curve_csv(path):
    """Read `frame_index,distance` rows; values returned sorted by index."""
    rows = []
    with open(path, newline="") as f:
        for rec in csv.DictReader(f):
            rows.append((int(rec["frame_index"]), float(rec["distance"])))
    rows.sort()
    return np.array([v for _, v in rows], dtype=np.float64)


def _normalize_curve(curve):
    # relative-progress curve; a zero first value would mean the sequence
    # starts already converged, in which case scaling is a no-op
    first = curve[0]
    return curve / first if abs(first) > 1e-12 else curve.copy()


def ddc(gen, ref, target, frame_dist="l2"):
    """Alignment cost between normalized convergence curves.

    `gen` and `ref` are frame lists, or CSV paths of precomputed per-frame
    distances when frame_dist is "external_file". Each curve is normalized
    by its own first value; the alignment cost is divided by the longer
    curve length.
    """
    if frame_dist == "external_file":
        curve_g = load_curve_csv(gen)
        curve_r = load_curve_csv(ref)
    else:
        curve_g = convergence_curve(gen, target, frame_dist)
        curve_r = convergence_curve(ref, target, frame_dist)
    if len(curve_g) < 2 or len(curve_r) < 2:
        raise DomainError("ddc needs at least 2 frames per sequence")
    a = _normalize_curve(curve_g)
    b = _normalize_curve(curve_r)
    return dtw(a, b) / max(len(a), len(b))


def evaluate(gen_frames, ref_frames, target, frame_dist="l2"):
    """Full report: final-frame fidelity plus process convergence.

    psnr/ssim/gtc compare the final generated frame with the final
    reference frame; the `target` block compares it with the target image.
    """
    final_gen = gen_frames[-1]
    final_ref = ref_frames[-1]
    report = {
        "psnr": psnr(final_gen, final_ref),
        "ssim": ssim(final_gen, final_ref),
        "gtc": gtc(final_gen, final_ref),
        "ddc": ddc(gen_frames, ref_frames, target, frame_dist),
        "target": {
            "psnr": psnr(final_gen, target),
            "ssim": ssim(final_gen, target),
            "gtc": gtc(final_gen, target),
        },
    }
    return report
