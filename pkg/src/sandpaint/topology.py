"""Structural edits applied between optimizer steps.

Four edit kinds: merging adjacent kernel centers that collapsed together,
splitting strokes across oversized gaps, gluing strokes whose endpoints
align, and pruning strokes too faint or small to matter.  A full pass runs
them in a fixed order chosen so that an immediate second pass is a no-op.
"""

from __future__ import annotations

import dataclasses
import itertools
import math

import numpy as np

from .model import Painting, Stroke, activate_opacity, activate_scale


@dataclasses.dataclass
class TopologyConfig:
    point_merge_dist: float = 0.1        # px
    stroke_merge_endpoint_dist: float = 5.0  # px
    prune_opacity: float = 0.01
    prune_radius: float = 3.0            # px, activated long axis
    attribute_similarity: float = 0.2    # relative tolerance when gluing
    merge_tangent_deg: float = 30.0
    late_prune_multiplier: float = 1.0   # scales prune_opacity late in a fit

    def __post_init__(self):
        for f in dataclasses.fields(self):
            if getattr(self, f.name) <= 0:
                raise ValueError("%s must be positive" % f.name)


@dataclasses.dataclass
class TopologyChanges:
    points_merged: int = 0
    strokes_split: int = 0
    strokes_merged: int = 0
    strokes_pruned: int = 0

    def total(self):
        return self.points_merged + self.strokes_split + self.strokes_merged + self.strokes_pruned


def _circ_mean(a, b):
    """Mean of two rotations under the pi-periodic kernel symmetry."""
    x = math.cos(2 * a) + math.cos(2 * b)
    y = math.sin(2 * a) + math.sin(2 * b)
    return 0.5 * math.atan2(y, x)


def merge_points(stroke, cfg):
    """One greedy front-to-back sweep; returns (stroke, merges_done).

    An adjacent pair closer than the threshold collapses to its midpoint
    (circular-mean rotation); the sweep then continues after the pair, so a
    chain of near-coincident points shrinks by one sweep at a time.
    """
    c = stroke.centers
    r = stroke.rotations
    k = stroke.num_kernels
    out_c, out_r = [], []
    merges = 0
    i = 0
    while i < k:
        if i + 1 < k and np.linalg.norm(c[i + 1] - c[i]) < cfg.point_merge_dist:
            out_c.append(0.5 * (c[i] + c[i + 1]))
            out_r.append(_circ_mean(r[i], r[i + 1]))
            merges += 1
            i += 2
        else:
            out_c.append(c[i])
            out_r.append(r[i])
            i += 1
    if merges == 0:
        return stroke, 0
    new = stroke.copy()
    new.centers = np.asarray(out_c, dtype=np.float64)
    new.rotations = np.asarray(out_r, dtype=np.float64)
    return new, merges


def merge_points_full(stroke, cfg):
    """Sweep repeatedly until no adjacent pair is below the threshold."""
    total = 0
    while True:
        stroke, n = merge_points(stroke, cfg)
        total += n
        if n == 0:
            return stroke, total


def split_stroke(stroke, cfg, next_id=None):
    """Cut at every adjacent gap exceeding the activated long axis."""
    if next_id is None:
        next_id = itertools.count(stroke.stroke_id + 1).__next__
    if stroke.num_kernels < 2:
        return [stroke]
    long_axis = float(np.max(activate_scale(stroke.raw_scale)))
    gaps = np.linalg.norm(np.diff(stroke.centers, axis=0), axis=1)
    cuts = np.nonzero(gaps > long_axis)[0]
    if len(cuts) == 0:
        return [stroke]
    bounds = [0] + [int(i) + 1 for i in cuts] + [stroke.num_kernels]
    frags = []
    for fi, (lo, hi) in enumerate(zip(bounds[:-1], bounds[1:])):
        frag = stroke.copy()
        frag.centers = stroke.centers[lo:hi].copy()
        frag.rotations = stroke.rotations[lo:hi].copy()
        frag.stroke_id = stroke.stroke_id if fi == 0 else next_id()
        frags.append(frag)
    return frags


def _endpoint_tangent(stroke, head):
    """Unit tangent pointing into the stroke's travel direction, or None."""
    c = stroke.centers
    if stroke.num_kernels < 2:
        return None
    d = c[1] - c[0] if head else c[-1] - c[-2]
    n = np.linalg.norm(d)
    return None if n < 1e-12 else d / n


def _rel_diff(a, b):
    return abs(a - b) / max(abs(a), abs(b), 1e-12)


def _attributes_similar(a, b, tol):
    asx, asy = activate_scale(a.raw_scale)
    bsx, bsy = activate_scale(b.raw_scale)
    if _rel_diff(asx, bsx) > tol or _rel_diff(asy, bsy) > tol:
        return False
    return _rel_diff(a.opacity(), b.opacity()) <= tol


def _oriented(stroke, reverse):
    if not reverse:
        return stroke.centers, stroke.rotations
    return stroke.centers[::-1], stroke.rotations[::-1]


def _candidate(a, b, rev_a, rev_b, cfg):
    """Gap and glued geometry for one orientation, or None if gated out.

    Orientation: (a, maybe reversed) followed by (b, maybe reversed).
    Gates beyond the spacing/attribute/tangent rules keep the full pass
    idempotent: the junction must not itself be a point-merge candidate,
    and no gap of the glued stroke may exceed its long axis (else the very
    next split would undo the glue).
    """
    ca, ra = _oriented(a, rev_a)
    cb, rb = _oriented(b, rev_b)
    gap = float(np.linalg.norm(cb[0] - ca[-1]))
    if not (cfg.point_merge_dist <= gap <= cfg.stroke_merge_endpoint_dist):
        return None
    if not _attributes_similar(a, b, cfg.attribute_similarity):
        return None
    ta = _endpoint_tangent(Stroke(0, ca, ra, a.raw_scale, a.raw_opacity), head=False)
    tb = _endpoint_tangent(Stroke(0, cb, rb, b.raw_scale, b.raw_opacity), head=True)
    if ta is not None and tb is not None:
        cosang = float(np.clip(np.dot(ta, tb), -1.0, 1.0))
        if math.degrees(math.acos(cosang)) > cfg.merge_tangent_deg:
            return None
    ka, kb = a.num_kernels, b.num_kernels
    raw_scale = (ka * a.raw_scale + kb * b.raw_scale) / (ka + kb)
    raw_opacity = (ka * a.raw_opacity + kb * b.raw_opacity) / (ka + kb)
    centers = np.concatenate([ca, cb], axis=0)
    long_axis = float(np.max(activate_scale(raw_scale)))
    gaps = np.linalg.norm(np.diff(centers, axis=0), axis=1)
    if np.any(gaps > long_axis):
        return None
    rotations = np.concatenate([ra, rb])
    return gap, centers, rotations, raw_scale, raw_opacity


def _merge_round(painting, cfg):
    """One greedy round: disjoint pairs glued in ascending-gap order."""
    strokes = painting.strokes
    candidates = []
    for i in range(len(strokes)):
        for j in range(i + 1, len(strokes)):
            best = None
            for rev_a, rev_b in ((False, False), (False, True), (True, False), (True, True)):
                cand = _candidate(strokes[i], strokes[j], rev_a, rev_b, cfg)
                if cand is not None and (best is None or cand[0] < best[0]):
                    best = cand
            if best is not None:
                candidates.append((best[0], i, j, best))
    candidates.sort(key=lambda t: (t[0], t[1], t[2]))
    used = set()
    merged = {}
    for gap, i, j, (g, centers, rotations, raw_scale, raw_opacity) in candidates:
        if i in used or j in used:
            continue
        used.update((i, j))
        a, b = strokes[i], strokes[j]
        bigger = a if a.num_kernels >= b.num_kernels else b
        merged[i] = Stroke(
            stroke_id=painting.next_stroke_id() + len(merged),
            centers=centers.copy(),
            rotations=rotations.copy(),
            raw_scale=raw_scale,
            raw_opacity=raw_opacity,
            region_id=bigger.region_id,
        )
        merged[j] = None
    if not merged:
        return painting, 0
    out = []
    for idx, s in enumerate(strokes):
        if idx in merged:
            if merged[idx] is not None:
                out.append(merged[idx])
        else:
            out.append(s)
    result = painting.copy()
    result.strokes = out
    return result, sum(1 for v in merged.values() if v is not None)


def merge_strokes(painting, cfg):
    """Glue aligned strokes; rounds repeat so chains collapse fully."""
    total = 0
    while True:
        painting, n = _merge_round(painting, cfg)
        total += n
        if n == 0:
            return painting, total


def prune_strokes(painting, cfg, opacity_threshold=None):
    """Drop strokes below the opacity or long-axis significance gates."""
    thr = cfg.prune_opacity if opacity_threshold is None else opacity_threshold
    kept = []
    for s in painting.strokes:
        if s.opacity() < thr:
            continue
        if float(np.max(activate_scale(s.raw_scale))) < cfg.prune_radius:
            continue
        kept.append(s)
    n = len(painting.strokes) - len(kept)
    out = painting.copy()
    out.strokes = [s for s in kept]
    return out, n


def topology_pass(painting, cfg, late_stage=False):
    """Full pass: point merges to fixed point, splits, glues, prunes.

    Returns (painting, TopologyChanges).  Running the pass twice in a row
    leaves the second result identical to the first.
    """
    changes = TopologyChanges()
    work = painting.copy()

    new_strokes = []
    for s in work.strokes:
        merged, n = merge_points_full(s, cfg)
        changes.points_merged += n
        new_strokes.append(merged)
    work.strokes = new_strokes

    alloc = itertools.count(work.next_stroke_id()).__next__
    split_out = []
    for s in work.strokes:
        frags = split_stroke(s, cfg, next_id=alloc)
        changes.strokes_split += len(frags) - 1
        split_out.extend(frags)
    work.strokes = split_out

    work, n = merge_strokes(work, cfg)
    changes.strokes_merged += n

    thr = cfg.prune_opacity * (cfg.late_prune_multiplier if late_stage else 1.0)
    work, n = prune_strokes(work, cfg, opacity_threshold=thr)
    changes.strokes_pruned += n
    return work, changes
