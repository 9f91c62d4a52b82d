"""Deterministic drawing-order planning over user-supplied region masks.

A plan is a list of labeled, layered mask regions plus a back-to-front
drawing order.  Plans arrive as JSON manifests referencing mask PNGs, or as
the built-in single-background fallback when no manifest is given.
"""

from __future__ import annotations

import dataclasses
import json
import pathlib

import numpy as np
from PIL import Image

from .errors import DimensionMismatch, DuplicateRegionId, MissingMask, PlanError

METHODS = ("fill", "line")


@dataclasses.dataclass
class Region:
    region_id: int
    label: str
    layer: int
    mask: np.ndarray  # (H, W) bool
    method: str = "fill"
    background: bool = False

    def __post_init__(self):
        self.mask = np.asarray(self.mask, dtype=bool)
        if self.mask.ndim != 2:
            raise DimensionMismatch("mask must be 2-d, got shape %s" % (self.mask.shape,))
        if self.layer < 0:
            raise PlanError("layer must be >= 0")
        if self.method not in METHODS:
            raise PlanError("unknown method %r" % self.method)

    @property
    def area(self):
        return int(self.mask.sum())

    def centroid(self):
        """(x, y) centroid of the mask; canvas center if the mask is empty."""
        ys, xs = np.nonzero(self.mask)
        if len(ys) == 0:
            h, w = self.mask.shape
            return (w / 2.0, h / 2.0)
        return (float(xs.mean()), float(ys.mean()))


@dataclasses.dataclass
class RegionPlan:
    regions: list
    order: list            # region ids, back to front
    background_ids: set

    @classmethod
    def build(cls, regions):
        """Validate regions, infer the order, and check the background rule."""
        ids = [r.region_id for r in regions]
        if len(set(ids)) != len(ids):
            raise DuplicateRegionId("region ids must be unique: %s" % ids)
        shapes = {r.mask.shape for r in regions}
        if len(shapes) > 1:
            raise DimensionMismatch("masks disagree in shape: %s" % shapes)
        order = infer_order(regions)
        background_ids = {r.region_id for r in regions if r.background}
        by_id = {r.region_id: r for r in regions}
        seen_foreground = False
        for rid in order:
            if by_id[rid].background:
                if seen_foreground:
                    raise PlanError(
                        "background region %d ordered after a foreground region" % rid
                    )
            else:
                seen_foreground = True
        return cls(regions=list(regions), order=order, background_ids=background_ids)

    def region(self, region_id):
        for r in self.regions:
            if r.region_id == region_id:
                return r
        raise KeyError(region_id)

    @property
    def shape(self):
        return self.regions[0].mask.shape


def infer_order(regions):
    """Back-to-front order: layer asc, area desc, centroid y asc, id asc."""
    if not regions:
        raise PlanError("cannot order an empty region list")
    keyed = sorted(
        regions, key=lambda r: (r.layer, -r.area, r.centroid()[1], r.region_id)
    )
    return [r.region_id for r in keyed]


def fallback_plan(width, height):
    """Single full-canvas background region, used when no manifest is given."""
    r = Region(
        region_id=0,
        label="background",
        layer=0,
        mask=np.ones((height, width), dtype=bool),
        method="fill",
        background=True,
    )
    return RegionPlan.build([r])


def save_plan(plan, out_dir, name="plan.json"):
    """Write the manifest plus one mask PNG per region; returns manifest path."""
    out_dir = pathlib.Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    records = []
    for r in plan.regions:
        mask_name = "region_%06d.png" % r.region_id
        Image.fromarray(r.mask.astype(np.uint8) * 255).save(out_dir / mask_name)
        records.append(
            {
                "id": r.region_id,
                "label": r.label,
                "layer": r.layer,
                "method": r.method,
                "mask_path": mask_name,
                "background": r.background,
            }
        )
    manifest = out_dir / name
    manifest.write_text(json.dumps({"regions": records}, indent=2) + "\n")
    return manifest


def load_plan(manifest_path):
    """Parse a manifest, load its masks, and build a validated plan."""
    manifest_path = pathlib.Path(manifest_path)
    data = json.loads(manifest_path.read_text())
    base = manifest_path.parent
    seen = set()
    regions = []
    for rec in data["regions"]:
        rid = int(rec["id"])
        if rid in seen:
            raise DuplicateRegionId("region id %d appears twice" % rid)
        seen.add(rid)
        mask_file = base / rec["mask_path"]
        if not mask_file.exists():
            raise MissingMask(str(mask_file))
        mask = np.asarray(Image.open(mask_file).convert("L")) > 0
        regions.append(
            Region(
                region_id=rid,
                label=str(rec.get("label", "")),
                layer=int(rec["layer"]),
                mask=mask,
                method=str(rec.get("method", "fill")),
                background=bool(rec.get("background", False)),
            )
        )
    return RegionPlan.build(regions)


def classify_strokes(painting, plan):
    """Assign every stroke a region id; returns a new painting.

    Each kernel center votes for the highest-layer mask covering it (ties to
    the lower region id); the stroke takes the majority region, ties broken
    by higher layer then lower region id.  Strokes with no covered center go
    to the region with the nearest mask centroid.
    """
    h, w = plan.shape
    if (painting.height, painting.width) != (h, w):
        raise DimensionMismatch(
            "plan masks %s do not match canvas %s"
            % ((h, w), (painting.height, painting.width))
        )
    # per-pixel winning region: highest layer, then lower id
    ranked = sorted(plan.regions, key=lambda r: (-r.layer, r.region_id))
    winner = np.full((h, w), -1, dtype=np.int64)
    for r in reversed(ranked):  # weakest first; stronger overwrite
        winner[r.mask] = r.region_id
    by_id = {r.region_id: r for r in plan.regions}
    centroids = {r.region_id: np.array(r.centroid()) for r in plan.regions}

    out = painting.copy()
    for s in out.strokes:
        xs = np.clip(np.round(s.centers[:, 0]).astype(int), 0, w - 1)
        ys = np.clip(np.round(s.centers[:, 1]).astype(int), 0, h - 1)
        inside = (
            (s.centers[:, 0] >= -0.5)
            & (s.centers[:, 0] <= w - 0.5)
            & (s.centers[:, 1] >= -0.5)
            & (s.centers[:, 1] <= h - 0.5)
        )
        votes = winner[ys, xs]
        votes = votes[inside & (votes >= 0)]
        if len(votes) == 0:
            mean = s.centers.mean(axis=0)
            s.region_id = min(
                by_id,
                key=lambda rid: (float(np.linalg.norm(centroids[rid] - mean)), rid),
            )
            continue
        counts = {}
        for v in votes:
            counts[int(v)] = counts.get(int(v), 0) + 1
        s.region_id = min(
            counts,
            key=lambda rid: (-counts[rid], -by_id[rid].layer, rid),
        )
    return out
