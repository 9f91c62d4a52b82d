"""Ordered drawing scripts and process-frame emission.

A script partitions every stroke into contiguous kernel ranges revealed one
frame at a time, ordered back-to-front by region, then coarse-to-fine and
top-to-bottom within a region.  Frame 0 always shows the untouched canvas;
events begin at frame 1.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import pathlib

import numpy as np

from .errors import IoError, UnclassifiedStroke
from .imgio import save_image
from .model import activate_scale
from .raster import render_image


@dataclasses.dataclass
class ScriptEvent:
    stroke_id: int
    kernel_start: int
    kernel_end: int
    frame_index: int


@dataclasses.dataclass
class ProcessScript:
    events: list
    total_frames: int
    fps: int

    def to_json(self, path=None):
        data = {
            "schema_version": 1,
            "fps": self.fps,
            "total_frames": self.total_frames,
            "events": [dataclasses.asdict(e) for e in self.events],
        }
        text = json.dumps(data, indent=2)
        if path is not None:
            pathlib.Path(path).write_text(text + "\n")
        return text

    @classmethod
    def from_json(cls, source):
        data = json.loads(source)
        events = [ScriptEvent(**e) for e in data["events"]]
        return cls(events=events, total_frames=int(data["total_frames"]), fps=int(data["fps"]))

    def active_at(self, frame_index):
        """Rasterizer `active` dict for everything revealed by this frame."""
        active = {}
        for e in self.events:
            if e.frame_index <= frame_index:
                active[e.stroke_id] = max(active.get(e.stroke_id, 0), e.kernel_end)
        return active


def build_script(painting, plan, frames_per_second, kernels_per_frame):
    """Order strokes and slice them into per-frame reveal events."""
    if kernels_per_frame < 1:
        raise ValueError("kernels_per_frame must be >= 1")
    rank = {rid: i for i, rid in enumerate(plan.order)}
    for s in painting.strokes:
        if s.region_id is None or s.region_id not in rank:
            raise UnclassifiedStroke(
                "stroke %d has region %r, not in plan" % (s.stroke_id, s.region_id)
            )

    def sort_key(s):
        sx, sy = activate_scale(s.raw_scale)
        return (rank[s.region_id], -(sx * sy), float(s.centers[0, 1]), s.stroke_id)

    ordered = sorted(painting.strokes, key=sort_key)
    events = []
    frame = 1
    for s in ordered:
        for start in range(0, s.num_kernels, kernels_per_frame):
            end = min(start + kernels_per_frame, s.num_kernels)
            events.append(ScriptEvent(s.stroke_id, start, end, frame))
            frame += 1
    return ProcessScript(events=events, total_frames=frame, fps=int(frames_per_second))


def emit_frames(painting, script, out_dir):
    """Render every frame of the script to PNG; returns the manifest path.

    The active set at frame t is the union of all events with frame_index
    <= t, so the final frame renders the complete painting.
    """
    out_dir = pathlib.Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    records = []
    for t in range(script.total_frames):
        img = render_image(painting, active=script.active_at(t))
        name = "frame_%06d.png" % t
        path = out_dir / name
        try:
            save_image(path, img)
        except OSError as exc:
            raise IoError("failed to write %s: %s" % (path, exc)) from exc
        digest = hashlib.sha256(path.read_bytes()).hexdigest()
        records.append({"index": t, "path": name, "sha256": digest})
    manifest = {
        "schema_version": 1,
        "fps": script.fps,
        "total_frames": script.total_frames,
        "frames": records,
    }
    manifest_path = out_dir / "process_manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=2) + "\n")
    return manifest_path
