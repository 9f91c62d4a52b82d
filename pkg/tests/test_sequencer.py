"""Process scripts and frame emission: ordering, growth, monotone darkness."""

import hashlib
import json

import numpy as np
import pytest

from sandpaint.errors import UnclassifiedStroke
from sandpaint.imgio import load_image
from sandpaint.model import Painting, Stroke, inverse_opacity, inverse_scale
from sandpaint.planner import RegionPlan, Region, fallback_plan
from sandpaint.raster import render_image
from sandpaint.sequencer import ProcessScript, build_script, emit_frames


def stroke(sid, xs, y, region, sx=4.0, sy=2.0, alpha=0.4):
    xs = np.asarray(xs, dtype=np.float64)
    return Stroke(
        stroke_id=sid,
        centers=np.stack([xs, np.full_like(xs, float(y))], axis=1),
        rotations=np.zeros(len(xs)),
        raw_scale=inverse_scale(np.array([sx, sy])),
        raw_opacity=float(inverse_opacity(alpha)),
        region_id=region,
    )


def plan_two_regions(w=48, h=48):
    bg = Region(0, "bg", 0, np.ones((h, w), dtype=bool), "fill", background=True)
    top = np.zeros((h, w), dtype=bool)
    top[:10] = True
    fg = Region(1, "fg", 1, top, "fill")
    return RegionPlan.build([bg, fg])


def test_script_partition_example():
    p = Painting(48, 48, 1.0, 1.0, [stroke(0, np.linspace(5, 40, 20), 24, region=0)])
    script = build_script(p, fallback_plan(48, 48), frames_per_second=10, kernels_per_frame=5)
    assert len(script.events) == 4
    assert [e.kernel_start for e in script.events] == [0, 5, 10, 15]
    assert [e.kernel_end for e in script.events] == [5, 10, 15, 20]
    assert [e.frame_index for e in script.events] == [1, 2, 3, 4]
    assert script.total_frames == 5  # frame 0 shows the bare canvas
    assert script.fps == 10


def test_script_region_order_before_stroke_order():
    p = Painting(48, 48, 1.0, 1.0, [
        stroke(0, [5, 9, 13], 5, region=1),    # foreground
        stroke(1, [5, 9, 13], 30, region=0),   # background
    ])
    script = build_script(p, plan_two_regions(), 10, 3)
    assert [e.stroke_id for e in script.events] == [1, 0]


def test_script_area_then_y_then_id():
    p = Painting(48, 48, 1.0, 1.0, [
        stroke(0, [5, 9], 30, region=0, sx=3.0, sy=2.0),   # area 6
        stroke(1, [5, 9], 20, region=0, sx=6.0, sy=3.0),   # area 18, first
        stroke(2, [5, 9], 10, region=0, sx=3.0, sy=2.0),   # area 6, above 0
    ])
    script = build_script(p, fallback_plan(48, 48), 10, 2)
    assert [e.stroke_id for e in script.events] == [1, 2, 0]


def test_script_requires_classification():
    p = Painting(48, 48, 1.0, 1.0, [stroke(0, [5, 9], 5, region=None)])
    with pytest.raises(UnclassifiedStroke):
        build_script(p, fallback_plan(48, 48), 10, 2)
    p2 = Painting(48, 48, 1.0, 1.0, [stroke(0, [5, 9], 5, region=77)])
    with pytest.raises(UnclassifiedStroke):
        build_script(p2, fallback_plan(48, 48), 10, 2)


def test_script_invariants_random():
    rng = np.random.default_rng(3)
    strokes = [
        stroke(i, np.sort(rng.uniform(2, 46, size=rng.integers(1, 9))),
               rng.uniform(2, 46), region=0)
        for i in range(6)
    ]
    p = Painting(48, 48, 1.0, 1.0, strokes)
    script = build_script(p, fallback_plan(48, 48), 12, 3)
    # every stroke appears; ranges contiguous and exactly cover each stroke
    seen = {}
    for e in script.events:
        seen.setdefault(e.stroke_id, []).append((e.kernel_start, e.kernel_end))
    assert set(seen) == {s.stroke_id for s in strokes}
    for s in strokes:
        ranges = seen[s.stroke_id]
        assert ranges[0][0] == 0
        assert ranges[-1][1] == s.num_kernels
        for (a0, a1), (b0, b1) in zip(ranges, ranges[1:]):
            assert a1 == b0
    frames = [e.frame_index for e in script.events]
    assert frames == sorted(frames)
    assert script.total_frames == frames[-1] + 1


def test_script_json_roundtrip(tmp_path):
    p = Painting(48, 48, 1.0, 1.0, [stroke(0, [5, 9, 13], 24, region=0)])
    script = build_script(p, fallback_plan(48, 48), 10, 2)
    path = tmp_path / "script.json"
    path.write_text(script.to_json())
    again = ProcessScript.from_json(path.read_text())
    assert again.fps == script.fps
    assert again.total_frames == script.total_frames
    assert [dataclass_tuple(e) for e in again.events] == [
        dataclass_tuple(e) for e in script.events
    ]


def dataclass_tuple(e):
    return (e.stroke_id, e.kernel_start, e.kernel_end, e.frame_index)


def test_emit_frames_contract(tmp_path):
    p = Painting(40, 40, 1.0, 0.8, [
        stroke(0, [8, 12, 16, 20], 12, region=0),
        stroke(1, [8, 12, 16, 20], 28, region=0),
    ])
    script = build_script(p, fallback_plan(40, 40), 8, 2)
    manifest_path = emit_frames(p, script, tmp_path)
    manifest = json.loads(manifest_path.read_text())
    assert manifest["fps"] == 8
    assert manifest["total_frames"] == script.total_frames
    files = sorted(tmp_path.glob("frame_*.png"))
    assert len(files) == script.total_frames
    assert files[0].name == "frame_000000.png"

    # frame 0 is the untouched canvas
    f0 = load_image(files[0])
    np.testing.assert_allclose(f0, np.broadcast_to(p.background, f0.shape), atol=2e-2)

    # monotone darkness, pointwise
    prev = None
    for f in files:
        img = load_image(f)
        if prev is not None:
            assert np.all(img <= prev + 1e-6)
        prev = img

    # final frame byte-identical to a fresh full render written the same way
    from sandpaint.imgio import save_image

    ref = tmp_path / "ref.png"
    save_image(ref, render_image(p))
    assert ref.read_bytes() == files[-1].read_bytes()

    # manifest checksums match the files
    for rec in manifest["frames"]:
        digest = hashlib.sha256((tmp_path / rec["path"]).read_bytes()).hexdigest()
        assert digest == rec["sha256"]


def test_emit_frames_active_union_reconstructs(tmp_path):
    p = Painting(32, 32, 1.0, 1.0, [
        stroke(0, [6, 10, 14, 18, 22], 16, region=0),
    ])
    script = build_script(p, fallback_plan(32, 32), 10, 2)
    covered = np.zeros(p.strokes[0].num_kernels, dtype=int)
    for e in script.events:
        covered[e.kernel_start : e.kernel_end] += 1
    np.testing.assert_array_equal(covered, 1)
