"""Command-line entry points.

Subcommands cover the whole pipeline: `fit` optimizes a painting
against a target image, `animate` renders the stroke-order process
video, `simulate` lifts a painting into the granular sim and writes
snapshots, `eval` scores generated frames against a reference, and
`serve` runs the interactive websocket service.

Hyperparameters come from a flat key=value config file plus repeatable
`--config key=val` overrides; every field of FitConfig, SimConfig,
TopologyConfig, and LiftConfig is addressable by its field name.
Usage errors exit 2, runtime failures exit 1 after printing a single
`error: ...` line.
"""

import argparse
import dataclasses
import json
import pathlib
import sys

import numpy as np

from .errors import SandpaintError
from .fitting import FitConfig, fit
from .imgio import load_image
from .lift import LiftConfig, lift_painting
from .metrics import evaluate
from .model import Painting
from .mpm import SimConfig, _safe_bounds, init_state, mpm_step
from .planner import classify_strokes, fallback_plan, load_plan
from .raster import render_image
from .sequencer import build_script, emit_frames
from .snapshot import save_snapshot
from .topology import TopologyConfig


class UsageError(Exception):
    """Bad flags or config keys/values; maps to exit code 2."""


def parse_value(text):
    """Parse a config value: bool, int, float, comma tuple, else string."""
    s = text.strip()
    if "," in s:
        return tuple(parse_value(part) for part in s.split(","))
    if s.lower() in ("true", "false"):
        return s.lower() == "true"
    try:
        return int(s)
    except ValueError:
        pass
    try:
        return float(s)
    except ValueError:
        return s


def read_config_file(path):
    values = {}
    try:
        text = pathlib.Path(path).read_text()
    except OSError as exc:
        raise UsageError("cannot read config file %s: %s" % (path, exc))
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError("%s:%d: expected key=value" % (path, lineno))
        key, value = line.split("=", 1)
        values[key.strip()] = parse_value(value)
    return values


def gather_config(args):
    """File values overlaid with --config pairs (later wins)."""
    values = {}
    if getattr(args, "config_file", None):
        values.update(read_config_file(args.config_file))
    for pair in getattr(args, "config", None) or []:
        if "=" not in pair:
            raise UsageError("--config expects key=val, got %r" % pair)
        key, value = pair.split("=", 1)
        values[key.strip()] = parse_value(value)
    return values


def build_config(cls, values, consumed, **extra):
    """Construct a config dataclass from the flat value namespace."""
    names = {f.name for f in dataclasses.fields(cls)}
    kwargs = {k: v for k, v in values.items() if k in names}
    consumed.update(kwargs)
    kwargs.update(extra)
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise UsageError("bad %s value: %s" % (cls.__name__, exc))


def reject_unknown(values, consumed):
    unknown = sorted(set(values) - consumed)
    if unknown:
        raise UsageError("unknown config keys: %s" % ", ".join(unknown))


# -- subcommands -------------------------------------------------------------


def run_fit(args):
    target = load_image(args.target)
    plan = load_plan(args.plan) if args.plan else None
    values = gather_config(args)
    values.setdefault("width", target.shape[1])
    values.setdefault("height", target.shape[0])
    consumed = set()
    topo = build_config(TopologyConfig, values, consumed)
    cfg = build_config(FitConfig, values, consumed, topology=topo)
    reject_unknown(values, consumed)

    painting, trace = fit(target, plan, cfg, args.seed, out_dir=args.checkpoints)
    painting.to_json(args.output)
    if trace:
        print(
            "fit: %d strokes, %d kernels, rec %.6f"
            % (len(painting.strokes), painting.total_kernels(), trace[-1].rec)
        )
    return 0


def run_animate(args):
    if args.kpf < 1:
        raise UsageError("--kpf must be at least 1")
    if args.fps < 1:
        raise UsageError("--fps must be at least 1")
    painting = Painting.from_json(args.painting)
    if args.plan:
        plan = load_plan(args.plan)
    else:
        plan = fallback_plan(painting.width, painting.height)
    painting = classify_strokes(painting, plan)
    script = build_script(painting, plan, args.fps, args.kpf)
    out = pathlib.Path(args.output)
    manifest = emit_frames(painting, script, out)
    script.to_json(out / "script.json")
    print("animate: %d frames, manifest %s" % (script.total_frames, manifest))
    return 0


def run_simulate(args):
    if args.steps < 0:
        raise UsageError("--steps must be nonnegative")
    if args.settle_interval < 1:
        raise UsageError("--settle-interval must be at least 1")
    if args.snapshot_every < 1:
        raise UsageError("--snapshot-every must be at least 1")
    painting = Painting.from_json(args.painting)
    values = gather_config(args)
    consumed = set()
    sim_cfg = build_config(SimConfig, values, consumed)
    if "px_to_m" not in values:
        values["px_to_m"] = sim_cfg.domain[0] / painting.width
    lift_cfg = build_config(LiftConfig, values, consumed)
    reject_unknown(values, consumed)

    out = pathlib.Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    order = [s.stroke_id for s in painting.strokes]
    lo, hi = _safe_bounds(sim_cfg)

    def lifted(stroke_ids, seed):
        cloud, _ = lift_painting(painting, list(stroke_ids), lift_cfg, seed)
        np.clip(cloud.positions, lo, hi, out=cloud.positions)
        return cloud

    if args.progressive:
        deposits = {i * args.settle_interval: sid for i, sid in enumerate(order)}
        total = (len(order) - 1) * args.settle_interval + args.steps if order else args.steps
        state = None
    else:
        deposits = {}
        total = args.steps
        state = init_state(lifted(order, args.seed), sim_cfg)

    from .particles import ParticleCloud

    written = []

    def snap(state, step):
        path = out / ("snapshot_%06d.sand" % step)
        save_snapshot(path, state)
        written.append(path.name)

    for step in range(total + 1):
        if step in deposits:
            cloud = lifted([deposits[step]], args.seed + step)
            if state is None:
                state = init_state(cloud, sim_cfg)
            else:
                state.cloud = ParticleCloud.concat([state.cloud, cloud])
        if state is None:
            continue
        if step > 0:
            mpm_step(state)
        if step % args.snapshot_every == 0 or step == total:
            snap(state, step)

    print("simulate: %d steps, %d snapshots in %s" % (total, len(written), out))
    return 0


def load_frames(dir_path):
    d = pathlib.Path(dir_path)
    manifest = d / "process_manifest.json"
    if manifest.exists():
        data = json.loads(manifest.read_text())
        paths = [d / rec["path"] for rec in data["frames"]]
    else:
        paths = sorted(d.glob("*.png"))
    if not paths:
        raise UsageError("no frames found in %s" % d)
    return [load_image(p) for p in paths]


def run_eval(args):
    gen = load_frames(args.gen)
    ref = load_frames(args.ref)
    target = load_image(args.target)
    report = evaluate(gen, ref, target, frame_dist=args.frame_dist)
    report["frames"] = {"gen": len(gen), "ref": len(ref)}
    text = json.dumps(report, indent=2, default=float)
    pathlib.Path(args.output).write_text(text + "\n")
    print(text)
    return 0


def run_serve(args):
    from .render3d import DEFAULT_ABSORPTION
    from .service import ServiceConfig, serve

    if not 1 <= args.port <= 65535:
        raise UsageError("--port must be in [1, 65535]")
    painting = Painting.from_json(args.painting)
    values = gather_config(args)
    consumed = set()
    sim_cfg = build_config(SimConfig, values, consumed)
    lift_names = {f.name for f in dataclasses.fields(LiftConfig)}
    if values.keys() & lift_names:
        if "px_to_m" not in values:
            values["px_to_m"] = sim_cfg.domain[0] / painting.width
        lift_cfg = build_config(LiftConfig, values, consumed)
    else:
        lift_cfg = None  # service derives px_to_m from the canvas
    service_values = {
        "fps": values.get("fps", 20.0),
        "seed": values.get("seed", args.seed),
        "absorption": values.get("absorption", DEFAULT_ABSORPTION),
        "v_threshold": values.get("v_threshold", 0.05),
        "settle_interval": values.get("settle_interval", 50),
    }
    consumed.update(k for k in service_values if k in values)
    reject_unknown(values, consumed)
    try:
        cfg = ServiceConfig(sim=sim_cfg, lift=lift_cfg, **service_values)
    except (TypeError, ValueError) as exc:
        raise UsageError("bad service config: %s" % exc)
    serve(painting, args.port, host=args.host, cfg=cfg)
    return 0


# -- parser ------------------------------------------------------------------


def add_config_flags(p):
    p.add_argument("--config-file", default=None,
                   help="flat key=value file (one per line, # comments)")
    p.add_argument("--config", action="append", metavar="KEY=VAL",
                   help="override a single config key (repeatable)")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="sandpaint",
        description="Sand painting pipeline: fit, animate, simulate, eval, serve.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="optimize a painting against a target image")
    p.add_argument("target", help="target image (PNG)")
    p.add_argument("--plan", default=None, help="region plan manifest JSON")
    p.add_argument("-o", "--output", required=True, help="output painting JSON")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--checkpoints", default=None,
                   help="directory for periodic checkpoints and the loss trace")
    add_config_flags(p)
    p.set_defaults(func=run_fit)

    p = sub.add_parser("animate", help="render the stroke-order process video")
    p.add_argument("painting", help="painting JSON")
    p.add_argument("--plan", default=None, help="region plan manifest JSON")
    p.add_argument("--kpf", type=int, default=4,
                   help="kernels revealed per frame")
    p.add_argument("--fps", type=int, default=30, help="manifest frame rate")
    p.add_argument("-o", "--output", required=True, help="output frame directory")
    p.set_defaults(func=run_animate)

    p = sub.add_parser("simulate", help="lift a painting into the granular sim")
    p.add_argument("painting", help="painting JSON")
    p.add_argument("--progressive", action="store_true",
                   help="deposit strokes one at a time with settling in between")
    p.add_argument("--steps", type=int, default=400,
                   help="sim steps after the last deposit")
    p.add_argument("--settle-interval", type=int, default=50,
                   help="steps between progressive deposits")
    p.add_argument("--snapshot-every", type=int, default=100,
                   help="write a snapshot every N steps")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", required=True, help="output snapshot directory")
    add_config_flags(p)
    p.set_defaults(func=run_simulate)

    p = sub.add_parser("eval", help="score generated frames against a reference")
    p.add_argument("--gen", required=True, help="generated frame directory")
    p.add_argument("--ref", required=True, help="reference frame directory")
    p.add_argument("--target", required=True, help="target image (PNG)")
    p.add_argument("--frame-dist", default="l2", choices=["l2", "one_minus_ssim"],
                   help="per-frame distance for the convergence curves")
    p.add_argument("-o", "--output", required=True, help="output report JSON")
    p.set_defaults(func=run_eval)

    p = sub.add_parser("serve", help="run the interactive websocket service")
    p.add_argument("--painting", required=True, help="painting JSON")
    p.add_argument("--port", type=int, required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--seed", type=int, default=0)
    add_config_flags(p)
    p.set_defaults(func=run_serve)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 2
    except SandpaintError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 1
    except (OSError, ValueError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
