"""Interactive simulation service.

One thread owns the simulation: it drains a FIFO command queue between
steps, advances the state, and renders the latest frame at the push
cadence. Network handlers only read the latest-frame slot and enqueue
validated commands, so slow clients can never stall physics. Frames go
out as binary websocket messages (magic "SSF1", u32 width, u32 height,
RGBA8 payload); commands come in as JSON text.
"""

import dataclasses
import io
import json
import math
import queue
import socket
import struct
import sys
import threading
import time

import numpy as np

from .errors import CommandError
from .imgio import image_to_rgba
from .interact import DEFAULT_V_THRESHOLD, SAFE_RADIUS_FACTOR, freeze_filter, smear
from .lift import LiftConfig, lift_painting, lift_stroke
from .model import Stroke
from .mpm import SimConfig, _safe_bounds, init_state, mpm_step
from .particles import ParticleCloud
from .render3d import DEFAULT_ABSORPTION, render_3d

FRAME_MAGIC = b"SSF1"

COMMAND_TYPES = (
    "Smear",
    "DepositStroke",
    "Pause",
    "Resume",
    "Reset",
    "SetParam",
    "PlayScript",
)

# Live-settable service-level parameters and their validation ranges.
SERVICE_PARAMS = {
    "fps": lambda v: 0.0 < v <= 120.0,
    "v_threshold": lambda v: v >= 0.0,
    "absorption": lambda v: v > 0.0,
}

# SimConfig fields that may not change on a running state.
FROZEN_SIM_PARAMS = ("grid", "dx", "gravity", "boundaries", "strict_domain")


@dataclasses.dataclass
class ServiceConfig:
    fps: float = 20.0
    seed: int = 0
    absorption: float = DEFAULT_ABSORPTION
    v_threshold: float = DEFAULT_V_THRESHOLD
    settle_interval: int = 50
    sim: SimConfig = None
    lift: LiftConfig = None

    def __post_init__(self):
        if self.sim is None:
            self.sim = SimConfig()
        if self.fps <= 0.0:
            raise ValueError("fps must be positive")
        if self.settle_interval < 1:
            raise ValueError("settle_interval must be at least 1")


def _require_number(cmd, key):
    value = cmd.get(key)
    if not isinstance(value, (int, float)) or isinstance(value, bool):
        raise CommandError("%s: %r is not a number" % (key, value))
    if not math.isfinite(value):
        raise CommandError("%s must be finite" % key)
    return float(value)


class SimService:
    """Owns the painting, the particle state, and the stepping thread."""

    def __init__(self, painting, cfg=None):
        self.painting = painting
        self.cfg = cfg or ServiceConfig()
        sim = self.cfg.sim
        if self.cfg.lift is None:
            # Canvas spans the grid footprint: one pixel = domain_x / width.
            self.cfg.lift = LiftConfig(px_to_m=sim.domain[0] / painting.width)
        self.lift_cfg = self.cfg.lift
        self.fps = self.cfg.fps
        self.v_threshold = self.cfg.v_threshold
        self.absorption = self.cfg.absorption
        self.order = [s.stroke_id for s in painting.strokes]
        cloud, _ = lift_painting(painting, self.order, self.lift_cfg, self.cfg.seed)
        self._initial_cloud = cloud.copy()
        self.state = init_state(cloud, sim)
        self.paused = False
        self.commands = queue.Queue()
        self._deposits = 0
        self._scheduled = []  # [(due_step, stroke_id)] from PlayScript
        self._stop = threading.Event()
        self._frame_lock = threading.Lock()
        self._frame_bytes = None
        self._frame_rgba = None
        self._frame_id = 0
        self._first_frame = threading.Event()
        self._thread = None

    # -- lifecycle ----------------------------------------------------------

    def start(self):
        self._thread = threading.Thread(target=self._run, daemon=True)
        self._thread.start()
        self._first_frame.wait(timeout=30.0)
        return self

    def stop(self):
        self._stop.set()
        if self._thread is not None:
            self._thread.join(timeout=10.0)

    def _run(self):
        interval = 1.0 / self.fps
        last_render = 0.0
        while not self._stop.is_set():
            self._drain_commands()
            self._run_scheduled()
            if not self.paused:
                mpm_step(self.state)
            else:
                time.sleep(min(interval, 0.01))
            now = time.monotonic()
            if now - last_render >= 1.0 / self.fps or self._frame_bytes is None:
                self._render_frame()
                last_render = now

    # -- frames -------------------------------------------------------------

    def _render_frame(self):
        img = render_3d(
            self.state,
            self.painting,
            px_to_m=self.lift_cfg.px_to_m,
            absorption=self.absorption,
        )
        rgba = image_to_rgba(img)
        h, w = rgba.shape[:2]
        msg = FRAME_MAGIC + struct.pack("<II", w, h) + rgba.tobytes()
        with self._frame_lock:
            self._frame_bytes = msg
            self._frame_rgba = rgba
            self._frame_id += 1
        self._first_frame.set()

    def latest_frame(self):
        with self._frame_lock:
            return self._frame_bytes, self._frame_id

    def frame_png(self):
        from PIL import Image

        with self._frame_lock:
            rgba = self._frame_rgba
        if rgba is None:
            return None
        buf = io.BytesIO()
        Image.fromarray(rgba, "RGBA").save(buf, format="PNG")
        return buf.getvalue()

    def info(self):
        return {
            "step": int(self.state.step),
            "particles": len(self.state.cloud),
            "paused": bool(self.paused),
            "time": float(self.state.time),
            "escaped": int(self.state.escaped),
            "width": int(self.painting.width),
            "height": int(self.painting.height),
            "fps": float(self.fps),
            "v_threshold": float(self.v_threshold),
        }

    # -- commands -----------------------------------------------------------

    def validate_command(self, cmd):
        """Check shape and ranges; raises CommandError. Returns the dict."""
        if not isinstance(cmd, dict):
            raise CommandError("command must be a JSON object")
        ctype = cmd.get("type")
        if ctype not in COMMAND_TYPES:
            raise CommandError("unknown command type %r" % ctype)
        if ctype == "Smear":
            x = _require_number(cmd, "x")
            y = _require_number(cmd, "y")
            _require_number(cmd, "dx")
            _require_number(cmd, "dy")
            radius = _require_number(cmd, "radius_px")
            strength = _require_number(cmd, "strength")
            if not (0.0 <= x <= self.painting.width):
                raise CommandError("x outside canvas")
            if not (0.0 <= y <= self.painting.height):
                raise CommandError("y outside canvas")
            if radius <= 0.0:
                raise CommandError("radius_px must be positive")
            if strength <= 0.0:
                raise CommandError("strength must be positive")
        elif ctype == "DepositStroke":
            if "stroke_id" in cmd:
                try:
                    self.painting.stroke_by_id(int(cmd["stroke_id"]))
                except (KeyError, TypeError, ValueError):
                    raise CommandError("unknown stroke_id %r" % cmd.get("stroke_id"))
            elif "stroke" in cmd:
                try:
                    self._parse_stroke(cmd["stroke"])
                except (KeyError, TypeError, ValueError) as exc:
                    raise CommandError("bad inline stroke: %s" % exc)
            else:
                raise CommandError("DepositStroke needs stroke_id or stroke")
        elif ctype == "SetParam":
            key = cmd.get("key")
            value = _require_number(cmd, "value")
            if key in SERVICE_PARAMS:
                if not SERVICE_PARAMS[key](value):
                    raise CommandError("value %r out of range for %s" % (value, key))
            elif key in {f.name for f in dataclasses.fields(SimConfig)}:
                if key in FROZEN_SIM_PARAMS:
                    raise CommandError("%s cannot change on a running state" % key)
                try:
                    dataclasses.replace(self.state.cfg, **{key: value})
                except ValueError as exc:
                    raise CommandError(str(exc))
            else:
                raise CommandError("unknown parameter %r" % key)
        elif ctype == "PlayScript":
            lo = int(cmd.get("from_event", 0))
            hi = int(cmd.get("to_event", len(self.order)))
            if not (0 <= lo <= hi <= len(self.order)):
                raise CommandError(
                    "event range [%d, %d) outside script of %d events"
                    % (lo, hi, len(self.order))
                )
            if "interval_steps" in cmd and int(cmd["interval_steps"]) < 1:
                raise CommandError("interval_steps must be at least 1")
        return cmd

    def submit(self, cmd):
        """Validate and enqueue; raises CommandError on bad input."""
        self.commands.put(self.validate_command(cmd))

    def _parse_stroke(self, raw):
        return Stroke(
            stroke_id=int(raw.get("stroke_id", self.painting.next_stroke_id())),
            centers=np.asarray(raw["centers"], dtype=np.float64),
            rotations=np.asarray(raw["rotations"], dtype=np.float64),
            raw_scale=np.asarray(raw["raw_scale"], dtype=np.float64),
            raw_opacity=float(raw["raw_opacity"]),
        )

    def _drain_commands(self):
        while True:
            try:
                cmd = self.commands.get_nowait()
            except queue.Empty:
                return
            self._apply(cmd)

    def _apply(self, cmd):
        ctype = cmd["type"]
        if ctype == "Pause":
            self.paused = True
        elif ctype == "Resume":
            self.paused = False
        elif ctype == "Reset":
            self.state = init_state(self._initial_cloud.copy(), self.state.cfg)
            self._scheduled = []
        elif ctype == "Smear":
            self._apply_smear(cmd)
        elif ctype == "DepositStroke":
            if "stroke_id" in cmd:
                stroke = self.painting.stroke_by_id(int(cmd["stroke_id"]))
            else:
                stroke = self._parse_stroke(cmd["stroke"])
            self._deposit(stroke)
        elif ctype == "SetParam":
            self._set_param(cmd["key"], cmd["value"])
        elif ctype == "PlayScript":
            lo = int(cmd.get("from_event", 0))
            hi = int(cmd.get("to_event", len(self.order)))
            interval = int(cmd.get("interval_steps", self.cfg.settle_interval))
            for i, event in enumerate(range(lo, hi)):
                due = self.state.step + i * interval
                self._scheduled.append((due, self.order[event]))

    def _apply_smear(self, cmd):
        px_to_m = self.lift_cfg.px_to_m
        center = np.array(
            [cmd["x"] * px_to_m, cmd["y"] * px_to_m, self.lift_cfg.deposit_height]
        )
        radius = cmd["radius_px"] * px_to_m
        direction = np.array([cmd["dx"], cmd["dy"], 0.0])
        norm = np.linalg.norm(direction)
        if norm > 0.0:
            direction = direction / norm
        smear(self.state, center, radius, cmd["strength"], direction)
        freeze_filter(
            self.state, center, SAFE_RADIUS_FACTOR * radius, self.v_threshold
        )

    def _deposit(self, stroke):
        self._deposits += 1
        cloud = lift_stroke(stroke, self.lift_cfg, self.cfg.seed + self._deposits)
        lo, hi = _safe_bounds(self.state.cfg)
        np.clip(cloud.positions, lo, hi, out=cloud.positions)
        self.state.cloud = ParticleCloud.concat([self.state.cloud, cloud])

    def _run_scheduled(self):
        if not self._scheduled:
            return
        due = [sid for when, sid in self._scheduled if when <= self.state.step]
        self._scheduled = [
            (when, sid) for when, sid in self._scheduled if when > self.state.step
        ]
        for sid in due:
            self._deposit(self.painting.stroke_by_id(sid))

    def _set_param(self, key, value):
        if key == "fps":
            self.fps = float(value)
        elif key == "v_threshold":
            self.v_threshold = float(value)
        elif key == "absorption":
            self.absorption = float(value)
        else:
            self.state.cfg = dataclasses.replace(self.state.cfg, **{key: value})


def create_app(service):
    """FastAPI app exposing /state, /frame, and the /ws frame+command socket."""
    import asyncio

    from fastapi import FastAPI, WebSocket, WebSocketDisconnect
    from fastapi.responses import JSONResponse, Response

    app = FastAPI()

    @app.get("/state")
    def state():
        return JSONResponse(service.info())

    @app.get("/frame")
    def frame():
        png = service.frame_png()
        if png is None:
            return JSONResponse({"error": "no frame rendered yet"}, status_code=503)
        return Response(content=png, media_type="image/png")

    async def push_frames(websocket):
        # Latest-frame-only push: intermediate frames are dropped, so a
        # slow reader holds at most one frame in flight.
        while True:
            frame_bytes, _ = service.latest_frame()
            if frame_bytes is not None:
                await websocket.send_bytes(frame_bytes)
            await asyncio.sleep(1.0 / max(service.fps, 1e-3))

    @app.websocket("/ws")
    async def ws(websocket: WebSocket):
        await websocket.accept()
        pusher = asyncio.ensure_future(push_frames(websocket))
        try:
            while True:
                message = await websocket.receive()
                if message["type"] == "websocket.disconnect":
                    break
                text = message.get("text")
                if text is None:
                    await websocket.send_text(
                        json.dumps({"error": "commands must be JSON text"})
                    )
                    continue
                try:
                    service.submit(json.loads(text))
                except (CommandError, ValueError) as exc:
                    await websocket.send_text(json.dumps({"error": str(exc)}))
        except WebSocketDisconnect:
            pass
        finally:
            pusher.cancel()

    return app


def serve(painting, port, host="127.0.0.1", cfg=None):
    """Run the interaction service until interrupted.

    Exits with status 1 (after a machine-readable error line) when the
    port is already bound.
    """
    import uvicorn

    probe = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    probe.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
    try:
        probe.bind((host, port))
    except OSError as exc:
        print("error: cannot bind %s:%d: %s" % (host, port, exc), file=sys.stderr)
        raise SystemExit(1)
    finally:
        probe.close()

    service = SimService(painting, cfg).start()
    app = create_app(service)
    try:
        uvicorn.run(app, host=host, port=port, log_level="warning")
    finally:
        service.stop()
