"""Binary snapshot container for simulation states.

Layout (little endian): 4-byte magic "SNAP", u32 header length, UTF-8
JSON header, u32 particle count, then count * 13 float32 records of
[x, y, z, vx, vy, vz, mass, volume, source_stroke, h1, h2, h3, reserved]
where h_i are the Hencky log singular values of the elastic deformation
gradient in descending order. Orientation is dropped on purpose: for
settled sand the recoverable elastic state is the principal stretch,
so a reloaded F is diag(exp h) and C restarts at zero.

The JSON header embeds the full SimConfig, so a snapshot alone restores
a steppable state.
"""

import dataclasses
import json
import struct

import numpy as np

from .errors import IoError
from .mpm import SandState, SimConfig, _safe_bounds
from .particles import ParticleCloud

SNAPSHOT_MAGIC = b"SNAP"
SCHEMA_VERSION = 1
FLOATS_PER_PARTICLE = 13


def save_snapshot(path, state, extra=None):
    """Write the state to path; extra entries are merged into the header."""
    cloud = state.cloud
    n = len(cloud)
    header = {
        "schema": SCHEMA_VERSION,
        "count": n,
        "step": state.step,
        "time": state.time,
        "escaped": state.escaped,
        "config": dataclasses.asdict(state.cfg),
    }
    if extra:
        header.update(extra)
    hblob = json.dumps(header).encode("utf-8")

    records = np.zeros((n, FLOATS_PER_PARTICLE), dtype="<f4")
    if n:
        records[:, 0:3] = cloud.positions
        records[:, 3:6] = cloud.velocities
        records[:, 6] = cloud.masses
        records[:, 7] = cloud.volumes
        records[:, 8] = cloud.source
        sv = np.linalg.svd(cloud.F, compute_uv=False)
        records[:, 9:12] = np.log(sv)
    with open(path, "wb") as f:
        f.write(SNAPSHOT_MAGIC)
        f.write(struct.pack("<I", len(hblob)))
        f.write(hblob)
        f.write(struct.pack("<I", n))
        f.write(records.tobytes())


def _read_exact(f, n, what):
    blob = f.read(n)
    if len(blob) != n:
        raise IoError("snapshot truncated reading %s" % what)
    return blob


def load_snapshot(path):
    """Read a snapshot back into a steppable SandState.

    Positions nudged outside the interpolation-safe box by float32
    rounding are clamped back in, mirroring the stepper's escape policy.
    """
    with open(path, "rb") as f:
        if _read_exact(f, 4, "magic") != SNAPSHOT_MAGIC:
            raise IoError("not a snapshot file: %s" % path)
        (hlen,) = struct.unpack("<I", _read_exact(f, 4, "header length"))
        try:
            header = json.loads(_read_exact(f, hlen, "header").decode("utf-8"))
        except ValueError as exc:
            raise IoError("snapshot header is not valid JSON: %s" % exc)
        (n,) = struct.unpack("<I", _read_exact(f, 4, "count"))
        if header.get("schema") != SCHEMA_VERSION:
            raise IoError("unsupported snapshot schema %r" % header.get("schema"))
        blob = _read_exact(f, n * FLOATS_PER_PARTICLE * 4, "particle records")

    raw = dict(header["config"])
    raw["gravity"] = tuple(raw["gravity"])
    raw["grid"] = tuple(raw["grid"])
    cfg = SimConfig(**raw)

    records = np.frombuffer(blob, dtype="<f4").reshape(n, FLOATS_PER_PARTICLE)
    records = records.astype(np.float64)
    lo, hi = _safe_bounds(cfg)
    positions = np.clip(records[:, 0:3], lo, hi)
    hencky = records[:, 9:12]
    F = np.zeros((n, 3, 3))
    F[:, [0, 1, 2], [0, 1, 2]] = np.exp(hencky)
    cloud = ParticleCloud(
        positions=positions,
        velocities=records[:, 3:6].copy(),
        masses=records[:, 6].copy(),
        volumes=records[:, 7].copy(),
        F=F,
        C=np.zeros((n, 3, 3)),
        source=records[:, 8].astype(np.int64),
    )
    state = SandState(cloud=cloud, cfg=cfg)
    state.step = int(header.get("step", 0))
    state.time = float(header.get("time", 0.0))
    state.escaped = int(header.get("escaped", 0))
    return state
