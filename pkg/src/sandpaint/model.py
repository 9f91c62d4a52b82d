"""Core painting model: anisotropic Gaussian kernels strung along curves.

A painting is an ordered list of strokes on a fixed canvas.  Each stroke is a
polyline of kernel centers with per-kernel rotations; the two scale axes and
the opacity are shared by every kernel of the stroke and stored in raw
(pre-activation) form so the optimizer can move them unconstrained.
"""

from __future__ import annotations

import dataclasses
import json
import math

import numpy as np

from .errors import DomainError, SandpaintError

SCHEMA_VERSION = 1

# Floor added to the softplus keeps every covariance positive definite even
# when the optimizer drives the raw scale far negative.
SCALE_FLOOR = 0.05

# Centers may drift past the canvas during optimization; beyond a quarter
# canvas of margin they are clamped back.
CENTER_MARGIN = 0.25

# Warm-sand absorption; config value, never optimized.
DEFAULT_SAND_COLOR = (0.55, 0.47, 0.35)


def as_rgb(value, name):
    """Coerce a scalar or 3-sequence to a float64 RGB triple."""
    arr = np.asarray(value, dtype=np.float64)
    if arr.ndim == 0:
        arr = np.full(3, float(arr))
    if arr.shape != (3,):
        raise DomainError("%s must be a scalar or 3-vector, got shape %s" % (name, arr.shape))
    return arr


def activate_scale(raw):
    """Map raw scale to a strictly positive pixel scale.

    softplus(raw) + SCALE_FLOOR, computed stably for large |raw|.
    """
    raw = np.asarray(raw, dtype=np.float64)
    return np.logaddexp(0.0, raw) + SCALE_FLOOR


def inverse_scale(s):
    """Inverse of activate_scale.  Domain: s > SCALE_FLOOR."""
    s = np.asarray(s, dtype=np.float64)
    y = s - SCALE_FLOOR
    if np.any(y <= 0.0):
        raise DomainError("scale must exceed the %g floor" % SCALE_FLOOR)
    # softplus^-1(y) = y + log(1 - exp(-y)), stable for both tails
    return y + np.log(-np.expm1(-y))


def scale_grad(raw):
    """d activate_scale / d raw = sigmoid(raw)."""
    return activate_opacity(raw)


def activate_opacity(raw):
    """Sigmoid, computed stably for large |raw|."""
    raw = np.asarray(raw, dtype=np.float64)
    out = np.empty_like(raw)
    pos = raw >= 0.0
    out[pos] = 1.0 / (1.0 + np.exp(-raw[pos]))
    e = np.exp(raw[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def inverse_opacity(alpha):
    """Logit.  Domain: 0 < alpha < 1."""
    alpha = np.asarray(alpha, dtype=np.float64)
    if np.any(alpha <= 0.0) or np.any(alpha >= 1.0):
        raise DomainError("opacity must lie strictly inside (0, 1)")
    return np.log(alpha) - np.log1p(-alpha)


def opacity_grad(raw):
    """d sigmoid / d raw = sigmoid * (1 - sigmoid)."""
    a = activate_opacity(raw)
    return a * (1.0 - a)


def rotation_matrix(theta):
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]], dtype=np.float64)


def covariance(theta, sx, sy):
    """2x2 covariance R diag(sx^2, sy^2) R^T."""
    r = rotation_matrix(theta)
    return r @ np.diag([sx * sx, sy * sy]) @ r.T


def canonical_rotation(theta):
    """Fold a rotation into [0, pi); the kernel is symmetric under pi."""
    t = np.asarray(theta, dtype=np.float64) % math.pi
    # % can return pi itself for tiny negative inputs
    return np.where(t >= math.pi, t - math.pi, t)


def eval_kernel(points, center, theta, sx, sy, alpha):
    """Density of one kernel at an (N, 2) array of (x, y) points."""
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    d = pts - np.asarray(center, dtype=np.float64)
    c, s = math.cos(theta), math.sin(theta)
    vx = (c * d[:, 0] + s * d[:, 1]) / sx
    vy = (-s * d[:, 0] + c * d[:, 1]) / sy
    return alpha * np.exp(-0.5 * (vx * vx + vy * vy))


@dataclasses.dataclass
class Stroke:
    """One curve of kernels with shared scale and opacity."""

    stroke_id: int
    centers: np.ndarray          # (K, 2) float64, pixel coordinates (x, y)
    rotations: np.ndarray        # (K,) float64, radians
    raw_scale: np.ndarray        # (2,) float64, pre-activation
    raw_opacity: float           # scalar, pre-activation
    region_id: int | None = None

    def __post_init__(self):
        self.centers = np.atleast_2d(np.asarray(self.centers, dtype=np.float64))
        self.rotations = np.atleast_1d(np.asarray(self.rotations, dtype=np.float64))
        self.raw_scale = np.asarray(self.raw_scale, dtype=np.float64).reshape(2)
        self.raw_opacity = float(self.raw_opacity)
        if self.centers.shape != (self.rotations.shape[0], 2):
            raise SandpaintError(
                "stroke %d: centers %s do not match rotations %s"
                % (self.stroke_id, self.centers.shape, self.rotations.shape)
            )

    @property
    def num_kernels(self):
        return self.centers.shape[0]

    def scale(self):
        return activate_scale(self.raw_scale)

    def opacity(self):
        return float(activate_opacity(np.asarray(self.raw_opacity)))

    def copy(self):
        return Stroke(
            stroke_id=self.stroke_id,
            centers=self.centers.copy(),
            rotations=self.rotations.copy(),
            raw_scale=self.raw_scale.copy(),
            raw_opacity=self.raw_opacity,
            region_id=self.region_id,
        )


@dataclasses.dataclass
class Painting:
    """Canvas plus ordered strokes; later strokes deposit over earlier ones.

    background and c_sand are RGB triples (scalars broadcast): the canvas
    color and the per-channel absorption of the sand.  c_sand is global and
    never optimized.
    """

    width: int
    height: int
    background: object = 1.0
    c_sand: object = DEFAULT_SAND_COLOR
    strokes: list = dataclasses.field(default_factory=list)

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise SandpaintError("canvas dimensions must be positive")
        self.background = as_rgb(self.background, "background")
        self.c_sand = as_rgb(self.c_sand, "c_sand")
        if np.any(self.background < 0.0) or np.any(self.background > 1.0):
            raise DomainError("background must lie in [0, 1] per channel")
        if np.any(self.c_sand <= 0.0):
            raise DomainError("c_sand must be positive per channel")

    def copy(self):
        return Painting(
            width=self.width,
            height=self.height,
            background=self.background.copy(),
            c_sand=self.c_sand.copy(),
            strokes=[s.copy() for s in self.strokes],
        )

    def stroke_by_id(self, stroke_id):
        for s in self.strokes:
            if s.stroke_id == stroke_id:
                return s
        raise KeyError(stroke_id)

    def next_stroke_id(self):
        return max((s.stroke_id for s in self.strokes), default=-1) + 1

    def total_kernels(self):
        return sum(s.num_kernels for s in self.strokes)

    def clamp_centers(self):
        """Clamp every center into the margin box around the canvas."""
        lo = np.array([-CENTER_MARGIN * self.width, -CENTER_MARGIN * self.height])
        hi = np.array([(1 + CENTER_MARGIN) * self.width, (1 + CENTER_MARGIN) * self.height])
        for s in self.strokes:
            np.clip(s.centers, lo, hi, out=s.centers)

    # -- serialization ------------------------------------------------------

    def to_dict(self):
        return {
            "schema_version": SCHEMA_VERSION,
            "canvas": {
                "width": self.width,
                "height": self.height,
                "background": np.round(self.background, 6).tolist(),
                "c_sand": np.round(self.c_sand, 6).tolist(),
            },
            "strokes": [
                {
                    "stroke_id": s.stroke_id,
                    "region_id": s.region_id,
                    "centers": np.round(s.centers, 6).tolist(),
                    "rotations": np.round(canonical_rotation(s.rotations), 6).tolist(),
                    "raw_scale": np.round(s.raw_scale, 6).tolist(),
                    "raw_opacity": round(s.raw_opacity, 6),
                }
                for s in self.strokes
            ],
        }

    def to_json(self, path=None):
        text = json.dumps(self.to_dict(), indent=2)
        if path is not None:
            with open(path, "w") as f:
                f.write(text + "\n")
        return text

    @classmethod
    def from_dict(cls, data):
        version = data.get("schema_version")
        if version != SCHEMA_VERSION:
            raise SandpaintError("unsupported painting schema version %r" % version)
        canvas = data["canvas"]
        painting = cls(
            width=int(canvas["width"]),
            height=int(canvas["height"]),
            background=canvas["background"],
            c_sand=canvas["c_sand"],
        )
        for raw in data["strokes"]:
            painting.strokes.append(
                Stroke(
                    stroke_id=int(raw["stroke_id"]),
                    centers=np.asarray(raw["centers"], dtype=np.float64),
                    rotations=np.asarray(raw["rotations"], dtype=np.float64),
                    raw_scale=np.asarray(raw["raw_scale"], dtype=np.float64),
                    raw_opacity=float(raw["raw_opacity"]),
                    region_id=None if raw.get("region_id") is None else int(raw["region_id"]),
                )
            )
        painting.clamp_centers()
        return painting

    @classmethod
    def from_json(cls, source):
        if isinstance(source, (str, bytes)) and not str(source).lstrip().startswith("{"):
            with open(source) as f:
                data = json.load(f)
        else:
            data = json.loads(source)
        return cls.from_dict(data)
