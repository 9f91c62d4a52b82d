"""Lifting fitted 2D strokes into 3D particle clusters.

Each kernel spawns particles from a 3D Gaussian: the xy covariance is the
kernel's pixel-space covariance scaled to meters, z is normal around the
deposit height. Opacity maps to particle count through a saturating
density curve, so darker strokes pour more sand.
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np

from .errors import DomainError
from .model import covariance
from .particles import ParticleCloud


@dataclasses.dataclass
class LiftConfig:
    particles_per_kernel_max: int = 64
    deposit_height: float = 0.05      # m above the table
    z_sigma: float = 0.01             # m vertical spread
    px_to_m: float = 1.0 / 128.0      # canvas pixel size in meters
    particle_volume: float = 0.0      # m^3; 0 = default px_to_m^3
    density: float = 1600.0           # kg/m^3, dry sand

    def __post_init__(self):
        if self.particle_volume == 0.0:
            self.particle_volume = self.px_to_m**3
        for name in ("particles_per_kernel_max", "deposit_height", "z_sigma",
                     "px_to_m", "particle_volume", "density"):
            if getattr(self, name) <= 0:
                raise ValueError("%s must be positive" % name)


def lift_density(alpha):
    """Sampling density rho(alpha) = (1 - e^-alpha) / (1 - e^-1) on [0, 1]."""
    a = float(alpha)
    if not 0.0 <= a <= 1.0:
        raise DomainError("opacity %r outside [0, 1]" % (alpha,))
    if a == 0.0:
        return 0.0
    if a == 1.0:
        return 1.0
    return -math.expm1(-a) / -math.expm1(-1.0)


def lift_count(alpha, maximum):
    """Particles per kernel: ceil(rho * maximum)."""
    return int(math.ceil(lift_density(alpha) * maximum))


def lift_stroke(stroke, cfg, seed):
    """Sample a particle cluster for every kernel of the stroke.

    Deterministic given (seed, stroke_id): the stream is keyed on both, so
    lifting a whole painting gives the same particles regardless of stroke
    order.
    """
    rng = np.random.default_rng([seed, stroke.stroke_id])
    sx, sy = stroke.scale()
    n = lift_count(stroke.opacity(), cfg.particles_per_kernel_max)
    clusters = []
    for k in range(stroke.num_kernels):
        cov_m = covariance(float(stroke.rotations[k]), sx, sy) * cfg.px_to_m**2
        chol = np.linalg.cholesky(cov_m)
        xy = stroke.centers[k] * cfg.px_to_m + rng.standard_normal((n, 2)) @ chol.T
        z = cfg.deposit_height + cfg.z_sigma * rng.standard_normal(n)
        clusters.append(np.column_stack([xy, z]))
    total = n * stroke.num_kernels
    positions = np.concatenate(clusters) if clusters else np.zeros((0, 3))
    return ParticleCloud(
        positions=positions,
        velocities=np.zeros((total, 3)),
        masses=np.full(total, cfg.particle_volume * cfg.density),
        volumes=np.full(total, cfg.particle_volume),
        F=np.broadcast_to(np.eye(3), (total, 3, 3)).copy(),
        C=np.zeros((total, 3, 3)),
        source=np.full(total, stroke.stroke_id, dtype=np.int64),
    )


def lift_painting(painting, order, cfg, seed):
    """Lift strokes in the given id order; returns (cloud, {id: slice})."""
    clouds = []
    slices = {}
    start = 0
    by_id = {s.stroke_id: s for s in painting.strokes}
    for sid in order:
        cloud = lift_stroke(by_id[sid], cfg, seed)
        clouds.append(cloud)
        slices[sid] = slice(start, start + len(cloud))
        start += len(cloud)
    return ParticleCloud.concat(clouds), slices
