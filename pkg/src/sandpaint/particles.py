"""Particle storage for the granular simulator.

ParticleCloud keeps structure-of-arrays storage (the solver is fully
vectorized); SandParticle is a per-particle view for inspection and
small fixtures. Positions are meters; the canvas maps to the x/y plane
and z points up from the table.
"""

from __future__ import annotations

import dataclasses

import numpy as np

from .errors import DimensionMismatch


@dataclasses.dataclass
class SandParticle:
    position: np.ndarray    # (3,) m
    velocity: np.ndarray    # (3,) m/s
    mass: float             # kg
    volume: float           # m^3
    F_elastic: np.ndarray   # (3, 3)
    C_affine: np.ndarray    # (3, 3) velocity gradient carried by APIC
    source_stroke: int      # stroke id, -1 if none


@dataclasses.dataclass
class ParticleCloud:
    positions: np.ndarray   # (N, 3)
    velocities: np.ndarray  # (N, 3)
    masses: np.ndarray      # (N,)
    volumes: np.ndarray     # (N,)
    F: np.ndarray           # (N, 3, 3)
    C: np.ndarray           # (N, 3, 3)
    source: np.ndarray      # (N,) int64

    def __post_init__(self):
        n = self.positions.shape[0]
        shapes = {
            "positions": (n, 3),
            "velocities": (n, 3),
            "masses": (n,),
            "volumes": (n,),
            "F": (n, 3, 3),
            "C": (n, 3, 3),
            "source": (n,),
        }
        for name, shape in shapes.items():
            arr = getattr(self, name)
            if arr.shape != shape:
                raise DimensionMismatch("%s %s, expected %s" % (name, arr.shape, shape))
        if n and (np.any(self.masses <= 0) or np.any(self.volumes <= 0)):
            raise ValueError("particle mass and volume must be positive")

    def __len__(self):
        return self.positions.shape[0]

    def __iter__(self):
        return (self.particle(i) for i in range(len(self)))

    def particle(self, i):
        return SandParticle(
            position=self.positions[i],
            velocity=self.velocities[i],
            mass=float(self.masses[i]),
            volume=float(self.volumes[i]),
            F_elastic=self.F[i],
            C_affine=self.C[i],
            source_stroke=int(self.source[i]),
        )

    def copy(self):
        return ParticleCloud(
            self.positions.copy(),
            self.velocities.copy(),
            self.masses.copy(),
            self.volumes.copy(),
            self.F.copy(),
            self.C.copy(),
            self.source.copy(),
        )

    @classmethod
    def empty(cls):
        return cls(
            np.zeros((0, 3)),
            np.zeros((0, 3)),
            np.zeros(0),
            np.zeros(0),
            np.zeros((0, 3, 3)),
            np.zeros((0, 3, 3)),
            np.zeros(0, dtype=np.int64),
        )

    @classmethod
    def concat(cls, clouds):
        clouds = list(clouds)
        if not clouds:
            return cls.empty()
        return cls(
            np.concatenate([c.positions for c in clouds]),
            np.concatenate([c.velocities for c in clouds]),
            np.concatenate([c.masses for c in clouds]),
            np.concatenate([c.volumes for c in clouds]),
            np.concatenate([c.F for c in clouds]),
            np.concatenate([c.C for c in clouds]),
            np.concatenate([c.source for c in clouds]),
        )
