"""MLS-MPM stepping for granular sand.

Hybrid particle/grid solver: quadratic B-spline transfers with APIC
affine velocities, fixed-corotated elasticity on the elastic deformation
gradient, and a frictional yield projection after every trial update.
P2G fuses the internal stress force into the momentum scatter (the MLS
weak form), so one scatter pass builds the whole grid state.

Grid layout is a dense node array; the canvas plane is x/y and z points
up. The floor is sticky (approaching velocities are fully zeroed inside
the boundary layer) while walls and ceiling only cancel the outward
normal component, letting sand slide along them.
"""

from __future__ import annotations

import dataclasses
import itertools

import numpy as np

from .errors import DimensionMismatch, DomainError, ParticleEscaped
from .particles import ParticleCloud
from .plastic import drucker_prager_project

# All 27 node offsets of the quadratic B-spline support, enumerated once.
OFFSETS = np.array(list(itertools.product(range(3), repeat=3)), dtype=np.int64)


@dataclasses.dataclass
class SimConfig:
    """Material constants, grid geometry, and stepping policy."""

    dt: float = 2e-4
    gravity: tuple = (0.0, 0.0, -9.81)
    youngs_modulus: float = 1e5
    poisson_ratio: float = 0.3
    friction_deg: float = 40.0
    grid: tuple = (64, 64, 32)
    dx: float = 1.0 / 64.0
    density: float = 1600.0
    boundary_cells: int = 3
    boundaries: bool = True
    strict_domain: bool = False
    max_substeps: int = 1024
    cfl: float = 0.5

    def __post_init__(self):
        if self.dt <= 0.0:
            raise ValueError("dt must be positive")
        if self.dx <= 0.0:
            raise ValueError("dx must be positive")
        if len(self.gravity) != 3:
            raise ValueError("gravity must be a 3-vector")
        if self.youngs_modulus <= 0.0:
            raise ValueError("youngs_modulus must be positive")
        if not 0.0 <= self.poisson_ratio < 0.5:
            raise ValueError("poisson_ratio must be in [0, 0.5)")
        if len(self.grid) != 3 or any(int(n) < 8 for n in self.grid):
            raise ValueError("grid must be three extents of at least 8 nodes")
        if self.density <= 0.0:
            raise ValueError("density must be positive")
        if self.boundary_cells < 1:
            raise ValueError("boundary_cells must be at least 1")
        if self.max_substeps < 1:
            raise ValueError("max_substeps must be at least 1")
        if not 0.0 < self.cfl <= 1.0:
            raise ValueError("cfl must be in (0, 1]")

    @property
    def mu(self):
        return self.youngs_modulus / (2.0 * (1.0 + self.poisson_ratio))

    @property
    def lam(self):
        nu = self.poisson_ratio
        return self.youngs_modulus * nu / ((1.0 + nu) * (1.0 - 2.0 * nu))

    @property
    def domain(self):
        """Axis-aligned box covered by the grid, in meters."""
        return tuple(int(n) * self.dx for n in self.grid)


def _safe_bounds(cfg):
    # Quadratic interpolation needs base in [0, n-3], which holds for
    # positions in [0.5*dx, (n-1.5)*dx); shrink by a hair for float floor.
    eps = 1e-6 * cfg.dx
    lo = np.full(3, 0.5 * cfg.dx + eps)
    hi = np.array([(int(n) - 1.5) * cfg.dx - eps for n in cfg.grid])
    return lo, hi


@dataclasses.dataclass
class SandState:
    """Particles plus the background grid of the last completed substep."""

    cloud: ParticleCloud
    cfg: SimConfig
    time: float = 0.0
    step: int = 0
    escaped: int = 0
    last_substeps: int = 0
    grid_mass: np.ndarray = None
    grid_momentum: np.ndarray = None

    def __post_init__(self):
        shape = tuple(int(n) for n in self.cfg.grid)
        if self.grid_mass is None:
            self.grid_mass = np.zeros(shape)
        if self.grid_momentum is None:
            self.grid_momentum = np.zeros(shape + (3,))

    def total_mass(self):
        return float(self.cloud.masses.sum())

    def total_momentum(self):
        return (self.cloud.masses[:, None] * self.cloud.velocities).sum(axis=0)

    def kinetic_energy(self):
        speeds_sq = (self.cloud.velocities**2).sum(axis=1)
        return float(0.5 * (self.cloud.masses * speeds_sq).sum())

    def copy(self):
        return SandState(
            cloud=self.cloud.copy(),
            cfg=self.cfg,
            time=self.time,
            step=self.step,
            escaped=self.escaped,
            last_substeps=self.last_substeps,
            grid_mass=self.grid_mass.copy(),
            grid_momentum=self.grid_momentum.copy(),
        )


def init_state(cloud, cfg):
    """Wrap a particle cloud into a simulation state, validating it.

    Raises DomainError if any particle sits outside the interpolation-safe
    interior of the grid, and ValueError on non-positive det(F).
    """
    lo, hi = _safe_bounds(cfg)
    if len(cloud):
        outside = np.any((cloud.positions < lo) | (cloud.positions > hi), axis=1)
        if np.any(outside):
            raise DomainError(
                "%d of %d particles outside the grid interior"
                % (int(outside.sum()), len(cloud))
            )
        if np.any(np.linalg.det(cloud.F) <= 0.0):
            raise ValueError("deformation gradients must have positive determinant")
    return SandState(cloud=cloud, cfg=cfg)


def _interpolation(positions, cfg):
    """Weights, node indices, and node offsets for every particle."""
    x = positions / cfg.dx
    base = np.floor(x - 0.5).astype(np.int64)           # (N, 3)
    fx = x - base                                       # (N, 3) in [0.5, 1.5]
    w = np.stack(
        [0.5 * (1.5 - fx) ** 2, 0.75 - (fx - 1.0) ** 2, 0.5 * (fx - 0.5) ** 2],
        axis=1,
    )                                                   # (N, node, axis)
    weight = (
        w[:, OFFSETS[:, 0], 0] * w[:, OFFSETS[:, 1], 1] * w[:, OFFSETS[:, 2], 2]
    )                                                   # (N, 27)
    dpos = (OFFSETS[None, :, :] - fx[:, None, :]) * cfg.dx  # (N, 27, 3) meters
    nodes = base[:, None, :] + OFFSETS[None, :, :]      # (N, 27, 3)
    _, ny, nz = (int(n) for n in cfg.grid)
    flat = (nodes[..., 0] * ny + nodes[..., 1]) * nz + nodes[..., 2]
    return weight, dpos, flat


def _kirchhoff_stress(f, mu, lam):
    """Fixed-corotated Kirchhoff stress tau = 2mu(F-R)F^T + lam J(J-1) I."""
    u, s, vt = np.linalg.svd(f)
    # det(F) > 0 keeps det(U) det(V) = +1, so R = U V^T is a pure rotation.
    r = u @ vt
    j = np.prod(s, axis=-1)
    ft = np.swapaxes(f, -1, -2)
    tau = 2.0 * mu * ((f - r) @ ft)
    tau += (lam * j * (j - 1.0))[:, None, None] * np.eye(3)
    return tau


def _scatter(cloud, cfg, h):
    """P2G: scatter mass and momentum (with fused stress force) to nodes."""
    n_cells = int(np.prod(cfg.grid))
    grid_mass = np.zeros(n_cells)
    grid_momentum = np.zeros((n_cells, 3))
    if not len(cloud):
        return grid_mass, grid_momentum, None
    weight, dpos, flat = _interpolation(cloud.positions, cfg)
    tau = _kirchhoff_stress(cloud.F, cfg.mu, cfg.lam)
    aff = (-h * 4.0 / cfg.dx**2) * cloud.volumes[:, None, None] * tau
    aff += cloud.masses[:, None, None] * cloud.C
    mv = cloud.masses[:, None] * cloud.velocities
    contrib = weight[..., None] * (
        mv[:, None, :] + np.einsum("nij,nkj->nki", aff, dpos)
    )
    idx = flat.ravel()
    np.add.at(grid_mass, idx, (weight * cloud.masses[:, None]).ravel())
    np.add.at(grid_momentum, idx, contrib.reshape(-1, 3))
    return grid_mass, grid_momentum, (weight, dpos, flat)


def p2g(state, h=None):
    """One particle-to-grid transfer; returns (mass, momentum) node arrays.

    h scales the fused stress force; defaults to the configured dt.
    """
    cfg = state.cfg
    if h is None:
        h = cfg.dt
    grid_mass, grid_momentum, _ = _scatter(state.cloud, cfg, h)
    shape = tuple(int(n) for n in cfg.grid)
    return grid_mass.reshape(shape), grid_momentum.reshape(shape + (3,))


def _grid_velocities(grid_mass, grid_momentum, cfg, h):
    """Momentum to velocity, gravity kick, boundary conditions."""
    nx, ny, nz = (int(n) for n in cfg.grid)
    v = np.zeros_like(grid_momentum)
    live = grid_mass > 0.0
    v[live] = grid_momentum[live] / grid_mass[live, None]
    v[live] += h * np.asarray(cfg.gravity)
    if cfg.boundaries:
        nb = cfg.boundary_cells
        vg = v.reshape(nx, ny, nz, 3)
        # Sticky floor: any approach velocity freezes the node entirely.
        floor = vg[:, :, :nb, 2] < 0.0
        vg[:, :, :nb][floor] = 0.0
        # Separating walls and ceiling: cancel only the outward component.
        for axis, (low, high) in enumerate([(0, nx), (1, ny), (2, nz)]):
            del low
            comp = vg[..., axis]
            if axis < 2:
                sl = [slice(None)] * 3
                sl[axis] = slice(0, nb)
                region = comp[tuple(sl)]
                region[region < 0.0] = 0.0
            sl = [slice(None)] * 3
            sl[axis] = slice(high - nb, high)
            region = comp[tuple(sl)]
            region[region > 0.0] = 0.0
    return v


def _substep(state, h):
    cfg = state.cfg
    cloud = state.cloud
    grid_mass, grid_momentum, geom = _scatter(cloud, cfg, h)
    state.grid_mass = grid_mass.reshape(tuple(int(n) for n in cfg.grid))
    state.grid_momentum = grid_momentum.reshape(state.grid_mass.shape + (3,))
    if geom is None:
        return
    weight, dpos, flat = geom
    v = _grid_velocities(grid_mass, grid_momentum, cfg, h)

    v_nodes = v[flat]                                   # (N, 27, 3)
    v_new = np.einsum("nk,nki->ni", weight, v_nodes)
    c_new = (4.0 / cfg.dx**2) * np.einsum("nk,nki,nkj->nij", weight, v_nodes, dpos)
    x_new = cloud.positions + h * v_new

    f_trial = np.einsum("nij,njk->nik", np.eye(3) + h * c_new, cloud.F)
    cloud.F = drucker_prager_project(f_trial, cfg.friction_deg)

    lo, hi = _safe_bounds(cfg)
    outside = np.any((x_new < lo) | (x_new > hi), axis=1)
    n_out = int(outside.sum())
    if n_out:
        if cfg.strict_domain:
            raise ParticleEscaped(
                "%d particles left the grid interior at t=%g" % (n_out, state.time)
            )
        np.clip(x_new, lo, hi, out=x_new)
        state.escaped += n_out

    cloud.positions = x_new
    cloud.velocities = v_new
    cloud.C = c_new


def mpm_step(state):
    """Advance the state by one dt, sub-stepping to honor the CFL bound.

    Mutates and returns the state. Raises DomainError if the substep
    budget is exhausted, and ParticleEscaped in strict domain mode.
    """
    cfg = state.cfg
    remaining = cfg.dt
    substeps = 0
    while remaining > 0.0:
        substeps += 1
        if substeps > cfg.max_substeps:
            raise DomainError(
                "dt=%g needs more than %d substeps" % (cfg.dt, cfg.max_substeps)
            )
        h = remaining
        if len(state.cloud):
            vmax = float(np.sqrt((state.cloud.velocities**2).sum(axis=1)).max())
            if vmax > 0.0:
                h = min(remaining, cfg.cfl * cfg.dx / vmax)
        _substep(state, h)
        remaining -= h
    state.time += cfg.dt
    state.step += 1
    state.last_substeps = substeps
    return state
