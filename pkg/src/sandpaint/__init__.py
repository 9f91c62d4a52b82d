"""Curve-guided Gaussian sand strokes.

Vectorizes images into subtractive Gaussian stroke paintings, renders
the stroke-order process video, lifts paintings into a granular MPM
simulation, and serves an interactive websocket studio.
"""

from .errors import SandpaintError
from .fitting import FitConfig, fit
from .interact import freeze_filter, smear
from .lift import LiftConfig, lift_painting, lift_stroke
from .metrics import ddc, evaluate, gtc, psnr, ssim
from .model import Painting, Stroke
from .mpm import SandState, SimConfig, init_state, mpm_step
from .particles import ParticleCloud
from .planner import RegionPlan, fallback_plan, load_plan, save_plan
from .raster import render, render_image
from .render3d import render_3d
from .sequencer import ProcessScript, build_script, emit_frames
from .snapshot import load_snapshot, save_snapshot
from .topology import TopologyConfig, topology_pass

__version__ = "0.1.0"

__all__ = [
    "FitConfig",
    "LiftConfig",
    "Painting",
    "ParticleCloud",
    "ProcessScript",
    "RegionPlan",
    "SandState",
    "SandpaintError",
    "SimConfig",
    "Stroke",
    "TopologyConfig",
    "build_script",
    "ddc",
    "emit_frames",
    "evaluate",
    "fallback_plan",
    "fit",
    "freeze_filter",
    "gtc",
    "init_state",
    "lift_painting",
    "lift_stroke",
    "load_plan",
    "load_snapshot",
    "mpm_step",
    "psnr",
    "render",
    "render_3d",
    "render_image",
    "save_plan",
    "save_snapshot",
    "smear",
    "ssim",
    "topology_pass",
]
