"""End-to-end stroke optimization: losses, optimizer, topology cadence.

The loop renders, backpropagates through the subtractive rasterizer, adds
curve-regularizer gradients analytically, steps an adaptive-moment
optimizer with per-parameter-group learning rates, and periodically applies
structural topology edits (frozen for the final tail of iterations).
"""

from __future__ import annotations

import copy
import dataclasses
import math

import numpy as np

from .errors import DimensionMismatch, NonFiniteGradient, NonFiniteLoss
from .model import (
    DEFAULT_SAND_COLOR,
    Painting,
    Stroke,
    activate_scale,
    inverse_opacity,
    inverse_scale,
    scale_grad,
)
from .planner import classify_strokes, fallback_plan
from .raster import backward, render
from .topology import TopologyConfig, topology_pass


@dataclasses.dataclass
class FitConfig:
    width: int = 128
    height: int = 128
    iterations: int = 10000
    base_lr: float = 0.005
    lr_decay: float = 0.5            # step-decay schedule
    lr_step: int = 2500
    init_curves: int = 700
    init_points_per_curve: int = 20
    init_scale: float = 3.5          # activated px, passes the prune gate
    init_opacity: float = 0.15
    init_segment_step: float = 0.5   # px between adjacent kernels at init
    lambda_spring: float = 0.01
    lambda_smooth: float = 0.3
    lambda_g: float = 1.0            # outer mix for the curve regularizers
    lambda_s: float = 1.0            # outer mix for the region regularizers
    bg_target_radius: float = 15.0
    bg_scale_weight: float = 0.1
    bg_orient_weight: float = 1.0
    topology_period: int = 500
    topology_freeze_tail: int = 1000
    checkpoint_period: int = 100
    background: object = 1.0
    c_sand: object = DEFAULT_SAND_COLOR
    # parameter groups live on different natural scales
    center_lr_scale: float = 0.01    # times the image diagonal
    angle_lr_scale: float = 1.0
    scalar_lr_scale: float = 0.5     # raw scale and raw opacity
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    deterministic: bool = True       # reductions here are always deterministic
    topology: TopologyConfig = dataclasses.field(default_factory=TopologyConfig)

    def __post_init__(self):
        for name in ("width", "height", "init_curves", "init_points_per_curve",
                     "topology_period", "checkpoint_period", "lr_step"):
            if getattr(self, name) <= 0:
                raise ValueError("%s must be positive" % name)
        for name in ("lambda_spring", "lambda_smooth", "lambda_g", "lambda_s",
                     "bg_scale_weight", "bg_orient_weight"):
            if getattr(self, name) < 0:
                raise ValueError("%s must be non-negative" % name)
        if self.iterations < 0:
            raise ValueError("iterations must be >= 0")
        if self.iterations > 0 and self.topology_freeze_tail >= self.iterations:
            # a freeze tail covering the whole run disables topology entirely,
            # which is expressible but must be said with intent
            if self.topology_freeze_tail > self.iterations:
                raise ValueError("topology_freeze_tail must not exceed iterations")

    @property
    def diagonal(self):
        return math.hypot(self.width, self.height)


@dataclasses.dataclass
class LossReport:
    rec: float
    spring: float
    smooth: float
    scale: float
    orient: float
    total: float


def loss_rec(rendered, target):
    """Mean squared error over all pixels."""
    rendered = np.asarray(rendered, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if rendered.shape != target.shape:
        raise DimensionMismatch(
            "rendered %s vs target %s" % (rendered.shape, target.shape)
        )
    return float(np.mean((rendered - target) ** 2))


def loss_spring(stroke):
    """Sum of squared adjacent-center distances along the curve."""
    if stroke.num_kernels < 2:
        return 0.0
    d = np.diff(stroke.centers, axis=0)
    return float(np.sum(d * d))


def loss_smooth(stroke):
    """Sum of squared discrete-Laplacian bending terms along the curve."""
    c = stroke.centers
    if len(c) < 3:
        return 0.0
    lap = c[:-2] - 2.0 * c[1:-1] + c[2:]
    return float(np.sum(lap * lap))


def loss_scale_and_orient(painting, plan, target_radius=15.0):
    """(scale, orient) pulled only by background strokes.

    scale: sum over background strokes of ||s - (r, r)||^2 on activated
    scales.  orient: mean over background-stroke kernels of sin^2(rotation).
    Strokes without a region count as foreground and contribute nothing.
    """
    bg = plan.background_ids
    scale_total = 0.0
    sin2_sum = 0.0
    n_kernels = 0
    for s in painting.strokes:
        if s.region_id not in bg:
            continue
        sx, sy = activate_scale(s.raw_scale)
        scale_total += (sx - target_radius) ** 2 + (sy - target_radius) ** 2
        sin2_sum += float(np.sum(np.sin(s.rotations) ** 2))
        n_kernels += s.num_kernels
    orient = sin2_sum / n_kernels if n_kernels else 0.0
    return scale_total, orient


def expand_target(target):
    """Promote a grayscale target to three identical channels."""
    target = np.asarray(target, dtype=np.float64)
    if target.ndim == 2:
        target = np.repeat(target[:, :, None], 3, axis=2)
    return target


def loss_and_grads(painting, target, plan, cfg):
    """One full forward/backward: (LossReport, {stroke_id: StrokeGrads}).

    The curve regularizers are pooled means over all segments (spring) and
    interior points (smooth) so their magnitude does not scale with stroke
    count; the background scale term is a plain sum per its definition.
    """
    target = expand_target(target)
    res = render(painting, keep_pairs=True)
    rec = loss_rec(res.image, target)

    n_seg = sum(max(s.num_kernels - 1, 0) for s in painting.strokes)
    n_int = sum(max(s.num_kernels - 2, 0) for s in painting.strokes)
    spring = sum(loss_spring(s) for s in painting.strokes) / n_seg if n_seg else 0.0
    smooth = sum(loss_smooth(s) for s in painting.strokes) / n_int if n_int else 0.0
    scale, orient = loss_scale_and_orient(painting, plan, cfg.bg_target_radius)

    total = (
        rec
        + cfg.lambda_g * (cfg.lambda_spring * spring + cfg.lambda_smooth * smooth)
        + cfg.lambda_s * (cfg.bg_scale_weight * scale + cfg.bg_orient_weight * orient)
    )
    if not math.isfinite(total):
        raise NonFiniteLoss(
            "rec=%r spring=%r smooth=%r scale=%r orient=%r" % (rec, spring, smooth, scale, orient)
        )

    grad_image = 2.0 * (res.image - target) / res.image.size
    grads = backward(res, grad_image)

    spring_coeff = cfg.lambda_g * cfg.lambda_spring / n_seg if n_seg else 0.0
    smooth_coeff = cfg.lambda_g * cfg.lambda_smooth / n_int if n_int else 0.0
    bg = plan.background_ids
    n_bg_kernels = sum(s.num_kernels for s in painting.strokes if s.region_id in bg)
    for s in painting.strokes:
        g = grads[s.stroke_id]
        c = s.centers
        if s.num_kernels >= 2 and spring_coeff:
            d = c[1:] - c[:-1]
            g.centers[:-1] -= 2.0 * spring_coeff * d
            g.centers[1:] += 2.0 * spring_coeff * d
        if s.num_kernels >= 3 and smooth_coeff:
            lap = c[:-2] - 2.0 * c[1:-1] + c[2:]
            g.centers[:-2] += 2.0 * smooth_coeff * lap
            g.centers[1:-1] -= 4.0 * smooth_coeff * lap
            g.centers[2:] += 2.0 * smooth_coeff * lap
        if s.region_id in bg:
            sx, sy = activate_scale(s.raw_scale)
            pull = 2.0 * np.array([sx - cfg.bg_target_radius, sy - cfg.bg_target_radius])
            g.raw_scale += cfg.lambda_s * cfg.bg_scale_weight * pull * scale_grad(s.raw_scale)
            if n_bg_kernels:
                g.rotations += (
                    cfg.lambda_s * cfg.bg_orient_weight * np.sin(2.0 * s.rotations) / n_bg_kernels
                )
    report = LossReport(rec, spring, smooth, scale, orient, total)
    return report, grads


def init_painting(cfg, seed):
    """Stratified-uniform curve anchors; kernels on short random segments."""
    rng = np.random.default_rng(seed)
    n = cfg.init_curves
    g = math.ceil(math.sqrt(n))
    cells = [(i, j) for j in range(g) for i in range(g)]
    rng.shuffle(cells)
    cw, ch = cfg.width / g, cfg.height / g
    strokes = []
    for sid in range(n):
        ci, cj = cells[sid % len(cells)]
        anchor = np.array(
            [(ci + rng.uniform()) * cw, (cj + rng.uniform()) * ch]
        )
        phi = rng.uniform(0.0, 2.0 * math.pi)
        step = cfg.init_segment_step * np.array([math.cos(phi), math.sin(phi)])
        k = cfg.init_points_per_curve
        centers = anchor[None, :] + np.arange(k)[:, None] * step[None, :]
        strokes.append(
            Stroke(
                stroke_id=sid,
                centers=centers,
                rotations=np.full(k, phi % math.pi),
                raw_scale=inverse_scale(np.array([cfg.init_scale, cfg.init_scale])),
                raw_opacity=float(inverse_opacity(cfg.init_opacity)),
            )
        )
    painting = Painting(cfg.width, cfg.height, cfg.background, cfg.c_sand, strokes)
    painting.clamp_centers()
    return painting


class _Adam:
    """Per-stroke, per-block adaptive moments keyed by stroke_id.

    State for ids that vanish in a topology pass is dropped; blocks whose
    shape changed (merge/split kept the id) restart from zero moments.
    """

    BLOCKS = ("centers", "rotations", "raw_scale", "raw_opacity")

    def __init__(self, cfg):
        self.cfg = cfg
        self.state = {}

    def _lr(self, block, factor):
        c = self.cfg
        if block == "centers":
            return c.base_lr * c.diagonal * c.center_lr_scale * factor
        if block == "rotations":
            return c.base_lr * c.angle_lr_scale * factor
        return c.base_lr * c.scalar_lr_scale * factor

    def step(self, painting, grads, factor):
        c = self.cfg
        live = set()
        for s in painting.strokes:
            g = grads[s.stroke_id]
            for block in self.BLOCKS:
                gval = np.asarray(getattr(g, block), dtype=np.float64)
                key = (s.stroke_id, block)
                live.add(key)
                st = self.state.get(key)
                if st is None or st["m"].shape != gval.shape:
                    st = {"m": np.zeros_like(gval), "v": np.zeros_like(gval), "t": 0}
                    self.state[key] = st
                st["t"] += 1
                st["m"] = c.adam_beta1 * st["m"] + (1 - c.adam_beta1) * gval
                st["v"] = c.adam_beta2 * st["v"] + (1 - c.adam_beta2) * gval * gval
                mhat = st["m"] / (1 - c.adam_beta1 ** st["t"])
                vhat = st["v"] / (1 - c.adam_beta2 ** st["t"])
                delta = self._lr(block, factor) * mhat / (np.sqrt(vhat) + c.adam_eps)
                if block == "raw_opacity":
                    s.raw_opacity = float(s.raw_opacity - delta)
                else:
                    getattr(s, block)[...] -= delta
        for key in [k for k in self.state if k not in live]:
            del self.state[key]


def _trace_row(i, report, factor, painting, changes):
    return [
        i, report.rec, report.spring, report.smooth, report.scale, report.orient,
        report.total, factor, len(painting.strokes), painting.total_kernels(),
        changes.points_merged if changes else 0,
        changes.strokes_split if changes else 0,
        changes.strokes_merged if changes else 0,
        changes.strokes_pruned if changes else 0,
    ]


TRACE_HEADER = (
    "iteration,rec,spring,smooth,scale,orient,total,lr_factor,"
    "strokes,kernels,points_merged,strokes_split,strokes_merged,strokes_pruned"
)


def fit(target, plan, cfg, seed, out_dir=None):
    """Optimize a painting against a target image.

    Returns (painting, [LossReport per iteration]).  A non-finite loss or
    gradient aborts the loop and returns the last checkpoint; if the very
    first evaluation is already non-finite, the error propagates.
    """
    target = expand_target(target)
    if target.shape != (cfg.height, cfg.width, 3):
        raise DimensionMismatch(
            "target %s does not match config canvas %s"
            % (target.shape, (cfg.height, cfg.width, 3))
        )
    if plan is None:
        plan = fallback_plan(cfg.width, cfg.height)

    painting = init_painting(cfg, seed)
    if cfg.iterations == 0:
        return painting, []
    painting = classify_strokes(painting, plan)

    import pathlib

    out = pathlib.Path(out_dir) if out_dir is not None else None
    rows = []
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)

    adam = _Adam(cfg)
    trace = []
    checkpoint = None  # (iteration, painting copy)
    topology_last = cfg.iterations - cfg.topology_freeze_tail

    for i in range(1, cfg.iterations + 1):
        factor = cfg.lr_decay ** ((i - 1) // cfg.lr_step)
        try:
            report, grads = loss_and_grads(painting, target, plan, cfg)
        except (NonFiniteLoss, NonFiniteGradient):
            if checkpoint is None:
                raise
            painting = checkpoint[1]
            break
        adam.step(painting, grads, factor)
        painting.clamp_centers()

        changes = None
        if i % cfg.topology_period == 0 and i <= topology_last:
            painting, changes = topology_pass(
                painting, cfg.topology, late_stage=i > cfg.iterations // 2
            )
            painting = classify_strokes(painting, plan)

        trace.append(report)
        rows.append(_trace_row(i, report, factor, painting, changes))
        if i % cfg.checkpoint_period == 0:
            checkpoint = (i, copy.deepcopy(painting))
            if out is not None:
                painting.to_json(out / ("checkpoint_%06d.json" % i))

    if out is not None:
        with open(out / "trace.csv", "w") as f:
            f.write(TRACE_HEADER + "\n")
            for row in rows[: len(trace)]:
                f.write(",".join(repr(v) if isinstance(v, float) else str(v) for v in row) + "\n")
        painting.to_json(out / "painting.json")
    return painting, trace
