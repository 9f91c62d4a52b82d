"""Activation, covariance, and serialization contracts of the model."""

import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sandpaint.errors import DomainError, SandpaintError
from sandpaint.model import (
    Painting,
    Stroke,
    activate_opacity,
    activate_scale,
    canonical_rotation,
    covariance,
    eval_kernel,
    inverse_opacity,
    inverse_scale,
    opacity_grad,
    rotation_matrix,
    scale_grad,
)


def make_stroke(sid=0, k=3, region=None):
    rng = np.random.default_rng(sid + 7)
    return Stroke(
        stroke_id=sid,
        centers=rng.uniform(2, 30, size=(k, 2)),
        rotations=rng.uniform(-3, 3, size=k),
        raw_scale=rng.normal(1.0, 0.5, size=2),
        raw_opacity=float(rng.normal()),
        region_id=region,
    )


def test_scale_activation_golden():
    # softplus(0) + 0.05 = log(2) + 0.05
    assert activate_scale(0.0) == pytest.approx(0.7431471805599453, abs=1e-12)


def test_scale_activation_floor_and_monotone():
    raws = np.linspace(-80, 80, 2001)
    s = activate_scale(raws)
    # softplus underflows to 0 in the far negative tail, so the floor is
    # reached but never crossed
    assert np.all(s >= 0.05)
    assert np.all(np.diff(s) >= 0)
    assert np.all(np.isfinite(s))
    mid = activate_scale(np.linspace(-30, 30, 601))
    assert np.all(mid > 0.05)
    assert np.all(np.diff(mid) > 0)


# The far negative tail cancels catastrophically against the 0.05 floor
# (softplus(raw) << eps * floor), so the raw-space round trip is only exact
# over the range real parameters live in; the activated-space round trip
# below holds everywhere.
@given(st.floats(min_value=-12, max_value=30))
@settings(max_examples=200)
def test_scale_roundtrip(raw):
    s = float(activate_scale(raw))
    back = float(inverse_scale(s))
    assert abs(back - raw) <= 1e-9 * max(1.0, abs(raw))


@given(st.floats(min_value=0.0501, max_value=500.0))
@settings(max_examples=200)
def test_scale_roundtrip_activated_space(s):
    again = float(activate_scale(inverse_scale(s)))
    assert abs(again - s) <= 1e-9 * s


@given(st.floats(min_value=-12, max_value=12))
@settings(max_examples=200)
def test_opacity_roundtrip(raw):
    a = float(activate_opacity(np.asarray(raw)))
    back = float(inverse_opacity(a))
    assert abs(back - raw) <= 1e-9 * max(1.0, abs(raw))


@given(st.floats(min_value=1e-8, max_value=1.0, exclude_max=True))
@settings(max_examples=200)
def test_opacity_roundtrip_activated_space(a):
    again = float(activate_opacity(inverse_opacity(a)))
    assert abs(again - a) <= 1e-9 * a


def test_activation_domain_errors():
    with pytest.raises(DomainError):
        inverse_scale(0.05)
    with pytest.raises(DomainError):
        inverse_opacity(1.0)
    with pytest.raises(DomainError):
        inverse_opacity(0.0)


def test_activation_grads_match_fd():
    raws = np.linspace(-4, 4, 17)
    h = 1e-6
    fd_s = (activate_scale(raws + h) - activate_scale(raws - h)) / (2 * h)
    fd_a = (activate_opacity(raws + h) - activate_opacity(raws - h)) / (2 * h)
    np.testing.assert_allclose(scale_grad(raws), fd_s, rtol=1e-7, atol=1e-9)
    np.testing.assert_allclose(opacity_grad(raws), fd_a, rtol=1e-7, atol=1e-9)


def test_covariance_construction():
    theta, sx, sy = 0.7, 2.0, 0.5
    r = rotation_matrix(theta)
    cov = covariance(theta, sx, sy)
    np.testing.assert_allclose(cov, r @ np.diag([sx**2, sy**2]) @ r.T, atol=1e-12)
    # symmetric positive definite
    np.testing.assert_allclose(cov, cov.T, atol=1e-12)
    assert np.all(np.linalg.eigvalsh(cov) > 0)


def test_covariance_isotropic_rotation_invariant():
    base = covariance(0.0, 1.5, 1.5)
    for theta in np.linspace(0, math.pi, 7):
        np.testing.assert_allclose(covariance(theta, 1.5, 1.5), base, atol=1e-12)


def test_eval_kernel_center_value_and_falloff():
    val = eval_kernel([[10.0, 5.0]], (10.0, 5.0), 0.3, 2.0, 1.0, 0.7)
    assert val[0] == pytest.approx(0.7, abs=1e-12)
    # one sigma along the rotated major axis: exp(-1/2)
    theta = 0.3
    p = np.array([10.0 + 2.0 * math.cos(theta), 5.0 + 2.0 * math.sin(theta)])
    v = eval_kernel([p], (10.0, 5.0), theta, 2.0, 1.0, 0.7)
    assert v[0] == pytest.approx(0.7 * math.exp(-0.5), rel=1e-10)


def test_eval_kernel_matches_quadratic_form():
    rng = np.random.default_rng(3)
    center = rng.uniform(-5, 5, 2)
    theta = rng.uniform(-3, 3)
    sx, sy, alpha = 1.7, 0.6, 0.4
    pts = rng.uniform(-8, 8, size=(50, 2))
    cov = covariance(theta, sx, sy)
    prec = np.linalg.inv(cov)
    d = pts - center
    expected = alpha * np.exp(-0.5 * np.einsum("ni,ij,nj->n", d, prec, d))
    np.testing.assert_allclose(
        eval_kernel(pts, center, theta, sx, sy, alpha), expected, rtol=1e-10
    )


@given(st.floats(min_value=-50, max_value=50))
@settings(max_examples=200)
def test_canonical_rotation_range_and_equivalence(theta):
    t = float(canonical_rotation(theta))
    assert 0.0 <= t < math.pi
    # same kernel footprint under the pi fold
    np.testing.assert_allclose(
        covariance(theta, 1.3, 0.4), covariance(t, 1.3, 0.4), atol=1e-9
    )


def test_stroke_shape_validation():
    with pytest.raises(SandpaintError):
        Stroke(0, np.zeros((3, 2)), np.zeros(2), np.zeros(2), 0.0)


def test_painting_validation():
    with pytest.raises(SandpaintError):
        Painting(0, 4, 1.0, 1.0)
    with pytest.raises(DomainError):
        Painting(4, 4, 1.5, 1.0)
    with pytest.raises(DomainError):
        Painting(4, 4, 1.0, -1.0)
    with pytest.raises(DomainError):
        Painting(4, 4, (0.5, 0.5, 1.2), 1.0)  # one channel out of range
    with pytest.raises(DomainError):
        Painting(4, 4, (0.5, 0.5), 1.0)  # wrong channel count


def test_painting_color_coercion():
    p = Painting(4, 4, 0.9, (0.5, 0.4, 0.3))
    np.testing.assert_array_equal(p.background, [0.9, 0.9, 0.9])
    np.testing.assert_array_equal(p.c_sand, [0.5, 0.4, 0.3])
    assert p.background.shape == (3,) and p.c_sand.shape == (3,)


def test_default_sand_color():
    p = Painting(4, 4)
    np.testing.assert_allclose(p.c_sand, [0.55, 0.47, 0.35])
    np.testing.assert_allclose(p.background, 1.0)


def test_rgb_colors_roundtrip_json():
    p = Painting(8, 8, (0.9, 0.85, 0.8), (0.55, 0.47, 0.35))
    q = Painting.from_json(p.to_json())
    np.testing.assert_allclose(q.background, p.background, atol=1e-9)
    np.testing.assert_allclose(q.c_sand, p.c_sand, atol=1e-9)


def test_json_roundtrip():
    p = Painting(64, 48, 0.95, 0.8, [make_stroke(0, 4, region=2), make_stroke(1, 2)])
    text = p.to_json()
    data = json.loads(text)
    assert data["schema_version"] == 1
    q = Painting.from_json(text)
    assert q.width == p.width and q.height == p.height
    assert q.background == pytest.approx(p.background)
    assert q.c_sand == pytest.approx(p.c_sand)
    assert len(q.strokes) == 2
    assert q.strokes[0].region_id == 2 and q.strokes[1].region_id is None
    for a, b in zip(p.strokes, q.strokes):
        np.testing.assert_allclose(a.centers, b.centers, atol=1e-5)
        np.testing.assert_allclose(
            canonical_rotation(a.rotations), b.rotations, atol=1e-5
        )
        np.testing.assert_allclose(a.raw_scale, b.raw_scale, atol=1e-5)
        assert b.raw_opacity == pytest.approx(a.raw_opacity, abs=1e-5)


def test_json_rotations_canonicalized():
    s = make_stroke(0, 3)
    s.rotations = np.array([-1.0, 4.0, math.pi])
    p = Painting(32, 32, 1.0, 1.0, [s])
    q = Painting.from_json(p.to_json())
    r = q.strokes[0].rotations
    assert np.all((r >= 0) & (r < math.pi))


def test_json_rejects_unknown_schema():
    p = Painting(8, 8, 1.0, 1.0)
    data = p.to_dict()
    data["schema_version"] = 99
    with pytest.raises(SandpaintError):
        Painting.from_dict(data)


def test_from_json_clamps_runaway_centers():
    s = make_stroke(0, 2)
    s.centers = np.array([[-1000.0, 10.0], [10.0, 1000.0]])
    p = Painting(100, 80, 1.0, 1.0, [s])
    q = Painting.from_json(p.to_json())
    c = q.strokes[0].centers
    assert c[0, 0] == pytest.approx(-25.0)   # -0.25 * width
    assert c[1, 1] == pytest.approx(100.0)   # 1.25 * height


def test_clamp_centers_box():
    p = Painting(40, 20, 1.0, 1.0, [make_stroke(0, 5)])
    p.strokes[0].centers[:] = [[-99, -99], [99, 99], [5, 5], [-99, 99], [99, -99]]
    p.clamp_centers()
    c = p.strokes[0].centers
    assert np.all(c[:, 0] >= -10.0) and np.all(c[:, 0] <= 50.0)
    assert np.all(c[:, 1] >= -5.0) and np.all(c[:, 1] <= 25.0)
    np.testing.assert_allclose(c[2], [5, 5])


def test_json_file_roundtrip(tmp_path):
    p = Painting(16, 16, 0.9, 1.2, [make_stroke(0, 3)])
    path = tmp_path / "painting.json"
    p.to_json(str(path))
    q = Painting.from_json(str(path))
    assert q.total_kernels() == 3
