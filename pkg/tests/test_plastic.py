"""Frictional plasticity projection on Hencky strain."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sandpaint.errors import SingularDecomposition
from sandpaint.plastic import drucker_prager_project, friction_alpha


def strain_to_f(eps, seed=None):
    """Build F = U diag(exp eps) V^T with random rotations."""
    if seed is None:
        return np.diag(np.exp(np.asarray(eps, dtype=np.float64)))
    rng = np.random.default_rng(seed)
    u, _ = np.linalg.qr(rng.normal(size=(3, 3)))
    v, _ = np.linalg.qr(rng.normal(size=(3, 3)))
    if np.linalg.det(u) < 0:
        u[:, 0] *= -1
    if np.linalg.det(v) < 0:
        v[:, 0] *= -1
    return u @ np.diag(np.exp(np.asarray(eps, dtype=np.float64))) @ v.T


def hencky(f):
    s = np.linalg.svd(f, compute_uv=False)
    return np.log(s)


def cone_violation(f, phi=40.0):
    eps = hencky(f)
    tr = eps.sum()
    dev = eps - tr / 3.0
    return float(np.linalg.norm(dev) + friction_alpha(phi) * tr)


def test_friction_alpha_value():
    s = math.sin(math.radians(40.0))
    expected = math.sqrt(2.0 / 3.0) * 2.0 * s / (3.0 - s)
    assert friction_alpha(40.0) == pytest.approx(expected, rel=1e-12)
    assert friction_alpha(0.0) == 0.0


def test_identity_unchanged():
    np.testing.assert_allclose(drucker_prager_project(np.eye(3), 40.0), np.eye(3), atol=1e-14)


def test_pure_expansion_collapses_to_rotation():
    # trace of strain > 0: sand cannot sustain tension, strain resets
    f = 1.1 * np.eye(3)
    np.testing.assert_allclose(drucker_prager_project(f, 40.0), np.eye(3), atol=1e-12)
    # same with rotations attached: result is the rotation U V^T
    f = strain_to_f([0.1, 0.05, 0.02], seed=3)
    out = drucker_prager_project(f, 40.0)
    s = np.linalg.svd(out, compute_uv=False)
    np.testing.assert_allclose(s, 1.0, atol=1e-12)


def test_shear_inside_cone_passes_through():
    # compression dominates shear: ||dev|| < -alpha_f * tr keeps it elastic
    eps = np.array([-0.10 + 0.05, -0.10 - 0.05, -0.10])
    assert cone_violation(strain_to_f(eps)) < 0
    for seed in (None, 1, 2):
        f = strain_to_f(eps, seed)
        np.testing.assert_allclose(drucker_prager_project(f, 40.0), f, atol=1e-12)


def test_yield_projects_onto_cone_surface():
    # too much shear for the compression: projected state sits on the cone
    eps = np.array([0.2, -0.25, -0.05])
    f = strain_to_f(eps, seed=7)
    assert cone_violation(f) > 0
    out = drucker_prager_project(f, 40.0)
    assert abs(cone_violation(out)) < 1e-9
    # trace is preserved by the deviatoric return
    np.testing.assert_allclose(hencky(out).sum(), eps.sum(), atol=1e-9)


def test_projection_keeps_singular_vectors():
    eps = np.array([0.2, -0.25, -0.05])
    f = strain_to_f(eps)  # diagonal singular frame
    out = drucker_prager_project(f, 40.0)
    # same frame: output stays diagonal
    np.testing.assert_allclose(out, np.diag(np.diag(out)), atol=1e-12)


def test_batched_matches_loop():
    rng = np.random.default_rng(11)
    fs = np.eye(3) + 0.2 * rng.normal(size=(40, 3, 3))
    fs = fs[np.linalg.det(fs) > 0.05]
    batched = drucker_prager_project(fs, 40.0)
    for i in range(len(fs)):
        np.testing.assert_allclose(
            batched[i], drucker_prager_project(fs[i], 40.0), atol=1e-12
        )


def test_degenerate_raises():
    with pytest.raises(SingularDecomposition):
        drucker_prager_project(np.zeros((3, 3)), 40.0)
    f = np.diag([1.0, 1.0, -1.0])  # det < 0
    with pytest.raises(SingularDecomposition):
        drucker_prager_project(f, 40.0)


@given(
    e1=st.floats(-0.4, 0.4),
    e2=st.floats(-0.4, 0.4),
    e3=st.floats(-0.4, 0.4),
    seed=st.integers(0, 100),
)
@settings(max_examples=150, deadline=None)
def test_projection_idempotent(e1, e2, e3, seed):
    f = strain_to_f([e1, e2, e3], seed)
    once = drucker_prager_project(f, 40.0)
    twice = drucker_prager_project(once, 40.0)
    assert float(np.max(np.abs(twice - once))) < 1e-9


@given(
    e1=st.floats(-0.4, 0.4),
    e2=st.floats(-0.4, 0.4),
    e3=st.floats(-0.4, 0.4),
)
@settings(max_examples=150, deadline=None)
def test_projection_never_leaves_violation(e1, e2, e3):
    f = strain_to_f([e1, e2, e3])
    out = drucker_prager_project(f, 40.0)
    assert cone_violation(out) <= 1e-9
    assert np.linalg.det(out) > 0
