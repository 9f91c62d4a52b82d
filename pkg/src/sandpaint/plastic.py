"""Frictional plasticity: cone projection on Hencky strain.

The yield condition is ||dev(eps)|| + alpha_f * tr(eps) <= 0 on the log
singular values of the elastic deformation gradient. Expansion (positive
trace) collapses to zero strain: loose sand holds no tension.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import SingularDecomposition

MIN_SINGULAR = 1e-12


def friction_alpha(friction_deg):
    """Cone slope from the friction angle in degrees."""
    s = math.sin(math.radians(friction_deg))
    return math.sqrt(2.0 / 3.0) * 2.0 * s / (3.0 - s)


def drucker_prager_project(f_trial, friction_deg):
    """Return-map a trial deformation gradient (or batch) onto the cone.

    SVD frame is preserved; only the singular values move. Idempotent to
    floating-point roundoff.
    """
    f = np.asarray(f_trial, dtype=np.float64)
    single = f.ndim == 2
    if single:
        f = f[None]
    if not np.all(np.isfinite(f)):
        raise SingularDecomposition("non-finite deformation gradient")
    if np.any(np.linalg.det(f) <= 0.0):
        raise SingularDecomposition("deformation gradient with det <= 0")
    u, s, vt = np.linalg.svd(f)
    if np.any(s < MIN_SINGULAR):
        raise SingularDecomposition("singular value below %g" % MIN_SINGULAR)

    eps = np.log(s)
    tr = eps.sum(axis=1)
    dev = eps - tr[:, None] / 3.0
    dev_norm = np.linalg.norm(dev, axis=1)
    alpha = friction_alpha(friction_deg)

    out = eps.copy()
    expanding = tr > 0.0
    out[expanding] = 0.0
    # delta_gamma <= dev_norm always holds here because alpha * tr <= 0,
    # so the deviatoric direction never flips
    delta_gamma = dev_norm + alpha * tr
    yielding = ~expanding & (delta_gamma > 0.0)
    if np.any(yielding):
        scale = delta_gamma[yielding] / dev_norm[yielding]
        out[yielding] -= scale[:, None] * dev[yielding]

    proj = np.einsum("nij,nj,njk->nik", u, np.exp(out), vt)
    return proj[0] if single else proj
