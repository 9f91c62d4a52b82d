"""Hand-interaction operators on the particle state.

smear pushes sand with a paraboloid pressure profile around a contact
point, approximating a finger drag; freeze_filter then clamps slow
stragglers far from the interaction so momentum does not keep leaking
through the grid after the hand moves on.
"""

import numpy as np

# Service-level defaults: clamp below 5 cm/s outside three smear radii.
DEFAULT_V_THRESHOLD = 0.05
SAFE_RADIUS_FACTOR = 3.0


def smear(state, center, radius, strength, direction):
    """Add a velocity impulse strength * p(r) * direction inside radius.

    p(r) = max(1 - (r/R)^2, 0): full impulse at the center, fading to
    exactly zero at r = R. Particles at or beyond R are untouched.
    Mutates and returns the state.
    """
    if radius <= 0.0:
        raise ValueError("smear radius must be positive")
    center = np.asarray(center, dtype=np.float64)
    direction = np.asarray(direction, dtype=np.float64)
    delta = state.cloud.positions - center
    profile = 1.0 - (delta**2).sum(axis=1) / radius**2
    mask = profile > 0.0
    state.cloud.velocities[mask] += (strength * profile[mask])[:, None] * direction
    return state


def freeze_filter(state, interaction_center, r_safe, v_threshold):
    """Zero velocities of slow particles outside the safe radius.

    Both gates are strict: distance must exceed r_safe and speed must
    fall below v_threshold. Fast particles and particles inside the
    interaction region keep their velocity. Mutates and returns the state.
    """
    if r_safe < 0.0:
        raise ValueError("safe radius must be non-negative")
    delta = state.cloud.positions - np.asarray(interaction_center, dtype=np.float64)
    dist_sq = (delta**2).sum(axis=1)
    speed_sq = (state.cloud.velocities**2).sum(axis=1)
    mask = (dist_sq > r_safe**2) & (speed_sq < v_threshold**2)
    state.cloud.velocities[mask] = 0.0
    return state
