"""Primitives on the unit circle.

Everything downstream reduces to a handful of scalar functions: the Green's
function of the Weil-Petersson operator on the complement of its kernel,

    G(theta) = (1 - cos theta) * log[2 (1 - cos theta)] + (3/2) cos theta - 1
             = 2 * sum_{n >= 2} cos(n theta) / (n^3 - n),

its derivative, and the kernel basis {1, cos, sin} spanning the infinitesimal
Moebius directions. G is even and 2*pi periodic; the closed form has a
removable singularity at theta = 0 (value 1/2) that we evaluate by series.
"""

from __future__ import annotations

import numpy as np

# Below this distance from 0 (mod 2*pi) the closed form loses ~6 digits to the
# 0 * log(0) cancellation, so G and G' switch to their Taylor expansions.
_SERIES_THRESHOLD = 1e-4


def normalize_angles(theta):
    """Map angles to the canonical branch [0, 2*pi)."""
    return np.mod(theta, 2.0 * np.pi)


def _wrap_to_pi(theta):
    """Signed distance to the nearest multiple of 2*pi, in (-pi, pi]."""
    return np.pi - np.mod(np.pi - np.asarray(theta, dtype=float), 2.0 * np.pi)


def green_function(theta):
    """Evaluate G(theta); total, even, 2*pi periodic.

    G(0) = 1/2 (the telescoping value 2 * sum 1/(n^3 - n) = 1/2) and near 0

        G(t) = 1/2 + t^2 (log|t| - 3/4) + t^4 (-log|t|/12 + 1/48) + O(t^6 log|t|).
    """
    theta = np.asarray(theta, dtype=float)
    t = _wrap_to_pi(theta)
    small = np.abs(t) < _SERIES_THRESHOLD

    out = np.empty_like(t)
    # closed form away from 0; the argument of log is bounded below there
    tb = np.where(small, np.pi, t)  # dummy value inside the series window
    one_m_cos = 1.0 - np.cos(tb)
    out = one_m_cos * np.log(2.0 * one_m_cos) + 1.5 * np.cos(tb) - 1.0

    if np.any(small):
        ts = np.where(small, t, 1.0)
        # log|t| with t = 0 mapped to 0 * log -> contributes nothing
        with np.errstate(divide="ignore"):
            lg = np.where(ts != 0.0, np.log(np.abs(ts)), 0.0)
        t2 = ts * ts
        series = 0.5 + t2 * (lg - 0.75) + t2 * t2 * (-lg / 12.0 + 1.0 / 48.0)
        out = np.where(small, series, out)
    return out if out.ndim else float(out)


def green_function_derivative(theta):
    """Evaluate G'(theta) = sin(theta) * [log(2(1 - cos theta)) - 1/2].

    Odd and 2*pi periodic, with G'(0) = 0; near 0

        G'(t) = 2 t log|t| - t/2 - (t^3 / 3) log|t| + O(t^5 log|t|).
    """
    theta = np.asarray(theta, dtype=float)
    t = _wrap_to_pi(theta)
    small = np.abs(t) < _SERIES_THRESHOLD

    tb = np.where(small, np.pi, t)
    out = np.sin(tb) * (np.log(2.0 * (1.0 - np.cos(tb))) - 0.5)

    if np.any(small):
        ts = np.where(small, t, 1.0)
        with np.errstate(divide="ignore"):
            lg = np.where(ts != 0.0, np.log(np.abs(ts)), 0.0)
        series = 2.0 * ts * lg - 0.5 * ts - (ts ** 3 / 3.0) * lg
        out = np.where(small, series, out)
    return out if out.ndim else float(out)


def kernel_basis(theta):
    """Kernel basis matrix B with columns (1, cos theta, sin theta).

    For an array of M angles returns the M x 3 matrix; for a scalar, shape (3,).
    """
    theta = np.asarray(theta, dtype=float)
    return np.stack([np.ones_like(theta), np.cos(theta), np.sin(theta)], axis=-1)


def kernel_basis_derivative(theta):
    """Derivative triple (0, -sin theta, cos theta), same shape convention."""
    theta = np.asarray(theta, dtype=float)
    return np.stack([np.zeros_like(theta), -np.sin(theta), np.cos(theta)], axis=-1)


def is_cyclically_ordered(q):
    """True iff q is a strictly increasing lift with total width < 2*pi.

    Particle configurations live on the circle with no distinguished origin;
    a valid lifted representative is strictly increasing as reals and spans
    less than a full turn, which is equivalent to distinct strict cyclic order.
    """
    q = np.asarray(q, dtype=float)
    if q.ndim != 1 or q.size < 2:
        return False
    return bool(np.all(np.diff(q) > 0.0) and (q[-1] - q[0]) < 2.0 * np.pi)


def validate_config(q, min_count: int = 4):
    """Return q as a float array after checking ParticleConfig invariants."""
    q = np.asarray(q, dtype=float)
    if q.ndim != 1:
        raise ValueError("particle configuration must be a 1-d array of angles")
    if q.size < min_count:
        raise ValueError(f"need at least {min_count} particles, got {q.size}")
    if not is_cyclically_ordered(q):
        raise ValueError("particles must be strictly increasing with width < 2*pi")
    return q
