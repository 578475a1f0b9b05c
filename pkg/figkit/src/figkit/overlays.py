"""Closed-form early-time curves drawn over simulation data.

Re-coded here on purpose: the figure tool consumes the simulator only
through its CSV files, so these few lines are duplicated rather than
imported across the package boundary.
"""

from __future__ import annotations

import numpy as np


def filled_entropy(t: np.ndarray) -> np.ndarray:
    """Junction entanglement entropy of a filled start, to quadratic order."""
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    nz = t > 0
    out[nz] = -0.5 * t[nz] ** 2 * np.log(0.5 * t[nz]) + 0.25 * t[nz] ** 2
    return out


def filled_particles(t: np.ndarray) -> np.ndarray:
    """Released-particle mean (and variance) of a filled start: t^2/4."""
    return np.asarray(t, dtype=float) ** 2 / 4.0


def high_entropy_particles(t: np.ndarray) -> np.ndarray:
    """Released-particle mean (and variance) of a scrambled start: t^2/8."""
    return np.asarray(t, dtype=float) ** 2 / 8.0


OVERLAYS = {
    "filled_entropy": (filled_entropy, "-(t^2/2) ln(t/2) + t^2/4"),
    "filled_particles": (filled_particles, "t^2/4"),
    "high_entropy_particles": (high_entropy_particles, "t^2/8"),
}
