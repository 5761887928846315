"""Lumped-element gel compliance: one vertical spring per pixel.

A rigid object whose undeformed gap to the gel is ``clearance[p]`` sinks by
a common offset ``delta``; pixel ``p`` compresses by
``min(max(0, delta - clearance[p]), gel_thickness)`` and pushes back with
``k * depth``.  The aggregate force is continuous, piecewise linear and
non-decreasing in ``delta``, so bisection always brackets the balance point.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .heightfield import DEFAULT_GEL_THICKNESS, HeightMap

GRAVITY = 9.81


def calibrated_stiffness(mass: float = 0.1, footprint_pixels: int = 30 * 30,
                         indentation: float = 1e-3, g: float = GRAVITY) -> float:
    """Per-pixel stiffness that makes ``mass`` on ``footprint_pixels`` sink ``indentation``."""
    return mass * g / (footprint_pixels * indentation)


@dataclass(frozen=True)
class SpringField:
    stiffness: float = calibrated_stiffness()
    gel_thickness: float = DEFAULT_GEL_THICKNESS
    pitch: float = 1e-3

    def __post_init__(self):
        if not np.all(np.asarray(self.stiffness) > 0):
            raise ValueError("spring stiffness must be positive")
        if not self.gel_thickness > 0:
            raise ValueError("gel_thickness must be positive")


class SaturationError(ValueError):
    """The load exceeds what fully compressed springs can support."""

    def __init__(self, load: float, max_load: float):
        super().__init__(f"normal load {load:.6g} N exceeds gel capacity {max_load:.6g} N")
        self.load = load
        self.max_load = max_load


@dataclass
class ContactSolution:
    depth: np.ndarray
    mask: np.ndarray
    offset: float
    forces: np.ndarray
    clipped: int = 0
    iterations: int = 0

    def height_map(self, pitch: float, gel_thickness: float = DEFAULT_GEL_THICKNESS) -> HeightMap:
        return HeightMap(self.depth, pitch, gel_thickness)

    @property
    def total_force(self) -> float:
        return float(self.forces.sum())


def _depths(clearance, delta, thickness):
    return np.minimum(np.maximum(delta - clearance, 0.0), thickness)


def capacity(clearance, springs: SpringField) -> float:
    finite = np.isfinite(clearance)
    k = np.broadcast_to(np.asarray(springs.stiffness, dtype=np.float64), clearance.shape)
    return float((k[finite] * springs.gel_thickness).sum())


def solve_equilibrium(clearance, normal_load: float, springs: SpringField,
                      max_iter: int = 200) -> ContactSolution:
    """Find the sink offset where the spring forces balance ``normal_load``.

    ``clearance`` may contain ``inf`` where the object is not above the gel
    and negative values where it starts out penetrating.
    """
    c = np.asarray(clearance, dtype=np.float64)
    if np.isnan(c).any() or np.isneginf(c).any():
        raise ValueError("clearance field must be finite or +inf")
    if normal_load < 0 or not np.isfinite(normal_load):
        raise ValueError("normal load must be finite and non-negative")
    t = springs.gel_thickness
    k = np.broadcast_to(np.asarray(springs.stiffness, dtype=np.float64), c.shape)
    finite = np.isfinite(c)
    zeros = np.zeros_like(c)
    if not finite.any():
        if normal_load > 0:
            raise SaturationError(normal_load, 0.0)
        return ContactSolution(zeros, zeros.astype(bool), np.inf, zeros)

    cf, kf = c[finite], k[finite]
    max_load = float((kf * t).sum())
    if normal_load > max_load:
        raise SaturationError(normal_load, max_load)

    lo = float(cf.min())
    if normal_load == 0.0:
        return ContactSolution(zeros, zeros.astype(bool), lo, zeros)

    def total(delta):
        return float((kf * _depths(cf, delta, t)).sum())

    hi = float(cf.max()) + t
    tol = 1e-9 * normal_load
    delta = hi
    it = 0
    for it in range(1, max_iter + 1):
        delta = 0.5 * (lo + hi)
        f = total(delta)
        if abs(f - normal_load) <= tol:
            break
        if f < normal_load:
            lo = delta
        else:
            hi = delta
        # once the active set is fixed the balance is linear: solve it directly
        d = delta - cf
        sliding = (d > 0) & (d < t)
        slope = float(kf[sliding].sum())
        if slope > 0:
            cand = delta + (normal_load - f) / slope
            if lo <= cand <= hi:
                fc = total(cand)
                if abs(fc - normal_load) <= tol:
                    delta = cand
                    break
    depth = zeros.copy()
    depth[finite] = _depths(cf, delta, t)
    forces = k * depth
    clipped = int(np.count_nonzero(delta - cf >= t))
    return ContactSolution(depth, depth > 0, delta, forces, clipped, it)


def contact_mask(sol: ContactSolution, threshold: float = 0.0) -> np.ndarray:
    if threshold < 0:
        raise ValueError("threshold must be non-negative")
    return sol.depth > threshold
