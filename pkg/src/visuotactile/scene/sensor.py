"""Sensor geometry, ray casting of primitives and per-frame image synthesis.

The gel is a square patch lying in the support plane.  Pixel ``(row, col)``
sits at ``origin + x * u + y * w`` with ``x`` along columns and ``y`` along
rows; ``n = u x w`` points out of the gel toward the objects.  Both image
channels are formed by casting the line through each pixel along ``n``:
the entry distance is the object's clearance above the gel.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..compliance import SaturationError, SpringField, calibrated_stiffness, solve_equilibrium
from ..heightfield import DEFAULT_GEL_THICKNESS, HeightMap, normals_from_covariance
from ..render import DarkeningParams, PhongParams, flat_image, render_tactile
from .bodies import RigidBody, matrix_to_quat, quat_to_matrix
from .physics import Plane


@dataclass(frozen=True)
class SensorGeometry:
    size: float = 0.12
    resolution: int = 64
    tilt: float = 0.0
    gel_thickness: float = DEFAULT_GEL_THICKNESS
    stiffness: float = field(default_factory=calibrated_stiffness)
    stiffness_pitch: float = 0.12 / 64  # pixel pitch at which ``stiffness`` holds
    phong: PhongParams = field(default_factory=PhongParams)
    darkening: DarkeningParams = field(default_factory=DarkeningParams)
    background: tuple = (0.0, 0.0, 0.0)
    visual_range: float = 0.15
    normal_radius: int = 2
    contact_threshold: float = 1e-6

    @property
    def pitch(self) -> float:
        return self.size / self.resolution

    @property
    def half_size(self) -> float:
        return 0.5 * self.size

    @property
    def frame(self) -> np.ndarray:
        """Columns ``u, w, n`` of the sensor frame in world coordinates.

        The gel is tilted about the world y axis; ``u`` points downhill.
        """
        c, s = np.cos(self.tilt), np.sin(self.tilt)
        u = np.array([c, 0.0, -s])
        w = np.array([0.0, 1.0, 0.0])
        return np.column_stack([u, w, np.cross(u, w)])

    @property
    def normal(self) -> np.ndarray:
        return self.frame[:, 2]

    @property
    def plane(self) -> Plane:
        return Plane(tuple(self.normal))

    @property
    def springs(self) -> SpringField:
        """Per-pixel springs; stiffness scales with pixel area so the gel's areal stiffness is fixed."""
        k = self.stiffness * (self.pitch / self.stiffness_pitch) ** 2
        return SpringField(k, self.gel_thickness, self.pitch)

    def pixel_coords(self) -> tuple[np.ndarray, np.ndarray]:
        idx = (np.arange(self.resolution) - (self.resolution - 1) / 2.0) * self.pitch
        y, x = np.meshgrid(idx, idx, indexing="ij")
        return x, y

    def pixel_points(self) -> np.ndarray:
        x, y = self.pixel_coords()
        f = self.frame
        return x[..., None] * f[:, 0] + y[..., None] * f[:, 1]

    def to_local(self, points) -> np.ndarray:
        return np.asarray(points) @ self.frame

    def local_pose(self, body: RigidBody) -> np.ndarray:
        """Position (sensor frame) and w-first quaternion relative to the sensor frame."""
        pos = self.to_local(body.position)
        q = matrix_to_quat(self.frame.T @ quat_to_matrix(body.orientation))
        return np.concatenate([pos, q])

    def footprint_off(self, body: RigidBody) -> bool:
        """True once no part of the body can project onto the gel."""
        a, b, _ = self.to_local(body.position)
        reach = self.half_size + body.shape.bounding_radius
        return bool(abs(a) > reach or abs(b) > reach)


def _slab(o, d, lo, hi):
    """Entry/exit parameters of the line ``o + t d`` through ``lo <= x <= hi``."""
    with np.errstate(divide="ignore", invalid="ignore"):
        if abs(d) < 1e-15:
            inside = (o >= lo) & (o <= hi)
            return np.where(inside, -np.inf, np.inf), np.where(inside, np.inf, -np.inf)
        t1 = (lo - o) / d
        t2 = (hi - o) / d
    return np.minimum(t1, t2), np.maximum(t1, t2)


def _sphere_entry(o, d, center, r):
    oc = center - o
    b = oc @ d
    disc = b * b - (oc * oc).sum(-1) + r * r
    with np.errstate(invalid="ignore"):
        t = b - np.sqrt(disc)
    return np.where(disc >= 0, t, np.inf)


def _cylinder_interval(o, d, r, h):
    a = d[0] ** 2 + d[1] ** 2
    if a < 1e-15:
        inside = o[:, 0] ** 2 + o[:, 1] ** 2 <= r * r
        t0 = np.where(inside, -np.inf, np.inf)
        t1 = np.where(inside, np.inf, -np.inf)
    else:
        b = o[:, 0] * d[0] + o[:, 1] * d[1]
        c = o[:, 0] ** 2 + o[:, 1] ** 2 - r * r
        disc = b * b - a * c
        root = np.sqrt(np.maximum(disc, 0.0))
        t0 = np.where(disc >= 0, (-b - root) / a, np.inf)
        t1 = np.where(disc >= 0, (-b + root) / a, -np.inf)
    z0, z1 = _slab(o[:, 2], d[2], -h, h)
    return np.maximum(t0, z0), np.minimum(t1, z1)


def line_entry(body: RigidBody, origins: np.ndarray, direction) -> np.ndarray:
    """Parameter where ``origins + t * direction`` first enters the body (inf on miss).

    Negative values mean the origin already lies inside the body.
    """
    shape = body.shape
    pts = np.asarray(origins, dtype=np.float64).reshape(-1, 3)
    d = np.asarray(direction, dtype=np.float64)
    if shape.kind == "sphere":
        return _sphere_entry(pts, d, body.position, shape.radius)
    rot = body.rotation()
    o = (pts - body.position) @ rot
    db = rot.T @ d
    if shape.kind == "box":
        enter = np.full(len(o), -np.inf)
        leave = np.full(len(o), np.inf)
        for i, hx in enumerate(shape.half_extents):
            a, b = _slab(o[:, i], db[i], -hx, hx)
            enter = np.maximum(enter, a)
            leave = np.minimum(leave, b)
        return np.where(enter <= leave, enter, np.inf)
    r, h = shape.radius, shape.half_length
    t0, t1 = _cylinder_interval(o, db, r, h)
    entry = np.where(t0 <= t1, t0, np.inf)
    if shape.kind == "capsule":
        for z in (-h, h):
            entry = np.minimum(entry, _sphere_entry(o, db, np.array([0.0, 0.0, z]), r))
    return entry


def clearance_field(body: RigidBody | None, sensor: SensorGeometry) -> np.ndarray:
    if body is None:
        return np.full((sensor.resolution, sensor.resolution), np.inf)
    t = line_entry(body, sensor.pixel_points().reshape(-1, 3), sensor.normal)
    return t.reshape(sensor.resolution, sensor.resolution)


def render_visual(body: RigidBody | None, sensor: SensorGeometry, background=None,
                  clearance: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    """View through the transparent gel: ``(image, object_mask)``.

    Object pixels take the body color scaled by ``1 - clearance / visual_range``,
    so surfaces touching the gel appear at full brightness.
    """
    bg = np.asarray(sensor.background if background is None else background, dtype=np.float64)
    n = sensor.resolution
    img = np.broadcast_to(bg, (n, n, 3)).copy()
    if body is None:
        return img, np.zeros((n, n), dtype=bool)
    c = clearance_field(body, sensor) if clearance is None else clearance
    bright = 1.0 - np.maximum(c, 0.0) / sensor.visual_range
    mask = np.isfinite(c) & (bright > 0)
    img[mask] = np.asarray(body.color, dtype=np.float64) * bright[mask][:, None]
    return img, mask


@dataclass
class TactileFrame:
    image: np.ndarray
    depth: np.ndarray
    contact: np.ndarray
    load: float
    saturated: bool = False
    clipped: int = 0


def render_tactile_frame(body: RigidBody | None, load: float, sensor: SensorGeometry,
                         clearance: np.ndarray | None = None) -> TactileFrame:
    """Compliance solve for ``load`` followed by Phong shading of the indentation."""
    n = sensor.resolution
    if clearance is None:
        clearance = clearance_field(body, sensor)
    springs = sensor.springs
    saturated = False
    if body is None or load <= 0 or not np.isfinite(clearance).any():
        depth = np.zeros((n, n))
        clipped = 0
    else:
        try:
            sol = solve_equilibrium(clearance, load, springs)
        except SaturationError as err:
            saturated = True
            sol = solve_equilibrium(clearance, err.max_load * (1.0 - 1e-12), springs)
        depth = sol.depth
        clipped = sol.clipped
    contact = depth > sensor.contact_threshold
    if not contact.any():
        return TactileFrame(flat_image((n, n), sensor.phong), depth, contact, load, saturated, clipped)
    h = HeightMap(depth, sensor.pitch, sensor.gel_thickness)
    img = render_tactile(h, normals_from_covariance(h, sensor.normal_radius), sensor.phong,
                         sensor.darkening)
    return TactileFrame(img, depth, contact, load, saturated, clipped)


__all__ = [
    "SensorGeometry", "line_entry", "clearance_field", "render_visual", "render_tactile_frame",
    "TactileFrame",
]
