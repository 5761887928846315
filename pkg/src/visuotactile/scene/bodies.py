"""Convex rigid bodies: shapes, analytic inertia, quaternion helpers.

Quaternions are stored w-first, ``(w, x, y, z)``.  Capsules and cylinders
have their long axis along the body z axis; ``half_length`` is half the
length of the straight section.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

SHAPES = ("sphere", "box", "capsule", "cylinder")
CYLINDER_RIM_POINTS = 24


def quat_mul(a, b) -> np.ndarray:
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array([
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    ])


def quat_from_axis_angle(axis, angle: float) -> np.ndarray:
    axis = np.asarray(axis, dtype=np.float64)
    n = np.linalg.norm(axis)
    if n == 0:
        return np.array([1.0, 0.0, 0.0, 0.0])
    s = np.sin(0.5 * angle) / n
    return np.array([np.cos(0.5 * angle), axis[0] * s, axis[1] * s, axis[2] * s])


def quat_to_matrix(q) -> np.ndarray:
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def matrix_to_quat(m) -> np.ndarray:
    m = np.asarray(m, dtype=np.float64)
    tr = m[0, 0] + m[1, 1] + m[2, 2]
    if tr > 0:
        s = 2.0 * np.sqrt(tr + 1.0)
        q = [0.25 * s, (m[2, 1] - m[1, 2]) / s, (m[0, 2] - m[2, 0]) / s, (m[1, 0] - m[0, 1]) / s]
    elif m[0, 0] > m[1, 1] and m[0, 0] > m[2, 2]:
        s = 2.0 * np.sqrt(1.0 + m[0, 0] - m[1, 1] - m[2, 2])
        q = [(m[2, 1] - m[1, 2]) / s, 0.25 * s, (m[0, 1] + m[1, 0]) / s, (m[0, 2] + m[2, 0]) / s]
    elif m[1, 1] > m[2, 2]:
        s = 2.0 * np.sqrt(1.0 + m[1, 1] - m[0, 0] - m[2, 2])
        q = [(m[0, 2] - m[2, 0]) / s, (m[0, 1] + m[1, 0]) / s, 0.25 * s, (m[1, 2] + m[2, 1]) / s]
    else:
        s = 2.0 * np.sqrt(1.0 + m[2, 2] - m[0, 0] - m[1, 1])
        q = [(m[1, 0] - m[0, 1]) / s, (m[0, 2] + m[2, 0]) / s, (m[1, 2] + m[2, 1]) / s, 0.25 * s]
    q = np.array(q)
    q /= np.linalg.norm(q)
    return q if q[0] >= 0 else -q


def random_quaternion(rng: np.random.Generator) -> np.ndarray:
    """Uniformly distributed unit quaternion (Shoemake)."""
    u1, u2, u3 = rng.random(3)
    q = np.array([
        np.sqrt(u1) * np.cos(2 * np.pi * u3),
        np.sqrt(1 - u1) * np.sin(2 * np.pi * u2),
        np.sqrt(1 - u1) * np.cos(2 * np.pi * u2),
        np.sqrt(u1) * np.sin(2 * np.pi * u3),
    ])
    return q if q[0] >= 0 else -q


@dataclass(frozen=True)
class Shape:
    kind: str
    radius: float = 0.0
    half_extents: tuple = (0.0, 0.0, 0.0)
    half_length: float = 0.0

    def __post_init__(self):
        if self.kind not in SHAPES:
            raise ValueError(f"unknown shape {self.kind!r}")
        if self.kind == "box":
            if min(self.half_extents) <= 0:
                raise ValueError("box half extents must be positive")
        elif self.radius <= 0:
            raise ValueError(f"{self.kind} radius must be positive")
        if self.kind in ("capsule", "cylinder") and self.half_length <= 0:
            raise ValueError(f"{self.kind} half_length must be positive")

    @classmethod
    def sphere(cls, radius):
        return cls("sphere", radius=radius)

    @classmethod
    def box(cls, hx, hy, hz):
        return cls("box", half_extents=(hx, hy, hz))

    @classmethod
    def capsule(cls, radius, half_length):
        return cls("capsule", radius=radius, half_length=half_length)

    @classmethod
    def cylinder(cls, radius, half_length):
        return cls("cylinder", radius=radius, half_length=half_length)

    @property
    def bounding_radius(self) -> float:
        if self.kind == "sphere":
            return self.radius
        if self.kind == "box":
            return float(np.linalg.norm(self.half_extents))
        if self.kind == "capsule":
            return self.radius + self.half_length
        return float(np.hypot(self.radius, self.half_length))

    def inertia(self, mass: float) -> np.ndarray:
        """Principal moments (body frame) for uniform density."""
        r, h = self.radius, self.half_length
        if self.kind == "sphere":
            i = 0.4 * mass * r * r
            return np.array([i, i, i])
        if self.kind == "box":
            a, b, c = (2.0 * np.asarray(self.half_extents)) ** 2
            return mass / 12.0 * np.array([b + c, a + c, a + b])
        if self.kind == "cylinder":
            length = 2.0 * h
            perp = mass * (3.0 * r * r + length * length) / 12.0
            return np.array([perp, perp, 0.5 * mass * r * r])
        # capsule: cylinder plus two hemispherical caps, split by volume
        length = 2.0 * h
        v_cyl = np.pi * r * r * length
        v_sph = 4.0 / 3.0 * np.pi * r ** 3
        m_cyl = mass * v_cyl / (v_cyl + v_sph)
        m_sph = mass - m_cyl
        axial = m_cyl * r * r / 2.0 + m_sph * 2.0 * r * r / 5.0
        perp = (m_cyl * (length ** 2 / 12.0 + r * r / 4.0)
                + m_sph * (2.0 * r * r / 5.0 + length ** 2 / 4.0 + 3.0 * length * r / 8.0))
        return np.array([perp, perp, axial])

    def support_spheres(self) -> tuple[np.ndarray, np.ndarray]:
        """Contact candidates as (body-frame centers, radii).

        Cylinder caps are sampled as regular polygons, so a cylinder on its
        side rests on two polygon edges instead of rolling without end.
        """
        if self.kind == "sphere":
            return np.zeros((1, 3)), np.array([self.radius])
        if self.kind == "capsule":
            pts = np.array([[0.0, 0.0, self.half_length], [0.0, 0.0, -self.half_length]])
            return pts, np.full(2, self.radius)
        if self.kind == "box":
            hx, hy, hz = self.half_extents
            corners = np.array([[sx * hx, sy * hy, sz * hz]
                                for sx in (-1, 1) for sy in (-1, 1) for sz in (-1, 1)])
            return corners, np.zeros(8)
        ang = 2.0 * np.pi * np.arange(CYLINDER_RIM_POINTS) / CYLINDER_RIM_POINTS
        ring = np.stack([self.radius * np.cos(ang), self.radius * np.sin(ang)], axis=-1)
        pts = np.concatenate([
            np.column_stack([ring, np.full(len(ang), z)]) for z in (-self.half_length, self.half_length)
        ])
        return pts, np.zeros(len(pts))

    def lowest_offset(self, rot: np.ndarray, normal) -> float:
        """Distance from the body center to its lowest point along ``-normal``."""
        pts, radii = self.support_spheres()
        world = pts @ rot.T
        return float(np.max(-(world @ np.asarray(normal)) + radii))


@dataclass
class RigidBody:
    shape: Shape
    mass: float
    position: np.ndarray = field(default_factory=lambda: np.zeros(3))
    orientation: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0, 0.0]))
    velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))
    angular_velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))
    color: tuple = (0.8, 0.2, 0.2)
    friction: float = 0.5
    restitution: float = 0.2
    name: str = ""

    def __post_init__(self):
        if not self.mass > 0:
            raise ValueError("mass must be positive")
        if not 0.0 <= self.restitution < 1.0:
            raise ValueError("restitution must lie in [0, 1)")
        if self.friction < 0:
            raise ValueError("friction must be non-negative")
        self.position = np.asarray(self.position, dtype=np.float64).copy()
        self.velocity = np.asarray(self.velocity, dtype=np.float64).copy()
        self.angular_velocity = np.asarray(self.angular_velocity, dtype=np.float64).copy()
        q = np.asarray(self.orientation, dtype=np.float64).copy()
        if abs(np.linalg.norm(q) - 1.0) > 1e-9:
            raise ValueError("orientation must be a unit quaternion")
        self.orientation = q

    @property
    def inertia_body(self) -> np.ndarray:
        return self.shape.inertia(self.mass)

    def rotation(self) -> np.ndarray:
        return quat_to_matrix(self.orientation)

    def inertia_world(self) -> np.ndarray:
        r = self.rotation()
        return r @ np.diag(self.inertia_body) @ r.T

    def kinetic_energy(self) -> float:
        w = self.angular_velocity
        return float(0.5 * self.mass * self.velocity @ self.velocity
                     + 0.5 * w @ self.inertia_world() @ w)

    def copy(self, **changes) -> "RigidBody":
        b = replace(self, **changes)
        return b
