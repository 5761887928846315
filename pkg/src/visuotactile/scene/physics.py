"""Semi-implicit Euler rigid-body step against a single support plane.

Contacts are solved with sequential impulses (projected Gauss-Seidel) on the
velocity level.  Candidate points that are still separated act as
speculative contacts: they only stop the approach that would carry the body
through the plane within this step, so resting and landing bodies never
build up penetration.  Coulomb friction clamps the tangential impulse of
each contact to a disc of radius ``mu * normal_impulse``.

With no external acceleration the step also enforces that mechanical energy
(kinetic plus gravitational potential) does not grow: if the solved
velocities would raise it, both linear and angular velocity are scaled back
by the largest factor that keeps it level.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .bodies import RigidBody, quat_to_matrix

GRAVITY = np.array([0.0, 0.0, -9.81])
DEFAULT_DT = 1.0 / 240.0
BAUMGARTE = 0.2
PENETRATION_SLOP = 1e-5
RESTITUTION_THRESHOLD = 0.1
SOLVER_ITERATIONS = 30


class SimulationError(RuntimeError):
    pass


@dataclass(frozen=True)
class Plane:
    normal: tuple = (0.0, 0.0, 1.0)
    point: tuple = (0.0, 0.0, 0.0)
    friction: float | None = None

    def __post_init__(self):
        n = np.asarray(self.normal, dtype=np.float64)
        if abs(np.linalg.norm(n) - 1.0) > 1e-9:
            raise ValueError("plane normal must be a unit vector")

    def contact_friction(self, body: RigidBody) -> float:
        return body.friction if self.friction is None else self.friction


@dataclass
class StepInfo:
    normal_impulse: np.ndarray
    tangent_impulse: np.ndarray
    contact_points: np.ndarray
    friction: float
    energy_scale: float = 1.0

    @property
    def total_normal_impulse(self) -> float:
        return float(self.normal_impulse.sum())

    def friction_cone_ok(self, rtol: float = 1e-12) -> bool:
        t = np.linalg.norm(self.tangent_impulse, axis=-1) if len(self.tangent_impulse) else np.zeros(0)
        return bool(np.all(t <= self.friction * self.normal_impulse * (1.0 + rtol) + 1e-300))


@njit(cache=True)
def _cross(a, b):
    return np.array([a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]])


@njit(cache=True)
def _quat_matrix(q):
    w, x, y, z = q[0], q[1], q[2], q[3]
    m = np.empty((3, 3))
    m[0, 0] = 1 - 2 * (y * y + z * z)
    m[0, 1] = 2 * (x * y - w * z)
    m[0, 2] = 2 * (x * z + w * y)
    m[1, 0] = 2 * (x * y + w * z)
    m[1, 1] = 1 - 2 * (x * x + z * z)
    m[1, 2] = 2 * (y * z - w * x)
    m[2, 0] = 2 * (x * z - w * y)
    m[2, 1] = 2 * (y * z + w * x)
    m[2, 2] = 1 - 2 * (x * x + y * y)
    return m


@njit(cache=True)
def _tangents(n):
    if abs(n[0]) > 0.57735:
        t1 = np.array([n[1], -n[0], 0.0])
    else:
        t1 = np.array([0.0, n[2], -n[1]])
    t1 = t1 / math.sqrt(t1[0] ** 2 + t1[1] ** 2 + t1[2] ** 2)
    t2 = _cross(n, t1)
    return t1, t2


@njit(cache=True)
def _step_kernel(pos, q, v, w, mass, inertia, pts, radii, n, p0, has_plane, mu, e, dt,
                 gravity, ext, iterations, guard, baumgarte, slop, rest_vel):
    rot = _quat_matrix(q)
    inv_iw = rot @ np.diag(1.0 / inertia) @ rot.T
    iw = rot @ np.diag(inertia) @ rot.T
    v0 = v.copy()
    w0 = w.copy()
    v = v + (gravity + ext) * dt
    w = w.copy()
    k = pts.shape[0]
    lam_n = np.zeros(k)
    lam_t = np.zeros((k, 2))
    rel = np.zeros((k, 3))
    active = np.zeros(k, dtype=np.bool_)
    target = np.zeros(k)
    kn = np.ones(k)
    kt1 = np.ones(k)
    kt2 = np.ones(k)
    t1, t2 = _tangents(n)
    inv_m = 1.0 / mass
    if has_plane:
        speed = math.sqrt(v @ v) + math.sqrt(w @ w) * 0.5
        margin = 0.01 + 2.0 * speed * dt
        for i in range(k):
            arm = rot @ pts[i]
            gap = n @ (pos + arm - p0) - radii[i]
            if gap > margin:
                continue
            r = arm - radii[i] * n
            rel[i] = r
            active[i] = True
            rn = _cross(r, n)
            kn[i] = inv_m + rn @ (inv_iw @ rn)
            r1 = _cross(r, t1)
            r2 = _cross(r, t2)
            kt1[i] = inv_m + r1 @ (inv_iw @ r1)
            kt2[i] = inv_m + r2 @ (inv_iw @ r2)
            vn0 = n @ (v + _cross(w, r))
            if gap > 0.0:
                if vn0 * dt < -gap and vn0 < -rest_vel:
                    target[i] = -e * vn0
                else:
                    target[i] = -gap / dt
            else:
                bias = baumgarte * max(-gap - slop, 0.0) / dt
                if vn0 < -rest_vel:
                    bias = max(bias, -e * vn0)
                target[i] = bias
        for _ in range(iterations):
            for i in range(k):
                if not active[i]:
                    continue
                r = rel[i]
                vn = n @ (v + _cross(w, r))
                new = max(lam_n[i] + (target[i] - vn) / kn[i], 0.0)
                d = new - lam_n[i]
                lam_n[i] = new
                if d != 0.0:
                    v = v + (d * inv_m) * n
                    w = w + inv_iw @ _cross(r, n * d)
                vp = v + _cross(w, r)
                l1 = lam_t[i, 0] - (t1 @ vp) / kt1[i]
                l2 = lam_t[i, 1] - (t2 @ vp) / kt2[i]
                cap = mu * lam_n[i]
                mag = math.sqrt(l1 * l1 + l2 * l2)
                if mag > cap:
                    s = cap / mag if mag > 0.0 else 0.0
                    l1 *= s
                    l2 *= s
                d1 = l1 - lam_t[i, 0]
                d2 = l2 - lam_t[i, 1]
                lam_t[i, 0] = l1
                lam_t[i, 1] = l2
                imp = d1 * t1 + d2 * t2
                v = v + imp * inv_m
                w = w + inv_iw @ _cross(r, imp)
    scale = 1.0
    if guard:
        k_old = 0.5 * mass * (v0 @ v0) + 0.5 * (w0 @ (iw @ w0))
        k_new = 0.5 * mass * (v @ v) + 0.5 * (w @ (iw @ w))
        p_new = -mass * (gravity @ v) * dt
        if k_new + p_new > k_old:
            if k_new > 0.0:
                disc = p_new * p_new + 4.0 * k_new * k_old
                scale = (-p_new + math.sqrt(disc)) / (2.0 * k_new)
            else:
                scale = k_old / p_new if p_new > 0.0 else 1.0
            scale = min(max(scale * (1.0 - 1e-12), 0.0), 1.0)
            v = v * scale
            w = w * scale
    pos = pos + v * dt
    theta = w * dt
    angle = math.sqrt(theta @ theta)
    if angle > 0.0:
        half = 0.5 * angle
        sh = math.sin(half) / angle
        dq = np.array([math.cos(half), theta[0] * sh, theta[1] * sh, theta[2] * sh])
        qw, qx, qy, qz = q[0], q[1], q[2], q[3]
        aw, ax, ay, az = dq[0], dq[1], dq[2], dq[3]
        q = np.array([
            aw * qw - ax * qx - ay * qy - az * qz,
            aw * qx + ax * qw + ay * qz - az * qy,
            aw * qy - ax * qz + ay * qw + az * qx,
            aw * qz + ax * qy - ay * qx + az * qw,
        ])
    else:
        q = q.copy()
    q = q / math.sqrt(q @ q)
    contacts = np.zeros((k, 3))
    for i in range(k):
        contacts[i] = pos - v * dt + rel[i]
    return pos, q, v, w, lam_n, lam_t, contacts, active, scale


def step(body: RigidBody, plane: Plane | None, dt: float = DEFAULT_DT, external_accel=None,
         gravity=GRAVITY, iterations: int = SOLVER_ITERATIONS,
         energy_guard: bool | None = None) -> tuple[RigidBody, StepInfo]:
    """Advance ``body`` by one step of length ``dt``.

    The energy guard is on by default whenever ``external_accel`` is zero.
    Raises ``SimulationError`` if the state turns non-finite.
    """
    if not 0.0 < dt <= 0.01:
        raise ValueError("dt must lie in (0, 0.01]")
    ext = np.zeros(3) if external_accel is None else np.asarray(external_accel, dtype=np.float64)
    if energy_guard is None:
        energy_guard = not np.any(ext)
    pts, radii = body.shape.support_spheres()
    if plane is None:
        n, p0, mu = np.array([0.0, 0.0, 1.0]), np.zeros(3), 0.0
    else:
        n = np.asarray(plane.normal, dtype=np.float64)
        p0 = np.asarray(plane.point, dtype=np.float64)
        mu = plane.contact_friction(body)
    pos, q, v, w, lam_n, lam_t, contacts, active, scale = _step_kernel(
        body.position, body.orientation, body.velocity, body.angular_velocity,
        float(body.mass), body.inertia_body, pts, radii, n, p0, plane is not None,
        float(mu), float(body.restitution), float(dt), np.asarray(gravity, dtype=np.float64),
        ext, int(iterations), bool(energy_guard), BAUMGARTE, PENETRATION_SLOP,
        RESTITUTION_THRESHOLD)
    state = np.concatenate([pos, q, v, w])
    if not np.all(np.isfinite(state)):
        raise SimulationError(f"non-finite state after step: pos={pos}, v={v}, w={w}")
    new = body.copy(position=pos, orientation=q, velocity=v, angular_velocity=w)
    info = StepInfo(lam_n[active], lam_t[active], contacts[active], float(mu), float(scale))
    return new, info


def mechanical_energy(body: RigidBody, gravity=GRAVITY, reference=(0.0, 0.0, 0.0)) -> float:
    """Kinetic energy plus gravitational potential relative to ``reference``."""
    g = np.asarray(gravity, dtype=np.float64)
    potential = -body.mass * g @ (body.position - np.asarray(reference, dtype=np.float64))
    return body.kinetic_energy() + float(potential)


def incline_outcome(mu: float, theta: float) -> str:
    """Coulomb prediction for a block at rest on an incline; ``mu == tan(theta)`` sticks."""
    if mu < 0 or not 0.0 <= theta < np.pi / 2:
        raise ValueError("need mu >= 0 and theta in [0, pi/2)")
    return "stick" if mu >= np.tan(theta) else "slide"


def detect_rest(history, lin_thresh: float = 1e-3, ang_thresh: float = 1e-2,
                window: int = 30) -> bool:
    """True iff the last ``window`` entries of ``(linear, angular)`` speeds are all below threshold."""
    if window < 1:
        raise ValueError("window must be >= 1")
    h = np.asarray(history, dtype=np.float64).reshape(-1, 2)
    if len(h) < window:
        return False
    tail = h[-window:]
    return bool(np.all(tail[:, 0] < lin_thresh) and np.all(tail[:, 1] < ang_thresh))


def body_rotation(body: RigidBody) -> np.ndarray:
    return quat_to_matrix(body.orientation)
