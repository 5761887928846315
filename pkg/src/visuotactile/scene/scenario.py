"""The three data-collection scenarios and the episode runner."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field, replace

import numpy as np

from ..dataset.records import EpisodeRecord, RestState
from .bodies import RigidBody, Shape, matrix_to_quat, quat_from_axis_angle, quat_to_matrix, random_quaternion
from .physics import DEFAULT_DT, detect_rest, mechanical_energy, step
from .sensor import SensorGeometry, clearance_field, render_tactile_frame, render_visual

KINDS = ("freefall", "incline", "perturb")
MAX_INCLINE = np.pi / 3
DEFAULT_EPISODES = {"freefall": 200, "incline": 300, "perturb": 300}
# a sphere rolls on any slope, so the incline set keeps to flat-bottomed objects
DEFAULT_OBJECTS = {
    "freefall": ("box", "sphere", "can"),
    "incline": ("box", "slab", "can"),
    "perturb": ("bottle", "box", "can"),
}


@dataclass(frozen=True)
class ObjectSpec:
    shape: Shape
    mass: float
    color: tuple
    friction: float = 0.5
    restitution: float = 0.2
    resting: str = "flat"  # orientation used when an episode starts in contact


OBJECTS = {
    "box": ObjectSpec(Shape.box(0.02, 0.015, 0.01), 0.1, (0.9, 0.15, 0.15)),
    "slab": ObjectSpec(Shape.box(0.02, 0.02, 0.008), 0.1, (0.9, 0.5, 0.1)),
    "sphere": ObjectSpec(Shape.sphere(0.015), 0.1, (0.15, 0.35, 0.95)),
    "can": ObjectSpec(Shape.cylinder(0.015, 0.02), 0.1, (0.15, 0.8, 0.3)),
    "bottle": ObjectSpec(Shape.cylinder(0.02, 0.05), 0.12, (0.95, 0.85, 0.2)),
    "capsule": ObjectSpec(Shape.capsule(0.01, 0.02), 0.08, (0.8, 0.3, 0.8), resting="side"),
}


@dataclass(frozen=True)
class Scenario:
    kind: str
    theta: float = 0.0
    accel: float = 0.0
    accel_angle: float = 0.0
    gravity: float = 9.81
    seed: int = 0
    burst: float = 0.1

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown scenario kind {self.kind!r}")
        if not 0.0 <= self.theta <= MAX_INCLINE:
            raise ValueError("incline angle must lie in [0, pi/3]")
        if self.accel < 0:
            raise ValueError("perturbation magnitude must be non-negative")

    @property
    def condition(self) -> np.ndarray | None:
        if self.kind != "perturb":
            return None
        return np.array([self.accel, np.cos(self.accel_angle), np.sin(self.accel_angle)])


@dataclass
class ScenarioConfig:
    kind: str = "freefall"
    objects: tuple | None = None  # None: the per-kind default set
    episodes: int | None = None  # None: the per-kind default count
    seed: int = 0
    spawn_height: tuple = (0.02, 0.06)
    spawn_offset: float = 0.02
    lateral_speed: tuple = (0.0, 0.0)
    theta_range: tuple = (0.0, 0.6)
    friction_range: tuple = (0.2, 0.9)
    restitution: float = 0.2
    accel_range: tuple = (1.0, 8.0)
    burst: float = 0.1
    gravity: float = 9.81
    dt: float = DEFAULT_DT
    frame_every: int = 8
    max_frames: int = 150
    lin_thresh: float = 1e-3
    ang_thresh: float = 1e-2
    rest_window: int = 30
    stick_tolerance: float = 5e-3
    grid_mu: tuple | None = None
    grid_theta: tuple | None = None
    sensor: SensorGeometry = field(default_factory=SensorGeometry)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown scenario kind {self.kind!r}")
        if self.objects is not None and not self.objects:
            raise ValueError("objects must not be empty")
        for name in self.object_names:
            if name not in OBJECTS:
                raise ValueError(f"unknown object {name!r}")
        lo, hi = self.accel_range
        if not 0 <= lo <= hi:
            raise ValueError("accel_range must satisfy 0 <= lo <= hi")
        if not 0 <= self.theta_range[0] <= self.theta_range[1] <= MAX_INCLINE:
            raise ValueError("theta_range must lie within [0, pi/3]")

    def grid(self) -> list[tuple[float, float]] | None:
        """(mu, theta) pairs of an incline sweep, mu-major."""
        if self.grid_mu is None or self.grid_theta is None:
            return None
        mus = np.linspace(*self.grid_mu[:2], int(self.grid_mu[2]))
        thetas = np.linspace(*self.grid_theta[:2], int(self.grid_theta[2]))
        return [(float(m), float(t)) for m in mus for t in thetas]

    @property
    def object_names(self) -> tuple:
        return DEFAULT_OBJECTS[self.kind] if self.objects is None else tuple(self.objects)

    @property
    def n_episodes(self) -> int:
        g = self.grid()
        if g is not None:
            return len(g)
        return DEFAULT_EPISODES[self.kind] if self.episodes is None else self.episodes


def _resting_rotation(spec: ObjectSpec) -> np.ndarray:
    if spec.resting == "side":
        return quat_to_matrix(quat_from_axis_angle([1.0, 0.0, 0.0], np.pi / 2))
    return np.eye(3)


def _place(spec: ObjectSpec, sensor: SensorGeometry, rot: np.ndarray, local_xy, lift: float,
           friction: float, restitution: float, name: str) -> RigidBody:
    frame = sensor.frame
    n = frame[:, 2]
    body = RigidBody(spec.shape, spec.mass, orientation=matrix_to_quat(rot), color=spec.color,
                     friction=friction, restitution=restitution, name=name)
    drop = spec.shape.lowest_offset(rot, n) + lift
    body.position = frame[:, 0] * local_xy[0] + frame[:, 1] * local_xy[1] + n * drop
    return body


def spawn(cfg: ScenarioConfig, index: int) -> tuple[Scenario, RigidBody, SensorGeometry]:
    """Deterministically draw episode ``index`` from the configuration."""
    rng = np.random.default_rng([cfg.seed, index])
    seed = int(rng.integers(2 ** 31))
    names = cfg.object_names
    name = names[int(rng.integers(len(names)))]
    spec = OBJECTS[name]
    grid = cfg.grid()
    if cfg.kind == "freefall":
        sensor = replace(cfg.sensor, tilt=0.0)
        rot = quat_to_matrix(random_quaternion(rng))
        xy = rng.uniform(-cfg.spawn_offset, cfg.spawn_offset, 2)
        lift = rng.uniform(*cfg.spawn_height)
        body = _place(spec, sensor, rot, xy, lift, spec.friction, cfg.restitution, name)
        speed = rng.uniform(*cfg.lateral_speed)
        ang = rng.uniform(0.0, 2.0 * np.pi)
        body.velocity = speed * np.array([np.cos(ang), np.sin(ang), 0.0])
        scenario = Scenario("freefall", gravity=cfg.gravity, seed=seed)
    elif cfg.kind == "incline":
        if grid is not None:
            mu, theta = grid[index]
        else:
            mu = rng.uniform(*cfg.friction_range)
            theta = rng.uniform(*cfg.theta_range)
        sensor = replace(cfg.sensor, tilt=theta)
        yaw = quat_to_matrix(quat_from_axis_angle([0.0, 0.0, 1.0], rng.uniform(0, 2 * np.pi)))
        rot = sensor.frame @ yaw @ _resting_rotation(spec)
        xy = (-cfg.spawn_offset, rng.uniform(-0.5, 0.5) * cfg.spawn_offset)
        body = _place(spec, sensor, rot, xy, 0.0, mu, cfg.restitution, name)
        scenario = Scenario("incline", theta=theta, gravity=cfg.gravity, seed=seed)
    else:
        sensor = replace(cfg.sensor, tilt=0.0)
        yaw = quat_to_matrix(quat_from_axis_angle([0.0, 0.0, 1.0], rng.uniform(0, 2 * np.pi)))
        rot = yaw @ _resting_rotation(spec)
        xy = rng.uniform(-0.25, 0.25, 2) * cfg.spawn_offset
        body = _place(spec, sensor, rot, xy, 0.0, spec.friction, cfg.restitution, name)
        scenario = Scenario("perturb", accel=rng.uniform(*cfg.accel_range),
                            accel_angle=rng.uniform(0.0, 2.0 * np.pi), gravity=cfg.gravity,
                            seed=seed, burst=cfg.burst)
    return scenario, body, sensor


@dataclass
class Trajectory:
    bodies: list
    loads: list
    rest: RestState
    steps: int
    energies: np.ndarray | None = None
    cone_ok: bool = True
    energy_scaled_steps: int = 0


def _sensor_impulse(info, sensor: SensorGeometry) -> float:
    if not len(info.normal_impulse):
        return 0.0
    local = sensor.to_local(info.contact_points)
    inside = (np.abs(local[:, 0]) <= sensor.half_size) & (np.abs(local[:, 1]) <= sensor.half_size)
    return float(info.normal_impulse[inside].sum())


def simulate(scenario: Scenario, body: RigidBody, sensor: SensorGeometry, dt: float = DEFAULT_DT,
             max_frames: int = 150, frame_every: int = 8, lin_thresh: float = 1e-3,
             ang_thresh: float = 1e-2, rest_window: int = 30,
             track_energy: bool = False) -> Trajectory:
    """Integrate one episode, keeping the body state and gel load at each recorded frame.

    Rest is checked on every physics step once any perturbation burst is over.
    """
    plane = sensor.plane
    gravity = np.array([0.0, 0.0, -scenario.gravity])
    burst_steps = 0
    accel = np.zeros(3)
    if scenario.kind == "perturb":
        burst_steps = int(round(scenario.burst / dt))
        f = sensor.frame
        direction = np.cos(scenario.accel_angle) * f[:, 0] + np.sin(scenario.accel_angle) * f[:, 1]
        # the sensor is shoved, so the body feels the opposite pseudo-acceleration
        accel = -scenario.accel * direction

    _, probe = step(body, plane, dt, accel if burst_steps else None, gravity)
    bodies, loads = [body], [_sensor_impulse(probe, sensor) / dt]
    energies = [mechanical_energy(body, gravity)] if track_energy else None
    history = deque(maxlen=rest_window)
    impulse, since = 0.0, 0
    cone_ok, scaled = True, 0
    resting = off = False
    max_steps = max_frames * frame_every
    s = 0
    for s in range(1, max_steps + 1):
        ext = accel if s <= burst_steps else None
        body, info = step(body, plane, dt, ext, gravity)
        cone_ok &= info.friction_cone_ok()
        scaled += info.energy_scale < 1.0
        impulse += _sensor_impulse(info, sensor)
        since += 1
        if track_energy:
            energies.append(mechanical_energy(body, gravity))
        if s > burst_steps:
            history.append((np.linalg.norm(body.velocity), np.linalg.norm(body.angular_velocity)))
            resting = detect_rest(history, lin_thresh, ang_thresh, rest_window)
        off = sensor.footprint_off(body)
        if s % frame_every == 0 or resting or off or s == max_steps:
            bodies.append(body)
            loads.append(impulse / (since * dt))
            impulse, since = 0.0, 0
        if resting or off:
            break
    rest = RestState(
        resting=bool(resting),
        frames_to_rest=len(bodies) - 1 if resting else -1,
        final_pose=sensor.local_pose(body),
        fell_off_sensor=bool(off),
        unresolved=not (resting or off),
    )
    return Trajectory(bodies, loads, rest, s,
                      np.asarray(energies) if track_energy else None, cone_ok, scaled)


def outcome(traj: Trajectory, scenario: Scenario, stick_tolerance: float = 5e-3) -> str:
    if scenario.kind == "incline":
        moved = np.linalg.norm(traj.bodies[-1].position - traj.bodies[0].position)
        return "stick" if traj.rest.resting and moved < stick_tolerance else "slide"
    if traj.rest.fell_off_sensor:
        return "fell_off"
    return "rest" if traj.rest.resting else "unresolved"


def run_episode(scenario: Scenario, body: RigidBody, sensor: SensorGeometry,
                dt: float = DEFAULT_DT, max_frames: int = 150, frame_every: int = 8,
                lin_thresh: float = 1e-3, ang_thresh: float = 1e-2, rest_window: int = 30,
                meta: dict | None = None, stick_tolerance: float = 5e-3) -> EpisodeRecord:
    """Simulate and render one episode: visual, tactile, pose and masks per frame."""
    traj = simulate(scenario, body, sensor, dt, max_frames, frame_every, lin_thresh,
                    ang_thresh, rest_window)
    n = sensor.resolution
    f = len(traj.bodies)
    visual = np.empty((f, n, n, 3), dtype=np.float32)
    tactile = np.empty((f, n, n, 3), dtype=np.float32)
    obj_mask = np.zeros((f, n, n), dtype=bool)
    con_mask = np.zeros((f, n, n), dtype=bool)
    pose = np.empty((f, 7), dtype=np.float32)
    saturated = clipped = 0
    for i, (b, load) in enumerate(zip(traj.bodies, traj.loads)):
        clearance = clearance_field(b, sensor)
        visual[i], obj_mask[i] = render_visual(b, sensor, clearance=clearance)
        tf = render_tactile_frame(b, load, sensor, clearance=clearance)
        tactile[i], con_mask[i] = tf.image, tf.contact
        saturated += tf.saturated
        clipped += tf.clipped
        pose[i] = sensor.local_pose(b)
    info = dict(meta or {})
    info.update({
        "scenario": scenario.kind,
        "object": body.name,
        "seed": scenario.seed,
        "theta": scenario.theta,
        "friction": body.friction,
        "restitution": body.restitution,
        "dt": dt,
        "frame_every": frame_every,
        "resolution": n,
        "sensor_size": sensor.size,
        "outcome": outcome(traj, scenario, stick_tolerance),
        "steps": traj.steps,
        "saturated_frames": saturated,
        "clipped_pixels": clipped,
    })
    if scenario.kind == "perturb":
        info["accel"] = scenario.accel
        info["accel_angle"] = scenario.accel_angle
    return EpisodeRecord(info, visual, tactile, pose, con_mask, obj_mask, con_mask.any(axis=(1, 2)),
                         traj.rest, condition=scenario.condition)


def episode_from_config(cfg: ScenarioConfig, index: int) -> EpisodeRecord:
    scenario, body, sensor = spawn(cfg, index)
    return run_episode(scenario, body, sensor, cfg.dt, cfg.max_frames, cfg.frame_every,
                       cfg.lin_thresh, cfg.ang_thresh, cfg.rest_window,
                       meta={"index": index, "config_seed": cfg.seed},
                       stick_tolerance=cfg.stick_tolerance)
