import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from visuotactile.scene.bodies import RigidBody, Shape, quat_from_axis_angle, random_quaternion
from visuotactile.scene.physics import (DEFAULT_DT, GRAVITY, Plane, detect_rest, incline_outcome,
                                        mechanical_energy, step)

PLANE = Plane()


def test_sphere_at_rest_stays():
    body = RigidBody(Shape.sphere(0.01), 0.1, position=[0.0, 0.0, 0.01])
    b = body
    for _ in range(240):
        b, info = step(b, PLANE)
    assert np.allclose(b.position, body.position, atol=1e-9)
    assert np.allclose(b.orientation, body.orientation, atol=1e-9)


def test_ballistic_matches_closed_form():
    p0 = np.array([0.1, -0.2, 1.0])
    v0 = np.array([0.3, 0.1, 2.0])
    b = RigidBody(Shape.box(0.01, 0.02, 0.03), 0.2, position=p0, velocity=v0)
    n = 100
    for _ in range(n):
        b, _ = step(b, None)
    dt = DEFAULT_DT
    # semi-implicit Euler: velocity first, then position with the new velocity
    expected = p0 + n * v0 * dt + GRAVITY * dt * dt * n * (n + 1) / 2
    assert np.allclose(b.position, expected, atol=1e-12)
    assert np.allclose(b.velocity, v0 + n * GRAVITY * dt, atol=1e-12)


def test_inelastic_drop_has_no_rebound():
    b = RigidBody(Shape.sphere(0.01), 0.1, position=[0, 0, 0.05], restitution=0.0)
    touched = False
    for _ in range(400):
        b, info = step(b, PLANE)
        if len(info.normal_impulse) and info.total_normal_impulse > 0:
            touched = True
        if touched:
            assert b.velocity[2] <= 1e-9
    assert touched
    assert abs(b.velocity[2]) < 1e-9


def test_restitution_bounces():
    b = RigidBody(Shape.sphere(0.01), 0.1, position=[0, 0, 0.05], restitution=0.5)
    vmax = 0.0
    for _ in range(200):
        b, _ = step(b, PLANE)
        vmax = max(vmax, b.velocity[2])
    # impact speed is about sqrt(2 g h) ~ 0.89 m/s
    assert 0.3 < vmax < 0.5


def test_rejects_bad_dt():
    b = RigidBody(Shape.sphere(0.01), 0.1)
    with pytest.raises(ValueError):
        step(b, PLANE, dt=0.02)


def test_quaternion_norm_long_run():
    b = RigidBody(Shape.box(0.01, 0.02, 0.03), 0.1, angular_velocity=[3.0, -2.0, 5.0])
    worst = 0.0
    for _ in range(100_000):
        b, _ = step(b, None, gravity=np.zeros(3))
        worst = max(worst, abs(np.linalg.norm(b.orientation) - 1.0))
    assert worst < 1e-9


@settings(max_examples=12)
@given(st.sampled_from(["sphere", "box", "cylinder", "capsule"]), st.integers(0, 1000),
       st.floats(0.0, 0.8), st.floats(0.1, 1.2))
def test_energy_never_grows(kind, seed, e, mu):
    shape = {"sphere": Shape.sphere(0.015), "box": Shape.box(0.02, 0.015, 0.01),
             "cylinder": Shape.cylinder(0.015, 0.02), "capsule": Shape.capsule(0.01, 0.02)}[kind]
    rng = np.random.default_rng(seed)
    b = RigidBody(shape, 0.1, position=[0, 0, 0.06], orientation=random_quaternion(rng),
                  angular_velocity=rng.normal(0, 3, 3), velocity=[rng.normal(0, 0.2), 0, 0],
                  restitution=e, friction=mu)
    energy = mechanical_energy(b)
    for _ in range(300):
        b, info = step(b, PLANE)
        assert info.friction_cone_ok()
        new = mechanical_energy(b)
        assert new <= energy + 1e-9 * abs(energy) + 1e-15
        energy = new


def test_incline_outcome_examples():
    theta = np.radians(20)
    assert incline_outcome(0.6, theta) == "stick"
    assert incline_outcome(0.3, theta) == "slide"
    assert incline_outcome(np.tan(theta), theta) == "stick"
    with pytest.raises(ValueError):
        incline_outcome(-0.1, theta)


def test_detect_rest_examples():
    assert detect_rest(np.zeros((30, 2)))
    hist = np.zeros((30, 2))
    hist[10, 0] = 1.0
    assert not detect_rest(hist)
    assert not detect_rest(np.zeros((29, 2)), window=30)


def test_detect_rest_geometric_decay():
    window, thresh = 30, 1e-3
    speeds = 0.1 * 0.8 ** np.arange(200)
    first_below = int(np.argmax(speeds < thresh))
    # the frame where speed first drops below threshold sits exactly `window` frames back
    current = first_below + window
    hist = np.column_stack([speeds, np.zeros_like(speeds)])
    assert detect_rest(hist[:current], thresh, 1e-2, window)
    assert not detect_rest(hist[:current - 1], thresh, 1e-2, window)


def test_tilted_plane_block_sticks():
    theta = np.radians(20)
    n = np.array([np.sin(theta), 0.0, np.cos(theta)])
    plane = Plane(tuple(n))
    rot_q = quat_from_axis_angle([0, 1, 0], theta)
    b = RigidBody(Shape.box(0.02, 0.02, 0.008), 0.1, position=n * 0.008, orientation=rot_q, friction=0.6)
    start = b.position.copy()
    for _ in range(480):
        b, _ = step(b, plane)
    assert np.linalg.norm(b.position - start) < 1e-4
