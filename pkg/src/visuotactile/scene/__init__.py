from .bodies import RigidBody, Shape
from .physics import Plane, detect_rest, incline_outcome, mechanical_energy, step
from .scenario import OBJECTS, Scenario, ScenarioConfig, run_episode, simulate, spawn
from .sensor import SensorGeometry, render_visual
