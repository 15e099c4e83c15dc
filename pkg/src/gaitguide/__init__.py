"""Simulation of a wearable that steers a walker by reshaping their strides.

Subpackages follow the signal path: ``gait_model`` (walker kinematics and
rope sensor), ``gait_sense`` (gait phase and pedometer), ``guidance``
(stride-modulation controller), ``world_sense`` (LIDAR, GPS, IMU, mapping
and localisation), ``planner`` (paths and obstacle avoidance) and
``harness`` (closed-loop scenarios, traces and the command line).
"""
from .errors import GaitGuideError
from .gait_model import advance_gait, initial_state, rope_length, simulate_walk, wrap_angle
from .gait_sense import Recognizer
from .guidance import ControllerConfig, SteeringController, steering_update
from .harness import Kind, ScenarioConfig, Walker, builtin, run_batch, run_scenario
from .planner import avoid_obstacles, follow_waypoints, plan_path

__version__ = "0.1.0"

__all__ = [
    "ControllerConfig", "GaitGuideError", "Kind", "Recognizer", "ScenarioConfig",
    "SteeringController", "Walker", "advance_gait", "avoid_obstacles", "builtin",
    "follow_waypoints", "initial_state", "plan_path", "rope_length", "run_batch",
    "run_scenario", "simulate_walk", "steering_update", "wrap_angle",
]
