"""Planar benchmark environments, velocity observers and simple policies."""
from .base import GOAL_TOLERANCE, VIOLATION_TOL, EnvFault, PointEnv, episode_success
from .circle_track import TRACKING_TOL, EnvCircleTrack
from .double_integrator import EnvDoubleIntegrator
from .dynamic import SPEED_LEVELS, Env2DDynamic, Motion
from .observers import ObserverMode, VelocityObserver, observe_velocity
from .policies import AttractorPolicy, ConstantPolicy, Policy, UniformRandomPolicy, attractor_policy
from .scenarios import HEADING_TOL_DEG, CrossingRun, crossing_layout, run_crossing
from .static import Env2DStatic

__all__ = [
    "GOAL_TOLERANCE",
    "VIOLATION_TOL",
    "TRACKING_TOL",
    "EnvFault",
    "PointEnv",
    "episode_success",
    "EnvCircleTrack",
    "EnvDoubleIntegrator",
    "SPEED_LEVELS",
    "Env2DDynamic",
    "Motion",
    "ObserverMode",
    "VelocityObserver",
    "observe_velocity",
    "AttractorPolicy",
    "ConstantPolicy",
    "Policy",
    "UniformRandomPolicy",
    "attractor_policy",
    "Env2DStatic",
    "HEADING_TOL_DEG",
    "CrossingRun",
    "crossing_layout",
    "run_crossing",
]
