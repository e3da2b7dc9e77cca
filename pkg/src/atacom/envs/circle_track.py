from __future__ import annotations

import numpy as np

from ..manifold import Variant, single_integrator
from .base import VIOLATION_TOL, PointEnv
from .constraints import circle_equality, disk_avoidance

# |l(s)| above this counts as leaving the circle
TRACKING_TOL = 1e-3


class EnvCircleTrack(PointEnv):
    """Velocity-controlled point that must stay on the unit circle.

    One equality row ``||s||^2 - 1 = 0`` and one keep-out disk sitting on the
    circle, so the single remaining action coordinate moves the point along
    the circle until the disk blocks it. There is no target; an episode runs
    to the horizon and succeeds if tracking and the keep-out both held.
    """

    variant = Variant.EQUALITY
    action_dim = 1

    def __init__(
        self,
        radius: float = 1.0,
        keep_out_center=(-1.0, 0.0),
        keep_out_radius: float = 0.3,
        v_max: float = 1.0,
        dt: float = 0.01,
        horizon: int = 1000,
    ):
        super().__init__(dt=dt, horizon=horizon)
        self.radius = radius
        self.system = single_integrator(2, v_max)
        self.equality = circle_equality(radius)
        self.keep_out = disk_avoidance(keep_out_center, keep_out_radius, name="keep_out")
        self.constraints = [self.keep_out, self.equality]
        self.max_tracking_error = 0.0

    def _sample(self) -> None:
        theta = self.rng.uniform(-np.pi / 2, np.pi / 2)
        self.position = self.radius * np.array([np.cos(theta), np.sin(theta)])
        self.target = None
        self.max_tracking_error = self.tracking_error()

    def tracking_error(self) -> float:
        return float(abs(self.equality.fn(self.position)[0]))

    def _integrate(self, u_s, dt):
        self.position = self.position + dt * u_s
        self.max_tracking_error = max(self.max_tracking_error, self.tracking_error())

    def constraint_values(self) -> np.ndarray:
        return self.keep_out.fn(self.position)

    def manifold_inputs(self) -> dict:
        return {"s": self.position.copy()}

    def _extra_info(self) -> dict:
        return {"l": self.equality.fn(self.position), "max_tracking_error": self.max_tracking_error}

    @property
    def success(self) -> bool:
        return self.max_violation <= VIOLATION_TOL and self.max_tracking_error <= TRACKING_TOL
