from __future__ import annotations

import numpy as np

from ..manifold import Variant, single_integrator, stack_constraints
from .base import PointEnv
from .constraints import box_bounds, disk_avoidance


class Env2DStatic(PointEnv):
    """Velocity-controlled point robot, one fixed disk obstacle, box workspace.

    Five inequality rows: the obstacle first, then the lower and upper bounds.
    """

    variant = Variant.FIRST_ORDER
    action_dim = 2

    def __init__(
        self,
        lo: float = 0.0,
        hi: float = 1.0,
        obstacle_center=(0.5, 0.5),
        obstacle_radius: float = 0.15,
        v_max: float = 1.0,
        dt: float = 0.01,
        horizon: int = 1000,
        spawn_margin: float = 0.05,
        min_target_distance: float = 0.1,
    ):
        super().__init__(dt=dt, horizon=horizon)
        if not hi > lo:
            raise ValueError("workspace upper bound must exceed the lower bound")
        if not obstacle_radius > 0 or not v_max > 0:
            raise ValueError("obstacle radius and v_max must be positive")
        self.lo, self.hi = float(lo), float(hi)
        self.obstacle_center = np.asarray(obstacle_center, dtype=float)
        self.obstacle_radius = float(obstacle_radius)
        self.v_max = float(v_max)
        self.spawn_margin = spawn_margin
        self.min_target_distance = min_target_distance
        self.system = single_integrator(2, v_max)
        self.constraint = stack_constraints(
            [
                disk_avoidance(self.obstacle_center, self.obstacle_radius),
                box_bounds([lo, lo], [hi, hi]),
            ],
            name="static",
        )
        self.constraints = [self.constraint]
        self.position = np.array([lo, lo]) + 0.5 * (hi - lo)

    def _free(self, p) -> bool:
        return bool(np.all(self.constraint.fn(p) < -self.spawn_margin))

    def _sample(self) -> None:
        m = self.spawn_margin
        self.position = self.sample_free_point(self.lo, self.hi, m, self._free)
        self.target = self.sample_free_point(
            self.lo, self.hi, m,
            lambda p: self._free(p) and np.linalg.norm(p - self.position) > self.min_target_distance,
        )

    def place(self, position, target=None) -> dict:
        """Put the robot (and optionally the target) at a given spot."""
        self.position = np.asarray(position, dtype=float).copy()
        if target is not None:
            self.target = np.asarray(target, dtype=float).copy()
        self.t = 0
        self.reached = False
        self.max_violation = float(np.max(self.constraint_values()))
        return self.observation()

    def _integrate(self, u_s, dt):
        self.position = self.position + dt * u_s

    def constraint_values(self) -> np.ndarray:
        return self.constraint.fn(self.position)

    def manifold_inputs(self) -> dict:
        return {"s": self.position.copy()}
