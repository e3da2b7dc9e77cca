from __future__ import annotations

from typing import Optional

import numpy as np

from ..manifold import Variant, double_integrator, second_order_constraint, stack_constraints
from .base import PointEnv
from .constraints import box_bounds, disk_avoidance


class EnvDoubleIntegrator(PointEnv):
    """Acceleration-controlled point with the static obstacle and box walls.

    The controller works on the velocity-lifted rows ``zeta * k + J_k v``;
    violations are still measured on the raw position constraint ``k``.
    """

    variant = Variant.SECOND_ORDER
    action_dim = 2

    def __init__(
        self,
        lo: float = 0.0,
        hi: float = 1.0,
        obstacle_center=(0.5, 0.5),
        obstacle_radius: float = 0.15,
        a_max: Optional[float] = None,
        zeta_gain: float = 1.0,
        dt: float = 0.01,
        horizon: int = 1000,
        spawn_margin: float = 0.05,
        min_target_distance: float = 0.1,
    ):
        super().__init__(dt=dt, horizon=horizon)
        if not hi > lo:
            raise ValueError("workspace upper bound must exceed the lower bound")
        self.lo, self.hi = float(lo), float(hi)
        self.zeta_gain = zeta_gain
        self.spawn_margin = spawn_margin
        self.min_target_distance = min_target_distance
        self.system = double_integrator(2, a_max)
        self.constraint = stack_constraints(
            [disk_avoidance(obstacle_center, obstacle_radius), box_bounds([lo, lo], [hi, hi])],
            name="double_integrator",
        )
        self.constraints = [self.constraint]
        self.velocity = np.zeros(2)

    def _free(self, p) -> bool:
        return bool(np.all(self.constraint.fn(p) < -self.spawn_margin))

    def _sample(self) -> None:
        m = self.spawn_margin
        self.velocity = np.zeros(2)
        self.position = self.sample_free_point(self.lo, self.hi, m, self._free)
        self.target = self.sample_free_point(
            self.lo, self.hi, m,
            lambda p: self._free(p) and np.linalg.norm(p - self.position) > self.min_target_distance,
        )

    def _integrate(self, u_s, dt):
        # semi-implicit Euler: velocity first, then position with the new velocity
        self.velocity = self.velocity + dt * u_s
        self.position = self.position + dt * self.velocity

    def constraint_values(self) -> np.ndarray:
        return self.constraint.fn(self.position)

    def lifted_constraint_values(self) -> np.ndarray:
        return second_order_constraint(
            self.constraint.fn(self.position), self.constraint.jac(self.position), self.velocity, self.zeta_gain
        )

    def manifold_inputs(self) -> dict:
        return {"s": self.position.copy(), "s_dot": self.velocity.copy()}

    def state_vector(self) -> np.ndarray:
        return np.concatenate([self.position, self.velocity])

    def _extra_obs(self) -> dict:
        return {"velocity": self.velocity.copy()}

    def _extra_info(self) -> dict:
        return {"k_lifted": self.lifted_constraint_values()}
