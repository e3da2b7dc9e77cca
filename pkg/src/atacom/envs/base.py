from __future__ import annotations

from typing import Optional

import numpy as np

from ..manifold import ControlAffineSystem, Variant

# constraint values above this count as a violation (metres for the 2-D envs)
VIOLATION_TOL = 1e-3
GOAL_TOLERANCE = 0.05


class EnvFault(RuntimeError):
    """The environment was driven with an invalid control."""


def episode_success(reached: bool, max_violation: float) -> bool:
    """Target reached within the horizon and no constraint ever violated."""
    return bool(reached) and max_violation <= VIOLATION_TOL


class PointEnv:
    """Shared bookkeeping for the planar point-robot environments.

    Subclasses set ``system``, ``constraints``, ``variant`` and ``action_dim``
    and implement ``_sample``, ``_integrate``, ``constraint_values`` and
    ``manifold_inputs``.
    """

    variant: Variant = Variant.FIRST_ORDER
    action_dim: int = 2
    system: ControlAffineSystem
    constraints: list

    def __init__(self, dt: float = 0.01, horizon: int = 1000, goal_tolerance: float = GOAL_TOLERANCE):
        if not dt > 0:
            raise ValueError("dt must be positive")
        if horizon < 1:
            raise ValueError("horizon must be at least one step")
        self.dt = dt
        self.horizon = horizon
        self.goal_tolerance = goal_tolerance
        self.rng = np.random.default_rng(0)
        self.position = np.zeros(2)
        self.target: Optional[np.ndarray] = None
        self.t = 0
        self.reached = False
        self.max_violation = -np.inf

    # -- subclass hooks -------------------------------------------------
    def _sample(self) -> None:
        raise NotImplementedError

    def _integrate(self, u_s: np.ndarray, dt: float) -> None:
        raise NotImplementedError

    def constraint_values(self) -> np.ndarray:
        raise NotImplementedError

    def manifold_inputs(self) -> dict:
        raise NotImplementedError

    def state_vector(self) -> np.ndarray:
        return self.position.copy()

    def _extra_obs(self) -> dict:
        return {}

    def _extra_info(self) -> dict:
        return {}

    # -- gym-style interface ---------------------------------------------
    def reset(self, seed: int) -> dict:
        self.rng = np.random.default_rng(seed)
        self.t = 0
        self.reached = False
        self._sample()
        self.max_violation = float(np.max(self.constraint_values()))
        return self.observation()

    def observation(self) -> dict:
        obs = {"position": self.position.copy(), "t": self.t * self.dt}
        if self.target is not None:
            obs["target"] = self.target.copy()
        obs.update(self._extra_obs())
        return obs

    def distance_to_target(self) -> float:
        if self.target is None:
            return 0.0
        return float(np.linalg.norm(self.position - self.target))

    def reward(self) -> float:
        return -self.distance_to_target()

    def step(self, u_s, dt: Optional[float] = None):
        u_s = np.asarray(u_s, dtype=float)
        if u_s.shape != (self.system.dim_control,):
            raise EnvFault(f"control must have shape ({self.system.dim_control},), got {u_s.shape}")
        if not np.all(np.isfinite(u_s)):
            raise EnvFault("non-finite control")
        self._integrate(u_s, self.dt if dt is None else dt)
        self.t += 1
        k = self.constraint_values()
        step_violation = float(np.max(k))
        self.max_violation = max(self.max_violation, step_violation)
        if self.target is not None and self.distance_to_target() < self.goal_tolerance:
            self.reached = True
        done = self.reached or self.t >= self.horizon
        info = {
            "k": k,
            "violation": step_violation,
            "max_violation": self.max_violation,
            "reached": self.reached,
            "success": self.success,
        }
        info.update(self._extra_info())
        return self.observation(), self.reward(), done, info

    @property
    def success(self) -> bool:
        return episode_success(self.reached, self.max_violation)

    def sample_free_point(self, lo, hi, margin: float, ok=None) -> np.ndarray:
        """Rejection-sample a point in ``[lo + margin, hi - margin]^2``."""
        for _ in range(100_000):
            p = self.rng.uniform(lo + margin, hi - margin, 2)
            if ok is None or ok(p):
                return p
        raise RuntimeError("could not sample a free point; environment too crowded")
