from __future__ import annotations

import enum
from typing import Optional

import numpy as np

from ..manifold import Variant, single_integrator
from .base import PointEnv
from .constraints import moving_disks
from .observers import ObserverMode, VelocityObserver


class Motion(str, enum.Enum):
    FIXED = "fixed"
    RANDOM = "random"
    LINEAR = "linear"


SPEED_LEVELS = {"low": 0.5, "medium": 1.0, "high": 1.5}


class Env2DDynamic(PointEnv):
    """Point robot among moving disk obstacles.

    The robot position is the controllable state ``q``; the stacked obstacle
    positions are the uncontrollable state ``z`` whose velocity reaches the
    controller only through the configured observer.

    Obstacle motions:
      fixed   circle of ``orbit_radius`` about the initial position
      random  heading random walk at constant speed, reflected at the walls
      linear  constant velocity (used for scripted scenarios)
    """

    variant = Variant.SEPARABLE
    action_dim = 2

    def __init__(
        self,
        n_obstacles: int = 2,
        speed_scale: float = 0.5,
        motion: Motion = Motion.FIXED,
        obstacle_radius: float = 0.15,
        orbit_radius: float = 0.1,
        heading_noise: float = 2.0,
        observer: ObserverMode = ObserverMode.EXACT,
        position_noise_std: float = 0.03,
        lo: float = 0.0,
        hi: float = 1.0,
        v_max: float = 1.0,
        dt: float = 0.01,
        horizon: int = 1000,
        spawn_margin: float = 0.05,
    ):
        super().__init__(dt=dt, horizon=horizon)
        if n_obstacles < 1:
            raise ValueError("need at least one obstacle")
        if speed_scale < 0:
            raise ValueError("speed scale must be non-negative")
        self.n_obstacles = n_obstacles
        self.speed = speed_scale * v_max
        self.motion = Motion(motion)
        self.obstacle_radius = obstacle_radius
        self.orbit_radius = orbit_radius
        self.heading_noise = heading_noise
        self.lo, self.hi = float(lo), float(hi)
        self.v_max = v_max
        self.spawn_margin = spawn_margin
        self.system = single_integrator(2, v_max)
        self.constraint = moving_disks(n_obstacles, obstacle_radius)
        self.constraints = [self.constraint]
        self.observer = VelocityObserver(observer, position_noise_std)
        self.obstacles = np.zeros((n_obstacles, 2))
        self.obstacle_velocities = np.zeros((n_obstacles, 2))
        self._centers = np.zeros((n_obstacles, 2))
        self._phase = np.zeros(n_obstacles)
        self._spin = np.ones(n_obstacles)
        self._heading = np.zeros(n_obstacles)
        self._layout: Optional[dict] = None

    # -- obstacle motion ---------------------------------------------------
    def _orbit(self, t: float):
        omega = self.speed / self.orbit_radius
        ang = self._phase + self._spin * omega * t
        pos = self._centers + self.orbit_radius * np.stack([np.cos(ang), np.sin(ang)], axis=1)
        vel = (self.orbit_radius * omega * self._spin)[:, None] * np.stack([-np.sin(ang), np.cos(ang)], axis=1)
        return pos, vel

    def _advance_obstacles(self, dt: float):
        if self.motion is Motion.FIXED:
            self.obstacles, self.obstacle_velocities = self._orbit((self.t + 1) * self.dt)
            return
        self.obstacles = self.obstacles + dt * self.obstacle_velocities
        if self.motion is Motion.RANDOM:
            for axis in range(2):
                low = self.obstacles[:, axis] < self.lo
                high = self.obstacles[:, axis] > self.hi
                self.obstacles[low, axis] = 2 * self.lo - self.obstacles[low, axis]
                self.obstacles[high, axis] = 2 * self.hi - self.obstacles[high, axis]
                flip = low | high
                if axis == 0:
                    self._heading[flip] = np.pi - self._heading[flip]
                else:
                    self._heading[flip] = -self._heading[flip]
            self._heading += self.heading_noise * np.sqrt(dt) * self.rng.standard_normal(self.n_obstacles)
            self.obstacle_velocities = self.speed * np.stack(
                [np.cos(self._heading), np.sin(self._heading)], axis=1
            )

    # -- PointEnv hooks ------------------------------------------------------
    def reset(self, seed: int, layout: Optional[dict] = None) -> dict:
        """``layout`` may fix ``robot``, ``target``, ``obstacles`` and
        ``obstacle_velocities`` (the latter only used with linear motion)."""
        self._layout = layout
        self.observer.reset(np.random.default_rng([seed, 1]))
        return super().reset(seed)

    def _sample(self) -> None:
        layout = self._layout or {}
        m = self.spawn_margin
        clearance = self.obstacle_radius + self.orbit_radius + m
        self.position = (
            np.asarray(layout["robot"], dtype=float)
            if "robot" in layout
            else self.sample_free_point(self.lo, self.hi, m)
        )
        self.target = (
            np.asarray(layout["target"], dtype=float)
            if "target" in layout
            else self.sample_free_point(
                self.lo, self.hi, m, lambda p: np.linalg.norm(p - self.position) > 2 * clearance
            )
        )
        if "obstacles" in layout:
            centers = np.asarray(layout["obstacles"], dtype=float).reshape(self.n_obstacles, 2)
        else:
            centers = np.array([
                self.sample_free_point(
                    self.lo, self.hi, self.orbit_radius,
                    lambda p: min(np.linalg.norm(p - self.position), np.linalg.norm(p - self.target)) > clearance,
                )
                for _ in range(self.n_obstacles)
            ])
        self._centers = centers
        self._phase = self.rng.uniform(0, 2 * np.pi, self.n_obstacles)
        self._spin = self.rng.choice([-1.0, 1.0], self.n_obstacles)
        self._heading = self.rng.uniform(0, 2 * np.pi, self.n_obstacles)
        if self.motion is Motion.FIXED:
            self.obstacles, self.obstacle_velocities = self._orbit(0.0)
        else:
            self.obstacles = centers.copy()
            if self.motion is Motion.LINEAR and "obstacle_velocities" in layout:
                self.obstacle_velocities = np.asarray(layout["obstacle_velocities"], dtype=float).reshape(-1, 2)
            else:
                self.obstacle_velocities = self.speed * np.stack(
                    [np.cos(self._heading), np.sin(self._heading)], axis=1
                )
        self.observer.record(self.obstacles.ravel())

    def _integrate(self, u_s, dt):
        self.position = self.position + dt * u_s
        self._advance_obstacles(dt)
        self.observer.record(self.obstacles.ravel())

    def constraint_values(self) -> np.ndarray:
        return self.constraint.fn(self.position, self.obstacles.ravel())

    def observed_obstacle_velocity(self) -> np.ndarray:
        return self.observer.estimate(self.obstacle_velocities.ravel(), self.dt)

    def manifold_inputs(self) -> dict:
        return {
            "s": self.position.copy(),
            "z": self.obstacles.ravel().copy(),
            "z_dot": self.observed_obstacle_velocity(),
        }

    def _extra_obs(self) -> dict:
        return {
            "obstacles": self.obstacles.copy(),
            "obstacle_velocities": self.observer.estimate(self.obstacle_velocities.ravel(), self.dt).reshape(-1, 2),
        }
