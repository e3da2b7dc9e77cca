"""Velocity observers for the directly uncontrollable state (moving obstacles)."""
from __future__ import annotations

import enum
from collections import deque
from typing import Optional

import numpy as np


class ObserverMode(str, enum.Enum):
    EXACT = "exact"
    FD = "fd"
    NONE = "none"


def observe_velocity(mode, position_history, true_velocity, dt: float):
    """Velocity estimate for one observer mode.

    ``position_history`` holds already-noised positions, oldest first.
    Returns ``(estimate, warming_up)``; FD with fewer than two entries falls
    back to a zero estimate and reports ``warming_up=True``.
    """
    mode = ObserverMode(mode)
    true_velocity = np.asarray(true_velocity, dtype=float)
    if mode is ObserverMode.EXACT:
        return true_velocity.copy(), False
    if mode is ObserverMode.NONE:
        return np.zeros_like(true_velocity), False
    if len(position_history) < 2:
        return np.zeros_like(true_velocity), True
    return (np.asarray(position_history[-1]) - np.asarray(position_history[-2])) / dt, False


class VelocityObserver:
    """Stateful wrapper: adds position noise and keeps a short history."""

    def __init__(self, mode=ObserverMode.EXACT, position_noise_std: float = 0.03,
                 rng: Optional[np.random.Generator] = None):
        self.mode = ObserverMode(mode)
        if position_noise_std < 0:
            raise ValueError("position noise must be non-negative")
        self.position_noise_std = position_noise_std
        self.rng = rng if rng is not None else np.random.default_rng(0)
        self.history: deque = deque(maxlen=2)
        self.warming_up = True

    def reset(self, rng: Optional[np.random.Generator] = None):
        if rng is not None:
            self.rng = rng
        self.history.clear()
        self.warming_up = True

    def record(self, positions):
        positions = np.asarray(positions, dtype=float)
        if self.mode is ObserverMode.FD and self.position_noise_std > 0:
            positions = positions + self.rng.normal(0.0, self.position_noise_std, positions.shape)
        self.history.append(positions)

    def estimate(self, true_velocity, dt: float):
        est, self.warming_up = observe_velocity(self.mode, self.history, true_velocity, dt)
        return est
