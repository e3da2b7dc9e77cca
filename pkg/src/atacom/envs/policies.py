"""Hand-crafted policies that produce actions in the unit box.

Anything callable as ``policy(observation) -> action`` can drive the harness;
an RL agent only has to provide that plus ``reset(seed)``.
"""
from __future__ import annotations

from typing import Protocol

import numpy as np


class Policy(Protocol):
    def reset(self, seed: int) -> None: ...

    def __call__(self, observation: dict) -> np.ndarray: ...


def attractor_policy(observation: dict, K_p) -> np.ndarray:
    """Linear attractor towards the target, clipped to the unit box."""
    K_p = np.atleast_2d(np.asarray(K_p, dtype=float))
    offset = np.asarray(observation["target"]) - np.asarray(observation["position"])
    if K_p.shape == (1, 1):
        K_p = K_p[0, 0] * np.eye(offset.size)
    return np.clip(K_p @ offset, -1.0, 1.0)


class AttractorPolicy:
    def __init__(self, gain=1.0):
        gain = np.asarray(gain, dtype=float)
        if gain.ndim == 2:
            if np.any(np.linalg.eigvalsh(0.5 * (gain + gain.T)) <= 0):
                raise ValueError("attractor gain must be positive definite")
        elif np.any(gain <= 0):
            raise ValueError("attractor gain must be positive")
        self.gain = gain

    def reset(self, seed: int) -> None:
        pass

    def __call__(self, observation: dict) -> np.ndarray:
        K = self.gain if self.gain.ndim == 2 else np.diag(np.broadcast_to(self.gain, (2,)))
        return attractor_policy(observation, K)


# keeps the action stream independent of an environment seeded with the same integer
_POLICY_STREAM = 2


class UniformRandomPolicy:
    def __init__(self, action_dim: int, seed: int = 0):
        self.action_dim = action_dim
        self.reset(seed)

    def reset(self, seed: int) -> None:
        self.rng = np.random.default_rng([seed, _POLICY_STREAM])

    def __call__(self, observation: dict) -> np.ndarray:
        return self.rng.uniform(-1.0, 1.0, self.action_dim)


class ConstantPolicy:
    def __init__(self, action):
        self.action = np.asarray(action, dtype=float)
        if np.any(np.abs(self.action) > 1.0):
            raise ValueError("constant action must lie in the unit box")

    def reset(self, seed: int) -> None:
        pass

    def __call__(self, observation: dict) -> np.ndarray:
        return self.action.copy()
