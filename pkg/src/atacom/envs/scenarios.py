"""Scripted crossing scenario for comparing controllers with and without drift clipping.

A robot drives with a constant commanded direction while an obstacle sweeps
diagonally across its path from the upper right towards the lower left. While
the obstacle approaches, its drift pushes the robot aside; once it has passed
and recedes, an unclipped controller keeps compensating the (now negative)
drift and drags the robot after it.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..controller import ControllerConfig, atacom_step
from ..manifold import SlackModel
from .dynamic import SPEED_LEVELS, Env2DDynamic, Motion

HEADING_TOL_DEG = 5.0


def crossing_layout(seed: int, speed: float = SPEED_LEVELS["high"]) -> dict:
    rng = np.random.default_rng(seed)
    start = [rng.uniform(0.6, 1.0), rng.uniform(0.35, 0.6)]
    angle = np.radians(rng.uniform(200.0, 250.0))
    return {
        "robot": [0.0, 0.0],
        # far away along the commanded direction so the episode never ends early
        "target": [100.0, 0.0],
        "obstacles": start,
        "obstacle_velocities": [speed * np.cos(angle), speed * np.sin(angle)],
    }


@dataclass
class CrossingRun:
    heading_deg: np.ndarray    # angle between applied and commanded velocity, per step
    drift: np.ndarray          # unclipped drift of the obstacle row, per step
    turn_step: int             # first step at which the drift turns non-positive
    recovery_steps: int        # steps after turn_step until the heading stays within tolerance
    max_violation: float


def run_crossing(
    seed: int,
    drift_clipping: bool,
    slack: SlackModel = SlackModel("exp", 4.0),
    lam: float = 10.0,
    speed: float = SPEED_LEVELS["high"],
    command=(1.0, 0.0),
    steps: int = 500,
    tol_deg: float = HEADING_TOL_DEG,
) -> CrossingRun:
    env = Env2DDynamic(n_obstacles=1, motion=Motion.LINEAR, horizon=steps)
    env.reset(seed, crossing_layout(seed, speed))
    config = ControllerConfig(lam=lam, drift_clipping=drift_clipping)
    command = np.asarray(command, dtype=float)
    commanded = np.arctan2(command[1], command[0])

    heading, drift = np.empty(steps), np.empty(steps)
    for i in range(steps):
        inputs = env.manifold_inputs()
        act = atacom_step(
            env.system, env.constraints, slack, inputs["s"], command, config,
            variant=env.variant, z=inputs["z"], z_dot=inputs["z_dot"],
        )
        angle = np.arctan2(act.u_s[1], act.u_s[0]) - commanded
        heading[i] = np.degrees(np.arctan2(np.sin(angle), np.cos(angle)))
        drift[i] = act.assembly.psi[0]
        env.step(act.u_s)

    turns = np.nonzero((drift[:-1] > 0) & (drift[1:] <= 0))[0]
    if turns.size == 0:
        raise RuntimeError(f"seed {seed}: the obstacle never passed the robot")
    turn = int(turns[0]) + 1
    off = np.nonzero(np.abs(heading) > tol_deg)[0]
    if off.size and off[-1] == steps - 1:
        raise RuntimeError(f"seed {seed}: heading had not recovered after {steps} steps")
    recovered = max(int(off[-1]) + 1 if off.size else 0, turn)
    return CrossingRun(heading, drift, turn, recovered - turn, env.max_violation)
