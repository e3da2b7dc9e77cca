"""Episode loop, experiment runs and parameter sweeps.

Each episode gets seed ``run.seed + index`` and builds its own environment,
policy and controller, so episodes can run in any order or in parallel and
still produce identical records.
"""
from __future__ import annotations

import itertools
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .. import numgeo
from ..controller import ActionError, ControllerConfig, atacom_step
from ..envs import (
    VIOLATION_TOL,
    AttractorPolicy,
    ConstantPolicy,
    EnvFault,
    UniformRandomPolicy,
)
from ..manifold import RankDeficiencyError, SlackDomainError, SlackModel, SpecIncompleteError
from ..verify import lyapunov_value
from .config import ENVIRONMENTS, ConfigError, ExperimentConfig

# failures that end one episode but not the whole run
EPISODE_FAULTS = (
    RankDeficiencyError,
    SlackDomainError,
    SpecIncompleteError,
    ActionError,
    EnvFault,
    numgeo.InvalidMatrixError,
    numgeo.EmptyKernelError,
    FloatingPointError,
)


@dataclass
class EpisodeRecord:
    index: int
    seed: int
    t: np.ndarray
    state: np.ndarray
    action: np.ndarray
    u_s: np.ndarray
    c: np.ndarray
    V: np.ndarray
    viol: np.ndarray
    sat: np.ndarray
    residual: np.ndarray
    success: bool
    steps: int
    ret: float
    max_constraint: float
    fault: Optional[str] = None

    @property
    def violation(self) -> float:
        """Largest constraint breach, zero if the episode stayed inside."""
        return max(0.0, self.max_constraint)


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    summary: dict
    records: list = field(default_factory=list)

    def summary_json(self) -> str:
        return summary_json(self.summary)


def summary_json(obj) -> str:
    """Stable JSON text: sorted keys and shortest round-trip floats."""
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def build_env(config: ExperimentConfig):
    cls = ENVIRONMENTS[config.env.id]
    kwargs = dict(config.env.params)
    kwargs.update(dt=config.run.dt, horizon=config.run.horizon)
    if config.env.id == "dynamic":
        kwargs.update(observer=config.observer.mode, position_noise_std=config.observer.noise)
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"env: {exc}") from exc


def build_policy(config: ExperimentConfig, env):
    pid = config.policy.id
    if pid == "attractor":
        if config.env.id == "circle_track":
            raise ConfigError("policy.id: the circle_track environment has no target for an attractor")
        return AttractorPolicy(config.policy.gain)
    if pid == "uniform-random":
        return UniformRandomPolicy(env.action_dim)
    if len(config.policy.action) != env.action_dim:
        raise ConfigError(f"policy.action: needs {env.action_dim} entries for {config.env.id!r}")
    return ConstantPolicy(config.policy.action)


def build_controller(config: ExperimentConfig) -> tuple[SlackModel, ControllerConfig]:
    slack = SlackModel(config.slack.family, config.slack.beta, config.slack.tol, config.slack.mu_cap)
    controller = ControllerConfig(
        lam=config.controller.lam,
        drift_clipping=config.controller.drift_clipping,
        rank_policy=numgeo.RankPolicy(config.controller.rank_tol),
        zeta_gain=config.controller.zeta_gain,
    )
    return slack, controller


def run_episode(config: ExperimentConfig, index: int, layout: Optional[dict] = None) -> EpisodeRecord:
    seed = config.run.seed + index
    env = build_env(config)
    policy = build_policy(config, env)
    slack, controller = build_controller(config)
    obs = env.reset(seed, layout) if layout is not None else env.reset(seed)
    policy.reset(seed)
    gamma, dt = config.run.gamma, config.run.dt

    rows = {k: [] for k in ("t", "state", "action", "u_s", "c", "V", "viol", "sat", "residual")}
    ret, discount, fault, done = 0.0, 1.0, None, False
    max_constraint = env.max_violation
    with np.errstate(invalid="raise", over="raise", divide="raise"):
        while not done:
            try:
                action = np.asarray(policy(obs), dtype=float)
                inputs = env.manifold_inputs()
                act = atacom_step(
                    env.system, env.constraints, slack, inputs["s"], action, controller,
                    variant=env.variant, z=inputs.get("z"), z_dot=inputs.get("z_dot"), s_dot=inputs.get("s_dot"),
                )
                state = env.state_vector()
                obs, reward, done, info = env.step(act.u_s)
            except EPISODE_FAULTS as exc:
                fault = f"{type(exc).__name__}: {exc}"
                break
            rows["t"].append(env.t * dt - dt)
            rows["state"].append(state)
            rows["action"].append(action)
            rows["u_s"].append(act.u_s)
            rows["c"].append(act.assembly.c)
            rows["V"].append(lyapunov_value(act.assembly.c))
            rows["viol"].append(info["violation"])
            rows["sat"].append(act.saturated)
            rows["residual"].append(act.residual)
            max_constraint = info["max_violation"]
            ret += discount * reward
            discount *= gamma

    def stack(key, width):
        return np.array(rows[key], dtype=float).reshape(len(rows[key]), width)

    n = len(rows["t"])
    return EpisodeRecord(
        index=index,
        seed=seed,
        t=np.array(rows["t"], dtype=float),
        state=stack("state", env.state_vector().size),
        action=stack("action", env.action_dim),
        u_s=stack("u_s", env.system.dim_control),
        c=np.array(rows["c"], dtype=float) if n else np.zeros((0, 0)),
        V=np.array(rows["V"], dtype=float),
        viol=np.array(rows["viol"], dtype=float),
        sat=np.array(rows["sat"], dtype=bool),
        residual=np.array(rows["residual"], dtype=float),
        success=bool(env.success) and fault is None,
        steps=n,
        ret=float(ret),
        max_constraint=float(max_constraint),
        fault=fault,
    )


def summarize(config: ExperimentConfig, records: list) -> dict:
    n = len(records)
    violations = [r.violation for r in records]
    return {
        "episodes": n,
        "success_rate": sum(r.success for r in records) / n,
        "mean_episode_length": sum(r.steps for r in records) / n,
        "mean_violation": math.fsum(violations) / n,
        "max_violation": max(violations),
        "max_constraint_value": max(r.max_constraint for r in records),
        "violating_episodes": sum(v > VIOLATION_TOL for v in violations),
        "mean_return": math.fsum(r.ret for r in records) / n,
        "faults": sum(r.fault is not None for r in records),
        "config": config.to_dict(),
    }


def _run_one(args):
    config, index = args
    return run_episode(config, index)


def run_experiment(config: ExperimentConfig, parallel: int = 1) -> ExperimentResult:
    jobs = [(config, i) for i in range(config.run.episodes)]
    if parallel > 1:
        with ProcessPoolExecutor(max_workers=parallel) as pool:
            records = list(pool.map(_run_one, jobs, chunksize=max(1, len(jobs) // (4 * parallel))))
    else:
        records = [_run_one(job) for job in jobs]
    return ExperimentResult(config, summarize(config, records), records)


@dataclass
class SweepCell:
    overrides: dict
    result: ExperimentResult

    @property
    def label(self) -> str:
        return ",".join(f"{k}={v}" for k, v in self.overrides.items()) or "base"


def expand_axes(config: ExperimentConfig, axes: dict) -> list[tuple[dict, ExperimentConfig]]:
    """Cartesian product of the axes, validated up front."""
    names = list(axes)
    cells = []
    for values in itertools.product(*(axes[name] for name in names)):
        overrides = dict(zip(names, values))
        cells.append((overrides, config.with_overrides(overrides)))
    return cells


def sweep(config: ExperimentConfig, axes: dict, parallel: int = 1) -> list[SweepCell]:
    cells = expand_axes(config, axes)
    if parallel > 1:
        jobs = [(cfg, i) for _, cfg in cells for i in range(cfg.run.episodes)]
        with ProcessPoolExecutor(max_workers=parallel) as pool:
            flat = iter(list(pool.map(_run_one, jobs)))
        out = []
        for overrides, cfg in cells:
            records = [next(flat) for _ in range(cfg.run.episodes)]
            out.append(SweepCell(overrides, ExperimentResult(cfg, summarize(cfg, records), records)))
        return out
    return [SweepCell(overrides, run_experiment(cfg)) for overrides, cfg in cells]
