"""Experiment configuration: a flat ``section.key = value`` text file.

Example::

    env.id = dynamic
    env.n_obstacles = 2
    slack.family = exp
    slack.beta = 4
    observer.mode = fd
    run.episodes = 200

Blank lines and ``#`` comments are ignored. Every key must name a known
field; environment parameters are checked against the environment's
constructor. Defaults follow the static/dynamic benchmark settings.
"""
from __future__ import annotations

import dataclasses
import inspect
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

from ..envs import Env2DDynamic, Env2DStatic, EnvCircleTrack, EnvDoubleIntegrator, ObserverMode
from ..manifold import SlackFamily


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field."""


ENVIRONMENTS = {
    "static": Env2DStatic,
    "dynamic": Env2DDynamic,
    "double_integrator": EnvDoubleIntegrator,
    "circle_track": EnvCircleTrack,
}
POLICIES = ("attractor", "uniform-random", "constant")
# set from other sections, never through env.*
_ENV_RESERVED = {"dt", "horizon", "observer", "position_noise_std"}


@dataclass
class EnvSection:
    id: str = "static"
    params: dict = field(default_factory=dict)


@dataclass
class SlackSection:
    family: str = "exp"
    beta: float = 4.0
    tol: float = 1e-6
    mu_cap: Optional[float] = None


@dataclass
class ControllerSection:
    lam: float = 10.0
    drift_clipping: bool = True
    zeta_gain: float = 1.0
    rank_tol: float = 1e-10


@dataclass
class ObserverSection:
    mode: str = "exact"
    noise: float = 0.03


@dataclass
class PolicySection:
    id: str = "attractor"
    gain: float = 1.0
    action: tuple = ()


@dataclass
class RunSection:
    episodes: int = 25
    horizon: int = 1000
    dt: float = 0.01
    seed: int = 0
    gamma: float = 0.99
    out_dir: str = "out"


@dataclass
class ExperimentConfig:
    env: EnvSection = field(default_factory=EnvSection)
    slack: SlackSection = field(default_factory=SlackSection)
    controller: ControllerSection = field(default_factory=ControllerSection)
    observer: ObserverSection = field(default_factory=ObserverSection)
    policy: PolicySection = field(default_factory=PolicySection)
    run: RunSection = field(default_factory=RunSection)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def with_overrides(self, overrides: dict) -> "ExperimentConfig":
        items = flatten(self)
        items.update({k: v for k, v in overrides.items()})
        return from_items(items)


def _parse_scalar(text: str) -> Any:
    t = text.strip()
    low = t.lower()
    if low in ("true", "yes", "on"):
        return True
    if low in ("false", "no", "off"):
        return False
    if low in ("none", "null", ""):
        return None
    for cast in (int, float):
        try:
            return cast(t)
        except ValueError:
            pass
    return t


def parse_value(text: str) -> Any:
    """Scalars, or a tuple when the text contains commas."""
    if isinstance(text, str) and "," in text:
        return tuple(_parse_scalar(p) for p in text.split(",") if p.strip())
    return _parse_scalar(text) if isinstance(text, str) else text


def _coerce(name: str, value: Any, annotation: str) -> Any:
    try:
        if annotation == "bool":
            if not isinstance(value, bool):
                raise TypeError
            return value
        if annotation == "int":
            if isinstance(value, bool) or int(value) != value:
                raise TypeError
            return int(value)
        if annotation == "float":
            if isinstance(value, bool):
                raise TypeError
            return float(value)
        if annotation == "Optional[float]":
            return None if value is None else float(value)
        if annotation == "tuple":
            if value is None:
                return ()
            values = value if isinstance(value, tuple) else (value,)
            return tuple(float(v) for v in values)
        if annotation == "str":
            return str(value)
    except (TypeError, ValueError):
        pass
    else:
        return value
    raise ConfigError(f"{name}: cannot interpret {value!r} as {annotation}")


def parse_text(text: str) -> dict:
    items = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'section.key = value', got {raw.strip()!r}")
        key, value = (p.strip() for p in line.split("=", 1))
        if key in items:
            raise ConfigError(f"{key}: given more than once (line {lineno})")
        items[key] = parse_value(value)
    return items


def flatten(config: ExperimentConfig) -> dict:
    items = {}
    for section in dataclasses.fields(config):
        obj = getattr(config, section.name)
        for f in dataclasses.fields(obj):
            if section.name == "env" and f.name == "params":
                items.update({f"env.{k}": v for k, v in obj.params.items()})
            else:
                items[f"{section.name}.{f.name}"] = getattr(obj, f.name)
    return items


def from_items(items: dict) -> ExperimentConfig:
    config = ExperimentConfig()
    env_params = {}
    for key, value in items.items():
        if "." not in key:
            raise ConfigError(f"{key}: keys must look like 'section.field'")
        section_name, field_name = key.split(".", 1)
        if section_name == "env" and field_name != "id":
            env_params[field_name] = value
            continue
        section = getattr(config, section_name, None)
        if section is None or not dataclasses.is_dataclass(section):
            raise ConfigError(f"{key}: unknown section {section_name!r}")
        fields = {f.name: f for f in dataclasses.fields(section)}
        if field_name not in fields or (section_name == "env" and field_name == "params"):
            raise ConfigError(f"{key}: unknown field")
        setattr(section, field_name, _coerce(key, value, str(fields[field_name].type)))
    config.env.params = env_params
    validate(config)
    return config


def _env_signature(env_id: str) -> dict:
    params = inspect.signature(ENVIRONMENTS[env_id].__init__).parameters
    return {n: p for n, p in params.items() if n != "self" and n not in _ENV_RESERVED}


def validate(config: ExperimentConfig) -> None:
    if config.env.id not in ENVIRONMENTS:
        raise ConfigError(f"env.id: unknown environment {config.env.id!r}; choose from {sorted(ENVIRONMENTS)}")
    allowed = _env_signature(config.env.id)
    for name, value in config.env.params.items():
        if name not in allowed:
            raise ConfigError(f"env.{name}: not a parameter of the {config.env.id!r} environment")
        if isinstance(value, str) and name != "motion":
            raise ConfigError(f"env.{name}: expected a number, got {value!r}")
    try:
        SlackFamily(config.slack.family)
    except ValueError:
        raise ConfigError(f"slack.family: must be 'linear' or 'exp', got {config.slack.family!r}") from None
    checks = [
        ("slack.beta", config.slack.beta > 0, "must be positive"),
        ("slack.tol", config.slack.tol > 0, "must be positive"),
        ("slack.mu_cap", config.slack.mu_cap is None or config.slack.mu_cap > config.slack.tol,
         "must exceed slack.tol"),
        ("controller.lam", config.controller.lam > 0, "must be positive"),
        ("controller.zeta_gain", config.controller.zeta_gain > 0, "must be positive"),
        ("controller.rank_tol", 0 < config.controller.rank_tol < 1, "must lie in (0, 1)"),
        ("observer.noise", config.observer.noise >= 0, "must be non-negative"),
        ("policy.gain", config.policy.gain > 0, "must be positive"),
        ("run.episodes", config.run.episodes >= 1, "must be at least 1"),
        ("run.horizon", config.run.horizon >= 1, "must be at least 1"),
        ("run.dt", 0 < config.run.dt <= 1, "must lie in (0, 1]"),
        ("run.seed", config.run.seed >= 0, "must be non-negative"),
        ("run.gamma", 0 < config.run.gamma <= 1, "must lie in (0, 1]"),
    ]
    for name, ok, message in checks:
        if not ok:
            raise ConfigError(f"{name}: {message}")
    try:
        ObserverMode(config.observer.mode)
    except ValueError:
        raise ConfigError(f"observer.mode: must be one of exact, fd, none; got {config.observer.mode!r}") from None
    if config.policy.id not in POLICIES:
        raise ConfigError(f"policy.id: must be one of {', '.join(POLICIES)}; got {config.policy.id!r}")
    if config.policy.id == "constant":
        if not config.policy.action:
            raise ConfigError("policy.action: required for the constant policy")
        if any(abs(a) > 1 for a in config.policy.action):
            raise ConfigError("policy.action: entries must lie in [-1, 1]")


def load_config(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    return from_items(parse_text(text))


def dump_config(config: ExperimentConfig) -> str:
    lines = []
    for key, value in flatten(config).items():
        if isinstance(value, tuple):
            value = ",".join(repr(v) for v in value)
        lines.append(f"{key} = {value}")
    return "\n".join(lines) + "\n"
