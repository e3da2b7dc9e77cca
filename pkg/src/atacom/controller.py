"""Safe controller on the tangent space of the constraint manifold.

    [u_s; u_mu] = -J_u^+ psi_hat - lam * J_u^+ c + B_u a

where ``a`` is the agent action expressed in the smooth tangent frame.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .manifold import (
    AugmentedAssembly,
    AugmentedState,
    ControlAffineSystem,
    SlackModel,
    Variant,
    assemble,
    manifold_constraint_values,
    slack_reset,
)
from .numgeo import RankPolicy


class ActionError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class ControllerConfig:
    lam: float = 10.0
    drift_clipping: bool = True
    rank_policy: RankPolicy = field(default_factory=RankPolicy)
    reference_frame: Optional[np.ndarray] = None
    zeta_gain: float = 1.0

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError(f"contraction gain must be positive, got {self.lam}")
        if not self.zeta_gain > 0:
            raise ValueError(f"zeta_gain must be positive, got {self.zeta_gain}")
        T = self.reference_frame
        if T is not None:
            T = np.asarray(T, dtype=float)
            if not np.allclose(T.T @ T, np.eye(T.shape[1]), atol=1e-10):
                raise ValueError("reference frame columns must be orthonormal")
            object.__setattr__(self, "reference_frame", T)


@dataclass(eq=False)
class SafeAction:
    u_s: np.ndarray
    u_mu: np.ndarray
    saturated: bool
    # ||psi_hat + lam*c + J_u [u_s; u_mu]||; stays at round-off unless the final clip bites
    residual: float = 0.0
    assembly: Optional[AugmentedAssembly] = None


def drift_clip(psi, n_inequality: Optional[int] = None) -> np.ndarray:
    """Keep only drift that pushes towards the boundary.

    Rows past ``n_inequality`` are equality rows and are passed through
    untouched, since equality constraints have no safe side.
    """
    psi = np.asarray(psi, dtype=float)
    if n_inequality is None:
        return np.maximum(psi, 0.0)
    out = psi.copy()
    out[:n_inequality] = np.maximum(psi[:n_inequality], 0.0)
    return out


def _feasible_fraction(base, step, lo, hi) -> float:
    """Largest ``t`` in ``[0, 1]`` with ``lo <= base + t * step <= hi``; 0 if ``base`` is outside."""
    if np.any(base < lo) or np.any(base > hi):
        return 0.0
    t = 1.0
    for b, d, l, h in zip(base, step, lo, hi):
        if d > 0:
            t = min(t, (h - b) / d)
        elif d < 0:
            t = min(t, (l - b) / d)
    return max(t, 0.0)


def safe_action(
    assembly: AugmentedAssembly,
    agent_action,
    config: ControllerConfig,
) -> SafeAction:
    a = np.atleast_1d(np.asarray(agent_action, dtype=float))
    if not np.all(np.isfinite(a)):
        raise ActionError("agent action has non-finite entries")
    if a.shape != (assembly.B_u.shape[1],):
        raise ActionError(f"agent action must have shape ({assembly.B_u.shape[1]},), got {a.shape}")

    psi = drift_clip(assembly.psi, assembly.n_inequality) if config.drift_clipping else assembly.psi
    compensation = -assembly.J_u_pinv @ (psi + config.lam * assembly.c)
    tangential = assembly.B_u @ a
    u = compensation + tangential

    U = assembly.dim_control
    saturated = False
    if assembly.control_bounds is not None:
        lo, hi = assembly.control_bounds
        if np.any(u[:U] < lo) or np.any(u[:U] > hi):
            # Shrink only the tangential part; it lies in ker J_u, so what is
            # left of it still satisfies the tangency requirement.
            saturated = True
            u = compensation + _feasible_fraction(compensation[:U], tangential[:U], lo, hi) * tangential
            u = np.concatenate([np.clip(u[:U], lo, hi), u[U:]])
    u_s, u_mu = u[:U], u[U:]
    applied = np.concatenate([u_s, u_mu])
    r = psi + config.lam * assembly.c + assembly.J_u @ applied
    residual = float(np.sqrt(r @ r))
    return SafeAction(u_s=u_s, u_mu=u_mu, saturated=saturated, residual=residual, assembly=assembly)


def atacom_step(
    system: ControlAffineSystem,
    constraints,
    slack: SlackModel,
    s,
    agent_action,
    config: ControllerConfig,
    *,
    variant: Variant = Variant.FIRST_ORDER,
    z=None,
    z_dot=None,
    s_dot=None,
) -> SafeAction:
    """Map an agent action to a safe plant control at state ``s``.

    The slack is recomputed from the constraint values on every call, so the
    function holds no state apart from the fixed reference frame in ``config``.
    """
    variant = Variant(variant)
    state = AugmentedState(s=np.asarray(s, dtype=float), mu=np.zeros(0), z=z, s_dot=s_dot)
    k = manifold_constraint_values(variant, constraints, state, config.zeta_gain)
    state.mu = slack_reset(slack, k)
    assembly = assemble(
        variant,
        system,
        constraints,
        slack,
        state,
        z_dot,
        zeta_gain=config.zeta_gain,
        reference_frame=config.reference_frame,
        policy=config.rank_policy,
        k_value=k,
    )
    return safe_action(assembly, agent_action, config)
