"""Safe action spaces on constraint manifolds.

Agent actions are read as coordinates in a smoothly varying basis of the
tangent space of the constraint manifold; the controller adds drift
compensation and a contraction term so every executed control keeps the
system on (or returns it to) the safe set.
"""
from .controller import ActionError, ControllerConfig, SafeAction, atacom_step, drift_clip, safe_action
from .manifold import (
    AugmentedAssembly,
    AugmentedState,
    ConstraintSpec,
    ControlAffineSystem,
    RankDeficiencyError,
    SlackDomainError,
    SlackFamily,
    SlackModel,
    SpecIncompleteError,
    Variant,
    assemble,
    constraint_residual,
    second_order_constraint,
    slack_alpha,
    slack_reset,
)
from .numgeo import RankPolicy, nullspace_basis, pseudoinverse, smooth_basis

__version__ = "0.1.0"

__all__ = [
    "ActionError",
    "ControllerConfig",
    "SafeAction",
    "atacom_step",
    "drift_clip",
    "safe_action",
    "AugmentedAssembly",
    "AugmentedState",
    "ConstraintSpec",
    "ControlAffineSystem",
    "RankDeficiencyError",
    "SlackDomainError",
    "SlackFamily",
    "SlackModel",
    "SpecIncompleteError",
    "Variant",
    "assemble",
    "constraint_residual",
    "second_order_constraint",
    "slack_alpha",
    "slack_reset",
    "RankPolicy",
    "nullspace_basis",
    "pseudoinverse",
    "smooth_basis",
]
