"""Constraints, slack dynamics and assembly of the augmented Jacobian/drift.

The assembled quantities describe the constraint manifold
``c(s, mu) = k(s) + mu = 0`` (plus optional equality rows ``l(s) = 0``) in the
augmented space of plant controls and slack controls:

    psi + J_u @ [u_s; u_mu] = 0        (tangency requirement)

Four problem variants are supported; they differ only in how ``J_u``, ``psi``
and ``c`` are built.
"""
from __future__ import annotations

import enum
import functools
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import numgeo
from .numgeo import RankPolicy


class Variant(str, enum.Enum):
    FIRST_ORDER = "first_order"
    SECOND_ORDER = "second_order"
    SEPARABLE = "separable"
    EQUALITY = "equality"


class SlackFamily(str, enum.Enum):
    LINEAR = "linear"
    EXPONENTIAL = "exp"


class SlackDomainError(ValueError):
    pass


class RankDeficiencyError(RuntimeError):
    """The augmented Jacobian lost row rank.

    This happens when more constraints sit on their boundary than the control
    input can independently act on (constant-rank condition violated).
    """


class SpecIncompleteError(ValueError):
    """A constraint lacks data the requested variant needs."""


@dataclass(frozen=True)
class ConstraintSpec:
    """A vector-valued constraint with its analytic Jacobian(s).

    Call signatures depend on the variant the constraint is used in:

    * first-order / equality / second-order: ``fn(s)``, ``jac(s)``
    * separable: ``fn(q, z)``, ``jac(q, z)`` (w.r.t. ``q``), ``jac_z(q, z)``
    * second-order additionally needs ``jac_dot(s, s_dot)``, the matrix
      ``(d/ds J_k) . s_dot`` so that ``d/dt J_k = jac_dot(s, s_dot)``.
    """

    fn: Callable[..., np.ndarray]
    jac: Callable[..., np.ndarray]
    dim: int
    kind: str = "inequality"
    jac_z: Optional[Callable[..., np.ndarray]] = None
    jac_dot: Optional[Callable[..., np.ndarray]] = None
    name: str = ""

    def __post_init__(self):
        if self.kind not in ("inequality", "equality"):
            raise ValueError(f"unknown constraint kind {self.kind!r}")
        if self.dim < 1:
            raise ValueError("constraint dimension must be positive")


def stack_constraints(constraints: Sequence[ConstraintSpec], name: str = "") -> ConstraintSpec:
    """Concatenate several constraints of the same kind into one spec."""
    constraints = list(constraints)
    if not constraints:
        raise ValueError("need at least one constraint")
    kinds = {c.kind for c in constraints}
    if len(kinds) != 1:
        raise ValueError("cannot stack inequality and equality constraints together")
    if len(constraints) == 1:
        return constraints[0]

    def _cat(attr):
        fns = [getattr(c, attr) for c in constraints]
        if any(f is None for f in fns):
            return None
        promote = np.atleast_1d if attr == "fn" else np.atleast_2d
        return lambda *args: np.concatenate([promote(f(*args)) for f in fns], axis=0)

    return ConstraintSpec(
        fn=_cat("fn"),
        jac=_cat("jac"),
        dim=sum(c.dim for c in constraints),
        kind=constraints[0].kind,
        jac_z=_cat("jac_z"),
        jac_dot=_cat("jac_dot"),
        name=name or "+".join(c.name for c in constraints),
    )


@dataclass(frozen=True)
class SlackModel:
    family: SlackFamily = SlackFamily.EXPONENTIAL
    beta: float = 4.0
    tol: float = 1e-6
    mu_cap: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "family", SlackFamily(self.family))
        if not self.beta > 0:
            raise ValueError(f"slack beta must be positive, got {self.beta}")
        if not self.tol > 0:
            raise ValueError(f"slack tolerance must be positive, got {self.tol}")
        if self.mu_cap is not None and not self.mu_cap > self.tol:
            raise ValueError("mu_cap must exceed the slack tolerance")

    def alpha(self, mu) -> np.ndarray:
        return slack_alpha(self, mu)

    def lipschitz(self, mu_max: float) -> float:
        """Lipschitz constant of alpha on ``[0, mu_max]``."""
        if self.family is SlackFamily.LINEAR:
            return self.beta
        return self.beta * float(np.exp(self.beta * mu_max))


def slack_alpha(model: SlackModel, mu) -> np.ndarray:
    """Diagonal of ``A(mu)``: alpha applied elementwise."""
    mu = np.asarray(mu, dtype=float)
    if np.any(mu < 0):
        raise SlackDomainError("slack values must be non-negative")
    if model.mu_cap is not None:
        mu = np.minimum(mu, model.mu_cap)
    if model.family is SlackFamily.LINEAR:
        return model.beta * mu
    return np.expm1(model.beta * mu)


def slack_reset(model: SlackModel, k_value) -> np.ndarray:
    """Slack that puts ``s`` on the manifold, floored at the tolerance."""
    return np.maximum(-np.asarray(k_value, dtype=float), model.tol)


def second_order_constraint(k_value, k_jacobian, s_dot, zeta_gain: float = 1.0) -> np.ndarray:
    """Velocity-lifted constraint ``zeta * k + J_k s_dot`` with linear zeta."""
    if not zeta_gain > 0:
        raise ValueError(f"zeta_gain must be positive, got {zeta_gain}")
    k_value = np.atleast_1d(np.asarray(k_value, dtype=float))
    J = np.atleast_2d(np.asarray(k_jacobian, dtype=float))
    return zeta_gain * k_value + J @ np.asarray(s_dot, dtype=float)


def constraint_residual(k_value, slack_values, l_value=None) -> np.ndarray:
    """``c = [k + mu; l]``. Zero exactly on the manifold."""
    c = np.atleast_1d(np.asarray(k_value, dtype=float)) + np.asarray(slack_values, dtype=float)
    if l_value is not None:
        c = np.concatenate([c, np.atleast_1d(np.asarray(l_value, dtype=float))])
    return c


@dataclass(frozen=True, eq=False)
class ControlAffineSystem:
    """``s_dot = f(s) + G(s) u_s``.

    For second-order systems the state is ``(s, s_dot)`` and ``drift`` /
    ``input_matrix`` take both and describe the acceleration.
    """

    dim_state: int
    dim_control: int
    drift: Callable[..., np.ndarray]
    input_matrix: Callable[..., np.ndarray]
    control_bounds: Optional[tuple] = None

    def clip(self, u_s: np.ndarray) -> tuple[np.ndarray, bool]:
        if self.control_bounds is None:
            return u_s, False
        lo, hi = self.control_bounds
        clipped = np.clip(u_s, lo, hi)
        return clipped, bool(np.any(clipped != u_s))


def single_integrator(dim: int, v_max: Optional[float] = None) -> ControlAffineSystem:
    """Velocity-controlled point, ``s_dot = u``."""
    bounds = None if v_max is None else (-v_max * np.ones(dim), v_max * np.ones(dim))
    eye = np.eye(dim)
    zero = np.zeros(dim)
    return ControlAffineSystem(dim, dim, lambda *_: zero, lambda *_: eye, bounds)


def double_integrator(dim: int, a_max: Optional[float] = None) -> ControlAffineSystem:
    """Acceleration-controlled point, ``s_ddot = u``."""
    return single_integrator(dim, a_max)


@dataclass
class AugmentedState:
    s: np.ndarray
    mu: np.ndarray
    z: Optional[np.ndarray] = None
    s_dot: Optional[np.ndarray] = None


@dataclass(eq=False)
class AugmentedAssembly:
    J_u: np.ndarray
    psi: np.ndarray
    c: np.ndarray
    B_u: np.ndarray
    J_u_pinv: np.ndarray
    J_k: np.ndarray
    k: np.ndarray
    mu: np.ndarray
    dim_control: int
    n_inequality: int
    rank: int
    control_bounds: Optional[tuple] = None
    extras: dict = field(default_factory=dict)

    @property
    def n_rows(self) -> int:
        return self.J_u.shape[0]


@functools.lru_cache(maxsize=64)
def _cached_frame(n_rows: int, n_cols: int) -> np.ndarray:
    T = numgeo.identity_frame(n_rows, n_cols)
    T.flags.writeable = False
    return T


def default_reference_frame(dim_control: int, n_inequality: int, n_equality: int = 0) -> np.ndarray:
    """``[I; 0]``: plant-control axes first, slack axes padded with zeros."""
    n = dim_control + n_inequality
    return _cached_frame(n, n - n_inequality - n_equality)


def _split(constraints) -> tuple[Optional[ConstraintSpec], Optional[ConstraintSpec]]:
    if isinstance(constraints, ConstraintSpec):
        constraints = [constraints]
    ineq = [c for c in constraints if c.kind == "inequality"]
    eq = [c for c in constraints if c.kind == "equality"]
    return (stack_constraints(ineq) if ineq else None, stack_constraints(eq) if eq else None)


def manifold_constraint_values(
    variant: Variant,
    constraints,
    state: AugmentedState,
    zeta_gain: float = 1.0,
) -> np.ndarray:
    """Inequality values that define the manifold: ``k`` or the lifted ``k*``."""
    variant = Variant(variant)
    ineq, _ = _split(constraints)
    if ineq is None:
        return np.zeros(0)
    if variant is Variant.SEPARABLE:
        return np.atleast_1d(ineq.fn(state.s, state.z))
    k = np.atleast_1d(ineq.fn(state.s))
    if variant is Variant.SECOND_ORDER:
        if state.s_dot is None:
            raise SpecIncompleteError("second-order variant needs s_dot")
        return second_order_constraint(k, ineq.jac(state.s), state.s_dot, zeta_gain)
    return k


def assemble(
    variant: Variant,
    system: ControlAffineSystem,
    constraints,
    slack: SlackModel,
    state: AugmentedState,
    z_dot=None,
    *,
    zeta_gain: float = 1.0,
    reference_frame: Optional[np.ndarray] = None,
    policy: RankPolicy = numgeo.DEFAULT_POLICY,
    k_value: Optional[np.ndarray] = None,
) -> AugmentedAssembly:
    """Build ``(J_u, psi, c, B_u)`` for one of the four problem variants.

    ``state.mu`` must already hold the slack values (see :func:`slack_reset`).
    ``k_value`` may pass in the inequality values already computed by
    :func:`manifold_constraint_values` to skip re-evaluating them.
    Raises :class:`RankDeficiencyError` if ``J_u`` loses row rank.
    """
    variant = Variant(variant)
    ineq, eq = _split(constraints)
    if eq is not None and variant is not Variant.EQUALITY:
        raise SpecIncompleteError(f"equality constraints require the equality variant, not {variant.value}")
    if variant is Variant.EQUALITY and eq is None:
        raise SpecIncompleteError("equality variant needs at least one equality constraint")

    s = np.asarray(state.s, dtype=float)
    mu = np.atleast_1d(np.asarray(state.mu, dtype=float))
    U = system.dim_control
    K = ineq.dim if ineq is not None else 0
    if mu.shape != (K,):
        raise ValueError(f"expected {K} slack values, got shape {mu.shape}")

    if variant is Variant.SECOND_ORDER:
        if state.s_dot is None:
            raise SpecIncompleteError("second-order variant needs s_dot")
        if ineq is not None and ineq.jac_dot is None:
            raise SpecIncompleteError(f"constraint {ineq.name!r} has no jac_dot for the second-order variant")
        s_dot = np.asarray(state.s_dot, dtype=float)
        f = np.asarray(system.drift(s, s_dot), dtype=float)
        G = np.atleast_2d(system.input_matrix(s, s_dot))
    elif variant is Variant.SEPARABLE:
        if state.z is None or z_dot is None:
            raise SpecIncompleteError("separable variant needs z and z_dot (possibly zero)")
        if ineq is not None and ineq.jac_z is None:
            raise SpecIncompleteError(f"constraint {ineq.name!r} has no jac_z for the separable variant")
        f = np.asarray(system.drift(s), dtype=float)
        G = np.atleast_2d(system.input_matrix(s))
    else:
        f = np.asarray(system.drift(s), dtype=float)
        G = np.atleast_2d(system.input_matrix(s))

    blocks_J, blocks_psi, blocks_c = [], [], []
    J_k = np.zeros((0, s.size))
    k = np.zeros(0)
    if ineq is not None:
        if variant is Variant.SEPARABLE:
            z = np.asarray(state.z, dtype=float)
            k = np.atleast_1d(ineq.fn(s, z)) if k_value is None else k_value
            J_k = np.atleast_2d(ineq.jac(s, z))
            psi_k = J_k @ f + np.atleast_2d(ineq.jac_z(s, z)) @ np.asarray(z_dot, dtype=float)
        elif variant is Variant.SECOND_ORDER:
            J_k = np.atleast_2d(ineq.jac(s))
            H = np.atleast_2d(ineq.jac_dot(s, s_dot))
            k = (
                second_order_constraint(ineq.fn(s), J_k, s_dot, zeta_gain)
                if k_value is None
                else k_value
            )
            psi_k = J_k @ f + (zeta_gain * J_k + H) @ s_dot
        else:
            k = np.atleast_1d(ineq.fn(s)) if k_value is None else k_value
            J_k = np.atleast_2d(ineq.jac(s))
            psi_k = J_k @ f
        blocks_J.append(np.hstack([J_k @ G, np.diag(slack_alpha(slack, mu))]))
        blocks_psi.append(psi_k)
        blocks_c.append(k + mu)

    L = 0
    if eq is not None:
        l_val = np.atleast_1d(eq.fn(s))
        J_l = np.atleast_2d(eq.jac(s))
        L = l_val.size
        blocks_J.append(np.hstack([J_l @ G, np.zeros((L, K))]))
        blocks_psi.append(J_l @ f)
        blocks_c.append(l_val)

    J_u = np.vstack(blocks_J)
    psi = np.concatenate(blocks_psi)
    c = np.concatenate(blocks_c)
    n_rows = K + L

    dec = numgeo.decompose(J_u, policy)
    if dec.rank < n_rows:
        raise RankDeficiencyError(
            f"augmented Jacobian has rank {dec.rank} < {n_rows} rows: more constraints are "
            "active than the control input can act on (constant-rank condition violated)"
        )
    T = reference_frame if reference_frame is not None else default_reference_frame(U, K, L)
    if dec.kernel.shape[1] != T.shape[1]:
        raise numgeo.FrameMismatchError(
            f"kernel dimension is {dec.kernel.shape[1]} but reference frame has {T.shape[1]} columns"
        )
    B_u = numgeo.procrustes_align(dec.kernel, T)
    return AugmentedAssembly(
        J_u=J_u,
        psi=psi,
        c=c,
        B_u=B_u,
        J_u_pinv=dec.pinv,
        J_k=J_k,
        k=k,
        mu=mu,
        dim_control=U,
        n_inequality=K,
        rank=dec.rank,
        control_bounds=system.control_bounds,
    )
