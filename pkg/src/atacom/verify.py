"""Oracles and diagnostics for the controller's guarantees.

Nothing in here is used by the controller itself. The functions evaluate the
Lyapunov function and its rate, detect the singular set, check analytic
Jacobians against central differences, integrate closed loops with a fine
fixed-step RK4 and test the input-to-state stability bound.
"""
from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass, replace
from typing import Callable, NamedTuple, Optional

import numpy as np

from . import numgeo
from .controller import ControllerConfig, safe_action
from .manifold import (
    AugmentedState,
    ConstraintSpec,
    ControlAffineSystem,
    SlackFamily,
    SlackModel,
    Variant,
    assemble,
    slack_alpha,
)


class IntegrationFault(RuntimeError):
    """The closed-loop vector field returned NaN or inf."""


class ISSResult(str, enum.Enum):
    HOLDS = "holds"
    VIOLATED = "violated"
    # the gain premise lambda >= eta_J * omega / eta_c is not met
    INCONCLUSIVE = "inconclusive"


def lyapunov_value(c) -> float:
    c = np.asarray(c, dtype=float)
    return 0.5 * float(c @ c)


def lyapunov_rate(c, J_u, lam: float, policy: numgeo.RankPolicy = numgeo.DEFAULT_POLICY) -> float:
    """``-lam * c^T J_u J_u^+ c``; never positive since ``J_u J_u^+`` is a projector."""
    c = np.asarray(c, dtype=float)
    if not np.any(c):
        return 0.0
    J_u = numgeo.as_matrix(J_u)
    projected = J_u @ (numgeo.pseudoinverse(J_u, policy) @ c)
    return -lam * float(c @ projected)


def singularity_check(J_u, c, mu, tol: float = 1e-9) -> bool:
    """True on the singular set: ``J_u^T c = 0``, ``mu = 0`` and ``c != 0``."""
    c = np.asarray(c, dtype=float)
    mu = np.asarray(mu, dtype=float)
    J_u = np.atleast_2d(np.asarray(J_u, dtype=float))
    return bool(
        np.linalg.norm(J_u.T @ c) <= tol
        and np.linalg.norm(mu) <= tol
        and np.linalg.norm(c) > tol
    )


class JacobianCheck(NamedTuple):
    max_error: float
    flagged: bool


def _central_difference(fn, x, h):
    cols = []
    for j in range(x.size):
        e = np.zeros_like(x)
        e[j] = h
        hi, lo = x + e, x - e
        # divide by the step actually taken, not the nominal 2h
        cols.append((np.atleast_1d(fn(hi)) - np.atleast_1d(fn(lo))) / (hi[j] - lo[j]))
    return np.stack(cols, axis=1)


def fd_jacobian_check(
    constraint: ConstraintSpec,
    state,
    h: float = 1e-6,
    z=None,
    tol: float = 1e-5,
) -> JacobianCheck:
    """Compare analytic Jacobians with central differences.

    The error per entry is ``|analytic - numeric| / (1 + |numeric|)``, so a
    Jacobian that is off by a factor of two on unit-size entries reports 0.5.
    With ``z`` given the constraint is treated as ``fn(q, z)`` and ``jac_z``
    is checked as well.
    """
    if not h > 0:
        raise ValueError("step size must be positive")
    s = np.asarray(state, dtype=float)
    if z is None:
        pairs = [(np.atleast_2d(constraint.jac(s)), _central_difference(constraint.fn, s, h))]
    else:
        z = np.asarray(z, dtype=float)
        pairs = [(
            np.atleast_2d(constraint.jac(s, z)),
            _central_difference(lambda q: constraint.fn(q, z), s, h),
        )]
        if constraint.jac_z is not None:
            pairs.append((
                np.atleast_2d(constraint.jac_z(s, z)),
                _central_difference(lambda w: constraint.fn(s, w), z, h),
            ))
    err = max(float(np.max(np.abs(a - n) / (1.0 + np.abs(n)))) for a, n in pairs)
    return JacobianCheck(err, err > tol)


@dataclass
class Trajectory:
    t: np.ndarray
    x: np.ndarray

    def at(self, times) -> np.ndarray:
        """States at the grid points closest to ``times``."""
        idx = np.clip(np.rint(np.asarray(times) / (self.t[1] - self.t[0])).astype(int), 0, len(self.t) - 1)
        return self.x[idx]


def integrate_reference(
    closed_loop: Callable[[float, np.ndarray], np.ndarray],
    x0,
    duration: float,
    dt_fine: float,
) -> Trajectory:
    """Classical fixed-step RK4 of ``x' = closed_loop(t, x)``."""
    if not dt_fine > 0 or not duration >= 0:
        raise ValueError("need dt_fine > 0 and duration >= 0")
    n = int(round(duration / dt_fine))
    x = np.array(x0, dtype=float)
    xs = np.empty((n + 1, x.size))
    xs[0] = x
    h = dt_fine
    for i in range(n):
        t = i * h
        k1 = closed_loop(t, x)
        k2 = closed_loop(t + h / 2, x + h / 2 * k1)
        k3 = closed_loop(t + h / 2, x + h / 2 * k2)
        k4 = closed_loop(t + h, x + h * k3)
        x = x + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(x)):
            raise IntegrationFault(f"non-finite state at t = {t + h:.6g}")
        xs[i + 1] = x
    return Trajectory(np.arange(n + 1) * h, xs)


def slack_closed_loop(
    system: ControlAffineSystem,
    constraint: ConstraintSpec,
    slack: SlackModel,
    config: ControllerConfig,
    agent_action: Optional[Callable[[float, np.ndarray], np.ndarray]] = None,
    disturbance: Optional[Callable[[float], np.ndarray]] = None,
):
    """Continuous closed loop on ``x = [s, mu]`` for a first-order system.

    Unlike the sampled controller, the slack is a genuine state here:
    ``mu' = alpha(mu) u_mu``. ``mu`` is clamped at zero before ``alpha`` is
    evaluated so tiny negative overshoots from the integrator do not raise.
    ``disturbance(t)`` is added to ``s'``. Control bounds are ignored.
    """
    S = system.dim_state

    def split(x):
        return x[:S], np.maximum(x[S:], 0.0)

    def field(t, x):
        s, mu = split(x)
        assembly = assemble(
            Variant.FIRST_ORDER, system, constraint, slack, AugmentedState(s=s, mu=mu),
            reference_frame=config.reference_frame, policy=config.rank_policy,
        )
        a = np.zeros(assembly.B_u.shape[1]) if agent_action is None else agent_action(t, x)
        act = safe_action(replace(assembly, control_bounds=None), a, config)
        s_dot = system.drift(s) + np.atleast_2d(system.input_matrix(s)) @ act.u_s
        if disturbance is not None:
            s_dot = s_dot + disturbance(t)
        mu_dot = slack_alpha(slack, mu) * act.u_mu
        return np.concatenate([s_dot, mu_dot])

    field.split = split
    return field


def residual_trajectory(constraint: ConstraintSpec, traj: Trajectory, dim_state: int) -> np.ndarray:
    """``c(t) = k(s(t)) + mu(t)`` along a trajectory of ``[s, mu]``."""
    return np.array([np.atleast_1d(constraint.fn(x[:dim_state])) + x[dim_state:] for x in traj.x])


def slack_lower_bound(model: SlackModel, mu0, u_min: float, t, mu_max: Optional[float] = None) -> np.ndarray:
    """``mu0 * exp(L * u_min * t)`` with ``L`` the Lipschitz constant of alpha on ``[0, mu_max]``."""
    mu0 = np.asarray(mu0, dtype=float)
    L = model.lipschitz(float(np.max(mu0)) if mu_max is None else mu_max)
    return mu0 * np.exp(L * u_min * np.asarray(t, dtype=float))


def slack_decay_exact(model: SlackModel, mu0: float, u_min: float, t) -> np.ndarray:
    """Closed-form solution of ``mu' = alpha(mu) * u_min`` (``u_min < 0``)."""
    t = np.asarray(t, dtype=float)
    b = model.beta
    if model.family is SlackFamily.LINEAR:
        return mu0 * np.exp(b * u_min * t)
    # d/dt log(1 - exp(-b mu)) = b * u_min
    return -np.log1p(-(1.0 - math.exp(-b * mu0)) * np.exp(b * u_min * t)) / b


def iss_bound_check(
    t,
    c_traj,
    omega: float,
    lam: float,
    eta_J: float,
    eta_c: float,
    margin: float = 0.05,
) -> ISSResult:
    """Check ``sup ||c(t)|| <= eta_c + margin`` once ``t >= 5 / lam``."""
    if lam * eta_c < eta_J * omega * (1 - 1e-12):
        return ISSResult.INCONCLUSIVE
    t = np.asarray(t, dtype=float)
    norms = np.linalg.norm(np.atleast_2d(np.asarray(c_traj, dtype=float).T).T, axis=1)
    after = norms[t >= 5.0 / lam]
    if after.size == 0:
        return ISSResult.INCONCLUSIVE
    return ISSResult.HOLDS if float(after.max()) <= eta_c + margin else ISSResult.VIOLATED


@dataclass
class DiagnosticsReport:
    V: float
    V_dot_analytic: float
    V_dot_numeric: float
    max_violation: float
    singular: bool
    rank_ok: bool
    mu_norm: float

    def __post_init__(self):
        for name in ("V", "V_dot_analytic", "V_dot_numeric", "max_violation", "mu_norm"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"diagnostic {name} is not finite")

    def to_dict(self) -> dict:
        return asdict(self)


def diagnose(assembly, lam: float, V_dot_numeric: float = 0.0,
             policy: numgeo.RankPolicy = numgeo.DEFAULT_POLICY) -> DiagnosticsReport:
    return DiagnosticsReport(
        V=lyapunov_value(assembly.c),
        V_dot_analytic=lyapunov_rate(assembly.c, assembly.J_u, lam, policy),
        V_dot_numeric=float(V_dot_numeric),
        max_violation=float(np.max(assembly.k)) if assembly.k.size else -math.inf,
        singular=singularity_check(assembly.J_u, assembly.c, assembly.mu),
        rank_ok=assembly.rank == assembly.n_rows,
        mu_norm=float(np.linalg.norm(assembly.mu)),
    )


# -- property batteries --------------------------------------------------------
class BatteryResult(NamedTuple):
    name: str
    passed: bool
    detail: str


def _battery_kernel(rng, n):
    worst = 0.0
    for _ in range(n):
        N = int(rng.integers(2, 9))
        K = int(rng.integers(1, N))
        J = rng.standard_normal((K, N))
        B = numgeo.nullspace_basis(J)
        worst = max(worst, float(np.abs(J @ B).max()), float(np.abs(B.T @ B - np.eye(B.shape[1])).max()))
    return worst <= 1e-10, f"max deviation {worst:.2e}"


def _battery_pinv(rng, n):
    worst = 0.0
    for _ in range(n):
        m, k = (int(v) for v in rng.integers(1, 7, 2))
        r = int(rng.integers(0, min(m, k) + 1))
        M = rng.standard_normal((m, r)) @ rng.standard_normal((r, k))
        P = numgeo.pseudoinverse(M)
        scale = 1.0 + np.abs(M).max() * max(1.0, np.abs(P).max()) ** 2
        errs = [M @ P @ M - M, P @ M @ P - P, (M @ P).T - M @ P, (P @ M).T - P @ M]
        worst = max(worst, max(float(np.abs(e).max()) for e in errs) / scale)
    return worst <= 1e-10, f"max relative identity error {worst:.2e}"


def kernel_transfer_counterexamples(rng, n: int) -> int:
    """Random ``(X, x)`` pairs where ``x^T X X^+ x ~ 0`` but ``X^T x`` is not small.

    Half of the vectors are built inside the left kernel of ``X`` so the
    premise is actually exercised.
    """
    bad = 0
    for i in range(n):
        m = int(rng.integers(1, 7))
        k = int(rng.integers(m, 8))
        r = int(rng.integers(0, m + 1))
        X = rng.standard_normal((m, r)) @ rng.standard_normal((r, k)) if r else np.zeros((m, k))
        x = rng.standard_normal(m)
        if i % 2 == 0 and r < m:
            U, _, _ = np.linalg.svd(X)
            x = U[:, r:] @ rng.standard_normal(m - r)
        quad = abs(float(x @ X @ numgeo.pseudoinverse(X) @ x))
        if quad <= 1e-12 * float(x @ x):
            if np.linalg.norm(X.T @ x) > 1e-8 * max(np.linalg.norm(X, 2), 1e-300) * np.linalg.norm(x):
                bad += 1
    return bad


def _battery_smooth(rng, n):
    worst = 0.0
    for _ in range(n):
        N = int(rng.integers(3, 8))
        K = int(rng.integers(1, N))
        J = rng.standard_normal((K, N))
        T = numgeo.identity_frame(N, N - K)
        B = numgeo.nullspace_basis(J)
        ref = numgeo.procrustes_align(B, T)
        R, _ = np.linalg.qr(rng.standard_normal((N - K, N - K)))
        worst = max(worst, float(np.abs(numgeo.procrustes_align(B @ R, T) - ref).max()))
    return worst <= 1e-10, f"max change under re-parametrised raw basis {worst:.2e}"


def _battery_slack(rng, n):
    worst = np.inf
    t = np.linspace(0.0, 10.0, 1001)
    for family in SlackFamily:
        for beta in (0.3, 1.0, 3.0, 10.0):
            model = SlackModel(family, beta)
            mu = slack_decay_exact(model, 0.5, -1.0, t)
            gap = float(np.min(mu - slack_lower_bound(model, 0.5, -1.0, t)))
            worst = min(worst, gap)
            if not np.all(mu > 0):
                return False, f"{family.value} beta={beta}: slack reached zero"
    return worst >= -1e-6, f"min gap to lower bound {worst:.2e}"


def _static_constraints():
    from .envs.constraints import box_bounds, disk_avoidance
    from .manifold import stack_constraints

    return stack_constraints([disk_avoidance((0.5, 0.5), 0.15), box_bounds([0, 0], [1, 1])])


def _battery_tangency(rng, n):
    from .controller import atacom_step
    from .manifold import single_integrator

    system = single_integrator(2)
    constraint = _static_constraints()
    slack = SlackModel(SlackFamily.EXPONENTIAL, 4.0)
    config = ControllerConfig()
    worst = 0.0
    for _ in range(n):
        s = rng.uniform(0.0, 1.0, 2)
        if np.max(constraint.fn(s)) >= 0:
            continue
        act = atacom_step(system, constraint, slack, s, rng.uniform(-1, 1, 2), config)
        if not act.saturated:
            worst = max(worst, act.residual)
    return worst <= 1e-8, f"max tangency residual {worst:.2e}"


def contraction_start(rng, constraint, lo=0.05, hi=0.95, c_max=0.5, mu_min=0.05):
    """Random ``[s, mu]`` with ``||c|| <= c_max`` and every slack at least ``mu_min``."""
    while True:
        s = rng.uniform(lo, hi, 2)
        d = rng.standard_normal(constraint.dim)
        d *= rng.uniform(0.05, c_max) / np.linalg.norm(d)
        mu = -np.atleast_1d(constraint.fn(s)) + d
        if mu.min() >= mu_min:
            return np.concatenate([s, mu])


def _battery_contraction(rng, n):
    from .manifold import single_integrator

    system = single_integrator(2)
    constraint = _static_constraints()
    slack = SlackModel(SlackFamily.EXPONENTIAL, 4.0)
    config = ControllerConfig(lam=10.0, drift_clipping=False)
    field_ = slack_closed_loop(system, constraint, slack, config)
    worst = -np.inf
    for _ in range(n):
        x0 = contraction_start(rng, constraint)
        traj = integrate_reference(field_, x0, 5.0 / config.lam, 1e-3)
        c = np.linalg.norm(residual_trajectory(constraint, traj, 2), axis=1)
        ratio = c / (c[0] * np.exp(-0.9 * config.lam * traj.t))
        worst = max(worst, float(ratio.max()))
    return worst <= 1.0 + 1e-9, f"max ||c(t)|| / (||c(0)|| exp(-0.9 lam t)) = {worst:.4f}"


def _battery_jacobians(rng, n):
    from .envs import constraints as shipped

    checks = [
        (shipped.disk_avoidance((0.5, 0.5), 0.15), None, 2),
        (shipped.box_bounds([0, 0], [1, 1]), None, 2),
        (shipped.circle_equality(1.0), None, 2),
        (shipped.inverted_circle(1.0), None, 2),
        (shipped.cosine_band(), None, 2),
        (shipped.moving_disks(3, 0.15), 6, 2),
    ]
    worst = 0.0
    for spec, zdim, sdim in checks:
        for _ in range(n):
            s = rng.uniform(-1, 1, sdim)
            z = None if zdim is None else rng.uniform(-1, 1, zdim)
            worst = max(worst, fd_jacobian_check(spec, s, z=z).max_error)
    return worst <= 1e-5, f"max relative Jacobian error {worst:.2e}"


def iss_run(rng, omega: float, eta_c: float = 0.05, duration: float = 6.0, dim: int = 1):
    """One disturbed closed-loop run at the gain the stability premise asks for."""
    from .envs.constraints import box_bounds
    from .manifold import ConstraintSpec, single_integrator

    if dim == 1:
        constraint = ConstraintSpec(lambda s: np.array([s[0]]), lambda s: np.eye(1), 1, name="k=s")
        eta_J = 1.0
        s0 = rng.uniform(-1.0, 0.3, 1)
    else:
        constraint = _static_constraints()
        probes = rng.uniform(-0.5, 1.5, (2000, 2))
        eta_J = max(np.linalg.norm(constraint.jac(p), 2) for p in probes)
        s0 = rng.uniform(0.05, 0.95, 2)
    lam = eta_J * omega / eta_c
    system = single_integrator(dim)
    slack = SlackModel(SlackFamily.EXPONENTIAL, 4.0)
    config = ControllerConfig(lam=lam, drift_clipping=False)
    period = 0.01
    n_pieces = int(np.ceil(duration / period)) + 1
    directions = rng.standard_normal((n_pieces, dim))
    pieces = omega * directions / np.linalg.norm(directions, axis=1, keepdims=True)

    def disturbance(t):
        return pieces[min(int(t / period + 1e-9), n_pieces - 1)]

    mu0 = np.maximum(-np.atleast_1d(constraint.fn(s0)), 0.0) + rng.uniform(0.05, 0.5, constraint.dim)
    field_ = slack_closed_loop(system, constraint, slack, config, disturbance=disturbance)
    traj = integrate_reference(field_, np.concatenate([s0, mu0]), duration, 1e-3)
    observed_eta_J = max(np.linalg.norm(constraint.jac(x[:dim]), 2) for x in traj.x[::10])
    c = residual_trajectory(constraint, traj, dim)
    if observed_eta_J > eta_J * (1 + 1e-9):
        return ISSResult.INCONCLUSIVE, c, traj.t, lam
    return iss_bound_check(traj.t, c, omega, lam, eta_J, eta_c), c, traj.t, lam


def _battery_iss(rng, n):
    outcomes = [iss_run(rng, omega)[0] for omega in (0.05, 0.1) for _ in range(n)]
    held = sum(o is ISSResult.HOLDS for o in outcomes)
    return held == len(outcomes), f"bound held in {held}/{len(outcomes)} runs"


BATTERIES = {
    "kernel_basis": (_battery_kernel, 1000),
    "pseudoinverse": (_battery_pinv, 1000),
    "kernel_transfer": (lambda rng, n: (kernel_transfer_counterexamples(rng, n) == 0, "x^T X X^+ x = 0 implies X^T x = 0"), 1000),
    "smooth_basis": (_battery_smooth, 200),
    "slack_positivity": (_battery_slack, 1),
    "tangency": (_battery_tangency, 300),
    "contraction": (_battery_contraction, 5),
    "jacobians": (_battery_jacobians, 50),
    "iss": (_battery_iss, 3),
}


def run_batteries(seed: int = 0, names=None) -> list[BatteryResult]:
    out = []
    for name, (fn, n) in BATTERIES.items():
        if names and name not in names:
            continue
        rng = np.random.default_rng([seed, len(out)])
        passed, detail = fn(rng, n)
        out.append(BatteryResult(name, bool(passed), detail))
    return out
