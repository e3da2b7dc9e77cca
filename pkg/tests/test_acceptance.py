"""End-to-end acceptance checks, one test per criterion.

Each test prints a single ``PASS`` or ``FAIL`` line with the measured numbers,
whatever pytest's capture settings are, and then asserts.
"""
import math

import numpy as np
import pytest

from atacom.controller import ControllerConfig, atacom_step
from atacom.envs import (
    ConstantPolicy,
    Env2DStatic,
    EnvCircleTrack,
    EnvDoubleIntegrator,
    UniformRandomPolicy,
    run_crossing,
)
from atacom.envs.constraints import cosine_band, inverted_circle
from atacom.harness import ExperimentConfig, run_experiment, sweep
from atacom.manifold import SlackModel, single_integrator, slack_alpha
from atacom.numgeo import identity_frame, nullspace_basis, smooth_basis
from atacom.verify import (
    ISSResult,
    contraction_start,
    integrate_reference,
    iss_run,
    kernel_transfer_counterexamples,
    residual_trajectory,
    slack_closed_loop,
    slack_lower_bound,
)

FAMILIES = ("linear", "exp")
BETAS = (0.3, 1.0, 3.0, 10.0)


@pytest.fixture
def report(capsys):
    def emit(number, title, ok, detail):
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} criterion {number:2d} {title}: {detail}")
        assert ok, detail
    return emit


@pytest.fixture(scope="module")
def static_grid():
    axes = {"slack.family": list(FAMILIES), "slack.beta": list(BETAS)}
    return {
        policy: sweep(ExperimentConfig().with_overrides({"policy.id": policy, "run.episodes": 25}), axes)
        for policy in ("attractor", "uniform-random")
    }


def test_01_static_safety(static_grid, report):
    worst = -math.inf
    episodes = 0
    for cells in static_grid.values():
        for cell in cells:
            for record in cell.result.records:
                worst = max(worst, record.max_constraint)
                episodes += 1
    report(1, "static zero-violation", episodes == 400 and worst <= 1e-3,
           f"{episodes} episodes, worst max_i k_i = {worst:.3e}")


def test_02_conservatism_ranking(static_grid, report):
    returns = {(c.overrides["slack.family"], c.overrides["slack.beta"]): c.result.summary["mean_return"]
               for c in static_grid["attractor"]}
    ranked = sorted(returns, key=returns.get, reverse=True)
    lowest = ranked[-1]
    others = [v for k, v in returns.items() if k != ("linear", 0.3)]
    ok = lowest == ("linear", 0.3) and returns[("linear", 0.3)] < min(others) and ("exp", 10.0) in ranked[:2]
    table = ", ".join(f"{f} {b:g}: {returns[(f, b)]:.2f}" for f, b in ranked)
    report(2, "conservatism ranking", ok, table)


def test_03_observer_ordering(report):
    base = ExperimentConfig().with_overrides({
        "env.id": "dynamic", "env.n_obstacles": 2, "env.speed_scale": 0.5, "env.motion": "fixed",
        "policy.gain": 5.0, "run.episodes": 200,
    })
    rate = {c.overrides["observer.mode"]: c.result.summary["success_rate"]
            for c in sweep(base, {"observer.mode": ["exact", "fd", "none"]})}
    ok = rate["exact"] >= rate["fd"] >= rate["none"] and rate["exact"] >= 0.95
    report(3, "observer ordering", ok,
           f"success exact {rate['exact']:.3f} >= fd {rate['fd']:.3f} >= none {rate['none']:.3f} (200 episodes each)")


def test_04_tangent_basis_closed_forms(report):
    B = nullspace_basis([[1.0, 1.0]])[:, 0]
    expected = np.array([1.0, -1.0]) / math.sqrt(2.0)
    err_diag = min(np.abs(B - expected).max(), np.abs(B + expected).max())
    rng = np.random.default_rng(4)
    worst = 0.0
    for alpha in rng.uniform(1e-3, 50.0, 100):
        B = nullspace_basis([[1.0, alpha]])[:, 0]
        closed = np.array([-alpha, 1.0]) / math.sqrt(1.0 + alpha**2)
        worst = max(worst, min(np.abs(B - closed).max(), np.abs(B + closed).max()))
    report(4, "tangent basis closed forms", err_diag <= 1e-12 and worst <= 1e-10,
           f"[1 1] kernel error {err_diag:.1e}, worst over 100 alphas {worst:.1e}")


def _augmented_jacobian(spec, slack, s):
    mu = np.maximum(-spec.fn(s), 0.0)
    return np.hstack([spec.jac(s), np.diag(slack_alpha(slack, mu))])


def test_05_smooth_frame_continuity(report):
    T = identity_frame(3, 2)
    circle = inverted_circle(1.0)
    theta = np.linspace(0.0, 2.0 * np.pi, 10_001)
    step = theta[1] - theta[0]
    worst = {}
    for family in FAMILIES:
        slack = SlackModel(family, 1.0)
        prev, change = None, 0.0
        for t in theta:
            # on the manifold: slack equals the distance outside the circle
            B = smooth_basis(_augmented_jacobian(circle, slack, 1.5 * np.array([np.cos(t), np.sin(t)])), T)
            if prev is not None:
                change = max(change, float(np.linalg.norm(B - prev)))
            prev = B
        worst[family] = change
    band = cosine_band()
    prev, raw_jumps = None, 0
    for s1 in np.linspace(-1.0, 1.0, 10_001):
        R = nullspace_basis(_augmented_jacobian(band, SlackModel("linear", 1.0), np.array([s1, 0.3])))
        if prev is not None and np.linalg.norm(R - prev) >= 1.0:
            raw_jumps += 1
        prev = R
    ok = max(worst.values()) <= 10 * step and raw_jumps >= 1
    report(5, "smooth frame continuity", ok,
           f"max smooth change / angle step: linear {worst['linear'] / step:.2f}, exp {worst['exp'] / step:.2f}; "
           f"raw basis jumps >= 1.0 on the cosine band: {raw_jumps}")


def test_06_contraction_rate(report):
    constraint = Env2DStatic().constraint
    system = single_integrator(2)
    config = ControllerConfig(lam=10.0, drift_clipping=False)
    slack = SlackModel("exp", 4.0)
    field = slack_closed_loop(system, constraint, slack, config)
    rng = np.random.default_rng(6)
    worst_ratio, worst_rise = 0.0, -math.inf
    for _ in range(100):
        x0 = contraction_start(rng, constraint)
        traj = integrate_reference(field, x0, 5.0 / config.lam, 1e-3)
        c = np.linalg.norm(residual_trajectory(constraint, traj, 2), axis=1)
        worst_ratio = max(worst_ratio, float(np.max(c / (c[0] * np.exp(-0.9 * config.lam * traj.t)))))
        # the 100 Hz loop: explicit steps of the same closed loop
        x = x0.copy()
        V = [0.5 * c[0] ** 2]
        for _ in range(50):
            x = x + 0.01 * field(0.0, x)
            x[2:] = np.maximum(x[2:], 0.0)
            r = constraint.fn(x[:2]) + x[2:]
            V.append(0.5 * float(r @ r))
        worst_rise = max(worst_rise, float(np.max(np.diff(V))))
    ok = worst_ratio <= 1.0 and worst_rise <= 1e-8
    report(6, "contraction rate", ok,
           f"max ||c(t)|| / (||c0|| e^(-0.9 lam t)) = {worst_ratio:.4f}, max per-step V increase {worst_rise:.2e}")


def test_07_kernel_transfer(report):
    bad = kernel_transfer_counterexamples(np.random.default_rng(7), 1000)
    report(7, "x^T X X^+ x = 0 implies X^T x = 0", bad == 0, f"{bad} counterexamples in 1000 cases")


def test_08_slack_positivity(report):
    worst = math.inf
    mu0, u_min = 0.5, -1.0
    positive = True
    for family in FAMILIES:
        for beta in BETAS:
            model = SlackModel(family, beta)
            dt = min(1e-3, 0.05 / model.lipschitz(mu0))
            traj = integrate_reference(lambda t, x: slack_alpha(model, np.maximum(x, 0.0)) * u_min, [mu0], 10.0, dt)
            gap = traj.x[:, 0] - slack_lower_bound(model, mu0, u_min, traj.t)
            worst = min(worst, float(gap.min()))
            positive &= bool(np.all(traj.x > 0.0))
    report(8, "slack positivity", positive and worst >= -1e-6, f"min (mu(t) - lower bound) over 10 s = {worst:.2e}")


def test_09_iss_bound(report):
    rng = np.random.default_rng(9)
    lines, ok = [], True
    for dim in (1, 2):
        for omega in (0.05, 0.1):
            held, peak = 0, 0.0
            for _ in range(50):
                result, c, t, lam = iss_run(rng, omega, dim=dim)
                held += result is ISSResult.HOLDS
                peak = max(peak, float(np.linalg.norm(c, axis=1)[t >= 5.0 / lam].max()))
            ok &= held == 50
            lines.append(f"{dim}D omega={omega}: {held}/50, sup ||c|| {peak:.4f}")
    report(9, "ISS bound", ok, "; ".join(lines))


def test_10_extensions(report):
    slack = SlackModel()
    worst_k, worst_lifted = -math.inf, -math.inf
    for seed in range(25):
        env = EnvDoubleIntegrator()
        policy = UniformRandomPolicy(2)
        obs = env.reset(seed)
        policy.reset(seed)
        done = False
        while not done:
            act = atacom_step(env.system, env.constraints, slack, env.position, policy(obs), ControllerConfig(),
                              variant=env.variant, s_dot=env.velocity)
            obs, _, done, _ = env.step(act.u_s)
            worst_lifted = max(worst_lifted, float(env.lifted_constraint_values().max()))
        worst_k = max(worst_k, env.max_violation)
    worst_l = 0.0
    for seed in range(10):
        env = EnvCircleTrack()
        policy = ConstantPolicy([1.0]) if seed % 2 else UniformRandomPolicy(1)
        obs = env.reset(seed)
        policy.reset(seed)
        done = False
        while not done:
            act = atacom_step(env.system, env.constraints, slack, env.position, policy(obs),
                              ControllerConfig(lam=25.0), variant=env.variant)
            obs, _, done, _ = env.step(act.u_s)
        assert env.t == 1000
        worst_l = max(worst_l, env.max_tracking_error)
    ok = worst_k <= 1e-3 and worst_lifted <= 1e-3 and worst_l <= 1e-3
    report(10, "second-order and equality extensions", ok,
           f"double integrator max k {worst_k:.3e}, max lifted row {worst_lifted:.3e}; "
           f"circle track max |l| over 10 s {worst_l:.3e}")


def test_11_drift_clipping_recovery(report):
    clipped = [run_crossing(seed, True) for seed in range(10)]
    unclipped = [run_crossing(seed, False) for seed in range(10)]
    fast = np.array([r.recovery_steps for r in clipped])
    slow = np.array([r.recovery_steps for r in unclipped])
    ratio = slow.mean() / max(fast.mean(), 1e-12)
    safe = max(r.max_violation for r in clipped + unclipped) <= 1e-3
    ok = ratio >= 2.0 and np.all(fast <= slow) and safe
    report(11, "drift clipping recovery", ok,
           f"mean recovery clipped {fast.mean():.1f} vs unclipped {slow.mean():.1f} steps (x{ratio:.2f}); "
           f"per seed {fast.tolist()} vs {slow.tolist()}")


def test_12_determinism(report):
    configs = [
        ExperimentConfig().with_overrides({"run.episodes": 5}),
        ExperimentConfig().with_overrides({"run.episodes": 5, "policy.id": "uniform-random", "slack.family": "linear"}),
        ExperimentConfig().with_overrides({"env.id": "dynamic", "env.motion": "random", "observer.mode": "fd",
                                           "run.episodes": 5}),
    ]
    same = [run_experiment(c).summary_json() == run_experiment(c).summary_json() for c in configs]
    report(12, "determinism", all(same), f"byte-identical summaries for {sum(same)}/{len(same)} configs")
