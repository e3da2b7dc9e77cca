import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from atacom.controller import ActionError, ControllerConfig, atacom_step, drift_clip, safe_action
from atacom.envs import Env2DDynamic, Env2DStatic, EnvCircleTrack, EnvDoubleIntegrator
from atacom.envs import constraints as shipped
from atacom.manifold import (
    AugmentedState,
    ConstraintSpec,
    SlackModel,
    Variant,
    assemble,
    manifold_constraint_values,
    single_integrator,
    slack_reset,
)
from atacom.verify import lyapunov_rate

LINEAR_K = ConstraintSpec(lambda s: np.array([s[0]]), lambda s: np.eye(1), 1, name="k=s")


def scalar_assembly(s, mu, beta=1.0, bounds=None):
    system = single_integrator(1, bounds)
    return assemble(
        Variant.FIRST_ORDER, system, LINEAR_K, SlackModel("exp", beta),
        AugmentedState(s=np.array([s]), mu=np.array([mu])),
    )


class TestDriftClip:
    def test_examples(self):
        np.testing.assert_array_equal(drift_clip([0.0]), [0.0])
        np.testing.assert_array_equal(drift_clip([-0.5, 0.3]), [0.0, 0.3])

    def test_equality_rows_untouched(self):
        np.testing.assert_array_equal(drift_clip([-0.5, -0.2, 0.4], n_inequality=1), [0.0, -0.2, 0.4])


class TestSafeAction:
    def test_all_terms_vanish(self):
        act = safe_action(scalar_assembly(-1.0, 1.0), [0.0], ControllerConfig(lam=1.0))
        np.testing.assert_array_equal(act.u_s, [0.0])
        np.testing.assert_array_equal(act.u_mu, [0.0])
        assert not act.saturated

    def test_scalar_tangential_term(self):
        # kernel of [1, alpha] is +-[alpha, -1]/sqrt(1 + alpha^2); aligning with
        # the reference axis [1, 0] picks the sign with a positive plant entry
        alpha = math.e - 1.0
        norm = math.sqrt(1.0 + alpha**2)
        act = safe_action(scalar_assembly(-1.0, 1.0), [1.0], ControllerConfig(lam=1.0))
        assert act.u_s[0] == pytest.approx(alpha / norm, abs=1e-12)
        assert act.u_mu[0] == pytest.approx(-1.0 / norm, abs=1e-12)
        assert act.u_s[0] == pytest.approx(0.8642887761769451, abs=1e-12)

    def test_pure_contraction(self):
        # mu = 0 gives alpha = 0, so J_u = [1, 0] and J_u^+ c = [0.1, 0]
        a = scalar_assembly(0.1, 0.0)
        np.testing.assert_allclose(a.J_u, [[1.0, 0.0]])
        act = safe_action(a, [0.0], ControllerConfig(lam=2.0))
        assert act.u_s[0] == pytest.approx(-0.2, abs=1e-15)
        assert act.u_mu[0] == 0.0

    def test_doubling_gain_only_changes_contraction(self):
        a = scalar_assembly(0.1, 0.3)
        one = safe_action(a, [0.7], ControllerConfig(lam=1.0))
        two = safe_action(a, [0.7], ControllerConfig(lam=2.0))
        u1 = np.concatenate([one.u_s, one.u_mu])
        u2 = np.concatenate([two.u_s, two.u_mu])
        np.testing.assert_allclose(u2 - u1, -a.J_u_pinv @ a.c, atol=1e-15)

    @pytest.mark.parametrize("bad", [[np.nan], [np.inf], [1.0, 0.0]])
    def test_bad_action(self, bad):
        with pytest.raises(ActionError):
            safe_action(scalar_assembly(-1.0, 1.0), bad, ControllerConfig())

    def test_config_validation(self):
        with pytest.raises(ValueError):
            ControllerConfig(lam=0.0)
        with pytest.raises(ValueError):
            ControllerConfig(zeta_gain=-1.0)
        with pytest.raises(ValueError):
            ControllerConfig(reference_frame=np.ones((3, 2)))

    def test_saturation_keeps_tangency(self):
        # A large agent action is shrunk along the kernel, so the requested
        # constraint velocity is still met exactly.
        env = Env2DStatic(v_max=0.3)
        s = np.array([0.5, 0.3])
        act = atacom_step(env.system, env.constraints, SlackModel(), s, [1.0, 1.0], ControllerConfig())
        assert act.saturated
        assert np.all(np.abs(act.u_s) <= 0.3 + 1e-15)
        assert act.residual <= 1e-10


class TestAtacomStep:
    def test_far_from_obstacle_follows_action(self):
        disk = shipped.disk_avoidance((0.0, 0.0), 0.15)
        act = atacom_step(single_integrator(2, 1.0), disk, SlackModel("exp", 4.0), [1.5, 0.0], [1.0, 0.0], ControllerConfig())
        np.testing.assert_allclose(act.u_s, [1.0, 0.0], atol=1e-2)

    def test_no_outward_velocity_on_boundary(self):
        disk = shipped.disk_avoidance((0.0, 0.0), 0.5)
        system = single_integrator(2)
        s = np.array([0.5, 0.0])
        for action in ([0.0, 1.0], [1.0, 1.0], [-1.0, -1.0], [-1.0, 0.0]):
            act = atacom_step(system, disk, SlackModel(), s, action, ControllerConfig())
            assert disk.jac(s) @ act.u_s <= 1e-8

    def test_pure(self):
        env = Env2DStatic()
        args = (env.system, env.constraints, SlackModel(), np.array([0.3, 0.62]), np.array([0.4, -0.9]), ControllerConfig())
        a, b = atacom_step(*args), atacom_step(*args)
        np.testing.assert_array_equal(a.u_s, b.u_s)
        np.testing.assert_array_equal(a.u_mu, b.u_mu)


def _variant_case(name, rng):
    """An on-manifold state for each problem variant, as atacom_step kwargs."""
    if name == "first_order":
        env = Env2DStatic()
        env.reset(int(rng.integers(1 << 30)))
        return env, {"s": env.position}
    if name == "separable":
        env = Env2DDynamic(n_obstacles=2, motion="random")
        env.reset(int(rng.integers(1 << 30)))
        inputs = env.manifold_inputs()
        return env, {"s": inputs["s"], "z": inputs["z"], "z_dot": inputs["z_dot"]}
    if name == "second_order":
        env = EnvDoubleIntegrator()
        env.reset(int(rng.integers(1 << 30)))
        env.velocity = rng.uniform(-0.5, 0.5, 2)
        while env.lifted_constraint_values().max() >= 0:
            env.velocity *= 0.5
        return env, {"s": env.position, "s_dot": env.velocity}
    env = EnvCircleTrack()
    env.reset(int(rng.integers(1 << 30)))
    return env, {"s": env.position}


@pytest.mark.parametrize("variant", ["first_order", "separable", "second_order", "equality"])
@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), clip=st.booleans())
def test_tangency_in_every_variant(variant, seed, clip):
    rng = np.random.default_rng(seed)
    env, kwargs = _variant_case(variant, rng)
    action = rng.uniform(-1.0, 1.0, env.action_dim)
    s = kwargs.pop("s")
    act = atacom_step(
        env.system, env.constraints, SlackModel(), s, action, ControllerConfig(drift_clipping=clip),
        variant=env.variant, **kwargs,
    )
    assert not np.any(act.assembly.c[: act.assembly.n_inequality] > 1e-6 + 1e-15)
    if not act.saturated:
        assert act.residual <= 1e-8
    assert np.all(np.abs(act.u_s) <= 1.0 + 1e-12) or env.system.control_bounds is None


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_lyapunov_rate_matches_finite_difference(seed):
    rng = np.random.default_rng(seed)
    env = Env2DStatic()
    system = dataclasses.replace(env.system, control_bounds=None)
    slack = SlackModel("exp", 4.0)
    lam = 10.0
    config = ControllerConfig(lam=lam, drift_clipping=False)
    s = rng.uniform(0.1, 0.9, 2)
    mu = np.maximum(-env.constraint.fn(s), 0.0) + rng.uniform(0.02, 0.2, 5)
    a = assemble(Variant.FIRST_ORDER, system, env.constraints, slack, AugmentedState(s=s, mu=mu))
    act = safe_action(a, rng.uniform(-1, 1, 2), config)
    s_dot, mu_dot = act.u_s, slack.alpha(mu) * act.u_mu

    def V(x):
        c = env.constraint.fn(x[:2]) + x[2:]
        return 0.5 * c @ c

    x, dx, h = np.concatenate([s, mu]), np.concatenate([s_dot, mu_dot]), 1e-6
    numeric = (V(x + h * dx) - V(x - h * dx)) / (2 * h)
    analytic = lyapunov_rate(a.c, a.J_u, lam)
    assert analytic <= 0.0
    assert numeric == pytest.approx(analytic, abs=1e-8 + 1e-6 * abs(analytic))


def test_random_switching_keeps_invariants():
    env = Env2DStatic()
    slack = SlackModel()
    config = ControllerConfig()
    rng = np.random.default_rng(0)
    for seed in range(10):
        env.reset(seed)
        for _ in range(300):
            s = env.position.copy()
            k = manifold_constraint_values(env.variant, env.constraints, AugmentedState(s=s, mu=np.zeros(0)))
            act = atacom_step(env.system, env.constraints, slack, s, rng.uniform(-1, 1, 2), config)
            if not act.saturated:
                assert act.residual <= 1e-8
            np.testing.assert_allclose(act.assembly.mu, slack_reset(slack, k))
            env.step(act.u_s)
        assert env.max_violation <= 1e-3
