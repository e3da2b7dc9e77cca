import numpy as np
import pytest

from atacom.controller import ControllerConfig, atacom_step
from atacom.envs import (
    AttractorPolicy,
    ConstantPolicy,
    Env2DDynamic,
    Env2DStatic,
    EnvCircleTrack,
    EnvDoubleIntegrator,
    EnvFault,
    Motion,
    ObserverMode,
    UniformRandomPolicy,
    VelocityObserver,
    attractor_policy,
    crossing_layout,
    observe_velocity,
)
from atacom.manifold import SlackModel

ENV_TYPES = [Env2DStatic, Env2DDynamic, EnvDoubleIntegrator, EnvCircleTrack]


def rollout(env, policy, seed, config=ControllerConfig(), slack=SlackModel()):
    obs = env.reset(seed)
    policy.reset(seed)
    done = False
    while not done:
        inputs = env.manifold_inputs()
        act = atacom_step(
            env.system, env.constraints, slack, inputs["s"], policy(obs), config,
            variant=env.variant, z=inputs.get("z"), z_dot=inputs.get("z_dot"), s_dot=inputs.get("s_dot"),
        )
        obs, _, done, _ = env.step(act.u_s)
    return env


class TestReset:
    @pytest.mark.parametrize("cls", ENV_TYPES)
    def test_same_seed_same_observation(self, cls):
        a, b = cls().reset(7), cls().reset(7)
        assert a.keys() == b.keys()
        for key in a:
            np.testing.assert_array_equal(a[key], b[key])

    @pytest.mark.parametrize("cls", ENV_TYPES)
    def test_initial_states_are_strictly_safe(self, cls):
        env = cls()
        for seed in range(1000):
            env.reset(seed)
            assert env.constraint_values().max() < 0

    @pytest.mark.parametrize("cls", [Env2DStatic, Env2DDynamic, EnvDoubleIntegrator])
    def test_neighbouring_seeds_differ(self, cls):
        assert not np.array_equal(cls().reset(3)["target"], cls().reset(4)["target"])


class TestStep:
    def test_zero_control(self):
        env = Env2DStatic()
        obs = env.reset(0)
        obs2, reward, done, info = env.step(np.zeros(2))
        np.testing.assert_array_equal(obs2["position"], obs["position"])
        assert reward == -np.linalg.norm(obs["position"] - obs["target"])
        assert info["k"].shape == (5,)
        assert not done

    def test_constant_control_displacement(self):
        env = Env2DStatic(lo=-5.0, hi=5.0, obstacle_center=(3.0, 3.0))
        env.place([-2.0, 0.0], target=[4.0, -4.0])
        for _ in range(100):
            env.step(np.array([1.0, 0.0]))
        np.testing.assert_allclose(env.position, [-1.0, 0.0], atol=1e-9)

    def test_target_reached_ends_episode(self):
        env = Env2DStatic()
        env.place([0.2, 0.2], target=[0.2, 0.24])
        _, _, done, info = env.step(np.zeros(2))
        assert done and info["reached"] and info["success"]

    def test_horizon(self):
        env = Env2DStatic(horizon=3)
        env.reset(0)
        dones = [env.step(np.zeros(2))[2] for _ in range(3)]
        assert dones == [False, False, True]

    @pytest.mark.parametrize("bad", [[np.nan, 0.0], [0.0], [0.0, 0.0, 0.0]])
    def test_bad_control(self, bad):
        env = Env2DStatic()
        env.reset(0)
        with pytest.raises(EnvFault):
            env.step(np.array(bad))

    def test_double_integrator_semi_implicit(self):
        env = EnvDoubleIntegrator()
        env.reset(0)
        p0 = env.position.copy()
        env.step(np.array([2.0, -1.0]))
        np.testing.assert_allclose(env.velocity, [0.02, -0.01])
        np.testing.assert_allclose(env.position, p0 + 0.01 * np.array([0.02, -0.01]))


class TestObservers:
    def test_exact(self):
        est, warm = observe_velocity("exact", [], [0.3, 0.0], 0.01)
        np.testing.assert_array_equal(est, [0.3, 0.0])
        assert not warm

    def test_finite_difference_on_a_line(self):
        history = [np.array([0.1, 0.2]), np.array([0.1 + 0.5 * 0.01, 0.2])]
        est, warm = observe_velocity("fd", history, [9.0, 9.0], 0.01)
        np.testing.assert_allclose(est, [0.5, 0.0], atol=1e-9)
        assert not warm

    def test_none(self):
        est, _ = observe_velocity(ObserverMode.NONE, [np.ones(2), 2 * np.ones(2)], [0.3, 0.1], 0.01)
        np.testing.assert_array_equal(est, [0.0, 0.0])

    def test_fd_warm_up(self):
        est, warm = observe_velocity("fd", [np.ones(2)], [0.3, 0.1], 0.01)
        np.testing.assert_array_equal(est, [0.0, 0.0])
        assert warm

    def test_noise_only_in_fd_mode(self):
        for mode in ObserverMode:
            obs = VelocityObserver(mode, 0.03, np.random.default_rng(0))
            obs.record([0.5, 0.5])
            noisy = mode is ObserverMode.FD
            assert (not np.array_equal(obs.history[-1], [0.5, 0.5])) == noisy

    def test_negative_noise_rejected(self):
        with pytest.raises(ValueError):
            VelocityObserver("fd", -0.1)


class TestPolicies:
    def test_attractor_examples(self):
        assert not attractor_policy({"position": [0.3, 0.3], "target": [0.3, 0.3]}, np.eye(2)).any()
        np.testing.assert_array_equal(attractor_policy({"position": [0, 0], "target": [2, 0]}, np.eye(2)), [1, 0])
        np.testing.assert_allclose(
            attractor_policy({"position": [0, 0], "target": [1, -1]}, np.diag([0.5, 0.5])), [0.5, -0.5]
        )

    def test_attractor_gain_must_be_positive(self):
        with pytest.raises(ValueError):
            AttractorPolicy(np.diag([1.0, -1.0]))
        with pytest.raises(ValueError):
            AttractorPolicy(0.0)

    def test_random_policy_stream(self):
        p = UniformRandomPolicy(2)
        p.reset(5)
        a = [p({}) for _ in range(3)]
        p.reset(5)
        b = [p({}) for _ in range(3)]
        np.testing.assert_array_equal(a, b)
        assert np.all(np.abs(a) <= 1.0)

    def test_constant_policy_box(self):
        with pytest.raises(ValueError):
            ConstantPolicy([1.5, 0.0])


class TestDynamic:
    def test_fixed_pattern_is_a_circle(self):
        env = Env2DDynamic(motion=Motion.FIXED)
        env.reset(2)
        centers = env._centers.copy()
        for _ in range(200):
            env.step(np.zeros(2))
            np.testing.assert_allclose(np.linalg.norm(env.obstacles - centers, axis=1), env.orbit_radius, atol=1e-12)
        np.testing.assert_allclose(np.linalg.norm(env.obstacle_velocities, axis=1), env.speed, atol=1e-12)

    def test_random_walk_stays_in_workspace(self):
        env = Env2DDynamic(motion=Motion.RANDOM, speed_scale=1.5, horizon=2000)
        env.reset(0)
        for _ in range(2000):
            env.step(np.zeros(2))
            assert np.all(env.obstacles >= 0.0) and np.all(env.obstacles <= 1.0)

    def test_layout(self):
        env = Env2DDynamic(n_obstacles=1, motion=Motion.LINEAR)
        layout = crossing_layout(0)
        obs = env.reset(0, layout)
        np.testing.assert_array_equal(obs["position"], layout["robot"])
        np.testing.assert_array_equal(obs["obstacles"][0], layout["obstacles"])
        env.step(np.zeros(2))
        np.testing.assert_allclose(env.obstacles[0], np.add(layout["obstacles"], 0.01 * np.array(layout["obstacle_velocities"])))

    def test_observer_does_not_touch_the_world(self):
        # FD noise comes from its own stream, so obstacle paths are identical across modes
        paths = []
        for mode in ObserverMode:
            env = Env2DDynamic(motion=Motion.RANDOM, observer=mode)
            env.reset(4)
            for _ in range(50):
                env.step(np.zeros(2))
            paths.append(env.obstacles.copy())
        np.testing.assert_array_equal(paths[0], paths[1])
        np.testing.assert_array_equal(paths[0], paths[2])


def test_attractor_in_static_env_is_safe():
    for seed in range(5):
        env = rollout(Env2DStatic(), AttractorPolicy(1.0), seed)
        assert env.max_violation <= 1e-3
        assert env.reached


def test_circle_track_stays_on_circle():
    env = rollout(EnvCircleTrack(), ConstantPolicy([1.0]), 0, ControllerConfig(lam=25.0))
    assert env.t == 1000
    assert env.max_tracking_error <= 1e-3
    assert env.success
