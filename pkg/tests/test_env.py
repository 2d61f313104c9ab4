import numpy as np
import pytest

from conftest import tiny_config
from uavris.env import (
    Action,
    EpisodeFinished,
    UavRisEnv,
    eh_params,
    evaluate_action,
    feasibility_probe,
    make_action,
    scale_action,
    unscale_action,
)
from uavris.signal_model import eh_efficiency, mrt_precoder, received_rf_power


def test_state_dimension(cfg):
    env = UavRisEnv(cfg, seed=0)
    s = env.reset()
    assert cfg.state_dim == 301 and s.shape == (301,)
    assert cfg.action_dim == 20
    assert env.state_scale.shape == (301,) and np.all(env.state_scale > 0)


def test_reset_is_deterministic(cfg):
    a = UavRisEnv(cfg).reset(seed=7)
    b = UavRisEnv(cfg).reset(seed=7)
    assert np.array_equal(a, b)
    assert np.all(a[-cfg.action_dim:] == 0)


def test_scale_action_bounds(cfg):
    lo = scale_action(-np.ones(cfg.action_dim), cfg)
    assert lo.tau == 0 and np.all(lo.powers == 0) and np.all(lo.phases == 0)
    hi = scale_action(np.ones(cfg.action_dim), cfg)
    assert hi.tau == 1
    np.testing.assert_allclose(hi.powers, cfg.P_U_max)
    np.testing.assert_allclose(hi.phases, 2 * np.pi)
    mid = scale_action(np.zeros(cfg.action_dim), cfg)
    assert mid.tau == 0.5


def test_scale_action_projects_total_power():
    cfg = tiny_config(K=2, user_positions=((1.0, 1.0, 0.0), (2.0, 2.0, 0.0)), P_BS_max=10.0,
                      P_U_max=8.0)
    a = scale_action(np.ones(cfg.action_dim), cfg)
    assert a.powers.sum() == pytest.approx(10.0)


def test_scale_unscale_round_trip(cfg, rng):
    raw = rng.uniform(-1, 1, cfg.action_dim)
    # stay under the budget so the projection is inactive
    raw[1:1 + cfg.K] = -0.5
    np.testing.assert_allclose(unscale_action(scale_action(raw, cfg), cfg), raw, atol=1e-12)


def test_scale_action_shape_checked(cfg):
    with pytest.raises(ValueError):
        scale_action(np.zeros(cfg.action_dim + 1), cfg)


def test_full_tau_gives_zero_reward(cfg):
    env = UavRisEnv(cfg, seed=1)
    env.reset()
    raw = np.zeros(cfg.action_dim)
    raw[0] = 1.0
    res = env.step(raw)
    assert np.all(res.info["rates"] == 0)
    assert res.reward == 0.0 and not res.info["qos"]


def test_zero_power_gives_zero_reward(cfg):
    env = UavRisEnv(cfg.replace(R_min=0.0), seed=1)
    env.reset()
    res = env.step(Action(0.5, np.zeros(cfg.K), np.zeros(cfg.N)))
    assert res.info["eps_r"] == 0.0 and res.reward == 0.0


def test_hand_instance_reward_matches_signal_module():
    cfg = tiny_config(R_min=0.0, P_sat=10.0)
    env = UavRisEnv(cfg, seed=3)
    env.reset()
    real = env.realization
    action = make_action(cfg, 0.4, [cfg.P_U_max / 2], [1.0])
    res = env.step(action)
    eps_r = received_rf_power(real, mrt_precoder(real, action.phases, action.powers))
    assert res.reward == pytest.approx(eh_efficiency(0.4, eps_r, eh_params(cfg)), rel=1e-14)
    assert res.reward > 0


def test_reward_gating_and_bounds(cfg):
    env = UavRisEnv(cfg, seed=11)
    rng = np.random.default_rng(0)
    env.reset()
    for _ in range(cfg.T):
        res = env.step(rng.uniform(-1, 1, cfg.action_dim))
        info = res.info
        assert res.reward == (info["eh_efficiency"] if info["qos"] else 0.0)
        assert info["qos"] == bool(np.all(info["rates"] >= cfg.R_min))
        if info["eps_r"] > 0:
            assert 0 <= res.reward <= cfg.P_sat / info["eps_r"]


def test_episode_lifecycle(cfg):
    env = UavRisEnv(cfg.replace(T=4), seed=2)
    with pytest.raises(EpisodeFinished):
        env.step(np.zeros(cfg.action_dim))
    env.reset()
    dones = [env.step(np.zeros(cfg.action_dim)).done for _ in range(4)]
    assert dones == [False, False, False, True]
    with pytest.raises(EpisodeFinished):
        env.step(np.zeros(cfg.action_dim))


def test_previous_action_block(cfg, rng):
    env = UavRisEnv(cfg, seed=5)
    env.reset()
    raw = rng.uniform(-1, 1, cfg.action_dim)
    res = env.step(raw)
    applied = res.info["action"]
    np.testing.assert_array_equal(res.next_state[-cfg.action_dim:], applied.to_vector())


def test_trajectory_determinism(cfg, rng):
    actions = rng.uniform(-1, 1, (10, cfg.action_dim))

    def run():
        env = UavRisEnv(cfg.replace(T=10), seed=99)
        out = [env.reset()]
        for a in actions:
            r = env.step(a)
            out += [r.next_state, [r.reward]]
        return np.concatenate(out)

    assert np.array_equal(run(), run())


def test_channel_stream_independent_of_actions(cfg):
    e1, e2 = UavRisEnv(cfg, seed=4), UavRisEnv(cfg, seed=4)
    e1.reset(), e2.reset()
    s1 = e1.step(np.ones(cfg.action_dim)).next_state
    s2 = e2.step(-np.ones(cfg.action_dim)).next_state
    n = 2 * cfg.N * cfg.M + 2 * cfg.K * cfg.N
    assert np.array_equal(s1[:n], s2[:n])


def test_evaluate_action_interference_switch(cfg, rng):
    from uavris.channel import realize_slot

    real = realize_slot(cfg, rng)
    a = make_action(cfg, 0.0, np.full(cfg.K, 50.0), rng.uniform(0, 2 * np.pi, cfg.N))
    free = evaluate_action(real, a, cfg)
    jam = evaluate_action(real, a, cfg.replace(interference_cancellation=False))
    assert np.all(jam.rates <= free.rates)


def test_feasibility_probe_extremes(cfg):
    rep = feasibility_probe(cfg.replace(R_min=0.0), 5, np.random.default_rng(0), phase_levels=4)
    assert rep.fraction == 1.0
    rep = feasibility_probe(cfg.replace(P_BS_max=0.0), 5, np.random.default_rng(0), phase_levels=4)
    assert rep.fraction == 0.0
    with pytest.raises(ValueError):
        feasibility_probe(cfg, 0, np.random.default_rng(0))


def test_feasibility_probe_warns_when_low(cfg, caplog):
    feasibility_probe(cfg.replace(P_BS_max=0.0), 2, np.random.default_rng(0), phase_levels=2)
    assert "feasible" in caplog.text
