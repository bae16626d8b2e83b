import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from scaopo.driver import (CHECKPOINT_VERSION, DriverConfig, ScaopoDriver,
                           StepSchedule)
from scaopo.envs.tabular import TabularEnv, make_tabular
from scaopo.errors import CheckpointError, ConfigurationError
from scaopo.policy import GaussianMlpPolicy, MlpArch, ThresholdedGaussianPolicy


def tab_setup(n_states=3, n_constraints=1, env_seed=0, hidden=(4,)):
    mdp = make_tabular(n_states, 2, n_constraints=n_constraints, seed=0)
    env = TabularEnv(mdp, seed=env_seed)
    arch = MlpArch(input_dim=n_states, output_dim=1, hidden_dims=hidden,
                   output_activation="identity")
    base = GaussianMlpPolicy(arch, np.zeros(1), np.ones(1), param_bound=5.0)
    return env, ThresholdedGaussianPolicy(base)


def small_config(**overrides):
    kw = dict(half_window=8, iterations=4, batch_size=4,
              schedule=StepSchedule(kappa1=0.6, kappa2=0.8, beta0=0.5))
    kw.update(overrides)
    return DriverConfig(**kw)


# ----------------------------------------------------------------- schedules

def test_schedule_values_match_the_power_laws():
    s = StepSchedule(kappa1=0.6, kappa2=0.8, beta0=0.5)
    assert s.alpha(0) == 1.0
    assert s.alpha(4) == pytest.approx(4.0 ** -0.6)
    assert s.beta(0) == pytest.approx(0.5)
    assert s.beta(9) == pytest.approx(0.5 * 10.0 ** -0.8)


def test_beta_const_overrides_the_decay():
    s = StepSchedule(beta_const=0.25)
    assert s.beta(0) == 0.25 and s.beta(1000) == 0.25


def test_schedule_validation_errors():
    for kw in (dict(kappa1=0.5), dict(kappa1=1.0), dict(kappa2=0.4),
               dict(kappa2=1.1), dict(kappa1=0.9, kappa2=0.8),
               dict(kappa1=0.8, kappa2=0.8), dict(beta0=0.0),
               dict(beta_const=1.5), dict(beta_const=-0.1)):
        with pytest.raises(ConfigurationError):
            StepSchedule(**kw)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 10 ** 6), st.integers(1, 10 ** 6))
def test_schedule_decays_and_separates_timescales(t1, t2):
    s = StepSchedule(kappa1=0.6, kappa2=0.8, beta0=1.0)
    lo, hi = sorted((t1, t2))
    assert s.alpha(hi) <= s.alpha(lo)
    assert s.beta(hi) <= s.beta(lo)
    # the policy moves ever slower than the estimates refresh
    if hi > lo:
        assert s.beta(hi) / s.alpha(hi) <= s.beta(lo) / s.alpha(lo) + 1e-15


def test_driver_config_validation():
    with pytest.raises(ConfigurationError):
        small_config(batch_size=0)
    with pytest.raises(ConfigurationError):
        small_config(iterations=0)
    with pytest.raises(ConfigurationError):
        small_config(reuse=False, batch_size=5)
    with pytest.raises(ConfigurationError):
        small_config(reuse=False, batch_size=4, window_mode="log")
    cfg = small_config(reuse=False, batch_size=4)
    assert not cfg.reuse


# ------------------------------------------------------------------ stepping

def test_frozen_policy_keeps_parameters_fixed_but_estimates_move():
    env, policy = tab_setup()
    cfg = small_config(schedule=StepSchedule(beta_const=0.0))
    drv = ScaopoDriver(env, policy, cfg, seed=42)
    theta0 = drv.theta.copy()
    records = drv.run(3)
    assert np.array_equal(drv.theta, theta0)
    assert drv.est.step == 3
    assert not np.allclose(records[0].values, records[-1].values)


def test_parameters_stay_in_the_box_and_records_are_coherent():
    env, policy = tab_setup()
    cfg = small_config(iterations=6)
    drv = ScaopoDriver(env, policy, cfg, seed=1)
    records = drv.run()
    assert policy.in_bounds(drv.theta)
    assert [r.t for r in records] == list(range(6))
    for r in records:
        assert r.kind in ("objective", "feasible")
        assert r.wall_ms >= 0.0
        assert r.values.shape == (2,)
    assert records[-1].env_steps == drv.window.capacity + 6 * cfg.batch_size


def test_running_costs_are_the_window_mean_plus_limits():
    env, policy = tab_setup()
    drv = ScaopoDriver(env, policy, small_config(), seed=3)
    rec = drv.step()
    _, _, shifted = drv.window.arrays()
    expect = shifted.mean(axis=0) + np.concatenate([[0.0], env.spec.limits])
    assert np.allclose(rec.running_costs, expect, atol=1e-12)


def test_unconstrained_environment_takes_the_objective_branch():
    env, policy = tab_setup(n_constraints=0)
    drv = ScaopoDriver(env, policy, small_config(), seed=5)
    rec = drv.step()
    assert rec.kind == "objective"
    assert np.isnan(rec.max_violation)


def test_log_window_grows_with_iterations():
    env, policy = tab_setup()
    cfg = small_config(window_mode="log", window_floor=4, window_growth=4.0,
                       iterations=10)
    drv = ScaopoDriver(env, policy, cfg, seed=7)
    assert drv.window.half_length == 4
    drv.run(10)
    from scaopo.estimator import window_schedule
    want = window_schedule(9, "log", cfg.half_window, 4, 4.0)
    assert drv.window.half_length == want > 4
    assert drv.window.full


def test_no_reuse_variant_keeps_exactly_one_batch():
    env, policy = tab_setup()
    cfg = small_config(reuse=False, batch_size=6)
    drv = ScaopoDriver(env, policy, cfg, seed=9)
    assert drv.window.capacity == 6
    before = drv.env_steps
    drv.step()
    assert drv.env_steps - before == 6
    s, _, _ = drv.window.arrays()
    assert len(s) == 6


# --------------------------------------------------------------- checkpoints

def test_checkpoint_resume_reproduces_the_uninterrupted_run(tmp_path):
    env, policy = tab_setup()
    cfg = small_config(iterations=12)
    drv = ScaopoDriver(env, policy, cfg, seed=21)
    drv.run(5)
    path = tmp_path / "ckpt.npz"
    drv.save_checkpoint(path)
    straight = drv.run(5)

    env2, policy2 = tab_setup(env_seed=999)     # state comes from the file
    drv2 = ScaopoDriver.resume(env2, policy2, cfg, seed=21, path=path)
    assert drv2.t == 5
    resumed = drv2.run(5)
    assert np.array_equal(drv.theta, drv2.theta)
    for a, b in zip(straight, resumed):
        assert a.t == b.t and a.kind == b.kind
        assert np.array_equal(a.values, b.values)
        assert np.array_equal(a.running_costs, b.running_costs)
        assert a.kkt_residual == b.kkt_residual


def test_resume_rejects_foreign_versions(tmp_path):
    env, policy = tab_setup()
    cfg = small_config()
    drv = ScaopoDriver(env, policy, cfg, seed=2)
    drv.step()
    path = tmp_path / "ckpt.npz"
    drv.save_checkpoint(path)

    import json
    data = dict(np.load(path, allow_pickle=False))
    meta = json.loads(str(data["meta"]))
    meta["version"] = CHECKPOINT_VERSION + 1
    data["meta"] = np.array(json.dumps(meta))
    np.savez(path, **data)
    with pytest.raises(CheckpointError):
        ScaopoDriver.resume(env, policy, cfg, seed=2, path=path)


def test_resume_rejects_mismatched_parameterization(tmp_path):
    env, policy = tab_setup()
    cfg = small_config()
    drv = ScaopoDriver(env, policy, cfg, seed=2)
    drv.step()
    path = tmp_path / "ckpt.npz"
    drv.save_checkpoint(path)
    env2, fat_policy = tab_setup(hidden=(9,))
    with pytest.raises(CheckpointError):
        ScaopoDriver.resume(env2, fat_policy, cfg, seed=2, path=path)


def test_explicit_theta0_is_projected_and_used():
    env, policy = tab_setup()
    theta0 = np.full(policy.n_params, 7.0)        # outside the box
    drv = ScaopoDriver(env, policy, small_config(), seed=4, theta0=theta0)
    assert policy.in_bounds(drv.theta)
    assert np.max(drv.theta) == 5.0
