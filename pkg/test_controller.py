import numpy as np
import pytest
from pydantic import ValidationError

from controller import (
    ControllerConfig,
    control_tick,
    desired_speed,
    gain_set,
    input_estimator_step,
    new_controller_state,
    observer_step,
    signed_power,
    stsmc_step,
)
from plant import POSE_DIM, drift, input_map, replace_params


def test_gain_ladder(default_config):
    cfg = default_config.controller
    for condition, factor in (("low", 1.0), ("med", 2.0), ("high", 3.0)):
        gains = gain_set(cfg, condition)
        np.testing.assert_allclose(np.diag(gains.k1), cfg.k1_low * factor)
        np.testing.assert_allclose(np.diag(gains.k2), cfg.k2)
    with pytest.raises(ValueError):
        gain_set(cfg, "extreme")


def test_config_rejects_non_positive_gains(default_config):
    values = default_config.controller.model_dump()
    values["k2"] = np.zeros(POSE_DIM)
    with pytest.raises(ValidationError):
        ControllerConfig.model_validate(values)


def test_signed_power():
    np.testing.assert_allclose(signed_power([4.0, -9.0, 0.0], 0.5), [2.0, -3.0, 0.0])
    np.testing.assert_array_equal(signed_power([2.0, -3.0, 0.0], 0.0), [1.0, -1.0, 0.0])


def test_super_twisting_terms(default_config):
    gains = gain_set(default_config.controller, "low")
    state = new_controller_state()
    e = np.array([0.04, -0.01, 0.0, 0.0, 0.0, 0.0])
    v_smc, state = stsmc_step(state, e, gains, 0.02)
    expected_integral = np.diag(gains.k2) * np.sign(e) * 0.02
    np.testing.assert_allclose(state.integral_term, expected_integral)
    np.testing.assert_allclose(v_smc, np.diag(gains.k1) * signed_power(e, 0.5) + expected_integral)


def test_integral_frozen_while_saturated(default_config):
    gains = gain_set(default_config.controller, "med")
    state = new_controller_state()
    state.integral_term = np.full(POSE_DIM, 0.01)
    state.saturated = True
    _, state = stsmc_step(state, np.ones(POSE_DIM), gains, 0.02)
    np.testing.assert_array_equal(state.integral_term, np.full(POSE_DIM, 0.01))


def test_desired_speed():
    np.testing.assert_array_equal(desired_speed(np.ones(2), np.array([0.5, 0.0]), np.array([0.0, 2.0])),
                                  [0.5, -1.0])


def test_observer_recovers_ramp_velocity(default_config):
    gains = gain_set(default_config.controller, "med")
    state = new_controller_state()
    velocity = np.array([0.02, -0.01, 0.0, 0.1, 0.0, -0.05])
    for k in range(500):
        state = observer_step(state, velocity * k * 0.02, gains, 0.02)
    np.testing.assert_allclose(state.v_hat, velocity, atol=1e-9)


def test_estimator_inverts_input_map(default_config):
    model = default_config.plant
    gains = gain_set(default_config.controller, "med")
    x = np.array([0.03, -0.02, 0.0, 0.01, 0.0, 0.0])
    u_true = np.array([0.2, -0.1, 0.05, 0.0, 0.3, -0.2])
    v = input_map(x, u_true, model)
    state = new_controller_state()
    for _ in range(500):
        state = input_estimator_step(state, x, v, gains, model, 0.02, u_limit=1.0)
    np.testing.assert_allclose(state.u_est, u_true, atol=1e-6)
    assert not state.saturated


def test_estimator_saturates(default_config):
    model = default_config.plant
    gains = gain_set(default_config.controller, "med")
    state = new_controller_state()
    for _ in range(200):
        state = input_estimator_step(state, np.zeros(POSE_DIM), np.full(POSE_DIM, 5.0), gains,
                                     model, 0.02, u_limit=1.0)
    assert np.all(np.abs(state.u_est) <= 1.0)
    assert state.saturated


def test_control_tick_uses_pose_error(default_config):
    model = default_config.plant
    gains = gain_set(default_config.controller, "med")
    state = new_controller_state()
    x_p = np.zeros(POSE_DIM)
    r = np.array([0.01, 0, 0, 0, 0, 0])
    r_dot = np.zeros(POSE_DIM)
    u, state, v_smc, v = control_tick(state, x_p, r, r_dot, gains, model, 0.02, 1.0)
    # pose behind the reference on x: the law asks for positive speed on x
    assert v_smc[0] < 0 and v[0] > 0
    np.testing.assert_allclose(v, r_dot - drift(x_p, model) - v_smc)
    assert u[0] > 0


def test_estimator_residual_never_grows_at_fine_steps(default_config):
    model = default_config.plant
    gains = gain_set(default_config.controller, "high")
    x = np.array([0.02, 0.01, -0.01, 0.05, -0.02, 0.0])
    v = input_map(x, np.array([0.4, -0.3, 0.2, 0.1, -0.5, 0.25]), model)
    state = new_controller_state()
    residuals = [np.linalg.norm(v - input_map(x, state.u_est, model))]
    for _ in range(400):
        state = input_estimator_step(state, x, v, gains, model, 0.002, u_limit=5.0)
        residuals.append(np.linalg.norm(v - input_map(x, state.u_est, model)))
    assert np.all(np.diff(residuals) <= 1e-15)
    assert residuals[-1] < 1e-3 * residuals[0]


def test_estimator_is_a_first_order_lag_for_a_linear_map(default_config):
    model = replace_params(default_config.plant, b1=np.eye(POSE_DIM), b2_gain=0.0,
                           g_sat=np.zeros(POSE_DIM))
    gains = gain_set(default_config.controller, "low")
    rate = np.diag(gains.gamma_inv)
    dt = 1e-2 / rate.max()
    v = np.array([0.5, -0.2, 0.1, 0.3, -0.4, 0.05])
    x = np.array([0.03, 0.0, 0.0, 0.0, 0.0, 0.0])
    state = new_controller_state()
    for n in range(1, 2001):
        state = input_estimator_step(state, x, v, gains, model, dt, u_limit=5.0)
        np.testing.assert_allclose(state.u_est, v * (1.0 - (1.0 - rate * dt) ** n), rtol=1e-9, atol=1e-15)
        if n == 100:
            # one time constant when every Gamma entry equals the largest one
            np.testing.assert_allclose(state.u_est, v * (1.0 - np.exp(-rate * dt * n)), rtol=1e-2)
    np.testing.assert_allclose(state.u_est, v, rtol=1e-6)


def test_super_twisting_reaches_the_origin_in_finite_time(default_config):
    gains = gain_set(default_config.controller, "low")
    state = new_controller_state()
    dt = 1e-3
    e = np.zeros(POSE_DIM)
    e[0] = 0.05
    history = []
    for _ in range(10_000):
        v_smc, state = stsmc_step(state, e, gains, dt)
        e = e - v_smc * dt
        history.append(abs(e[0]))
    history = np.array(history)
    first = int(np.argmax(history < 1e-3))
    assert history[first] < 1e-3 and first * dt < 5.0
    assert np.all(history[-2000:] < 1e-3)
    np.testing.assert_array_equal(e[1:], 0.0)


def test_observer_error_contracts_by_its_gain(default_config):
    gains = gain_set(default_config.controller, "med")
    dt = 0.02
    x = np.array([0.05, -0.02, 0.01, 0.2, -0.1, 0.0])
    state = new_controller_state()
    error = x - state.x_hat
    for _ in range(20):
        state = observer_step(state, x, gains, dt)
        np.testing.assert_allclose(state.v_hat, np.diag(gains.l_obs) * error, rtol=1e-12, atol=1e-15)
        next_error = x - state.x_hat
        np.testing.assert_allclose(next_error, (1.0 - np.diag(gains.l_obs) * dt) * error,
                                   rtol=1e-9, atol=1e-15)
        error = next_error


def test_doubling_k1_doubles_only_the_proportional_term(default_config):
    low = gain_set(default_config.controller, "low")
    med = gain_set(default_config.controller, "med")
    e = np.array([0.04, -0.01, 0.002, 0.0, -0.3, 0.1])
    results = {}
    for name, gains in (("low", low), ("med", med)):
        state = new_controller_state()
        state.integral_term = np.full(POSE_DIM, 0.003)
        v_smc, state = stsmc_step(state, e, gains, 0.02)
        results[name] = (v_smc - state.integral_term, state.integral_term)
    np.testing.assert_allclose(results["med"][0], 2.0 * results["low"][0], rtol=1e-12, atol=1e-18)
    np.testing.assert_array_equal(results["med"][1], results["low"][1])
