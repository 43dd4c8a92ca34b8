from types import SimpleNamespace

import numpy as np
import pytest

from controller import gain_set, new_controller_state, observer_step
from errors import DimensionError, NotFittedError, TickDiscontinuityError
from experiment import run_experiment
from krlst import KernelParams
from plant import POSE_DIM, new_truth, plant_step
from predictor import (
    build_features,
    feature_dim,
    fit_normalizer,
    identity_normalizer,
    infer,
    memory_vector,
    new_predictor,
    raw_feature_matrix,
    tick_and_train,
)

KERNEL = KernelParams(sigma2=30.0, noise_var=1e-3, lambda_=0.998, budget=80, jitter=1e-6)


def learning(variant="hist3", delay=7):
    return new_predictor(variant, KERNEL, delay, 0.02, identity_normalizer(feature_dim(variant)))


def test_feature_dimensions():
    assert feature_dim("ldn3") == 30
    assert feature_dim("hist3") == 30
    assert feature_dim("hist7") == 54
    assert feature_dim("nopred") == 12


def test_no_pred_passes_pose_through():
    pred = new_predictor("nopred", None, 7, 0.02)
    x = np.arange(POSE_DIM, dtype=float)
    tick_and_train(pred, x, np.zeros(POSE_DIM), np.ones(POSE_DIM), 1)
    y_hat, x_p = infer(pred, x, np.zeros(POSE_DIM))
    np.testing.assert_array_equal(y_hat, np.zeros(POSE_DIM))
    np.testing.assert_array_equal(x_p, x)
    assert pred.model is None and pred.train_calls == 0


def test_learning_variant_needs_normalizer():
    with pytest.raises(NotFittedError):
        new_predictor("ldn3", KERNEL, 7, 0.02)
    with pytest.raises(DimensionError):
        new_predictor("hist7", KERNEL, 7, 0.02, identity_normalizer(30))
    with pytest.raises(ValueError):
        new_predictor("hist5", KERNEL, 7, 0.02, identity_normalizer(30))


def test_ldn_window_defaults_to_delay():
    pred = learning("ldn3")
    assert pred.ldn.system.theta == pytest.approx(0.14)
    assert pred.ldn.system.p == 3


def test_history_memory_is_channel_major_newest_first():
    pred = learning("hist3")
    for tick, value in enumerate([1.0, 2.0, 3.0, 4.0], start=1):
        tick_and_train(pred, np.zeros(POSE_DIM), np.zeros(POSE_DIM),
                       value * np.arange(1, POSE_DIM + 1), tick)
    memory = memory_vector(pred).reshape(POSE_DIM, 3)
    np.testing.assert_array_equal(memory[0], [4.0, 3.0, 2.0])
    np.testing.assert_array_equal(memory[5], [24.0, 18.0, 12.0])


def test_tick_gap_is_rejected():
    pred = learning()
    tick_and_train(pred, np.zeros(POSE_DIM), np.zeros(POSE_DIM), np.zeros(POSE_DIM), 1)
    with pytest.raises(TickDiscontinuityError):
        tick_and_train(pred, np.zeros(POSE_DIM), np.zeros(POSE_DIM), np.zeros(POSE_DIM), 3)


def test_trains_on_pairs_one_delay_apart():
    rng = np.random.default_rng(0)
    pred = learning("hist3", delay=7)
    xs = rng.normal(scale=0.01, size=(12, POSE_DIM))
    vs = rng.normal(scale=0.01, size=(12, POSE_DIM))
    for t in range(1, 12):
        tick_and_train(pred, xs[t], vs[t], np.zeros(POSE_DIM), t)
        assert pred.train_calls == max(0, t - 7)
        if t == 8:
            np.testing.assert_allclose(pred.last_target, xs[8] - xs[1])
            first = np.concatenate([xs[1], vs[1], np.zeros(3 * POSE_DIM)])
            np.testing.assert_allclose(pred.model.dictionary[0], first)


def test_zero_delay_trains_every_tick():
    pred = learning("hist3", delay=0)
    x = np.full(POSE_DIM, 0.01)
    tick_and_train(pred, x, np.zeros(POSE_DIM), np.zeros(POSE_DIM), 1)
    assert pred.train_calls == 1
    np.testing.assert_array_equal(pred.last_target, np.zeros(POSE_DIM))


def test_prediction_learns_a_constant_change():
    pred = learning("hist3", delay=2)
    step = np.array([0.001, -0.002, 0.0, 0.0, 0.0, 0.0])
    v = np.zeros(POSE_DIM)
    for t in range(1, 200):
        x = step * t
        tick_and_train(pred, x, v, np.zeros(POSE_DIM), t)
    y_hat, x_p = infer(pred, step * 199, v)
    np.testing.assert_allclose(y_hat, 2 * step, atol=2e-4)
    np.testing.assert_allclose(x_p, step * 199 + y_hat)


def test_build_features_checks():
    norm = identity_normalizer(30)
    with pytest.raises(DimensionError):
        build_features(np.zeros(6), np.zeros(6), np.zeros(12), norm)
    with pytest.raises(NotFittedError):
        build_features(np.zeros(6), np.zeros(6), np.zeros(18), None)
    with pytest.raises(DimensionError):
        build_features(np.zeros(6), np.zeros(6), np.zeros(42), norm)
    out = build_features(np.ones(6), 2 * np.ones(6), 3 * np.ones(18), norm)
    np.testing.assert_array_equal(out, np.repeat([1.0, 2.0, 3.0], [6, 6, 18]))


def _fake_log(n=400, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(n, POSE_DIM))
    x[:, 2] = 0.0
    return SimpleNamespace(x_meas=x, v_hat=rng.normal(size=(n, POSE_DIM)),
                           u=rng.uniform(-1, 1, size=(n, POSE_DIM)))


@pytest.mark.parametrize("variant", ["ldn3", "hist3", "hist7"])
def test_normalizer_whitens_its_calibration_data(variant):
    log = _fake_log()
    normalizer = fit_normalizer(log, variant, 7, 0.02)
    rows = np.array([normalizer.apply(r) for r in raw_feature_matrix(log, variant, 7, 0.02)])
    varying = rows.std(axis=0) > 0.5
    np.testing.assert_allclose(rows[:, varying].std(axis=0), 1.0, atol=1e-6)
    np.testing.assert_allclose(rows.mean(axis=0), 0.0, atol=1e-6)
    assert np.all(rows[:, 2] == 0.0)


def test_raw_features_replay_previous_command():
    log = _fake_log(n=5)
    rows = raw_feature_matrix(log, "hist3", 7, 0.02)
    np.testing.assert_array_equal(rows[0, 12:], np.zeros(18))
    # row 1 sees the command logged at row 0 as its newest entry
    np.testing.assert_array_equal(rows[1, 12::3], log.u[0])


def replay(pred, xs, vs, us):
    """Tick loop order of the experiment: train on the previous command, then infer"""
    y_hats = []
    u_prev = np.zeros(POSE_DIM)
    for i in range(xs.shape[0]):
        tick_and_train(pred, xs[i], vs[i], u_prev, i + 1)
        y_hat, _ = infer(pred, xs[i], vs[i])
        y_hats.append(y_hat.copy())
        u_prev = us[i]
    return np.array(y_hats)


def test_predictions_never_see_future_commands():
    rng = np.random.default_rng(3)
    n, cut = 120, 60
    xs = np.cumsum(rng.normal(scale=1e-3, size=(n, POSE_DIM)), axis=0)
    vs = rng.normal(scale=1e-2, size=(n, POSE_DIM))
    us = rng.uniform(-0.5, 0.5, size=(n, POSE_DIM))
    changed = us.copy()
    changed[cut:] += rng.uniform(-0.5, 0.5, size=(n - cut, POSE_DIM))
    for variant in ("ldn3", "hist7"):
        original = replay(learning(variant), xs, vs, us)
        perturbed = replay(learning(variant), xs, vs, changed)
        np.testing.assert_array_equal(original[:cut + 1], perturbed[:cut + 1])
        assert not np.array_equal(original[cut + 1:], perturbed[cut + 1:])


def test_training_call_count_over_a_full_run():
    rng = np.random.default_rng(4)
    n = 3000
    pred = new_predictor("hist3", KernelParams(sigma2=30.0, noise_var=1e-3, budget=10), 7, 0.02,
                         identity_normalizer(feature_dim("hist3")))
    xs = np.cumsum(rng.normal(scale=1e-4, size=(n, POSE_DIM)), axis=0)
    for i in range(n):
        tick_and_train(pred, xs[i], np.zeros(POSE_DIM), np.zeros(POSE_DIM), i + 1)
    assert pred.train_calls == n - 7


def test_experiment_header_counts_training_calls(default_config):
    log = run_experiment(default_config, seed=1, variant="hist3", gain="low",
                         normalizer=identity_normalizer(feature_dim("hist3")))
    assert log.n_rows == 3000
    assert log.header["train_calls"] == "2993"


def stationary_log(config, seed, n=600):
    """Plant settled under a constant command, measured with noise, observer velocity"""
    params = config.plant
    gains = gain_set(config.controller, "med")
    u = np.array([0.3, -0.2, 0.1, 0.0, 0.2, -0.1])
    truth = new_truth(params, seed)
    for _ in range(1500):
        truth, _ = plant_step(truth, u, params)
    ctrl = new_controller_state(truth.x)
    x_meas, v_hat = [], []
    for _ in range(n):
        truth, measured = plant_step(truth, u, params)
        ctrl = observer_step(ctrl, measured, gains, params.dt)
        x_meas.append(measured)
        v_hat.append(ctrl.v_hat.copy())
    return SimpleNamespace(x_meas=np.array(x_meas), v_hat=np.array(v_hat), u=np.tile(u, (n, 1)))


def test_stationary_plant_predicts_no_motion(default_config):
    params = default_config.plant
    calibration = stationary_log(default_config, seed=11)
    run = stationary_log(default_config, seed=12)
    normalizer = fit_normalizer(calibration, "hist3", params.delay_steps, params.dt)
    pred = new_predictor("hist3", KERNEL, params.delay_steps, params.dt, normalizer)
    y_hats = replay(pred, run.x_meas, run.v_hat, run.u)
    # std of x(t) - x(t - d) when only sensor noise moves the pose
    noise_floor = np.sqrt(2.0) * np.linalg.norm(params.noise_std)
    assert np.max(np.linalg.norm(y_hats[100:], axis=1)) <= 3.0 * noise_floor


def test_normalizer_transfers_across_seeds(short_config):
    params = short_config.plant
    fitted_on = run_experiment(short_config, seed=1, variant="nopred", gain="med")
    applied_to = run_experiment(short_config, seed=2, variant="nopred", gain="med")
    for variant in ("ldn3", "hist3", "hist7"):
        normalizer = fit_normalizer(fitted_on, variant, params.delay_steps, params.dt)
        raw = raw_feature_matrix(applied_to, variant, params.delay_steps, params.dt)
        std = np.array([normalizer.apply(row) for row in raw]).std(axis=0)
        assert np.all((std >= 0.5) & (std <= 2.0)), (variant, std)
