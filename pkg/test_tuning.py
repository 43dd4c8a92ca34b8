import math

import numpy as np
import pytest

from config import config_hash, load_config, with_changes
from krlst import KernelParams
from tuning import _refined, offline_score, tune


def test_lambda_refinement_scales_the_forgetting_rate():
    assert _refined("lambda_", 0.99, 0.5) == pytest.approx(0.995)
    assert _refined("lambda_", 0.99, 1.5) == pytest.approx(0.985)
    assert _refined("lambda_", 1.0, 0.5) is None
    assert _refined("sigma2", 30.0, 0.8) == pytest.approx(24.0)


def test_offline_score_learns_a_linear_trend():
    rng = np.random.default_rng(0)
    n, d = 400, 3
    features = rng.uniform(-1.0, 1.0, size=(n, 2))
    x_meas = np.zeros((n, 6))
    # pose change over the delay is a smooth function of the features
    for t in range(n - d):
        x_meas[t + d] = x_meas[t] + 0.001 * np.r_[features[t], np.zeros(4)]
    params = KernelParams(sigma2=2.0, noise_var=1e-4, lambda_=1.0, budget=80)
    learned = offline_score(features, x_meas, d, params, start=300)
    assert math.isfinite(learned)
    assert learned < 0.2


def test_offline_score_without_scored_rows_is_infinite():
    features = np.zeros((10, 2))
    params = KernelParams(sigma2=1.0, noise_var=1e-2)
    assert offline_score(features, np.zeros((10, 6)), 3, params, start=50) == math.inf


def test_tune_writes_a_loadable_config(short_config, tmp_path):
    small = with_changes(short_config, harness={
        "tune_sigma2": [30.0], "tune_noise_var": [1e-3, 1e-2], "tune_lambda": [0.998],
        "tune_refine": [0.8], "tune_online_duration": 24.0, "tune_seeds": 1,
    })
    out = tmp_path / "tuned.ini"
    result = tune(small, str(out), variant="ldn3")
    assert len(result.stage1) == 2
    assert len(result.stage2) == 3
    assert result.best.sigma2 in (30.0, 24.0)
    loaded = load_config(str(out))
    assert config_hash(loaded) == config_hash(result.config)
    assert loaded.krlst == result.best
    assert loaded.protocol == small.protocol
