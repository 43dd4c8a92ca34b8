"""
Full-protocol batch checks on the default config, 10 seeds

Slow: set SMITH_ACCEPTANCE=1 to run them.
"""
import os

import numpy as np
import pytest

from config import WORKERS
from graph import run_batch
from predictor import LEARNING_VARIANTS
from stats import anova_oneway

pytestmark = pytest.mark.skipif(
    os.environ.get("SMITH_ACCEPTANCE") != "1", reason="set SMITH_ACCEPTANCE=1 for full batches"
)


@pytest.fixture(scope="module")
def summaries(default_config, tmp_path_factory):
    out = tmp_path_factory.mktemp("acceptance")
    state = run_batch(default_config, ["nopred", *LEARNING_VARIANTS], ["low", "med", "high"],
                      n_seeds=10, out_dir=str(out), workers=max(WORKERS, 1))
    return state["summaries"]


def stable(summaries, variant, gain, field="xy_track_rms_stable"):
    return np.array([getattr(s, field) for s in summaries if s.variant == variant and s.gain == gain])


def test_baseline_degrades_with_gain(summaries):
    assert stable(summaries, "nopred", "high").mean() >= 1.5 * stable(summaries, "nopred", "med").mean()


@pytest.mark.parametrize("variant", LEARNING_VARIANTS)
def test_learning_variants_hold_up_at_high_gain(summaries, variant):
    assert stable(summaries, variant, "high").mean() <= 1.3 * stable(summaries, variant, "med").mean()


@pytest.mark.parametrize("gain", ["med", "high"])
def test_learning_variants_beat_baseline(summaries, gain):
    groups = [stable(summaries, v, gain) for v in ("nopred", *LEARNING_VARIANTS)]
    _, p = anova_oneway(groups)
    assert p < 0.05
    for group in groups[1:]:
        assert group.mean() < groups[0].mean()


@pytest.mark.parametrize("gain", ["low", "med", "high"])
@pytest.mark.parametrize("variant", LEARNING_VARIANTS)
def test_modeling_error_beats_no_prediction(summaries, variant, gain):
    model = stable(summaries, variant, gain, "xy_model_rms_stable").mean()
    nopred = stable(summaries, variant, gain, "xy_nopred_rms_stable").mean()
    assert model <= 0.7 * nopred


@pytest.mark.xfail(strict=False, reason="soft criterion: low-gain parity is reported, not enforced")
@pytest.mark.parametrize("variant", LEARNING_VARIANTS)
def test_low_gain_parity(summaries, variant):
    baseline = stable(summaries, "nopred", "low").mean()
    assert abs(stable(summaries, variant, "low").mean() - baseline) <= 0.15 * baseline
