"""
Shared pytest fixtures
"""
import numpy as np
import pytest

from config import load_config, with_changes
from experiment import ExperimentLog
from plant import POSE_DIM


@pytest.fixture(scope="session")
def default_config():
    return load_config()


@pytest.fixture(scope="session")
def short_config(default_config):
    """Protocol cut to a few seconds of stable phase"""
    return with_changes(default_config, protocol={"duration": 26.0})


@pytest.fixture(scope="session")
def ideal_config(default_config):
    """No delay, no noise, controller model equal to the plant"""
    return with_changes(
        default_config,
        plant={"delay_steps": 0, "noise_std": [0.0] * POSE_DIM},
        controller={"model_mismatch": 0.0},
    )


def make_log(n: int = 3000, transient: int = 1115, delay: int = 7, **header) -> ExperimentLog:
    """Empty log with a complete header, for metric tests"""
    values = {
        "config_hash": "test",
        "seed": "1",
        "variant": "ldn3",
        "gain": "med",
        "delay_steps": str(delay),
        "dt": "0.02",
        "transient_ticks": str(transient),
        "failed": "false",
        "failure_tick": "",
    }
    values.update({k: str(v) for k, v in header.items()})
    log = ExperimentLog.allocate(n, values)
    log.tick[:] = np.arange(1, n + 1)
    log.time[:] = np.arange(n) * 0.02
    return log


@pytest.fixture
def log_factory():
    return make_log
