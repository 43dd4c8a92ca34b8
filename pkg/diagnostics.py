"""
Component self-checks
Quick numerical sanity checks run by `main.py diagnose`.
"""
import logging
from typing import List, NamedTuple

import numpy as np

from config import ExperimentConfig, with_changes
from errors import SmithPredictorError
from experiment import run_experiment
from krlst import KernelParams, kernel_vector, new_model, predict, train
from ldn import build_ldn, decode_delayed, ldn_step, new_bank
from metrics import xy_rms

# Configure logger
logger = logging.getLogger(__name__)


class CheckResult(NamedTuple):
    name: str
    ok: bool
    detail: str


def ldn_delay_error(p: int = 3, theta: float = 0.14, dt: float = 0.02,
                    freq_hz: float = 0.5, duration: float = 4.0) -> float:
    """
    Full-delay decode RMS relative to the amplitude of a unit sinusoid

    Compared against a ring buffer of the held input, d - 1 pushes back, after
    a warmup of two windows.
    """
    system = build_ldn(p, theta, dt)
    bank = new_bank(system, channels=1)
    d = int(round(theta / dt))
    n = int(round(duration / dt))
    warmup = int(round(2 * theta / dt))
    u = np.sin(2.0 * np.pi * freq_hz * dt * np.arange(n))
    errors = []
    for k in range(n):
        ldn_step(bank, u[k:k + 1])
        if k >= warmup:
            errors.append(decode_delayed(bank)[0] - u[k - d + 1])
    return float(np.sqrt(np.mean(np.square(errors))))


def krlst_batch_gap(n_points: int = 30, dim: int = 5, seed: int = 0,
                    sigma2: float = 1.0, noise_var: float = 1e-2) -> float:
    """
    Largest relative gap between streaming predictions and the batch
    Gram-solve posterior mean, over every prefix of a random stream
    """
    rng = np.random.default_rng(seed)
    z = rng.uniform(-1.0, 1.0, size=(n_points, dim))
    y = np.sin(z.sum(axis=1))
    queries = rng.uniform(-1.0, 1.0, size=(5, dim))
    params = KernelParams(sigma2=sigma2, noise_var=noise_var, lambda_=1.0, budget=n_points)
    model = new_model(params, n_outputs=1)
    worst = 0.0
    for t in range(n_points):
        train(model, z[t], y[t:t + 1])
        zs = z[:t + 1]
        gram = np.array([kernel_vector(zs, row, sigma2) for row in zs])
        weights = np.linalg.solve(gram + (params.jitter + noise_var) * np.eye(t + 1), y[:t + 1])
        for query in queries:
            expected = kernel_vector(zs, query, sigma2) @ weights
            got = predict(model, query)[0][0]
            worst = max(worst, abs(got - expected) / max(abs(expected), 1e-12))
    return worst


def run_diagnostics(config: ExperimentConfig) -> List[CheckResult]:
    """Run every self-check; never raises for a failing component"""
    results = []

    err = ldn_delay_error(config.predictor.ldn_order, config.plant.delay_steps * config.protocol.dt,
                          config.protocol.dt)
    results.append(CheckResult("LDN delay reconstruction", err <= 0.05, f"relative RMS {err:.4f}"))

    gap = krlst_batch_gap()
    results.append(CheckResult("KRLST batch equivalence", gap <= 1e-6, f"max relative gap {gap:.2e}"))

    worst = float(np.max(np.linalg.eigvals(config.plant.a_lin).real))
    results.append(CheckResult("Plant linear part Hurwitz", worst < 0.0, f"max Re(eig) {worst:.3f}"))

    short = with_changes(config, protocol={"duration": config.protocol.transient_end + 5.0})
    try:
        log = run_experiment(short, config.harness.calibration_seed, "nopred", "med")
        rms = xy_rms(log, "stable", "tracking")
        results.append(CheckResult("Closed-loop smoke run", bool(np.isfinite(rms)),
                                   f"stable XY RMS {rms:.3f} mm"))
    except SmithPredictorError as e:
        results.append(CheckResult("Closed-loop smoke run", False, str(e)))

    for r in results:
        logger.info(f"[DIAGNOSE] {r.name} | OK: {r.ok} | {r.detail}")
    return results
