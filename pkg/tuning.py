"""
Two-stage KRLST hyperparameter tuning

Stage 1 scores a grid over (sigma2, noise_var, lambda) offline, replaying the
calibration log through the predictor's online train/predict order.
Stage 2 refines the best cell one parameter at a time with short closed-loop runs.
"""
import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from config import ExperimentConfig, save_config, with_changes
from errors import NumericalDegeneracyError, SmithPredictorError
from experiment import calibration_log, run_experiment
from krlst import KernelParams, new_model, predict, train
from metrics import MM_PER_M, xy_rms
from plant import POSE_DIM
from predictor import fit_normalizer, raw_feature_matrix

# Configure logger
logger = logging.getLogger(__name__)

TUNED_KEYS = ("sigma2", "noise_var", "lambda_")


@dataclass
class TuneResult:
    best: KernelParams
    stage1: List[Tuple[float, float, float, float]] = field(default_factory=list)
    stage2: List[Tuple[str, float, float]] = field(default_factory=list)
    config: Optional[ExperimentConfig] = None


def _with_kernel(params: KernelParams, **changes) -> KernelParams:
    values = params.model_dump()
    values.update(changes)
    return KernelParams.model_validate(values)


def offline_score(features: np.ndarray, x_meas: np.ndarray, delay_steps: int,
                  params: KernelParams, start: int) -> float:
    """
    Prequential XY RMS (mm) of the delay-ahead pose change

    At row t the model first trains on (features[t - d], x[t] - x[t - d]) and then
    predicts x[t + d] - x[t] from features[t]; rows from `start` on are scored.
    """
    d = delay_steps
    n = features.shape[0]
    model = new_model(params, n_outputs=POSE_DIM)
    sq_errors = []
    try:
        for t in range(n - d):
            if t >= d:
                train(model, features[t - d], x_meas[t] - x_meas[t - d])
            if t >= start:
                mean, _ = predict(model, features[t])
                err = (x_meas[t + d] - x_meas[t] - mean)[:2]
                sq_errors.append(float(err @ err))
    except NumericalDegeneracyError:
        return math.inf
    if not sq_errors:
        return math.inf
    return math.sqrt(np.mean(sq_errors)) * MM_PER_M


def online_score(config: ExperimentConfig, variant: str, seeds, normalizer) -> float:
    """Mean stable-phase XY tracking RMS of short closed-loop runs; inf on failure"""
    scores = []
    for seed in seeds:
        try:
            log = run_experiment(config, seed, variant, config.harness.calibration_gain, normalizer)
        except SmithPredictorError:
            return math.inf
        scores.append(xy_rms(log, "stable", "tracking"))
    return float(np.mean(scores))


def _short_protocol(config: ExperimentConfig) -> ExperimentConfig:
    duration = config.harness.tune_online_duration
    transient_end = min(config.protocol.transient_end, 0.75 * duration)
    return with_changes(config, protocol={"duration": duration, "transient_end": transient_end})


def _refined(name: str, value: float, factor: float) -> Optional[float]:
    if name == "lambda_":
        # scale the forgetting rate 1 - lambda, not lambda itself
        refined = 1.0 - (1.0 - value) * factor
        if value >= 1.0 or not 0.0 < refined <= 1.0:
            return None
        return refined
    return value * factor


def tune(config: ExperimentConfig, out_path: Optional[str] = None,
         variant: str = "ldn3") -> TuneResult:
    """
    Tune the tracker hyperparameters and optionally write the tuned config

    Args:
        config: Starting configuration
        out_path: Write the tuned config (canonical INI) here when given
        variant: Learning variant whose features are used

    Returns:
        TuneResult with the best parameters and both stage tables
    """
    harness = config.harness
    delay = config.plant.delay_steps
    dt = config.protocol.dt

    cal_log = calibration_log(config)
    normalizer = fit_normalizer(cal_log, variant, delay, dt, config.predictor)
    features = np.array([normalizer.apply(row) for row in
                         raw_feature_matrix(cal_log, variant, delay, dt, config.predictor)])
    x_meas = np.asarray(cal_log.x_meas)

    # ========== STAGE 1: OFFLINE GRID ==========
    result = TuneResult(best=config.krlst)
    best_score = math.inf
    for sigma2, noise_var, lam in itertools.product(
            harness.tune_sigma2, harness.tune_noise_var, harness.tune_lambda):
        params = _with_kernel(config.krlst, sigma2=sigma2, noise_var=noise_var, lambda_=lam)
        score = offline_score(features, x_meas, delay, params, config.protocol.transient_ticks)
        result.stage1.append((sigma2, noise_var, lam, score))
        logger.info(f"[TUNE-STAGE1] sigma2: {sigma2:g} | noise_var: {noise_var:g} | "
                    f"lambda: {lam:g} | Score: {score:.4f} mm")
        if score < best_score:
            best_score, result.best = score, params

    # ========== STAGE 2: ONLINE REFINEMENT ==========
    short = _short_protocol(with_changes(config, krlst=result.best.model_dump(by_alias=True)))
    seeds = [harness.calibration_seed + 1 + k for k in range(harness.tune_seeds)]
    best_online = online_score(short, variant, seeds, normalizer)
    logger.info(f"[TUNE-STAGE2] Start | Score: {best_online:.4f} mm")

    for name in TUNED_KEYS:
        for factor in harness.tune_refine:
            value = _refined(name, getattr(result.best, name), factor)
            if value is None:
                continue
            candidate = _with_kernel(result.best, **{name: value})
            trial = with_changes(short, krlst=candidate.model_dump(by_alias=True))
            score = online_score(trial, variant, seeds, normalizer)
            result.stage2.append((name, value, score))
            logger.info(f"[TUNE-STAGE2] {name}: {value:g} | Score: {score:.4f} mm")
            if score < best_online:
                best_online, result.best = score, candidate

    result.config = with_changes(config, krlst=result.best.model_dump(by_alias=True))
    if out_path:
        save_config(result.config, out_path)
        logger.info(f"[TUNE-DONE] Written: {out_path}")
    return result
