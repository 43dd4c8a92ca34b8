"""
Experiment orchestration
Circular tracking reference, the per-tick closed loop and the CSV experiment log
"""
import logging
import os
import time
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np

from config import CSV_FLOAT_FORMAT, ExperimentConfig, ProtocolConfig, config_hash
from controller import control_tick, gain_set, new_controller_state, observer_step
from errors import (
    DimensionError,
    NonFiniteInputError,
    NumericalDegeneracyError,
    PlantDivergedError,
)
from plant import POSE_DIM, measure, new_truth, perturb_params, plant_step
from predictor import LEARNING_VARIANTS, Normalizer, fit_normalizer, infer, new_predictor, tick_and_train
from run_utils import run_id

# Configure logger
logger = logging.getLogger(__name__)

# Per-tick 6-vector columns, in file order
VECTOR_COLUMNS = ("r", "r_dot", "x_meas", "x_true", "v_hat", "y_hat", "u", "v_smc", "integral")
HEADER_KEYS = ("config_hash", "seed", "variant", "gain", "delay_steps", "dt",
               "transient_ticks", "failed", "failure_tick", "train_calls")


# ========== REFERENCE ==========

def reference(t: float, proto: ProtocolConfig) -> Tuple[np.ndarray, np.ndarray]:
    """
    Spiral-in circle: radius grows linearly over the buildup, then holds

    Args:
        t: Time in seconds, 0 <= t <= duration
        proto: Protocol settings

    Returns:
        (r, r_dot) pose and pose rate
    """
    if not 0.0 <= t <= proto.duration:
        raise ValueError(f"reference time {t} outside [0, {proto.duration}]")
    if t < proto.buildup:
        rho = proto.radius * t / proto.buildup
        rho_dot = proto.radius / proto.buildup
    else:
        rho, rho_dot = proto.radius, 0.0

    c, s = np.cos(proto.omega * t), np.sin(proto.omega * t)
    r = np.empty(POSE_DIM)
    r_dot = np.zeros(POSE_DIM)
    r[0] = proto.center[0] + rho * c
    r[1] = proto.center[1] + rho * s
    r[2] = proto.z_ref
    r[3:] = proto.orientation_ref
    r_dot[0] = rho_dot * c - rho * proto.omega * s
    r_dot[1] = rho_dot * s + rho * proto.omega * c
    return r, r_dot


# ========== EXPERIMENT LOG ==========

@dataclass
class ExperimentLog:
    """Per-tick record of one experiment plus its identifying header"""
    header: Dict[str, str]
    tick: np.ndarray
    time: np.ndarray
    columns: Dict[str, np.ndarray] = field(default_factory=dict)

    @classmethod
    def allocate(cls, n_ticks: int, header: Dict[str, str]) -> "ExperimentLog":
        return cls(
            header=header,
            tick=np.zeros(n_ticks, dtype=np.int64),
            time=np.zeros(n_ticks),
            columns={name: np.zeros((n_ticks, POSE_DIM)) for name in VECTOR_COLUMNS},
        )

    def __getattr__(self, name):
        columns = self.__dict__.get("columns", {})
        if name in columns:
            return columns[name]
        raise AttributeError(name)

    @property
    def n_rows(self) -> int:
        return self.tick.shape[0]

    @property
    def failed(self) -> bool:
        return self.header.get("failed", "false") == "true"

    @property
    def delay_steps(self) -> int:
        return int(self.header["delay_steps"])

    @property
    def transient_ticks(self) -> int:
        return int(self.header["transient_ticks"])

    def record(self, i: int, tick: int, t: float, **values):
        self.tick[i] = tick
        self.time[i] = t
        for name, value in values.items():
            self.columns[name][i] = value

    def truncate(self, n_rows: int):
        self.tick = self.tick[:n_rows]
        self.time = self.time[:n_rows]
        self.columns = {name: arr[:n_rows] for name, arr in self.columns.items()}

    def column_names(self):
        names = ["tick", "time"]
        for name in VECTOR_COLUMNS:
            names.extend(f"{name}_{k}" for k in range(POSE_DIM))
        return names

    def to_matrix(self) -> np.ndarray:
        parts = [self.tick[:, None].astype(float), self.time[:, None]]
        parts.extend(self.columns[name] for name in VECTOR_COLUMNS)
        return np.hstack(parts)

    def to_csv(self, path: str):
        """'#'-prefixed header lines, a column row, then full-precision data"""
        os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            for key in HEADER_KEYS:
                f.write(f"# {key}={self.header.get(key, '')}\n")
            f.write(",".join(self.column_names()) + "\n")
            if self.n_rows:
                np.savetxt(f, self.to_matrix(), fmt=CSV_FLOAT_FORMAT, delimiter=",")

    @classmethod
    def from_csv(cls, path: str) -> "ExperimentLog":
        header = {}
        skip = 0
        with open(path, encoding="utf-8") as f:
            for line in f:
                skip += 1
                if not line.startswith("#"):
                    break  # column row
                key, _, value = line[1:].strip().partition("=")
                header[key] = value
        data = np.loadtxt(path, delimiter=",", skiprows=skip, ndmin=2)
        expected = 2 + POSE_DIM * len(VECTOR_COLUMNS)
        if data.size == 0:
            data = np.zeros((0, expected))
        if data.shape[1] != expected:
            raise DimensionError(f"{path}: expected {expected} columns, found {data.shape[1]}")
        columns = {
            name: data[:, 2 + POSE_DIM * k: 2 + POSE_DIM * (k + 1)].copy()
            for k, name in enumerate(VECTOR_COLUMNS)
        }
        return cls(header=header, tick=data[:, 0].astype(np.int64), time=data[:, 1].copy(),
                   columns=columns)


# ========== CALIBRATION ==========

def calibration_log(config: ExperimentConfig) -> "ExperimentLog":
    """No-Pred run at the calibration seed and gain; source of every feature normalizer"""
    harness = config.harness
    logger.info(f"[CALIBRATION] Seed: {harness.calibration_seed} | Gain: {harness.calibration_gain}")
    return run_experiment(config, harness.calibration_seed, "nopred", harness.calibration_gain)


def variant_normalizer(config: ExperimentConfig, variant: str,
                       cal_log: Optional[ExperimentLog] = None) -> Normalizer:
    cal_log = cal_log if cal_log is not None else calibration_log(config)
    return fit_normalizer(cal_log, variant, config.plant.delay_steps, config.protocol.dt,
                          config.predictor)


# ========== CLOSED LOOP ==========

def run_experiment(config: ExperimentConfig, seed: int, variant: str = "nopred",
                   gain: str = "med", normalizer: Optional[Normalizer] = None,
                   out_dir: Optional[str] = None) -> ExperimentLog:
    """
    Simulate one experiment of the protocol

    Per tick: measure, observer, predictor update and inference, STSMC on the
    predicted-pose error, input estimator, plant step.

    Args:
        config: Experiment configuration
        seed: Noise and model-mismatch seed
        variant: ldn3 | hist3 | hist7 | nopred
        gain: low | med | high
        normalizer: Frozen feature normalizer; fitted on the calibration run when omitted
        out_dir: Write the CSV log here when given (also on failure)

    Returns:
        ExperimentLog with one row per tick
    """
    proto = config.protocol
    params = config.plant
    dt = proto.dt
    if variant in LEARNING_VARIANTS and normalizer is None:
        normalizer = variant_normalizer(config, variant)

    model = perturb_params(params, seed, config.controller.model_mismatch)
    gains = gain_set(config.controller, gain)
    u_limit = config.controller.u_limit
    truth = new_truth(params, seed)
    ctrl = new_controller_state(truth.x)
    pred = new_predictor(variant, config.krlst, params.delay_steps, dt, normalizer, config.predictor)

    n_ticks = proto.n_ticks
    log = ExperimentLog.allocate(n_ticks, {
        "config_hash": config_hash(config),
        "seed": str(seed),
        "variant": variant,
        "gain": gain,
        "delay_steps": str(params.delay_steps),
        "dt": repr(dt),
        "transient_ticks": str(proto.transient_ticks),
        "failed": "false",
        "failure_tick": "",
        "train_calls": "0",
    })
    name = run_id(variant, gain, seed)
    logger.info(f"[RUN-START] Variant: {variant} | Gain: {gain} | Seed: {seed}")
    start_time = time.perf_counter()

    x_meas = measure(truth, params)
    u_prev = np.zeros(POSE_DIM)
    filled = 0
    try:
        for i in range(n_ticks):
            tick = i + 1
            t = i * dt
            r, r_dot = reference(t, proto)
            ctrl = observer_step(ctrl, x_meas, gains, dt)
            tick_and_train(pred, x_meas, ctrl.v_hat, u_prev, tick)
            y_hat, x_p = infer(pred, x_meas, ctrl.v_hat)
            u, ctrl, v_smc, _ = control_tick(ctrl, x_p, r, r_dot, gains, model, dt, u_limit)
            log.record(i, tick, t, r=r, r_dot=r_dot, x_meas=x_meas, x_true=truth.x,
                       v_hat=ctrl.v_hat, y_hat=y_hat, u=u, v_smc=v_smc,
                       integral=ctrl.integral_term)
            filled = i + 1
            truth, x_meas = plant_step(truth, u, params)
            u_prev = u
    except (PlantDivergedError, NonFiniteInputError, NumericalDegeneracyError) as e:
        failure_tick = getattr(e, "tick", None) or filled
        log.truncate(filled)
        log.header["failed"] = "true"
        log.header["failure_tick"] = str(failure_tick)
        log.header["train_calls"] = str(pred.train_calls)
        logger.error(f"[RUN-FAIL] Run: {name} | Tick: {failure_tick} | Error: {e}")
        if out_dir:
            log.to_csv(os.path.join(out_dir, f"{name}.csv"))
        raise

    log.header["train_calls"] = str(pred.train_calls)
    elapsed = time.perf_counter() - start_time
    logger.info(f"[RUN-DONE] Run: {name} | Ticks: {n_ticks} | Elapsed: {elapsed:.2f}s | "
                f"Dictionary: {pred.model.size if pred.model is not None else 0}")
    if out_dir:
        log.to_csv(os.path.join(out_dir, f"{name}.csv"))
    return log
