"""
Learning-based Smith predictor
Builds features from pose, observer velocity and input history (LDN-compressed
or raw), trains KRLST on pairs delayed by the dead time and emits the predicted
pose x_p = x + y_hat used for the controller's error.
"""
import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Deque, Dict, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from errors import DimensionError, NotFittedError, TickDiscontinuityError
from krlst import KernelParams, KrlstModel, new_model, predict, train
from ldn import LdnBank, build_ldn, ldn_step, new_bank
from plant import POSE_DIM

# Configure logger
logger = logging.getLogger(__name__)

Variant = Literal["ldn3", "hist3", "hist7", "nopred"]

VARIANT_LABELS: Dict[str, str] = {
    "ldn3": "LDN-3",
    "hist3": "Hist-3",
    "hist7": "Hist-7",
    "nopred": "No-Pred",
}
HISTORY_STATES: Dict[str, int] = {"ldn3": 3, "hist3": 3, "hist7": 7, "nopred": 0}
LEARNING_VARIANTS = ("ldn3", "hist3", "hist7")
HISTORY_DEPTH = 7
STD_FLOOR = 1e-9


class PredictorConfig(BaseModel):
    """LDN memory settings ([predictor] config section)"""
    model_config = ConfigDict(frozen=True)

    ldn_order: int = Field(default=3, ge=1)
    ldn_theta: Optional[float] = Field(default=None, gt=0, description="defaults to the delay")


@dataclass
class Normalizer:
    """Frozen per-feature affine map (f - offset) * scale"""
    offset: np.ndarray
    scale: np.ndarray

    @property
    def dim(self) -> int:
        return self.offset.shape[0]

    def apply(self, raw: np.ndarray) -> np.ndarray:
        return (raw - self.offset) * self.scale


def identity_normalizer(dim: int) -> Normalizer:
    return Normalizer(offset=np.zeros(dim), scale=np.ones(dim))


@dataclass
class PredictorState:
    variant: str
    delay_steps: int
    model: Optional[KrlstModel] = None
    normalizer: Optional[Normalizer] = None
    ldn: Optional[LdnBank] = None
    u_history: np.ndarray = field(default_factory=lambda: np.zeros((HISTORY_DEPTH, POSE_DIM)))
    train_buffer: Deque[Tuple[int, np.ndarray, np.ndarray]] = field(default_factory=deque)
    last_prediction: np.ndarray = field(default_factory=lambda: np.zeros(POSE_DIM))
    last_target: Optional[np.ndarray] = None
    last_tick: int = 0
    train_calls: int = 0

    @property
    def history_states(self) -> int:
        return HISTORY_STATES[self.variant]

    @property
    def feature_dim(self) -> int:
        return 2 * POSE_DIM + POSE_DIM * self.history_states


def feature_dim(variant: str) -> int:
    return 2 * POSE_DIM + POSE_DIM * HISTORY_STATES[variant]


def new_predictor(variant: str, kernel_params: Optional[KernelParams], delay_steps: int,
                  dt: float, normalizer: Optional[Normalizer] = None,
                  config: Optional[PredictorConfig] = None) -> PredictorState:
    """Predictor for one experiment; learning variants need a fitted normalizer"""
    if variant not in HISTORY_STATES:
        raise ValueError(f"unknown predictor variant: {variant}")
    config = config or PredictorConfig()
    pred = PredictorState(
        variant=variant,
        delay_steps=delay_steps,
        train_buffer=deque(maxlen=2 * delay_steps + 1),
    )
    if variant == "nopred":
        return pred

    if normalizer is None:
        raise NotFittedError(f"variant {variant} needs a fitted normalizer")
    if normalizer.dim != pred.feature_dim:
        raise DimensionError(
            f"normalizer has {normalizer.dim} features, variant {variant} needs {pred.feature_dim}"
        )
    pred.normalizer = normalizer
    pred.model = new_model(kernel_params, n_outputs=POSE_DIM)
    if variant == "ldn3":
        pred.ldn = new_bank(_ldn_system(delay_steps, dt, config))
    return pred


def _ldn_system(delay_steps: int, dt: float, config: PredictorConfig):
    theta = config.ldn_theta if config.ldn_theta is not None else delay_steps * dt
    return build_ldn(config.ldn_order, theta, dt)


def _push_command(pred: PredictorState, u: np.ndarray):
    if pred.ldn is not None:
        ldn_step(pred.ldn, u)
    pred.u_history[1:] = pred.u_history[:-1]
    pred.u_history[0] = u


def memory_vector(pred: PredictorState) -> np.ndarray:
    """Channel-major input memory: LDN states, or the n most recent commands per channel"""
    if pred.variant == "ldn3":
        return pred.ldn.states.ravel()
    n = pred.history_states
    return pred.u_history[:n].T.ravel()


def build_features(x: np.ndarray, v_hat: np.ndarray, memory: np.ndarray,
                   normalizer: Optional[Normalizer]) -> np.ndarray:
    """[x (6), v_hat (6), memory (6n)] passed through the frozen normalizer"""
    memory = np.asarray(memory, dtype=float).ravel()
    if memory.shape[0] not in (POSE_DIM * 3, POSE_DIM * 7):
        raise DimensionError(f"memory width {memory.shape[0]} is not 6 x 3 or 6 x 7")
    if normalizer is None:
        raise NotFittedError("feature normalizer is not initialized")
    raw = np.concatenate([x, v_hat, memory])
    if normalizer.dim != raw.shape[0]:
        raise DimensionError(f"normalizer has {normalizer.dim} features, got {raw.shape[0]}")
    return normalizer.apply(raw)


def tick_and_train(pred: PredictorState, x: np.ndarray, v_hat: np.ndarray, u: np.ndarray,
                   tick: int) -> PredictorState:
    """
    Advance the predictor one control tick

    Pushes the most recent command into memory, buffers (features(t), x(t)) and,
    once tick t - delay_steps is buffered, trains on
    features(t - d) -> x(t) - x(t - d).
    """
    if tick != pred.last_tick + 1:
        raise TickDiscontinuityError(f"expected tick {pred.last_tick + 1}, got {tick}")
    pred.last_tick = tick
    _push_command(pred, np.asarray(u, dtype=float))
    if pred.variant == "nopred":
        return pred

    x = np.array(x, dtype=float)
    features = build_features(x, v_hat, memory_vector(pred), pred.normalizer)
    pred.train_buffer.append((tick, features, x))

    d = pred.delay_steps
    if len(pred.train_buffer) > d:
        old_tick, old_features, old_x = pred.train_buffer[-(d + 1)]
        target = x - old_x
        train(pred.model, old_features, target)
        pred.train_calls += 1
        pred.last_target = target
    return pred


def infer(pred: PredictorState, x: np.ndarray, v_hat: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Predicted pose change over the delay and the predicted pose

    Returns:
        (y_hat, x_p) with x_p = x + y_hat
    """
    if pred.variant == "nopred":
        y_hat = np.zeros(POSE_DIM)
    else:
        features = build_features(x, v_hat, memory_vector(pred), pred.normalizer)
        y_hat, _ = predict(pred.model, features)
    pred.last_prediction = y_hat
    return y_hat, x + y_hat


# ========== CALIBRATION ==========

def raw_feature_matrix(calibration_log, variant: str, delay_steps: int, dt: float,
                       config: Optional[PredictorConfig] = None) -> np.ndarray:
    """
    Replay a logged run's commands through fresh memory and rebuild the raw
    (unnormalized) feature row the predictor would have seen at each tick
    """
    if variant not in LEARNING_VARIANTS:
        raise ValueError(f"variant {variant} has no features")
    x_meas = np.asarray(calibration_log.x_meas)
    v_hat = np.asarray(calibration_log.v_hat)
    commands = np.asarray(calibration_log.u)
    n = x_meas.shape[0]
    if n == 0:
        raise DimensionError("calibration log is empty")

    replay = PredictorState(variant=variant, delay_steps=delay_steps)
    if variant == "ldn3":
        replay.ldn = new_bank(_ldn_system(delay_steps, dt, config or PredictorConfig()))
    rows = np.empty((n, feature_dim(variant)))
    previous = np.zeros(POSE_DIM)
    for i in range(n):
        _push_command(replay, previous)
        rows[i] = np.concatenate([x_meas[i], v_hat[i], memory_vector(replay)])
        previous = commands[i]
    return rows


def fit_normalizer(calibration_log, variant: str, delay_steps: int, dt: float,
                   config: Optional[PredictorConfig] = None) -> Normalizer:
    """Per-feature z-score fitted on a calibration run, std floored at 1e-9"""
    rows = raw_feature_matrix(calibration_log, variant, delay_steps, dt, config)
    offset = rows.mean(axis=0)
    std = np.maximum(rows.std(axis=0), STD_FLOOR)
    logger.info(f"[NORMALIZER-FIT] Variant: {variant} | Rows: {rows.shape[0]} | "
                f"Features: {rows.shape[1]}")
    return Normalizer(offset=offset, scale=1.0 / std)
