"""
Baseline model-based controller
Super-twisting sliding mode law, desired-speed computation, nonlinear
input-inversion estimator and the first-order velocity observer
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, Literal, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from errors import NumericalDegeneracyError
from plant import PlantParams, POSE_DIM, drift, input_jacobian, input_map

# Configure logger
logger = logging.getLogger(__name__)

GainCondition = Literal["low", "med", "high"]

# Medium and high conditions double and triple k1; every other gain is shared
K1_MULTIPLIERS: Dict[str, float] = {"low": 1.0, "med": 2.0, "high": 3.0}
CONDITION_LABELS: Dict[str, str] = {"low": "Low", "med": "Medium", "high": "High"}


class ControllerConfig(BaseModel):
    """Gains and actuator limits ([controller] config section), diagonals only"""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    k1_low: np.ndarray
    k2: np.ndarray
    gamma: np.ndarray
    l_obs: np.ndarray
    u_limit: float = Field(default=1.0, gt=0)
    model_mismatch: float = Field(default=0.15, ge=0, lt=1)

    @field_validator("k1_low", "k2", "gamma", "l_obs", mode="before")
    @classmethod
    def _positive_diagonal(cls, value):
        arr = np.array(value, dtype=float)
        if arr.shape != (POSE_DIM,):
            raise ValueError(f"expected a {POSE_DIM}-vector diagonal, got shape {arr.shape}")
        if np.any(arr <= 0):
            raise ValueError("gain diagonals must be strictly positive")
        return arr


@dataclass(frozen=True)
class GainSet:
    k1: np.ndarray
    k2: np.ndarray
    gamma_inv: np.ndarray
    l_obs: np.ndarray
    condition: str


@dataclass
class ControllerState:
    integral_term: np.ndarray = field(default_factory=lambda: np.zeros(POSE_DIM))
    u_est: np.ndarray = field(default_factory=lambda: np.zeros(POSE_DIM))
    x_hat: np.ndarray = field(default_factory=lambda: np.zeros(POSE_DIM))
    v_hat: np.ndarray = field(default_factory=lambda: np.zeros(POSE_DIM))
    saturated: bool = False


def gain_set(config: ControllerConfig, condition: GainCondition) -> GainSet:
    """Gain matrices for one condition of the k1 ladder"""
    if condition not in K1_MULTIPLIERS:
        raise ValueError(f"unknown gain condition: {condition}")
    return GainSet(
        k1=np.diag(config.k1_low * K1_MULTIPLIERS[condition]),
        k2=np.diag(config.k2),
        gamma_inv=np.diag(config.gamma),
        l_obs=np.diag(config.l_obs),
        condition=condition,
    )


def new_controller_state(x0=None) -> ControllerState:
    state = ControllerState()
    if x0 is not None:
        state.x_hat = np.array(x0, dtype=float)
    return state


def signed_power(w, a: float) -> np.ndarray:
    """Componentwise |w_i|^a sgn(w_i), with sgn(0) = 0"""
    w = np.asarray(w, dtype=float)
    return np.abs(w) ** a * np.sign(w)


def stsmc_step(state: ControllerState, e: np.ndarray, gains: GainSet,
               dt: float) -> Tuple[np.ndarray, ControllerState]:
    """
    Super-twisting law v_smc = k1 |e|^1/2 sgn(e) + k2 * integral of sgn(e)

    The integral is frozen while the input estimate sits on the actuator limit.
    """
    if not state.saturated:
        state.integral_term = state.integral_term + gains.k2 @ signed_power(e, 0.0) * dt
    v_smc = gains.k1 @ signed_power(e, 0.5) + state.integral_term
    return v_smc, state


def desired_speed(r_dot: np.ndarray, f_of_x: np.ndarray, v_smc: np.ndarray) -> np.ndarray:
    """v = r_dot - f(x) - v_smc"""
    return r_dot - f_of_x - v_smc


def input_estimator_step(state: ControllerState, x: np.ndarray, v: np.ndarray,
                         gains: GainSet, model: PlantParams, dt: float,
                         u_limit: float = 1.0) -> ControllerState:
    """
    du/dt = Gamma M(x, u) (v - h(x, u)) with M = (dh/du)^T, then saturation
    """
    jac = input_jacobian(x, state.u_est, model)
    if not np.all(np.isfinite(jac)):
        raise NumericalDegeneracyError("input-map Jacobian is not finite")
    residual = v - input_map(x, state.u_est, model)
    u_next = state.u_est + gains.gamma_inv @ (jac.T @ residual) * dt
    state.u_est = np.clip(u_next, -u_limit, u_limit)
    state.saturated = bool(np.any(np.abs(state.u_est) >= u_limit))
    return state


def observer_step(state: ControllerState, x_measured: np.ndarray, gains: GainSet,
                  dt: float) -> ControllerState:
    """v_hat = L (x - x_hat); x_hat integrates v_hat"""
    state.v_hat = gains.l_obs @ (x_measured - state.x_hat)
    state.x_hat = state.x_hat + state.v_hat * dt
    return state


def control_tick(state: ControllerState, x_p: np.ndarray, r: np.ndarray, r_dot: np.ndarray,
                 gains: GainSet, model: PlantParams, dt: float, u_limit: float):
    """
    One control cycle on the (possibly predicted) pose x_p

    Returns:
        (command, state, v_smc, v)
    """
    v_smc, state = stsmc_step(state, x_p - r, gains, dt)
    v = desired_speed(r_dot, drift(x_p, model), v_smc)
    state = input_estimator_step(state, x_p, v, gains, model, dt, u_limit)
    return state.u_est.copy(), state, v_smc, v
