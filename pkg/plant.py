"""
Simulated two-module soft-arm surrogate
First-order nonlinear pose dynamics with an input delay line:

    dx/dt = A x + f_A(x) + [B1 + B2(x)] u(t - d) + g(u(t - d))
"""
import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Deque, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from errors import NonFiniteInputError, PlantDivergedError

# Configure logger
logger = logging.getLogger(__name__)

POSE_DIM = 6
NOISE_STREAM = 0
MISMATCH_STREAM = 1


def _as_matrix(value) -> np.ndarray:
    arr = np.array(value, dtype=float)
    if arr.shape != (POSE_DIM, POSE_DIM):
        raise ValueError(f"expected a {POSE_DIM}x{POSE_DIM} matrix, got shape {arr.shape}")
    return arr


def _as_vector(value) -> np.ndarray:
    arr = np.array(value, dtype=float)
    if arr.shape != (POSE_DIM,):
        raise ValueError(f"expected a {POSE_DIM}-vector, got shape {arr.shape}")
    return arr


class PlantParams(BaseModel):
    """Plant parameters ([plant] config section)"""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    a_lin: np.ndarray
    fa_coeff: np.ndarray
    b1: np.ndarray
    b2_gain: float
    b2_coupling: np.ndarray
    g_sat: np.ndarray
    delay_steps: int = Field(default=7, ge=0)
    noise_std: np.ndarray = Field(default_factory=lambda: np.array([3e-4] * 3 + [3e-3] * 3))
    dt: float = Field(default=0.02, gt=0)
    workspace_bound: float = Field(default=1.0, gt=0)

    @field_validator("a_lin", "b1", "b2_coupling", mode="before")
    @classmethod
    def _matrix(cls, value):
        return _as_matrix(value)

    @field_validator("fa_coeff", "g_sat", "noise_std", mode="before")
    @classmethod
    def _vector(cls, value):
        return _as_vector(value)

    @model_validator(mode="after")
    def _hurwitz(self):
        worst = float(np.max(np.linalg.eigvals(self.a_lin).real))
        if not worst < 0.0:
            raise ValueError(f"a_lin is not Hurwitz (max eigenvalue real part {worst:.4g})")
        if np.any(self.noise_std < 0):
            raise ValueError("noise_std must be non-negative")
        return self


def replace_params(params: PlantParams, **changes) -> PlantParams:
    """Validated copy of params with some fields replaced"""
    values = dict(params)
    values.update(changes)
    return PlantParams.model_validate(values)


@dataclass
class PlantTruth:
    """Ground-truth state, the pending command FIFO and the noise generator"""
    x: np.ndarray
    delay_line: Deque[np.ndarray]
    rng: np.random.Generator
    tick: int = 0
    applied: np.ndarray = field(default_factory=lambda: np.zeros(POSE_DIM))


# ========== MODEL TERMS ==========

def drift(x: np.ndarray, params: PlantParams) -> np.ndarray:
    """f(x) = A x + f_A(x), with quadratic softening f_A(x)_i = -c_i x_i |x_i|"""
    return params.a_lin @ x - params.fa_coeff * x * np.abs(x)


def input_gain(x: np.ndarray, params: PlantParams) -> np.ndarray:
    """B1 + B2(x), with the bilinear term B2(x) = gamma * x_0 * C"""
    return params.b1 + params.b2_gain * x[0] * params.b2_coupling


def input_map(x: np.ndarray, u: np.ndarray, params: PlantParams) -> np.ndarray:
    """h(x, u) = [B1 + B2(x)] u + g(u), g(u)_i = delta_i (tanh(u_i) - u_i)"""
    return input_gain(x, params) @ u + params.g_sat * (np.tanh(u) - u)


def input_jacobian(x: np.ndarray, u: np.ndarray, params: PlantParams) -> np.ndarray:
    """dh/du"""
    sech2 = 1.0 / np.cosh(u) ** 2
    return input_gain(x, params) + np.diag(params.g_sat * (sech2 - 1.0))


def plant_dynamics(x: np.ndarray, u_d: np.ndarray, params: PlantParams) -> np.ndarray:
    """Pose rate for pose x under the delayed input u_d"""
    rate = drift(x, params) + input_map(x, u_d, params)
    if not np.all(np.isfinite(rate)):
        raise NonFiniteInputError("plant dynamics produced a non-finite rate")
    return rate


def rk4_step(x: np.ndarray, u: np.ndarray, params: PlantParams, dt: float) -> np.ndarray:
    """Classic RK4 with the input held over the step"""
    k1 = plant_dynamics(x, u, params)
    k2 = plant_dynamics(x + 0.5 * dt * k1, u, params)
    k3 = plant_dynamics(x + 0.5 * dt * k2, u, params)
    k4 = plant_dynamics(x + dt * k3, u, params)
    return x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


# ========== SIMULATION ==========

def new_truth(params: PlantParams, seed: int, x0=None) -> PlantTruth:
    """Plant at rest (or at x0) with a zero-padded delay line"""
    x = np.zeros(POSE_DIM) if x0 is None else np.array(x0, dtype=float)
    delay_line = deque(np.zeros(POSE_DIM) for _ in range(params.delay_steps))
    return PlantTruth(
        x=x,
        delay_line=delay_line,
        rng=np.random.default_rng([seed, NOISE_STREAM]),
    )


def measure(truth: PlantTruth, params: PlantParams) -> np.ndarray:
    """Tracker reading: true pose plus Gaussian noise"""
    return truth.x + params.noise_std * truth.rng.standard_normal(POSE_DIM)


def plant_step(truth: PlantTruth, u, params: PlantParams) -> Tuple[PlantTruth, np.ndarray]:
    """
    Advance the plant one sample

    Args:
        truth: Plant state, updated in place
        u: Command issued this tick
        params: Plant parameters

    Returns:
        (truth, measured pose after the step)
    """
    u = np.asarray(u, dtype=float)
    if u.shape != (POSE_DIM,) or not np.all(np.isfinite(u)):
        raise NonFiniteInputError(f"plant command must be a finite {POSE_DIM}-vector")

    if params.delay_steps > 0:
        applied = truth.delay_line.popleft()
        truth.delay_line.append(u.copy())
    else:
        applied = u

    x_next = rk4_step(truth.x, applied, params, params.dt)
    truth.tick += 1
    norm = float(np.linalg.norm(x_next))
    if not np.isfinite(norm) or norm > params.workspace_bound:
        logger.error(f"[PLANT-DIVERGED] Tick: {truth.tick} | Norm: {norm:.4g} | "
                     f"Bound: {params.workspace_bound}")
        raise PlantDivergedError(
            f"pose norm {norm:.4g} exceeded workspace bound {params.workspace_bound}",
            tick=truth.tick,
        )

    truth.x = x_next
    truth.applied = applied
    return truth, measure(truth, params)


# ========== PARAMETER SETS ==========

def default_params() -> PlantParams:
    """Calibrated defaults shipped in default_config.ini"""
    from config import load_config, DEFAULT_CONFIG_PATH
    return load_config(DEFAULT_CONFIG_PATH).plant


def perturb_params(params: PlantParams, seed: int, fraction: float) -> PlantParams:
    """
    Controller's copy of the model: a_lin, b1 and fa_coeff scaled elementwise
    by 1 + U(-fraction, fraction), deterministic per seed
    """
    if fraction <= 0.0:
        return params
    rng = np.random.default_rng([seed, MISMATCH_STREAM])

    def scale(shape):
        return 1.0 + rng.uniform(-fraction, fraction, size=shape)

    return params.model_copy(update={
        "a_lin": params.a_lin * scale(params.a_lin.shape),
        "b1": params.b1 * scale(params.b1.shape),
        "fa_coeff": params.fa_coeff * scale(params.fa_coeff.shape),
    })
