"""
Kernel Recursive Least Squares Tracker
Online Bayesian kernel regression with forgetting and a fixed-budget dictionary.
One shared dictionary and covariance, one posterior mean column per output.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from errors import DimensionError, NonFiniteInputError, NumericalDegeneracyError

# Configure logger
logger = logging.getLogger(__name__)

N_OUTPUTS = 6


class KernelParams(BaseModel):
    """Hyperparameters of the tracker ([krlst] config section)"""
    model_config = ConfigDict(frozen=True, populate_by_name=True)

    sigma2: float = Field(gt=0, description="squared Gaussian kernel width")
    noise_var: float = Field(gt=0, description="observation noise variance (regularizer nu)")
    lambda_: float = Field(default=1.0, gt=0, le=1, alias="lambda", description="forgetting factor")
    budget: int = Field(default=80, ge=1, description="max dictionary size M")
    jitter: float = Field(default=1e-8, ge=0, description="diagonal stabilizer")
    novelty_threshold: Optional[float] = Field(
        default=None, ge=0, description="growth gate on gamma^2, 10 * jitter when unset"
    )

    @model_validator(mode="after")
    def _check_threshold(self):
        if self.novelty_threshold is not None and not math.isfinite(self.novelty_threshold):
            raise ValueError("novelty_threshold must be finite")
        return self

    @property
    def growth_threshold(self) -> float:
        if self.novelty_threshold is None:
            return 10.0 * self.jitter
        return self.novelty_threshold


@dataclass
class KrlstModel:
    """Dictionary, posterior mean/covariance and inverse jittered Gram matrix"""
    params: KernelParams
    n_outputs: int = N_OUTPUTS
    dictionary: np.ndarray = field(default=None)
    mu: np.ndarray = field(default=None)
    sigma_cov: np.ndarray = field(default=None)
    q_inv: np.ndarray = field(default=None)
    k_dict: np.ndarray = field(default=None)
    train_count: int = 0

    def __post_init__(self):
        if self.mu is None:
            self.mu = np.zeros((0, self.n_outputs))
            self.sigma_cov = np.zeros((0, 0))
            self.q_inv = np.zeros((0, 0))
            self.k_dict = np.zeros((0, 0))

    @property
    def size(self) -> int:
        return self.mu.shape[0]

    @property
    def alpha(self) -> np.ndarray:
        """Weights in kernel space: y_hat = k_t^T alpha"""
        return self.q_inv @ self.mu


def new_model(params: KernelParams, n_outputs: int = N_OUTPUTS) -> KrlstModel:
    return KrlstModel(params=params, n_outputs=n_outputs)


def kernel(a, b, sigma2: float) -> float:
    """Gaussian kernel exp(-|a - b|^2 / (2 sigma2))"""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise DimensionError(f"kernel arguments differ in shape: {a.shape} vs {b.shape}")
    return float(np.exp(-np.sum((a - b) ** 2) / (2.0 * sigma2)))


def kernel_vector(dictionary: np.ndarray, z: np.ndarray, sigma2: float) -> np.ndarray:
    d2 = np.sum((dictionary - z) ** 2, axis=1)
    return np.exp(-d2 / (2.0 * sigma2))


def _check_features(model: KrlstModel, z) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    if z.ndim != 1:
        raise DimensionError(f"feature vector must be 1-D, got shape {z.shape}")
    if model.dictionary is not None and model.dictionary.shape[1] != z.shape[0]:
        raise DimensionError(
            f"feature dimension {z.shape[0]} does not match dictionary dimension "
            f"{model.dictionary.shape[1]}"
        )
    return z


def predict(model: KrlstModel, z) -> Tuple[np.ndarray, float]:
    """
    Posterior predictive mean (one entry per output) and shared variance

    Returns:
        (mean, variance) with variance = gamma^2 + q^T Sigma q + noise_var
    """
    z = _check_features(model, z)
    params = model.params
    if model.size == 0:
        return np.zeros(model.n_outputs), 1.0 + params.noise_var

    k = kernel_vector(model.dictionary, z, params.sigma2)
    q = model.q_inv @ k
    mean = q @ model.mu
    gamma2 = max(1.0 + params.jitter - k @ q, 0.0)
    projected = max(q @ model.sigma_cov @ q, 0.0)
    return mean, gamma2 + projected + params.noise_var


def _forget(model: KrlstModel):
    """Blend the posterior back toward the prior"""
    lam = model.params.lambda_
    model.sigma_cov = lam * model.sigma_cov + (1.0 - lam) * model.k_dict
    model.mu = math.sqrt(lam) * model.mu


def train(model: KrlstModel, z, y) -> KrlstModel:
    """
    One online update: forget, Bayesian update, grow or reduced update, prune

    Args:
        model: Tracker state, updated in place
        z: Feature vector
        y: Target vector with n_outputs entries

    Returns:
        The updated model
    """
    z = _check_features(model, z)
    y = np.asarray(y, dtype=float)
    if y.shape != (model.n_outputs,):
        raise DimensionError(f"expected {model.n_outputs} targets, got shape {y.shape}")
    if not (np.all(np.isfinite(z)) and np.all(np.isfinite(y))):
        raise NonFiniteInputError("training pair contains non-finite values")

    params = model.params
    m = model.size
    if m > 0:
        _forget(model)

    kss = 1.0 + params.jitter
    if m == 0:
        k = np.zeros(0)
        q = np.zeros(0)
        h = np.zeros(0)
        y_mean = np.zeros(model.n_outputs)
        gamma2 = kss
        sf2 = kss
    else:
        k = kernel_vector(model.dictionary, z, params.sigma2)
        q = model.q_inv @ k
        y_mean = q @ model.mu
        gamma2 = max(kss - k @ q, 0.0)
        h = model.sigma_cov @ q
        sf2 = max(gamma2 + q @ h, 0.0)

    sy2 = params.noise_var + sf2
    if sy2 < params.jitter:
        raise NumericalDegeneracyError(
            f"predictive variance {sy2:.3e} fell below jitter {params.jitter:.3e}"
        )
    innovation = (y - y_mean) / sy2

    if m == 0 or gamma2 > params.growth_threshold:
        p = np.append(q, -1.0)
        q_inv = np.zeros((m + 1, m + 1))
        q_inv[:m, :m] = model.q_inv
        model.q_inv = q_inv + np.outer(p, p) / gamma2

        p = np.append(h, sf2)
        model.mu = np.vstack([model.mu, y_mean]) + np.outer(p, innovation)

        sigma_cov = np.empty((m + 1, m + 1))
        sigma_cov[:m, :m] = model.sigma_cov
        sigma_cov[:m, m] = h
        sigma_cov[m, :m] = h
        sigma_cov[m, m] = sf2
        model.sigma_cov = sigma_cov - np.outer(p, p) / sy2

        k_dict = np.empty((m + 1, m + 1))
        k_dict[:m, :m] = model.k_dict
        k_dict[:m, m] = k
        k_dict[m, :m] = k
        k_dict[m, m] = kss
        model.k_dict = k_dict

        if model.dictionary is None:
            model.dictionary = z[None, :].copy()
        else:
            model.dictionary = np.vstack([model.dictionary, z])

        if model.size > params.budget:
            prune_to_budget(model)
    else:
        # reduced update: project the observation onto the existing dictionary
        model.mu = model.mu + np.outer(h, innovation)
        model.sigma_cov = model.sigma_cov - np.outer(h, h) / sy2

    model.train_count += 1
    return model


def error_scores(model: KrlstModel) -> np.ndarray:
    """Squared-error increase caused by deleting each basis"""
    alpha = model.alpha
    return np.sum(alpha ** 2, axis=1) / np.diag(model.q_inv)


def prune_to_budget(model: KrlstModel) -> KrlstModel:
    """Remove minimum-error bases (ties to the lowest index) until size <= budget"""
    while model.size > model.params.budget:
        r = int(np.argmin(error_scores(model)))
        keep = np.arange(model.size) != r

        qs = model.q_inv[keep, r]
        model.q_inv = model.q_inv[np.ix_(keep, keep)] - np.outer(qs, qs) / model.q_inv[r, r]
        model.mu = model.mu[keep]
        model.sigma_cov = model.sigma_cov[np.ix_(keep, keep)]
        model.k_dict = model.k_dict[np.ix_(keep, keep)]
        model.dictionary = model.dictionary[keep]
    return model


def dump_snapshot(model: KrlstModel, path: str):
    """Write dictionary bases and their alpha weights as CSV"""
    if model.size == 0:
        dim = 0
        rows = np.zeros((0, model.n_outputs))
    else:
        dim = model.dictionary.shape[1]
        rows = np.hstack([model.dictionary, model.alpha])
    header = ",".join(
        [f"z_{i}" for i in range(dim)] + [f"alpha_{j}" for j in range(model.n_outputs)]
    )
    np.savetxt(path, rows, delimiter=",", header=header, comments="", fmt="%.17g")
    logger.info(f"[KRLST-SNAPSHOT] Bases: {model.size} | Output: {path}")
