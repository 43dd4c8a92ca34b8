"""
Legendre Delay Network memory
Compresses the recent window of each actuator channel into p Legendre coefficients
"""
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm
from scipy.special import comb

from errors import DimensionError, NonFiniteInputError

# Configure logger
logger = logging.getLogger(__name__)

# r = 1 addresses the fully delayed end of the window (theta ago), r = 0 the current input
FULL_DELAY = 1.0
N_CHANNELS = 6


@dataclass(frozen=True)
class LdnSystem:
    """Continuous LDN matrices and their zero-order-hold discretization"""
    p: int
    theta: float
    dt: float
    a_cont: np.ndarray
    b_cont: np.ndarray
    a_disc: np.ndarray
    b_disc: np.ndarray


@dataclass
class LdnBank:
    """One shared LdnSystem with a (channels x p) block of memory states"""
    system: LdnSystem
    states: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.states is None:
            self.states = np.zeros((N_CHANNELS, self.system.p))

    @property
    def channels(self) -> int:
        return self.states.shape[0]

    def reset(self):
        self.states[:] = 0.0


def ldn_matrices(p: int):
    """
    Continuous (A, B) of the Legendre delay system, zero-based indices

    a[i][j] = (2i+1) * (-1 if i < j else (-1)^(i-j+1))
    b[i]    = (2i+1) * (-1)^i
    """
    i = np.arange(p)[:, None]
    j = np.arange(p)[None, :]
    a = (2 * i + 1) * np.where(i < j, -1.0, np.power(-1.0, i - j + 1))
    idx = np.arange(p)
    b = (2 * idx + 1) * np.power(-1.0, idx)
    return a.astype(float), b.astype(float)


def zoh_discretize(a: np.ndarray, b: np.ndarray, dt: float):
    """Exact ZOH discretization through the exponential of the augmented matrix"""
    n = a.shape[0]
    augmented = np.zeros((n + 1, n + 1))
    augmented[:n, :n] = a
    augmented[:n, n] = b
    phi = expm(augmented * dt)
    return phi[:n, :n], phi[:n, n].copy()


def build_ldn(p: int = 3, theta: float = 0.14, dt: float = 0.02) -> LdnSystem:
    """
    Build the LDN system theta * dm/dt = A m + B u and discretize it at dt

    Args:
        p: Polynomial order (number of memory states per channel)
        theta: Window length in seconds
        dt: Sample period in seconds

    Returns:
        LdnSystem with continuous and discrete matrices
    """
    if int(p) != p or p < 1:
        raise DimensionError(f"LDN order must be a positive integer, got {p}")
    if not theta > 0 or not dt > 0:
        raise DimensionError(f"theta and dt must be positive (theta={theta}, dt={dt})")
    if not dt < theta:
        raise DimensionError(f"dt must be shorter than the window (dt={dt}, theta={theta})")

    a_cont, b_cont = ldn_matrices(int(p))
    a_disc, b_disc = zoh_discretize(a_cont / theta, b_cont / theta, dt)

    logger.debug(f"[LDN-BUILD] p={p} | theta={theta} | dt={dt}")
    return LdnSystem(
        p=int(p),
        theta=float(theta),
        dt=float(dt),
        a_cont=a_cont,
        b_cont=b_cont,
        a_disc=a_disc,
        b_disc=b_disc,
    )


def new_bank(system: LdnSystem, channels: int = N_CHANNELS) -> LdnBank:
    """Zero-initialized memory bank sharing one system across channels"""
    return LdnBank(system=system, states=np.zeros((channels, system.p)))


def ldn_step(bank: LdnBank, u) -> LdnBank:
    """Advance every channel one sample with the input held over the step"""
    u = np.asarray(u, dtype=float)
    if u.shape != (bank.channels,):
        raise DimensionError(f"expected {bank.channels} channel inputs, got shape {u.shape}")
    if not np.all(np.isfinite(u)):
        raise NonFiniteInputError("LDN input contains non-finite values")

    system = bank.system
    bank.states = bank.states @ system.a_disc.T + np.outer(u, system.b_disc)
    return bank


def decode_weights(p: int, r: float) -> np.ndarray:
    """Shifted Legendre polynomials P~_i(r) for i = 0..p-1"""
    weights = np.empty(p)
    for i in range(p):
        j = np.arange(i + 1)
        weights[i] = (-1.0) ** i * np.sum(comb(i, j) * comb(i + j, j) * (-r) ** j)
    return weights


def decode_delayed(bank: LdnBank, r: float = FULL_DELAY) -> np.ndarray:
    """Per-channel reconstruction of the input r * theta seconds ago"""
    if not 0.0 <= r <= 1.0:
        raise DimensionError(f"normalized delay must lie in [0, 1], got {r}")
    return bank.states @ decode_weights(bank.system.p, r)
