"""
Exception hierarchy for the Smith predictor simulation
"""
from typing import Optional


class SmithPredictorError(Exception):
    """Base class for all errors raised by this package"""


class DimensionError(SmithPredictorError, ValueError):
    """Invalid dimension, order or size"""


class NonFiniteInputError(SmithPredictorError, ValueError):
    """NaN or infinite value where a finite one is required"""


class NumericalDegeneracyError(SmithPredictorError, ArithmeticError):
    """Ill-conditioned numerics (variance underflow, non-finite Jacobian)"""


class TickDiscontinuityError(SmithPredictorError, RuntimeError):
    """The predictor was fed a non-consecutive tick"""


class ConfigError(SmithPredictorError, ValueError):
    """Invalid or unreadable configuration"""


class PlantDivergedError(SmithPredictorError, RuntimeError):
    """The simulated pose left the configured workspace bound"""

    def __init__(self, message: str, tick: Optional[int] = None):
        super().__init__(message)
        self.tick = tick


class NotFittedError(SmithPredictorError, RuntimeError):
    """A component was used before its calibration step"""
