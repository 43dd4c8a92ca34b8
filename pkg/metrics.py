"""
Tracking and modeling error metrics
All distances are XY-plane norms reported in millimetres.
"""
import math
import warnings
from typing import List, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, field_validator

from config import ProtocolConfig
from errors import DimensionError

MM_PER_M = 1000.0
N_REVOLUTIONS = 4

Window = Union[str, Tuple[int, int]]


class RunSummary(BaseModel):
    """Per-run row of the results tables"""
    seed: int
    variant: str
    gain: str
    xy_track_rms_transient: float
    xy_track_rms_stable: float
    xy_model_rms_transient: float
    xy_model_rms_stable: float
    xy_nopred_rms_transient: float
    xy_nopred_rms_stable: float
    # None when the run is too short to hold the revolution
    rev0_model_rms: Optional[float] = None
    rev1_model_rms: Optional[float] = None
    rev2_model_rms: Optional[float] = None
    rev3_model_rms: Optional[float] = None

    @field_validator(
        "xy_track_rms_transient", "xy_track_rms_stable",
        "xy_model_rms_transient", "xy_model_rms_stable",
        "xy_nopred_rms_transient", "xy_nopred_rms_stable",
        "rev0_model_rms", "rev1_model_rms", "rev2_model_rms", "rev3_model_rms",
    )
    @classmethod
    def _finite_non_negative(cls, value: Optional[float]) -> Optional[float]:
        if value is None:
            return value
        if not math.isfinite(value) or value < 0.0:
            raise ValueError(f"RMS must be finite and non-negative, got {value}")
        return value


def window_bounds(log, window: Window) -> Tuple[int, int]:
    """Row range [start, stop) of a named phase or an explicit tick-index range"""
    k = log.transient_ticks
    if window == "transient":
        start, stop = 0, k
    elif window == "stable":
        start, stop = k, _expected_rows(log)
    elif isinstance(window, tuple) and len(window) == 2:
        start, stop = int(window[0]), int(window[1])
    else:
        raise ValueError(f"unknown window: {window!r}")
    if start < 0 or stop > log.n_rows or start >= stop:
        raise DimensionError(f"window [{start}, {stop}) outside log of {log.n_rows} rows")
    return start, stop


def _expected_rows(log) -> int:
    if log.failed:
        raise DimensionError("log is incomplete (run failed)")
    return log.n_rows


def modeling_errors(log, predicted: bool = True) -> np.ndarray:
    """
    Per-tick XY modeling error vectors (mm), NaN where x(t - d) is not yet known

    Row t holds (x(t) - x(t - d))_xy - y_hat(t - d)_xy; with predicted=False the
    prediction is taken as zero (No-Pred scoring of the same run).
    """
    d = log.delay_steps
    x = log.x_meas[:, :2]
    errors = np.full((log.n_rows, 2), np.nan)
    if log.n_rows <= d:
        return errors
    change = x[d:] - x[:log.n_rows - d]
    if predicted:
        change = change - log.y_hat[:log.n_rows - d, :2]
    errors[d:] = change * MM_PER_M
    return errors


def tracking_errors(log) -> np.ndarray:
    return (log.x_meas[:, :2] - log.r[:, :2]) * MM_PER_M


def xy_rms(log, window: Window, which: str = "tracking") -> float:
    """
    XY RMS over a window

    Args:
        log: ExperimentLog
        window: "transient", "stable" or a (start, stop) row range
        which: "tracking", "modeling" or "nopred" (modeling with y_hat = 0)

    Returns:
        float: RMS in mm
    """
    start, stop = window_bounds(log, window)
    if which == "tracking":
        err = tracking_errors(log)[start:stop]
    elif which in ("modeling", "nopred"):
        err = modeling_errors(log, predicted=(which == "modeling"))[start:stop]
        err = err[~np.isnan(err[:, 0])]
        if err.shape[0] == 0:
            raise DimensionError(f"no modeling ground truth inside window [{start}, {stop})")
    else:
        raise ValueError(f"unknown metric: {which}")
    return float(np.sqrt(np.mean(np.sum(err ** 2, axis=1))))


def revolution_bounds(log, proto: ProtocolConfig) -> List[Optional[Tuple[int, int]]]:
    """
    Row ranges of revolutions 0..3

    1..3 are counted back from the end of the run and clipped to the stable
    window, 1 starting where the stable window starts; 0 is the revolution that
    ends with the transient. A revolution with no rows left is None.
    """
    period = 2.0 * np.pi / proto.omega / proto.dt
    end = log.n_rows
    k = log.transient_ticks
    bounds: List[Optional[Tuple[int, int]]] = []
    start0 = max(int(round(k - period)), 0)
    bounds.append((start0, k) if start0 < k <= end else None)
    for rev in range(1, N_REVOLUTIONS):
        stop = int(round(end - (N_REVOLUTIONS - 1 - rev) * period))
        start = k if rev == 1 else max(int(round(end - (N_REVOLUTIONS - rev) * period)), k)
        bounds.append((start, stop) if start < stop else None)
    return bounds


def revolution_rms(log, proto: ProtocolConfig, which: str = "modeling") -> List[Optional[float]]:
    return [None if bounds is None else xy_rms(log, bounds, which)
            for bounds in revolution_bounds(log, proto)]


def summarize_run(log, proto: ProtocolConfig) -> RunSummary:
    revs = revolution_rms(log, proto, "modeling")
    return RunSummary(
        seed=int(log.header["seed"]),
        variant=log.header["variant"],
        gain=log.header["gain"],
        xy_track_rms_transient=xy_rms(log, "transient", "tracking"),
        xy_track_rms_stable=xy_rms(log, "stable", "tracking"),
        xy_model_rms_transient=xy_rms(log, "transient", "modeling"),
        xy_model_rms_stable=xy_rms(log, "stable", "modeling"),
        xy_nopred_rms_transient=xy_rms(log, "transient", "nopred"),
        xy_nopred_rms_stable=xy_rms(log, "stable", "nopred"),
        rev0_model_rms=revs[0],
        rev1_model_rms=revs[1],
        rev2_model_rms=revs[2],
        rev3_model_rms=revs[3],
    )


def error_traces(log) -> np.ndarray:
    """(n, 2) per-tick XY magnitudes in mm: tracking error and modeling error"""
    track = np.linalg.norm(tracking_errors(log), axis=1)
    model = np.linalg.norm(modeling_errors(log), axis=1)
    return np.column_stack([track, model])


def mean_traces(traces) -> Optional[np.ndarray]:
    """Average per-tick traces over seeds, ignoring NaN gaps and missing traces"""
    traces = [np.asarray(t) for t in traces if t is not None]
    if not traces:
        return None
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)  # all-NaN leading rows
        return np.nanmean(np.stack(traces), axis=0)
