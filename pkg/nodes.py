"""
LangGraph Node Functions for the batch workflow
Each node is one stage: plan, calibrate, run, exclude, aggregate, report
"""
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from typing import Dict, List, Optional

import numpy as np

from errors import DimensionError, PlantDivergedError, SmithPredictorError
from experiment import calibration_log, run_experiment, variant_normalizer
from metrics import error_traces, mean_traces, summarize_run
from predictor import LEARNING_VARIANTS, Normalizer
from report import ExclusionRecord, emit_report, render_report, summary_key
from run_utils import prepare_output_dir
from state import BatchState, CellResult

# Configure logger
logger = logging.getLogger(__name__)


# ========== WORKER ==========

def run_cell(config, variant: str, gain: str, seed: int,
             normalizer: Optional[Normalizer], runs_dir: Optional[str]) -> CellResult:
    """One experiment, summarized; failures are returned, not raised"""
    result = CellResult(variant=variant, gain=gain, seed=seed)
    try:
        log = run_experiment(config, seed, variant, gain, normalizer, runs_dir)
        result.summary = summarize_run(log, config.protocol)
        result.trace = error_traces(log)
    except PlantDivergedError as e:
        result.failure = "instability guard"
        result.failure_tick = e.tick
    except SmithPredictorError as e:
        result.failure = type(e).__name__
        logger.error(f"[RUN-FAIL] Variant: {variant} | Gain: {gain} | Seed: {seed} | Error: {e}")
    return result


def _run_cell_args(args) -> CellResult:
    return run_cell(*args)


# ========== NODE FUNCTIONS ==========

def plan_batch(state: BatchState) -> BatchState:
    """Node: Validate the request and lay out the cells"""
    print("\n" + "=" * 60)
    print("🗂️  PLANNING BATCH")
    print("=" * 60)

    if len(state["seeds"]) < 2:
        raise DimensionError(f"a batch needs at least 2 seeds, got {len(state['seeds'])}")
    state["cells"] = [(v, g, s) for v in state["variants"] for g in state["gains"] for s in state["seeds"]]
    if state["out_dir"]:
        state["out_dir"] = prepare_output_dir(state["out_dir"])

    print(f"✓ Cells: {len(state['cells'])} "
          f"({len(state['variants'])} variants x {len(state['gains'])} gains x {len(state['seeds'])} seeds)")
    print(f"✓ Workers: {state['workers']}")
    logger.info(f"[BATCH-PLAN] Cells: {len(state['cells'])} | Workers: {state['workers']}")
    return state


def calibrate(state: BatchState) -> BatchState:
    """Node: One calibration run, one frozen normalizer per learning variant"""
    print("\n" + "=" * 60)
    print("📏 CALIBRATING FEATURE NORMALIZERS")
    print("=" * 60)

    config = state["config"]
    cal_log = calibration_log(config)
    for variant in state["variants"]:
        if variant in LEARNING_VARIANTS:
            state["normalizers"][variant] = variant_normalizer(config, variant, cal_log)
            print(f"✓ {variant}: {state['normalizers'][variant].dim} features")
    return state


def run_cells(state: BatchState) -> BatchState:
    """Node: Run every cell, serially or on a process pool"""
    print("\n" + "=" * 60)
    print("🏃 RUNNING EXPERIMENTS")
    print("=" * 60)

    runs_dir = os.path.join(state["out_dir"], "runs") if state["out_dir"] else None
    jobs = [
        (state["config"], v, g, s, state["normalizers"].get(v), runs_dir)
        for v, g, s in state["cells"]
    ]
    if state["workers"] > 1:
        with ProcessPoolExecutor(max_workers=state["workers"]) as pool:
            results = list(pool.map(_run_cell_args, jobs))
    else:
        results = [_run_cell_args(job) for job in jobs]

    state["results"] = results
    failed = sum(1 for r in results if r.failure)
    print(f"✓ Completed: {len(results) - failed}")
    if failed:
        print(f"⚠️  Failed: {failed}")
    return state


def apply_exclusions(state: BatchState) -> BatchState:
    """
    Node: Drop guard trips and runs whose stable tracking RMS exceeds
    exclusion_factor x the median of their (variant, gain) cell
    """
    factor = state["config"].harness.exclusion_factor
    exclusions: List[ExclusionRecord] = []
    retained: List[CellResult] = []

    for r in state["results"]:
        if r.failure:
            detail = f"tick {r.failure_tick}" if r.failure_tick is not None else ""
            exclusions.append(ExclusionRecord(variant=r.variant, gain=r.gain, seed=r.seed,
                                              reason=r.failure, detail=detail))
        else:
            retained.append(r)

    groups: Dict[tuple, List[CellResult]] = {}
    for r in retained:
        groups.setdefault((r.variant, r.gain), []).append(r)

    kept: List[CellResult] = []
    for key, members in groups.items():
        median = float(np.median([m.summary.xy_track_rms_stable for m in members]))
        for m in members:
            rms = m.summary.xy_track_rms_stable
            if rms > factor * median:
                exclusions.append(ExclusionRecord(
                    variant=m.variant, gain=m.gain, seed=m.seed, reason="anomalous",
                    detail=f"stable rms {rms:.3f} mm > {factor:g} x median {median:.3f} mm",
                ))
            else:
                kept.append(m)

    for e in exclusions:
        logger.warning(f"[BATCH-EXCLUDE] Variant: {e.variant} | Gain: {e.gain} | Seed: {e.seed} | "
                       f"Reason: {e.reason} {e.detail}".rstrip())

    state["summaries"] = sorted((m.summary for m in kept), key=summary_key)
    state["exclusions"] = exclusions
    traces = {}
    for key in groups:
        averaged = mean_traces([m.trace for m in kept if (m.variant, m.gain) == key])
        if averaged is not None:
            traces[key] = averaged
    state["traces"] = traces
    return state


def write_report(state: BatchState) -> BatchState:
    """Node: Render the tables and write the artifacts"""
    print("\n" + "=" * 60)
    print("📊 REPORT")
    print("=" * 60)

    if state["out_dir"]:
        state["report"] = emit_report(state["summaries"], state["out_dir"], state["exclusions"],
                                      state["traces"], state["config"].protocol.dt)
    else:
        state["report"] = render_report(state["summaries"], state["exclusions"])
    print(state["report"])
    return state
