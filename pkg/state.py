"""
State Definition for the LangGraph batch workflow
"""
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from typing_extensions import TypedDict

from metrics import RunSummary


@dataclass
class CellResult:
    """Outcome of one (variant, gain, seed) experiment"""
    variant: str
    gain: str
    seed: int
    summary: Optional[RunSummary] = None
    trace: Optional[np.ndarray] = None
    failure: Optional[str] = None
    failure_tick: Optional[int] = None


class BatchState(TypedDict):
    """LangGraph state for a batch of experiments"""
    config: Any
    variants: List[str]
    gains: List[str]
    seeds: List[int]
    out_dir: Optional[str]
    workers: int
    cells: List[Tuple[str, str, int]]
    normalizers: Dict[str, Any]
    results: List[CellResult]
    summaries: List[RunSummary]
    exclusions: List[Any]
    traces: Dict[Tuple[str, str], np.ndarray]
    report: str


def create_initial_state(config, variants, gains, seeds, out_dir: Optional[str] = None,
                         workers: int = 1) -> BatchState:
    """Create initial state for a new batch"""
    return {
        "config": config,
        "variants": list(variants),
        "gains": list(gains),
        "seeds": list(seeds),
        "out_dir": out_dir,
        "workers": workers,
        "cells": [],
        "normalizers": {},
        "results": [],
        "summaries": [],
        "exclusions": [],
        "traces": {},
        "report": "",
    }
