"""
Results report
Tables of mean ± std per (phase, method, gain) cell, significance annotations,
and the CSV artifacts they are rendered from.
"""
import csv
import logging
import os
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel

from config import CSV_FLOAT_FORMAT, EXCLUSION_FILE, REPORT_FILE, SUMMARY_FILE, TRACES_FILE
from controller import CONDITION_LABELS
from errors import DimensionError
from metrics import RunSummary
from predictor import LEARNING_VARIANTS, VARIANT_LABELS
from stats import anova_oneway, pairwise_welch

# Configure logger
logger = logging.getLogger(__name__)

ALPHA = 0.05
METHODS = ("nopred", "ldn3", "hist3", "hist7")
GAINS = ("low", "med", "high")
PHASES = ("transient", "stable")
TRACKING_LABELS = {**VARIANT_LABELS, "nopred": "Baseline"}
SIGNIFICANT = "+"
SINGLE_SAMPLE = "*"


class ExclusionRecord(BaseModel):
    variant: str
    gain: str
    seed: int
    reason: str
    detail: str = ""


# ========== ORDERING ==========

def summary_key(summary: RunSummary):
    return (_rank(summary.variant, METHODS), _rank(summary.gain, GAINS), summary.seed)


def exclusion_key(record: ExclusionRecord):
    return (_rank(record.variant, METHODS), _rank(record.gain, GAINS), record.seed)


def _rank(value: str, order: Sequence[str]) -> int:
    return order.index(value) if value in order else len(order)


# ========== CSV ARTIFACTS ==========

def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_summaries_csv(summaries: Iterable[RunSummary], path: str):
    fields = list(RunSummary.model_fields)
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(fields)
        for s in sorted(summaries, key=summary_key):
            writer.writerow([_cell(getattr(s, name)) for name in fields])


def load_summaries(path: str) -> List[RunSummary]:
    with open(path, encoding="utf-8", newline="") as f:
        return [RunSummary.model_validate({k: (v if v != "" else None) for k, v in row.items()})
                for row in csv.DictReader(f)]


def write_exclusions_csv(records: Iterable[ExclusionRecord], path: str):
    fields = list(ExclusionRecord.model_fields)
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(fields)
        for r in sorted(records, key=exclusion_key):
            writer.writerow([_cell(getattr(r, name)) for name in fields])


def load_exclusions(path: str) -> List[ExclusionRecord]:
    if not os.path.exists(path):
        return []
    with open(path, encoding="utf-8", newline="") as f:
        return [ExclusionRecord.model_validate(row) for row in csv.DictReader(f)]


def write_traces_csv(traces: Dict[Tuple[str, str], np.ndarray], dt: float, path: str):
    """
    Plot-ready per-tick error magnitudes averaged over seeds

    One time column, then a tracking and a modeling column per (variant, gain).
    """
    keys = sorted(traces, key=lambda k: (_rank(k[0], METHODS), _rank(k[1], GAINS)))
    if not keys:
        return
    n = min(traces[k].shape[0] for k in keys)
    columns = [np.arange(n) * dt]
    names = ["time"]
    for variant, gain in keys:
        columns.extend([traces[(variant, gain)][:n, 0], traces[(variant, gain)][:n, 1]])
        names.extend([f"{variant}_{gain}_track_mm", f"{variant}_{gain}_model_mm"])
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(",".join(names) + "\n")
        np.savetxt(f, np.column_stack(columns), fmt=CSV_FLOAT_FORMAT, delimiter=",")


# ========== TABLES ==========

def _values(summaries, variant: str, gain: str, field: str) -> List[float]:
    return [getattr(s, field) for s in summaries if s.variant == variant and s.gain == gain]


def _nopred_pool(summaries, gain: str, phase: str) -> List[float]:
    """No-Pred modeling error pooled from the learning runs, else from baseline runs"""
    pooled = [getattr(s, f"xy_nopred_rms_{phase}") for s in summaries
              if s.variant in LEARNING_VARIANTS and s.gain == gain]
    return pooled or _values(summaries, "nopred", gain, f"xy_model_rms_{phase}")


def _format_cell(values: Sequence[float], significant: bool = False) -> str:
    if not values:
        return "-"
    mean = float(np.mean(values))
    if len(values) == 1:
        return f"{mean:.2f} ± 0.00{SINGLE_SAMPLE}"
    std = float(np.std(values, ddof=1))
    return f"{mean:.2f} ± {std:.2f}" + (SIGNIFICANT if significant else "")


def _versus_reference(groups: List[List[float]]) -> List[bool]:
    """Per group: lower mean than groups[0] with Bonferroni-corrected Welch p < alpha"""
    usable = [i for i, g in enumerate(groups) if len(g) >= 2]
    flags = [False] * len(groups)
    if 0 not in usable or len(usable) < 2:
        return flags
    p_matrix = pairwise_welch([groups[i] for i in usable])
    for col, i in enumerate(usable):
        if i != 0:
            improved = np.mean(groups[i]) < np.mean(groups[0])
            flags[i] = bool(improved and p_matrix[0, col] < ALPHA)
    return flags


def _table(title: str, labels: Dict[str, str], groups_of) -> List[str]:
    """groups_of(phase, method, gain) -> sample list"""
    width = 22
    lines = [title, "=" * (20 + 3 * width)]
    lines.append(f"{'Phase':<10}{'Method':<10}" + "".join(f"{CONDITION_LABELS[g]:>{width}}" for g in GAINS))
    lines.append("-" * (20 + 3 * width))
    for phase in PHASES:
        cells = {}
        for gain in GAINS:
            groups = [groups_of(phase, m, gain) for m in METHODS]
            for m, g, flag in zip(METHODS, groups, _versus_reference(groups)):
                cells[(m, gain)] = _format_cell(g, flag)
        for m in METHODS:
            row = f"{phase.capitalize():<10}{labels[m]:<10}"
            row += "".join(f"{cells[(m, gain)]:>{width}}" for gain in GAINS)
            lines.append(row)
    lines.append("")
    return lines


def _rev_mean(runs, k: int) -> str:
    values = [v for v in (getattr(s, f"rev{k}_model_rms") for s in runs) if v is not None]
    return f"{np.mean(values):.2f}" if values else "-"


def _anova_line(kind: str, phase: str, gain: str, groups: List[List[float]]) -> str:
    usable = [g for g in groups if len(g) >= 2]
    prefix = f"{kind:<9}| {phase.capitalize():<10}| {CONDITION_LABELS[gain]:<7}| "
    if len(usable) < 2:
        return prefix + "n/a (fewer than two groups with two samples)"
    try:
        f_stat, p = anova_oneway(usable)
    except DimensionError as e:
        return prefix + f"n/a ({e})"
    verdict = "significant" if p < ALPHA else "not significant"
    return prefix + f"F = {f_stat:.4g} | p = {p:.4g} | {verdict}"


def render_report(summaries: Sequence[RunSummary],
                  exclusions: Sequence[ExclusionRecord] = ()) -> str:
    """Report text, a pure function of the summaries and exclusions"""
    summaries = sorted(summaries, key=summary_key)
    exclusions = sorted(exclusions, key=exclusion_key)

    def tracking(phase, method, gain):
        return _values(summaries, method, gain, f"xy_track_rms_{phase}")

    def modeling(phase, method, gain):
        if method == "nopred":
            return _nopred_pool(summaries, gain, phase)
        return _values(summaries, method, gain, f"xy_model_rms_{phase}")

    lines = _table("XY RMS Tracking Error (mm)", TRACKING_LABELS, tracking)
    lines += _table("XY RMS Modeling Error (mm)", VARIANT_LABELS, modeling)

    lines.append("Modeling Error per Revolution (mm)")
    lines.append("=" * 60)
    lines.append(f"{'Method':<10}{'Gain':<8}" + "".join(f"{'Rev ' + str(k):>10}" for k in range(4)))
    for m in METHODS:
        for gain in GAINS:
            runs = [s for s in summaries if s.variant == m and s.gain == gain]
            if not runs:
                continue
            revs = [_rev_mean(runs, k) for k in range(4)]
            lines.append(f"{VARIANT_LABELS[m]:<10}{CONDITION_LABELS[gain]:<8}"
                         + "".join(f"{v:>10}" for v in revs))
    lines.append("")

    lines.append(f"Significance (one-way ANOVA, alpha = {ALPHA})")
    lines.append("=" * 60)
    for phase in PHASES:
        for gain in GAINS:
            lines.append(_anova_line("Tracking", phase, gain,
                                     [tracking(phase, m, gain) for m in METHODS]))
            lines.append(_anova_line("Modeling", phase, gain,
                                     [modeling(phase, m, gain) for m in LEARNING_VARIANTS]))
    lines.append("")

    lines.append("Exclusions")
    lines.append("=" * 60)
    scheduled = len(summaries) + len(exclusions)
    lines.append(f"Scheduled: {scheduled} | Retained: {len(summaries)} | Excluded: {len(exclusions)}")
    for r in exclusions:
        lines.append(f"{r.variant} {r.gain} seed {r.seed}: {r.reason} {r.detail}".rstrip())
    lines.append("")
    lines.append(f"{SIGNIFICANT} lower than the first row of its phase, corrected Welch p < {ALPHA}")
    lines.append(f"{SINGLE_SAMPLE} single sample, std not defined")
    return "\n".join(lines) + "\n"


def emit_report(summaries: Sequence[RunSummary], out_dir: str,
                exclusions: Sequence[ExclusionRecord] = (),
                traces: Optional[Dict[Tuple[str, str], np.ndarray]] = None,
                dt: float = 0.02) -> str:
    """
    Write summaries.csv, exclusions.csv, the traces CSV and report.txt

    Returns:
        str: Report text
    """
    os.makedirs(out_dir, exist_ok=True)
    write_summaries_csv(summaries, os.path.join(out_dir, SUMMARY_FILE))
    write_exclusions_csv(exclusions, os.path.join(out_dir, EXCLUSION_FILE))
    if traces:
        write_traces_csv(traces, dt, os.path.join(out_dir, TRACES_FILE))
    text = render_report(summaries, exclusions)
    with open(os.path.join(out_dir, REPORT_FILE), "w", encoding="utf-8", newline="\n") as f:
        f.write(text)
    logger.info(f"[REPORT] Directory: {out_dir} | Retained: {len(summaries)} | "
                f"Excluded: {len(exclusions)}")
    return text


def regenerate_report(in_dir: str) -> str:
    """Re-render report.txt from the stored summary and exclusion CSVs"""
    summary_path = os.path.join(in_dir, SUMMARY_FILE)
    if not os.path.exists(summary_path):
        raise FileNotFoundError(f"no {SUMMARY_FILE} in {in_dir}")
    summaries = load_summaries(summary_path)
    exclusions = load_exclusions(os.path.join(in_dir, EXCLUSION_FILE))
    text = render_report(summaries, exclusions)
    with open(os.path.join(in_dir, REPORT_FILE), "w", encoding="utf-8", newline="\n") as f:
        f.write(text)
    return text
