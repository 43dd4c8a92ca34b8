#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Main Entry Point for the Smith Predictor simulation
Subcommands: run, batch, tune, report, diagnose
"""
import argparse
import io
import os
import sys

# Set UTF-8 encoding for Windows console
if sys.platform == 'win32':
    sys.stdout = io.TextIOWrapper(sys.stdout.buffer, encoding='utf-8')
    sys.stderr = io.TextIOWrapper(sys.stderr.buffer, encoding='utf-8')

from config import LOG_LEVEL, RESULTS_DIR, WORKERS, load_config
from controller import K1_MULTIPLIERS
from errors import SmithPredictorError
from predictor import HISTORY_STATES, LEARNING_VARIANTS
from run_utils import setup_logging

VARIANTS = list(HISTORY_STATES)
GAINS = list(K1_MULTIPLIERS)


def cmd_run(args):
    from experiment import run_experiment
    from metrics import summarize_run

    config = load_config(args.config)
    log = run_experiment(config, args.seed, args.variant, args.gain, out_dir=args.out)
    summary = summarize_run(log, config.protocol)
    print(f"\n✓ Run complete: {args.variant} / {args.gain} / seed {args.seed}")
    print(f"  Tracking RMS (mm)  transient {summary.xy_track_rms_transient:.3f} | "
          f"stable {summary.xy_track_rms_stable:.3f}")
    print(f"  Modeling RMS (mm)  transient {summary.xy_model_rms_transient:.3f} | "
          f"stable {summary.xy_model_rms_stable:.3f}")
    print(f"  Log written to: {args.out}")


def cmd_batch(args):
    from graph import run_batch

    config = load_config(args.config)
    state = run_batch(config, args.variants, args.gains, args.seeds, args.out, args.workers)
    print(f"\n✓ Batch complete: {len(state['summaries'])} retained, "
          f"{len(state['exclusions'])} excluded")
    print(f"  Results in: {state['out_dir']}")


def cmd_tune(args):
    from tuning import tune

    config = load_config(args.config)
    result = tune(config, args.out, args.variant)
    best = result.best
    print(f"\n✓ Tuned: sigma2={best.sigma2:g} noise_var={best.noise_var:g} lambda={best.lambda_:g}")
    print(f"  Config written to: {args.out}")


def cmd_report(args):
    from report import regenerate_report

    print(regenerate_report(args.input))


def cmd_diagnose(args):
    from diagnostics import run_diagnostics

    config = load_config(args.config)
    results = run_diagnostics(config)
    print("\n" + "=" * 60)
    print("COMPONENT DIAGNOSTICS")
    print("=" * 60)
    for r in results:
        mark = "✓" if r.ok else "❌"
        print(f"  {mark} {r.name}: {r.detail}")
    print("=" * 60)
    if not all(r.ok for r in results):
        sys.exit(1)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description="Learning-based Smith predictor for a delayed soft-arm simulation"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="Run one experiment")
    run.add_argument("--variant", choices=VARIANTS, default="ldn3")
    run.add_argument("--gain", choices=GAINS, default="med")
    run.add_argument("--seed", type=int, default=1)
    run.add_argument("--config", default=None, help="INI config (default_config.ini when omitted)")
    run.add_argument("--out", default=os.path.join(RESULTS_DIR, "runs"))
    run.set_defaults(func=cmd_run)

    batch = sub.add_parser("batch", help="Run variants x gains x seeds and report")
    batch.add_argument("--seeds", type=int, default=10)
    batch.add_argument("--variants", nargs="+", choices=VARIANTS, default=VARIANTS)
    batch.add_argument("--gains", nargs="+", choices=GAINS, default=GAINS)
    batch.add_argument("--workers", type=int, default=WORKERS)
    batch.add_argument("--config", default=None)
    batch.add_argument("--out", default=RESULTS_DIR)
    batch.set_defaults(func=cmd_batch)

    tune = sub.add_parser("tune", help="Two-stage KRLST hyperparameter tuning")
    tune.add_argument("--config", default=None)
    tune.add_argument("--out", required=True, help="Path of the tuned INI config")
    tune.add_argument("--variant", choices=LEARNING_VARIANTS, default="ldn3")
    tune.set_defaults(func=cmd_tune)

    report = sub.add_parser("report", help="Regenerate the report from stored CSVs")
    report.add_argument("--in", dest="input", default=RESULTS_DIR)
    report.set_defaults(func=cmd_report)

    diagnose = sub.add_parser("diagnose", help="Component self-checks")
    diagnose.add_argument("--config", default=None)
    diagnose.set_defaults(func=cmd_diagnose)
    return parser


def main(argv=None):
    """Main execution function"""
    args = build_parser().parse_args(argv)
    setup_logging(LOG_LEVEL)

    try:
        args.func(args)
    except KeyboardInterrupt:
        print("\n\n⚠️  Interrupted by user")
        sys.exit(130)
    except (SmithPredictorError, FileNotFoundError) as e:
        print(f"\n❌ {type(e).__name__}: {e}")
        sys.exit(1)


if __name__ == "__main__":
    main()
