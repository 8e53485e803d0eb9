#!/usr/bin/env python3
"""
varlin CLI - variance linearization experiments.

Usage:
    python main.py [COMMAND] [OPTIONS]

Environment Variables:
    VARLIN_CONFIG: Experiment file used when --config is omitted
    VARLIN_SEED: Master seed (default: from the experiment file, else 0)
    VARLIN_THREADS: Worker processes for replicate sampling (default: 1)
    VARLIN_OUT: Output directory (default: from the experiment file, else results)
    VARLIN_TOLERANCE_PROFILE: default or strict (default: default)
    VARLIN_LANG: Progress message language, en or cn (default: en)
    VARLIN_TOL_*, VARLIN_CAL_*, VARLIN_BUDGET_*: Per-field overrides of the
        tolerance, calibration and budget settings
"""

import argparse
import importlib
import logging
import os
import sys
import tempfile
from pathlib import Path

from varlin import __version__
from varlin.config import TOLERANCE_PROFILES, get_model_description, list_reference_models
from varlin.errors import VarlinError
from varlin.experiment import (
    PLOT_IDS,
    STAGES,
    ExperimentConfig,
    ExperimentRunner,
    emit_plot_data,
    run_experiment,
    stages_for,
    write_plot_csv,
)

REQUIRED_PACKAGES = ("numpy", "scipy", "joblib")


def check_environment(config_path: str | None, out: str | None) -> bool:
    """
    Check the environment before running an experiment.

    Checks:
    - Python version
    - Required packages importable
    - Experiment file readable and valid
    - Output directory writable

    Args:
        config_path: Experiment file, or None for the built-in default.
        out: Output directory.

    Returns:
        True if all checks pass, False otherwise.
    """
    print("🔍 Checking environment...")
    print("-" * 50)

    all_passed = True

    # Check 1: Python version
    print("1. Checking Python version...", end=" ")
    if sys.version_info < (3, 10):
        print("❌ FAILED")
        print(f"   Error: Python 3.10+ is required, found {sys.version.split()[0]}.")
        all_passed = False
    else:
        print(f"✅ OK ({sys.version.split()[0]})")

    # Check 2: Packages
    print("2. Checking required packages...", end=" ")
    missing = []
    versions = []
    for name in REQUIRED_PACKAGES:
        try:
            module = importlib.import_module(name)
            versions.append(f"{name} {module.__version__}")
        except ImportError:
            missing.append(name)
    if missing:
        print("❌ FAILED")
        print(f"   Error: Missing packages: {', '.join(missing)}")
        print("   Solution: pip install -r requirements.txt")
        all_passed = False
    else:
        print(f"✅ OK ({', '.join(versions)})")

    # Check 3: Experiment file
    print("3. Checking experiment file...", end=" ")
    if config_path is None:
        print("✅ OK (built-in default)")
    else:
        try:
            ExperimentConfig.from_ini(config_path, verbose=False)
            print(f"✅ OK ({config_path})")
        except VarlinError as e:
            print("❌ FAILED")
            print(f"   Error: {e}")
            all_passed = False

    # Check 4: Output directory
    print("4. Checking output directory...", end=" ")
    target = Path(out or "results")
    try:
        target.mkdir(parents=True, exist_ok=True)
        with tempfile.NamedTemporaryFile(dir=target):
            pass
        print(f"✅ OK ({target})")
    except OSError as e:
        print("❌ FAILED")
        print(f"   Error: {target} is not writable: {e}")
        all_passed = False

    print("-" * 50)
    if all_passed:
        print("✅ All environment checks passed!\n")
    else:
        print("❌ Environment check failed. Please fix the issues above.")
    return all_passed


def parse_args() -> argparse.Namespace:
    """Parse command line arguments."""
    parser = argparse.ArgumentParser(
        description="varlin - variance linearization experiments",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
    # Run the full pipeline on the built-in iid experiment
    python main.py

    # Run an experiment file up to the block partition
    python main.py blocks --config configs/elliptic.ini

    # Full report with four worker processes and strict tolerances
    python main.py report --config configs/elliptic.ini --threads 4 --tolerance-profile strict

    # Plot data for the Kolmogorov distance against sigma_n
    python main.py plot --config configs/iid.ini --plot-id dk_vs_sigma

    # List reference models
    python main.py --list-models

    # Check the environment only
    python main.py --check
        """,
    )

    parser.add_argument(
        "command",
        nargs="?",
        default="report",
        choices=[*STAGES, "plot"],
        help="Pipeline stage to run up to (default: report), or plot",
    )

    # Experiment options
    parser.add_argument(
        "--config",
        type=str,
        default=os.getenv("VARLIN_CONFIG"),
        help="Experiment INI file",
    )

    parser.add_argument(
        "--out",
        type=str,
        default=os.getenv("VARLIN_OUT"),
        help="Output directory",
    )

    parser.add_argument(
        "--seed",
        type=int,
        default=int(os.getenv("VARLIN_SEED")) if os.getenv("VARLIN_SEED") else None,
        help="Master seed",
    )

    parser.add_argument(
        "--threads",
        type=int,
        default=int(os.getenv("VARLIN_THREADS")) if os.getenv("VARLIN_THREADS") else None,
        help="Worker processes for replicate sampling",
    )

    parser.add_argument(
        "--tolerance-profile",
        type=str,
        choices=list(TOLERANCE_PROFILES),
        default=os.getenv("VARLIN_TOLERANCE_PROFILE"),
        help="Tolerance profile",
    )

    parser.add_argument(
        "--plot-id",
        type=str,
        choices=list(PLOT_IDS),
        help="Plot series to emit with the plot command",
    )

    # Utility options
    parser.add_argument(
        "--list-models", action="store_true", help="List reference models and exit"
    )

    parser.add_argument(
        "--check", action="store_true", help="Run the environment checks and exit"
    )

    parser.add_argument(
        "--lang",
        type=str,
        choices=["cn", "en"],
        default=os.getenv("VARLIN_LANG", "en"),
        help="Language for progress messages (cn or en, default: en)",
    )

    parser.add_argument(
        "--verbose", action="store_true", help="Debug logging"
    )

    parser.add_argument(
        "--quiet", "-q", action="store_true", help="Suppress progress output"
    )

    parser.add_argument(
        "--version", action="version", version=f"varlin {__version__}"
    )

    return parser.parse_args()


def setup_logging(verbose: bool, quiet: bool) -> None:
    """Configure the root handler; joblib stays at warnings."""
    level = logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    logging.getLogger("joblib").setLevel(logging.WARNING)


def load_config(args: argparse.Namespace) -> ExperimentConfig:
    """Experiment file (or the built-in default) with command-line overrides."""
    overrides = {
        "out": args.out,
        "seed": args.seed,
        "threads": args.threads,
        "tolerance_profile": args.tolerance_profile,
        "lang": args.lang,
        "verbose": not args.quiet,
    }
    if args.config:
        return ExperimentConfig.from_ini(args.config, **overrides)
    return ExperimentConfig(**{k: v for k, v in overrides.items() if v is not None})


def handle_plot(config: ExperimentConfig, plot_id: str | None) -> None:
    """Run the pipeline in memory and write one plot CSV."""
    if plot_id is None:
        print(f"Error: plot needs --plot-id ({', '.join(PLOT_IDS)})")
        sys.exit(2)
    bundle = ExperimentRunner(config).run(stages_for("diagnose"))
    rows = emit_plot_data(bundle, plot_id)
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"plot_{plot_id}.csv"
    write_plot_csv(rows, path)
    print(f"\n{len(rows)} rows written to {path}")


def main():
    """Main entry point."""
    args = parse_args()
    setup_logging(args.verbose, args.quiet)

    # Handle --list-models (no environment check needed)
    if args.list_models:
        print("Reference models:")
        for name in list_reference_models():
            print(f"  - {name}: {get_model_description(name)}")
        return

    if args.check:
        sys.exit(0 if check_environment(args.config, args.out) else 1)

    try:
        config = load_config(args)

        # Print header
        if config.verbose:
            print("=" * 50)
            print(f"varlin {__version__} - variance linearization")
            print("=" * 50)
            print(f"Command: {args.command}")
            print(f"Model: {config.model or config.model_file}")
            print(f"n grid: {' '.join(str(n) for n in config.n_grid)}")
            print(f"p0: {config.p0}")
            print(f"Seed: {config.seed}")
            print(f"Replicates: {config.replicates}")
            print(f"Threads: {config.threads}")
            print(f"Tolerance profile: {config.tolerance_profile}")
            print(f"Output: {config.out}")

        if args.command == "plot":
            handle_plot(config, args.plot_id)
        else:
            bundle = run_experiment(config, stages_for(args.command))
            if config.verbose:
                failed = sum(len(r.certification.failures()) for r in bundle.records)
                status = "✅ all checks passed" if bundle.passed else f"❌ {failed} soft checks failed"
                print(f"Certification: {status}")
    except VarlinError as e:
        print(f"\n❌ {type(e).__name__}: {e}", file=sys.stderr)
        sys.exit(e.exit_code)
    except KeyboardInterrupt:
        print("\n\nInterrupted.")
        sys.exit(130)


if __name__ == "__main__":
    main()
