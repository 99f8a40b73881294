#!/usr/bin/env python3
"""
FedGH Simulator command line

Usage:
    python fedgh_cli.py run configs/quickstart.json [--out DIR] [--seed-override N] [--quiet]
    python fedgh_cli.py conflict-probe configs/conflict_probe_10_clients.json
    python fedgh_cli.py check-config configs/quickstart.json

Exit codes: 0 success, 1 every cell failed, 2 configuration error.
"""

import argparse
import json
import logging
import sys
from typing import List, Optional

from src.core.exceptions import ConfigError
from src.services.experiment_runner import (
    EXIT_CONFIG_ERROR, format_summary, run_conflict_probe, run_experiment,
)
from src.utils.config import ExperimentConfig, load_config


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fedgh_cli.py",
        description="Deterministic federated-learning simulator with gradient harmonization",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    for name, help_text in (
        ("run", "run every (strategy x seed) cell and print the comparison table"),
        ("conflict-probe", "train the first strategy and write similarity snapshots every round"),
    ):
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("config", help="path to a JSON experiment config")
        cmd.add_argument("--out", help="output directory (overrides output.dir)")
        cmd.add_argument("--seed-override", type=int, help="run only this seed")
        cmd.add_argument("--quiet", action="store_true", help="only log warnings and errors")

    check = sub.add_parser("check-config", help="validate a config and print it with defaults resolved")
    check.add_argument("config", help="path to a JSON experiment config")
    return parser


def _configure_logging(quiet: bool) -> None:
    logging.basicConfig(
        level=logging.WARNING if quiet else logging.INFO,
        format="%(asctime)s %(levelname)s %(message)s",
    )


def _resolve(args: argparse.Namespace) -> ExperimentConfig:
    config = load_config(args.config)
    if getattr(args, "seed_override", None) is not None:
        if args.seed_override < 0:
            raise ConfigError("--seed-override", "must be a non-negative integer")
        config = config.with_seeds([args.seed_override])
    if getattr(args, "out", None):
        config = config.with_output_dir(args.out)
    return config


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    _configure_logging(getattr(args, "quiet", False))

    try:
        config = _resolve(args)
    except ConfigError as e:
        print(f"❌ Config error: {e}", file=sys.stderr)
        return EXIT_CONFIG_ERROR

    if args.command == "check-config":
        print(json.dumps(config.to_dict(), indent=2, sort_keys=True))
        return 0

    if args.command == "conflict-probe":
        outcome = run_conflict_probe(config)
        for (name, seed), history in outcome.histories.items():
            ratios = [r.conflict_ratio for r in history]
            print(f"{name} seed {seed}: mean conflict ratio {sum(ratios) / len(ratios):.4f}, "
                  f"min similarity {min(r.min_similarity for r in history):.4f}")
        return outcome.exit_status

    outcome = run_experiment(config)
    print(format_summary(outcome.summary))
    if outcome.failures:
        print(f"\n⚠️ {len(outcome.failures)} cell(s) failed, see {config.output.dir}/failures.log")
    return outcome.exit_status


if __name__ == "__main__":
    sys.exit(main())
