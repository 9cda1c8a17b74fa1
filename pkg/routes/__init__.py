"""
CLI subcommand groups. Each module exposes register(subparsers) and sets a
``handler(args) -> int`` default on the parsers it adds.
"""
import argparse
from typing import Any, Dict, List

from config import settings
from errors import UsageError
from models import ExperimentConfig, OutputFormat


def add_run_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=None, help="Root seed (default: LCSLAB_SEED)")
    parser.add_argument("--out", default=None, help="Also write the primary artifact to this path")


def float_list(text: str) -> List[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"Expected comma-separated numbers, got '{text}'")


def int_list(text: str) -> List[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"Expected comma-separated integers, got '{text}'")


def make_config(
    experiment: str,
    params: Dict[str, Any],
    args: argparse.Namespace,
    fmt: OutputFormat,
) -> ExperimentConfig:
    """Resolve seed and output path into a validated ExperimentConfig."""
    seed = settings.seed if getattr(args, "seed", None) is None else args.seed
    if seed < 0:
        raise UsageError(f"Seed must be non-negative, got {seed}")
    return ExperimentConfig(
        experiment=experiment,
        params=params,
        seed=seed,
        output=getattr(args, "out", None),
        format=fmt,
    )
