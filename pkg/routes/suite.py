"""
Suite routes
Runs a named acceptance suite from its checked-in config
"""
import argparse
import json
import logging
from pathlib import Path
from typing import Any, Dict

from config import settings
from errors import UsageError
from models import OutputFormat
from processors.suites import SUITES, execute_suite, resolve_params, suite_artifacts
from routes import add_run_arguments, make_config
from utils.run_manager import run_experiment

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser(
        "suite",
        help="Run a named acceptance suite",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="Suites: " + ", ".join(SUITES) + "\n\nExample:\n  lcslab suite lp-duality --seed 7",
    )
    parser.add_argument("name", help="Suite name")
    parser.add_argument("--config", default=None, help="Config JSON (default: configs/<name>.json when present)")
    add_run_arguments(parser)
    parser.set_defaults(handler=handle_suite)


def load_suite_config(name: str, path: str = None) -> Dict[str, Any]:
    """
    Read {"experiment": name, "params": {...}, "seed": ...} from a config file.

    Raises:
        UsageError: If the file is unreadable or names another suite
    """
    config_path = Path(path) if path else settings.config_dir / f"{name}.json"
    if not config_path.exists():
        if path:
            raise UsageError(f"Config file not found: {path}")
        return {}
    try:
        document = json.loads(config_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise UsageError(f"Config {config_path} is not valid JSON: {e}")
    if document.get("experiment", name) != name:
        raise UsageError(f"Config {config_path} is for '{document['experiment']}', not '{name}'")
    return document


def handle_suite(args: argparse.Namespace) -> int:
    document = load_suite_config(args.name, args.config)
    if args.seed is None and "seed" in document:
        args.seed = int(document["seed"])
    params = resolve_params(args.name, document.get("params", {})).model_dump(mode="json")
    config = make_config(f"suite-{args.name}", params, args, OutputFormat.JSON)
    outcome = {}

    def body():
        outcome["result"] = execute_suite(args.name, params, config.seed)
        return suite_artifacts(outcome["result"])

    record, _ = run_experiment(config, body)
    result = outcome["result"]
    for check, ok in result.checks.items():
        print(f"  {'✓' if ok else '✗'} {check}")
    status = "passed" if result.passed else "FAILED"
    print(f"{'✓' if result.passed else '✗'} suite {args.name} {status} (run {record.run_id})")
    return 0 if result.passed else 1
