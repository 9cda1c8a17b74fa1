"""
Hard pair routes
build: moment-matched pair D, D'; distinguish: single-sample ‖X‖² test; couple: GOE coupling
"""
import argparse
import logging
from pathlib import Path

from errors import UsageError
from models import OutputFormat
from processors import hard_instances as hard
from routes import add_run_arguments, make_config
from utils.file_utils import Artifact
from utils.rng import trial_generator
from utils.run_manager import run_experiment

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser(
        "hardpair",
        help="Moment-matched diagonal pairs",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog=(
            "Examples:\n"
            "  lcslab hardpair build --K 1 --kappa 16 --dim 4096 --out pair.json\n"
            "  lcslab hardpair distinguish --pair pair.json --trials 1000\n"
            "  lcslab hardpair couple --pair pair.json --trials 1000"
        ),
    )
    actions = parser.add_subparsers(dest="action", required=True)

    build = actions.add_parser("build", help="Solve the moment LP, strengthen and round")
    build.add_argument("--K", type=int, default=None, help="Moment depth (default: LP threshold)")
    build.add_argument("--kappa", type=float, default=16.0)
    build.add_argument("--dim", type=int, default=4096)
    build.add_argument("--c1", type=float, default=None, help="Strengthening constant (default: 1/(κ^1.5 log⁴ d))")
    add_run_arguments(build)
    build.set_defaults(handler=handle_build)

    for name, help_text, handler in (
        ("distinguish", "Single-sample ‖X‖² distinguisher accuracy", handle_distinguish),
        ("couple", "Entrywise GOE coupling success rate", handle_couple),
    ):
        action = actions.add_parser(name, help=help_text)
        action.add_argument("--pair", required=True, help="Pair JSON written by 'hardpair build'")
        action.add_argument("--trials", type=int, default=1000)
        add_run_arguments(action)
        action.set_defaults(handler=handler)


def _load(path: str) -> hard.HardPair:
    if not Path(path).exists():
        raise UsageError(f"Pair file not found: {path}")
    return hard.load_hard_pair(Path(path))


def handle_build(args: argparse.Namespace) -> int:
    K = args.K if args.K is not None else hard.lp_threshold(args.kappa, args.dim)
    c1 = args.c1 if args.c1 is not None else hard.default_c1(args.kappa, args.dim)
    params = {"K": K, "kappa": args.kappa, "dim": args.dim, "c1": c1}
    config = make_config("hardpair-build", params, args, OutputFormat.JSON)

    def body():
        pair = hard.build_hard_pair(K, args.kappa, args.dim, c1, trial_generator(config.seed, 0),
                                    seed=config.seed, rotate=False)
        return [Artifact("hard_pair", OutputFormat.JSON, pair.to_record())]

    record, artifacts = run_experiment(config, body)
    print(f"✓ hardpair build: trace gap {artifacts[0].payload.trace_gap:.4f} in run {record.run_id}")
    return 0


def handle_distinguish(args: argparse.Namespace) -> int:
    config = make_config("hardpair-distinguish", {"pair": args.pair, "trials": args.trials}, args, OutputFormat.JSON)

    def body():
        result = hard.distinguisher_accuracy(_load(args.pair), args.trials, config.seed)
        return [Artifact("distinguisher", OutputFormat.JSON, result)]

    record, artifacts = run_experiment(config, body)
    print(f"✓ hardpair distinguish: accuracy {artifacts[0].payload['accuracy']:.3f} in run {record.run_id}")
    return 0


def handle_couple(args: argparse.Namespace) -> int:
    config = make_config("hardpair-couple", {"pair": args.pair, "trials": args.trials}, args, OutputFormat.JSON)

    def body():
        pair = _load(args.pair)
        result = hard.goe_coupling_experiment(
            pair.K,
            [(int(n), int(m)) for n, m in zip(pair.N, pair.N_prime)],
            (pair.x - pair.x_prime).tolist(),
            args.trials,
            trial_generator(config.seed, 0),
        )
        return [Artifact("coupling", OutputFormat.JSON, result)]

    record, artifacts = run_experiment(config, body)
    print(f"✓ hardpair couple: success rate {artifacts[0].payload['success_rate']:.3f} in run {record.run_id}")
    return 0
