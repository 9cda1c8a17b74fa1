"""
Kakeya routes
render: zero-set figure; leakage: revealed-bit experiment; invariants: structural sweep
"""
import argparse
import logging

from models import LeakStrategy, OutputFormat
from processors import kakeya_family as kakeya
from routes import add_run_arguments, float_list, make_config
from utils.file_utils import Artifact
from utils.rng import trial_generator
from utils.run_manager import run_experiment

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser(
        "kakeya",
        help="Multiscale Kakeya potential family",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog=(
            "Examples:\n"
            "  lcslab kakeya render --bits 1010 --N 4 --out fig.svg\n"
            "  lcslab kakeya leakage --N 16 --strategy random --trials 10000 --out report.json\n"
            "  lcslab kakeya invariants --bits 10110 --points 10000"
        ),
    )
    actions = parser.add_subparsers(dest="action", required=True)

    render = actions.add_parser("render", help="SVG of the zero sets")
    render.add_argument("--N", type=int, default=4)
    render.add_argument("--bits", nargs="+", default=["1010"])
    render.add_argument("--radii", type=float_list, default=[0.25, 0.5])
    render.add_argument("--resolution", type=int, default=240)
    add_run_arguments(render)
    render.set_defaults(handler=handle_render)

    leakage = actions.add_parser("leakage", help="Newly revealed bits per query")
    leakage.add_argument("--N", type=int, required=True)
    leakage.add_argument("--strategy", choices=[s.value for s in LeakStrategy], default="random")
    leakage.add_argument("--queries", type=int, default=None, help="Queries per trial (default: N+2)")
    leakage.add_argument("--trials", type=int, default=10_000)
    add_run_arguments(leakage)
    leakage.set_defaults(handler=handle_leakage)

    invariants = actions.add_parser("invariants", help="Convexity, flatness, growth, induction and coincidence sweep")
    invariants.add_argument("--bits", default="1010")
    invariants.add_argument("--points", type=int, default=10_000)
    invariants.add_argument("--coincidence-N", type=int, default=3)
    add_run_arguments(invariants)
    invariants.set_defaults(handler=handle_invariants)


def handle_render(args: argparse.Namespace) -> int:
    params = {"N": args.N, "bits": args.bits, "radii": args.radii, "resolution": args.resolution}
    config = make_config("kakeya-render", params, args, OutputFormat.SVG)

    def body():
        svg = kakeya.render_zero_sets(args.N, args.bits, args.radii, resolution=args.resolution)
        return [Artifact("zero_sets", OutputFormat.SVG, svg)]

    record, _ = run_experiment(config, body)
    print(f"✓ kakeya render: {len(args.bits)} bit strings in run {record.run_id}")
    return 0


def handle_leakage(args: argparse.Namespace) -> int:
    queries = args.queries if args.queries is not None else args.N + 2
    params = {"N": args.N, "strategy": args.strategy, "queries": queries, "trials": args.trials}
    config = make_config("kakeya-leakage", params, args, OutputFormat.JSON)

    def body():
        report = kakeya.leakage_experiment(args.N, queries, args.strategy, args.trials,
                                           trial_generator(config.seed, 0))
        return [Artifact("leakage", OutputFormat.JSON, report)]

    record, artifacts = run_experiment(config, body)
    print(f"✓ kakeya leakage: {artifacts[0].payload.avg_bits_per_query:.3f} bits/query in run {record.run_id}")
    return 0


def handle_invariants(args: argparse.Namespace) -> int:
    params = {"bits": args.bits, "points": args.points, "coincidence_N": args.coincidence_N}
    config = make_config("kakeya-invariants", params, args, OutputFormat.JSON)

    def body():
        b = kakeya.BitString.parse(args.bits)
        structure = kakeya.check_structure(b, trial_generator(config.seed, 0), args.points)
        coincidence = kakeya.check_coincidence(args.coincidence_N, trial_generator(config.seed, 1), args.points)
        return [Artifact("invariants", OutputFormat.JSON, {"bits": args.bits, "structure": structure,
                                                           "coincidence": coincidence})]

    record, artifacts = run_experiment(config, body)
    payload = artifacts[0].payload
    total = sum(payload["structure"].values()) + payload["coincidence"]["mismatches"]
    print(f"✓ kakeya invariants: {total} violations in run {record.run_id}")
    return 0
