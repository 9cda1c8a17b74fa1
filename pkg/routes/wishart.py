"""
Wishart routes
tail: smallest-eigenvalue tail; invtrace: inverse-trace queries; posterior: minorization check
"""
import argparse
import logging

from models import OutputFormat
from processors import hard_instances as hard
from routes import add_run_arguments, float_list, int_list, make_config
from utils.file_utils import Artifact
from utils.rng import trial_generator
from utils.run_manager import run_experiment

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser(
        "wishart",
        help="Wishart random-matrix facts",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog=(
            "Examples:\n"
            "  lcslab wishart tail --dims 8,32 --trials 100000\n"
            "  lcslab wishart invtrace --dim 64 --strategy block-krylov --n-grid 4,16,64\n"
            "  lcslab wishart posterior --n 2 --dim 8 --trials 1000"
        ),
    )
    actions = parser.add_subparsers(dest="action", required=True)

    tail = actions.add_parser("tail", help="Pr{λ_min <= x/d²} with Wilson intervals")
    tail.add_argument("--dims", type=int_list, default=[8, 32])
    tail.add_argument("--x-grid", type=float_list, default=[0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0])
    tail.add_argument("--trials", type=int, default=100_000)
    add_run_arguments(tail)
    tail.set_defaults(handler=handle_tail)

    invtrace = actions.add_parser("invtrace", help="Inverse-trace estimation success rate vs query count")
    invtrace.add_argument("--dim", type=int, default=64)
    invtrace.add_argument("--strategy", choices=sorted(hard.INVERSE_TRACE_STRATEGIES), default="hutchinson")
    invtrace.add_argument("--n-grid", type=int_list, default=[4, 16, 64])
    invtrace.add_argument("--trials", type=int, default=10_000)
    add_run_arguments(invtrace)
    invtrace.set_defaults(handler=handle_invtrace)

    posterior = actions.add_parser("posterior", help="λ_min of the posterior block against λ_min(W̃)")
    posterior.add_argument("--n", type=int, default=2)
    posterior.add_argument("--dim", type=int, default=8)
    posterior.add_argument("--trials", type=int, default=1000)
    add_run_arguments(posterior)
    posterior.set_defaults(handler=handle_posterior)


def handle_tail(args: argparse.Namespace) -> int:
    params = {"dims": args.dims, "x_grid": args.x_grid, "trials": args.trials}
    config = make_config("wishart-tail", params, args, OutputFormat.CSV)

    def body():
        rows = []
        for d in args.dims:
            rows.extend(hard.smallest_eig_tail(d, args.x_grid, args.trials, config.seed))
        return [Artifact("wishart_tail", OutputFormat.CSV, rows)]

    record, _ = run_experiment(config, body)
    print(f"✓ wishart tail: dims {args.dims} in run {record.run_id}")
    return 0


def handle_invtrace(args: argparse.Namespace) -> int:
    params = {"dim": args.dim, "strategy": args.strategy, "n_grid": args.n_grid, "trials": args.trials}
    config = make_config("wishart-invtrace", params, args, OutputFormat.CSV)

    def body():
        rows = hard.inverse_trace_query_experiment(args.dim, args.strategy, args.n_grid, args.trials, config.seed)
        return [Artifact("inverse_trace", OutputFormat.CSV, rows)]

    record, _ = run_experiment(config, body)
    print(f"✓ wishart invtrace: {args.strategy} at d={args.dim} in run {record.run_id}")
    return 0


def handle_posterior(args: argparse.Namespace) -> int:
    params = {"n": args.n, "dim": args.dim, "trials": args.trials}
    config = make_config("wishart-posterior", params, args, OutputFormat.JSON)

    def body():
        report = hard.posterior_minorization_check(args.n, args.dim, args.trials, trial_generator(config.seed, 0))
        return [Artifact("posterior", OutputFormat.JSON, report)]

    record, _ = run_experiment(config, body)
    print(f"✓ wishart posterior: no violations in {args.trials} trials (run {record.run_id})")
    return 0
