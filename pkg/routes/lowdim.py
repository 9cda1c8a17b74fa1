"""
Low-dimensional sampler routes
Ellipsoid rounding plus rejection sampling for quadratic or Kakeya potentials
"""
import argparse
import logging

from errors import UsageError
from models import OutputFormat
from processors import lowdim_sampler as lowdim
from processors.kakeya_family import BitString, KakeyaPotential, KakeyaProfile
from processors.query_oracle import make_quadratic_oracle
from routes import add_run_arguments, make_config
from utils.file_utils import Artifact
from utils.rng import trial_generator
from utils.run_manager import run_experiment

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser(
        "lowdim-sample",
        help="O(log κ) sampler in constant dimension",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog=(
            "Examples:\n"
            "  lcslab lowdim-sample --dim 2 --kappa 100 --eps 0.01 --samples 1000\n"
            "  lcslab lowdim-sample --potential kakeya --bits 1010 --eps 0.1 --samples 100"
        ),
    )
    parser.add_argument("--dim", type=int, default=2)
    parser.add_argument("--kappa", type=float, default=100.0)
    parser.add_argument("--eps", type=float, default=0.01)
    parser.add_argument("--samples", type=int, default=1000)
    parser.add_argument("--potential", choices=["quadratic", "kakeya"], default="quadratic")
    parser.add_argument("--bits", default="1010", help="Kakeya bit string (reduced profile)")
    add_run_arguments(parser)
    parser.set_defaults(handler=handle_lowdim)


def _target(args: argparse.Namespace):
    """Oracle, smoothness bound and strong-convexity parameter of the requested potential."""
    if args.potential == "quadratic":
        oracle = make_quadratic_oracle(lowdim.quadratic_potential_matrix(args.kappa, args.dim), record=False)
        return oracle, args.kappa, 1.0
    if args.dim != 2:
        raise UsageError(f"The Kakeya potential lives in d=2, got --dim {args.dim}")
    potential = KakeyaPotential(BitString.parse(args.bits), KakeyaProfile.reduced())
    alpha = 2.0 * potential.quad_scale
    beta = potential.slope_scale / potential.delta + alpha
    return potential.as_oracle(record=False), beta, alpha


def handle_lowdim(args: argparse.Namespace) -> int:
    params = {"dim": args.dim, "kappa": args.kappa, "eps": args.eps, "samples": args.samples,
              "potential": args.potential}
    if args.potential == "kakeya":
        params["bits"] = args.bits
    config = make_config("lowdim-sample", params, args, OutputFormat.CSV)

    def body():
        oracle, beta, alpha = _target(args)
        samples, stats = lowdim.sample_lowdim(
            oracle, args.dim, beta, args.eps, args.samples, trial_generator(config.seed, 0), strong_convexity=alpha
        )
        rows = [
            {"sample_id": i, **{f"x{j}": float(v) for j, v in enumerate(x)}, "total_query_count": stats["total_queries"]}
            for i, x in enumerate(samples)
        ]
        return [Artifact("samples", OutputFormat.CSV, rows), Artifact("stats", OutputFormat.JSON, stats)]

    record, artifacts = run_experiment(config, body)
    print(f"✓ lowdim-sample: {args.samples} samples, {artifacts[1].payload['total_queries']} queries "
          f"in run {record.run_id}")
    return 0
