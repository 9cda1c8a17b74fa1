"""
Chebyshev routes
Certified polynomial approximations of x^{-1/2} on [1, κ]
"""
import argparse
import logging

from models import OutputFormat
from processors.chebyshev_approx import inv_sqrt_approx, inv_sqrt_taylor_reference
from routes import add_run_arguments, float_list, make_config
from utils.file_utils import Artifact
from utils.run_manager import run_experiment

logger = logging.getLogger(__name__)

COLUMNS = ["kappa", "delta", "method", "degree", "max_error"]


def register(subparsers) -> None:
    parser = subparsers.add_parser(
        "cheb",
        help="Degree and certified error of q_{κ,δ} ≈ x^{-1/2}",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="Example:\n  lcslab cheb --kappas 4,16,64 --deltas 0.1,0.01",
    )
    parser.add_argument("--kappas", type=float_list, default=[4.0, 16.0, 64.0, 256.0])
    parser.add_argument("--deltas", type=float_list, default=[0.1, 0.01, 0.001])
    parser.add_argument("--method", choices=["interpolant", "taylor"], default="interpolant",
                        help="Certified interpolant or the Taylor reference construction")
    add_run_arguments(parser)
    parser.set_defaults(handler=handle_cheb)


def handle_cheb(args: argparse.Namespace) -> int:
    config = make_config(
        "cheb",
        {"kappas": args.kappas, "deltas": args.deltas, "method": args.method},
        args,
        OutputFormat.CSV,
    )
    build = inv_sqrt_taylor_reference if args.method == "taylor" else inv_sqrt_approx

    def body():
        rows = []
        for kappa in args.kappas:
            for delta in args.deltas:
                q = build(kappa, delta)
                rows.append({
                    "kappa": kappa,
                    "delta": delta,
                    "method": args.method,
                    "degree": q.degree,
                    "max_error": q.max_error(lambda x: x ** -0.5),
                })
        return [Artifact("cheb", OutputFormat.CSV, rows, COLUMNS)]

    record, _ = run_experiment(config, body)
    print(f"✓ cheb: {len(args.kappas) * len(args.deltas)} rows in run {record.run_id}")
    return 0
