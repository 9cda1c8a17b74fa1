"""
Reduction routes
run: adaptive vs simulated transcripts; conditioning: (X_k, U) vs (X_k, UV)
"""
import argparse
import logging
from pathlib import Path

from errors import UsageError
from models import OutputFormat
from processors import hard_instances as hard
from processors import krylov_reduction_sim as reduction
from routes import add_run_arguments, make_config
from utils.file_utils import Artifact
from utils.run_manager import run_experiment

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser(
        "reduce-sim",
        help="Simulate adaptive algorithms from block-Krylov data",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog=(
            "Examples:\n"
            "  lcslab reduce-sim run --alg power --dim 48 --K 4 --trials 2000 --out report.json\n"
            "  lcslab reduce-sim run --alg hybrid --dim 256 --K 3 --pair pair.json\n"
            "  lcslab reduce-sim conditioning --dim 8 --m 3 --trials 1000"
        ),
    )
    actions = parser.add_subparsers(dest="action", required=True)

    run = actions.add_parser("run", help="Identity residuals and the adaptive-vs-simulated two-sample test")
    run.add_argument("--alg", choices=sorted(reduction.ALGORITHMS), default="power")
    run.add_argument("--dim", type=int, default=48)
    run.add_argument("--K", type=int, default=4)
    run.add_argument("--trials", type=int, default=2000)
    run.add_argument("--kappa", type=float, default=4.0, help="Reference spectrum linspace(1, κ, d)")
    run.add_argument("--pair", default=None, help="Use the diagonal of a saved hard pair as the spectrum")
    run.add_argument("--permutations", type=int, default=None)
    run.add_argument("--no-control", action="store_true", help="Skip the identity-rotation negative control")
    add_run_arguments(run)
    run.set_defaults(handler=handle_run)

    conditioning = actions.add_parser("conditioning", help="Conditioning check with V fixing W_m")
    conditioning.add_argument("--dim", type=int, default=8)
    conditioning.add_argument("--m", type=int, default=1)
    conditioning.add_argument("--trials", type=int, default=1000)
    conditioning.add_argument("--alg", choices=sorted(reduction.ALGORITHMS), default="power")
    conditioning.add_argument("--negative-control", action="store_true",
                              help="Replace V by a fixed reflection that moves W_m")
    conditioning.add_argument("--permutations", type=int, default=None)
    add_run_arguments(conditioning)
    conditioning.set_defaults(handler=handle_conditioning)


def handle_run(args: argparse.Namespace) -> int:
    params = {"alg": args.alg, "dim": args.dim, "K": args.K, "trials": args.trials, "kappa": args.kappa,
              "pair": args.pair, "permutations": args.permutations, "negative_control": not args.no_control}
    config = make_config("reduce-sim", params, args, OutputFormat.JSON)

    def body():
        spectrum = None
        if args.pair:
            if not Path(args.pair).exists():
                raise UsageError(f"Pair file not found: {args.pair}")
            spectrum = hard.load_hard_pair(Path(args.pair), rotate=False).diagonal
        report = reduction.reduction_experiment(
            args.alg, args.dim, args.K, args.trials, config.seed, args.kappa,
            args.permutations, negative_control=not args.no_control, spectrum=spectrum,
        )
        return [Artifact("reduction", OutputFormat.JSON, report)]

    record, artifacts = run_experiment(config, body)
    report = artifacts[0].payload
    res = report.identity_residuals
    print(f"✓ reduce-sim {args.alg}: p={report.two_sample.p_value:.3f}, "
          f"max residual {max(res.P2_max, res.P3_max, res.P4_max):.2e} in run {record.run_id}")
    return 0


def handle_conditioning(args: argparse.Namespace) -> int:
    params = {"dim": args.dim, "m": args.m, "trials": args.trials, "alg": args.alg,
              "negative_control": args.negative_control, "permutations": args.permutations}
    config = make_config("reduce-sim-conditioning", params, args, OutputFormat.JSON)

    def body():
        result = reduction.conditioning_lemma_check(
            args.dim, args.m, args.trials, config.seed, algorithm=args.alg,
            negative_control=args.negative_control, permutations=args.permutations,
        )
        return [Artifact("conditioning", OutputFormat.JSON, result)]

    record, artifacts = run_experiment(config, body)
    print(f"✓ reduce-sim conditioning: p={artifacts[0].payload.p_value:.3f} in run {record.run_id}")
    return 0
