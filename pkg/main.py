"""
lcslab - query-complexity lab for log-concave sampling
Command-line entry point
"""
import argparse
import logging
import sys
from typing import List, Optional

from config import settings
from errors import LabError
from routes import cheb, gauss, hardpair, kakeya, lowdim, reduce_sim, suite, wishart
from utils.run_manager import VERSION

ROUTES = (cheb, gauss, lowdim, kakeya, wishart, hardpair, reduce_sim, suite)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lcslab",
        description="Query-complexity experiments for log-concave sampling",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  lcslab cheb --kappas 4,16,64 --deltas 1e-2,1e-4,1e-8
  lcslab gauss-kl --kappas 4,16,64 --dims 16,256 --eps 0.1
  lcslab suite lp-duality --seed 7

Environment Variables:
  LCSLAB_SEED          Default root seed
  LCSLAB_THREADS       Worker threads for trial loops
  LCSLAB_OUTPUT_DIR    Run directory root (default: ./runs)
        """,
    )
    parser.add_argument("--version", action="version", version=f"lcslab {VERSION}")
    parser.add_argument("--log-level", default=settings.log_level, help="Logging level (default: INFO)")
    subparsers = parser.add_subparsers(dest="command", required=True)
    for route in ROUTES:
        route.register(subparsers)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    logging.basicConfig(
        level=getattr(logging, str(args.log_level).upper(), logging.INFO),
        format='%(asctime)s - %(levelname)s - %(message)s'
    )

    try:
        return args.handler(args)
    except LabError as e:
        print(f"\n✗ Error: {e}", file=sys.stderr)
        return e.exit_code
    except KeyboardInterrupt:
        print("\n✗ Interrupted", file=sys.stderr)
        return 130


if __name__ == "__main__":
    sys.exit(main())
