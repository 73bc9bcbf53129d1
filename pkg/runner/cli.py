"""
CLI entry point for the inclusion solver.

Usage:
    # Solve and write solution.json, summary.txt, manifest.json
    python -m runner solve --config configs/ellipse_cavity.json

    # Displacement on a grid (x0,x1,y0,y1,nx,ny)
    python -m runner field --config configs/ellipse_inclusion.json --grid=-3,3,-3,3,61,61

    # Cross-check against the boundary-integral solver
    python -m runner oracle-check --config configs/disk_cavity.json

    # Closed-form disk/ellipse checks
    python -m runner self-test
"""

import argparse
import logging
import sys
from pathlib import Path

from pydantic import ValidationError

sys.path.insert(0, str(Path(__file__).parent.parent))

from inclusion.exceptions import InclusionError, MaterialError  # noqa: E402
from runner import config as env  # noqa: E402
from runner.pipeline import Overrides, run, self_test  # noqa: E402

logger = logging.getLogger(__name__)

COMMANDS = ("solve", "field", "oracle-check", "self-test")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="runner",
        description="Matrix-formulation solver for the plane elastic inclusion problem",
    )
    parser.add_argument("command", choices=COMMANDS, help="What to run")
    parser.add_argument("--config", help="Run configuration (JSON)")
    parser.add_argument("--truncation", type=int, help=f"Truncation order n (default: {env.TRUNCATION})")
    parser.add_argument("--grid", help="Field grid as x0,x1,y0,y1,nx,ny")
    parser.add_argument("--oracle", action="store_true", help="Also run the boundary-integral comparison")
    parser.add_argument("--out-dir", help=f"Output directory (default: {env.OUTPUT_DIR})")
    parser.add_argument("--tolerance", type=float, help=f"Relative residual tolerance (default: {env.TOLERANCE})")
    parser.add_argument("--log-level", default=env.LOG_LEVEL, help=f"Logging level (default: {env.LOG_LEVEL})")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=getattr(logging, str(args.log_level).upper(), logging.INFO),
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    )

    if args.command == "self-test":
        passed, table = self_test()
        print(table.to_string(index=False))
        return 0 if passed else 1

    if not args.config:
        logger.error(f"{args.command} needs --config")
        return 2

    overrides = Overrides(
        truncation=args.truncation,
        grid=args.grid,
        oracle=args.oracle,
        out_dir=args.out_dir,
        tolerance=args.tolerance,
    )
    try:
        return run(args.command, args.config, overrides)
    except ValidationError as e:
        logger.error(f"Invalid configuration: {str(e)}")
        return 2
    except MaterialError as e:
        logger.error(f"Invalid material: {str(e)}")
        return e.exit_code
    except InclusionError as e:
        logger.error(f"{type(e).__name__}: {str(e)}")
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
