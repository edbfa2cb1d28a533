import argparse
import sys
from typing import List, Optional

import structlog
from pydantic import ValidationError

from app.core.errors import PolyTransferError, UnknownExperimentError
from app.core.logging import configure_logging
from app.experiments.router import experiment_router
from app.experiments.runner import load_config, run_experiment

logger = structlog.get_logger(__name__)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="polytransfer",
        description="Transfer inequalities for low-degree polynomials: experiment runner",
    )
    parser.add_argument("--log-level", default=None, help="override POLYTRANSFER_LOG_LEVEL")
    parser.add_argument("--log-json", action="store_true", default=None, help="emit JSON log lines")
    commands = parser.add_subparsers(dest="command", required=True)

    run = commands.add_parser("run", help="run one experiment from a key = value config file")
    run.add_argument("config", help="path to the experiment config")

    commands.add_parser("list", help="print the experiment catalog")
    return parser


def list_experiments() -> str:
    width = max(len(name) for name in experiment_router.names)
    return "\n".join(
        f"{name.ljust(width)}  {experiment_router.get(name).description}" for name in experiment_router.names
    )


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args.log_level, args.log_json)

    if args.command == "list":
        print(list_experiments())
        return 0

    try:
        result = run_experiment(load_config(args.config))
    except UnknownExperimentError as exc:
        print(parser.format_usage().rstrip(), file=sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        print("available experiments:\n" + list_experiments(), file=sys.stderr)
        return 2
    except (PolyTransferError, ValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    print(f"{result.name}: {len(result.artifacts)} artifacts in {result.output_dir}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
