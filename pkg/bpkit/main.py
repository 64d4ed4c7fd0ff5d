"""Command-line entry point: builds the parser from the subcommand modules."""
import argparse
import logging
import sys
from typing import Optional, Sequence

from pydantic import ValidationError

from bpkit import config
from bpkit.commands import bench, compare, generate, infer, validate
from bpkit.exceptions import EXIT_INVALID, BpkitError

logger = logging.getLogger("bpkit")

COMMANDS = (validate, infer, compare, generate, bench)


def setup_logging(verbose: bool = False) -> None:
    """Log to stderr (and BPKIT_LOG_FILE when set); stdout carries results only."""
    root = logging.getLogger()
    for handler in list(root.handlers):
        root.removeHandler(handler)
    formatter = logging.Formatter("%(levelname)s %(name)s: %(message)s")
    stream = logging.StreamHandler(sys.stderr)
    stream.setFormatter(formatter)
    root.addHandler(stream)
    if config.LOG_FILE:
        file_handler = logging.FileHandler(config.LOG_FILE, encoding="utf-8")
        file_handler.setFormatter(
            logging.Formatter("%(asctime)s %(levelname)s %(name)s: %(message)s")
        )
        root.addHandler(file_handler)
    root.setLevel(logging.DEBUG if verbose else config.LOG_LEVEL)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bpkit",
        description="Belief propagation on discrete Bayesian networks",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging on stderr")
    subparsers = parser.add_subparsers(dest="command", required=True)
    for command in COMMANDS:
        command.register(subparsers)
    return parser


def _fail(message: str, code: int) -> int:
    if config.DEBUG:
        logger.exception(message)
    print(f"error: {message}", file=sys.stderr)
    return code


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging(args.verbose)
    try:
        return args.handler(args)
    except BpkitError as e:
        return _fail(e.detail, e.exit_code)
    except ValidationError as e:
        problems = "; ".join(
            f"{'.'.join(str(part) for part in error['loc'])}: {error['msg']}" for error in e.errors()
        )
        return _fail(f"invalid options: {problems}", EXIT_INVALID)
    except OSError as e:
        return _fail(str(e), EXIT_INVALID)


if __name__ == "__main__":
    sys.exit(main())
