"""bench: convergence study over a batch of generated networks."""
import argparse
import logging
import sys
from pathlib import Path

from bpkit.commands.common import (
    add_genspec_arguments,
    add_lbp_arguments,
    add_mode_argument,
    gen_spec,
    lbp_options,
    semiring_for,
)
from bpkit.exceptions import BpkitError, EXIT_OK
from bpkit.genbench_utils import find_oscillator, report_to_csv, report_to_text, run_study

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser("bench", help="run a convergence study")
    add_genspec_arguments(parser)
    parser.add_argument("--count", type=int, default=20, help="networks per study")
    parser.add_argument("--seed", type=int, default=0, help="seed of the first network")
    parser.add_argument("--engines", nargs="+", choices=("lbp", "pearl"), default=["lbp"])
    parser.add_argument(
        "--gamma-grid", type=float, nargs="+", default=[0.0], metavar="GAMMA",
        help="damping values for loopy propagation",
    )
    parser.add_argument(
        "--oscillator-search", type=int, default=0, metavar="ATTEMPTS",
        help="also search this many small loopy networks for a period-2 oscillator",
    )
    parser.add_argument("--csv", metavar="PATH", help="write rows as comma-separated values")
    parser.add_argument("--report", metavar="PATH", help="write the text summary (default: stdout)")
    add_mode_argument(parser)
    add_lbp_arguments(parser)
    parser.set_defaults(handler=cmd_bench)


def cmd_bench(args: argparse.Namespace) -> int:
    """Networks seeded seed..seed+count-1, every engine at every damping value."""
    if args.count < 0:
        raise BpkitError("--count must not be negative")
    opts = lbp_options(args)
    semiring = semiring_for(args)
    if args.possibilistic != (semiring.mode == "possibilistic"):
        raise BpkitError("--possibilistic networks need a possibilistic --mode, and vice versa")
    specs = [gen_spec(args, args.seed + i) for i in range(args.count)]

    if args.oscillator_search and semiring.mode != "probabilistic":
        raise BpkitError("--oscillator-search runs in prob mode only")
    if args.oscillator_search:
        found = find_oscillator(attempts=args.oscillator_search, seed=args.seed, opts=opts)
        if found is None:
            logger.warning("no oscillator found in %d attempts", args.oscillator_search)
        else:
            specs.append(found.spec)

    report = run_study(specs, args.engines, opts, args.gamma_grid, semiring)
    if args.csv:
        Path(args.csv).write_text(report_to_csv(report), encoding="utf-8")
    text = report_to_text(report)
    if args.report:
        Path(args.report).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK
