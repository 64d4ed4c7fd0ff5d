"""validate: check a network file and report every problem with its location."""
import argparse
import logging
from pathlib import Path

from bpkit.commands.common import add_mode_argument, semiring_for
from bpkit.exceptions import EXIT_INVALID, EXIT_OK, ParseError
from bpkit.file_handler import parse_network_structure
from bpkit.network_utils import is_polytree, validate_network

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser("validate", help="check a network file")
    parser.add_argument("network", help="network file")
    add_mode_argument(parser)
    parser.set_defaults(handler=cmd_validate)


def cmd_validate(args: argparse.Namespace) -> int:
    """Print the validation report and the polytree verdict; exit 0 iff valid."""
    path = args.network
    try:
        net, spans = parse_network_structure(Path(path).read_text(encoding="utf-8"))
    except ParseError as e:
        print(f"{path}:{e.span}: error: {e.message}")
        return EXIT_INVALID

    report = validate_network(net, semiring_for(args).mode)
    for issue in report.issues:
        span = spans.get(issue.location)
        where = f"{path}:{span}" if span else path
        print(f"{where}: {issue.severity}: {issue.location}: {issue.message}")
    if not report.ok:
        logger.info("%s: %d errors", path, len(report.errors))
        return EXIT_INVALID
    print("ok, polytree" if is_polytree(net) else "ok, not a polytree")
    return EXIT_OK
