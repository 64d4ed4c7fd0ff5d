"""infer: posterior (or possibility) table of the query nodes."""
import argparse
import logging

from bpkit.commands.common import (
    add_evidence_arguments,
    add_lbp_arguments,
    add_mode_argument,
    add_precision_argument,
    format_beliefs,
    lbp_options,
    query_nodes,
    read_evidence,
    read_network,
    semiring_for,
)
from bpkit.exceptions import EXIT_ITERATION_CAP, EXIT_OK, EXIT_OSCILLATING
from bpkit.oracle_utils import exact_posteriors
from bpkit.pearl_utils import pearl_beliefs
from bpkit.possibilistic_utils import semiring_message_pass
from bpkit.schemas import LbpStatus

logger = logging.getLogger(__name__)

ENGINES = ("exact", "pearl", "lbp")
STATUS_EXIT_CODES = {
    LbpStatus.CONVERGED: EXIT_OK,
    LbpStatus.OSCILLATING: EXIT_OSCILLATING,
    LbpStatus.ITERATION_CAP: EXIT_ITERATION_CAP,
}


def register(subparsers) -> None:
    parser = subparsers.add_parser("infer", help="compute posteriors of query nodes")
    parser.add_argument("network", help="network file")
    parser.add_argument("--query", "-q", nargs="+", metavar="NODE", help="nodes to report (default: unobserved)")
    parser.add_argument("--engine", choices=ENGINES, default="exact")
    add_mode_argument(parser)
    add_evidence_arguments(parser)
    add_lbp_arguments(parser)
    add_precision_argument(parser)
    parser.set_defaults(handler=cmd_infer)


def cmd_infer(args: argparse.Namespace) -> int:
    """
    Print one line per query node; loopy runs also print status and iterations.

    Exit code 0 on exact or converged beliefs, 4 when loopy propagation
    oscillates and 5 when it hits the iteration cap (beliefs of the final
    round are still printed).
    """
    opts = lbp_options(args)
    semiring = semiring_for(args)
    net = read_network(args.network, semiring)
    ev = read_evidence(args, net)
    nodes = query_nodes(net, ev, args.query)

    code = EXIT_OK
    if args.engine == "exact":
        beliefs = exact_posteriors(net, ev, semiring)
    elif args.engine == "pearl":
        beliefs = pearl_beliefs(net, ev, semiring).beliefs
    else:
        result = semiring_message_pass(net, ev, semiring, opts)
        beliefs = result.beliefs
        print(f"status: {result.status_text}")
        print(f"iterations: {result.iterations_run}")
        code = STATUS_EXIT_CODES[result.status]

    for line in format_beliefs(beliefs, nodes, args.precision):
        print(line)
    return code
