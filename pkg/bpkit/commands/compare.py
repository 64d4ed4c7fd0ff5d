"""compare: per-node differences between engines and the exact posteriors."""
import argparse
import itertools
import logging
from typing import Dict, List, Tuple

import numpy as np

from bpkit.commands.common import (
    add_evidence_arguments,
    add_lbp_arguments,
    add_mode_argument,
    lbp_options,
    query_nodes,
    read_evidence,
    read_network,
    semiring_for,
)
from bpkit.exceptions import EXIT_OK, EXIT_ORACLE_REFUSAL, OracleRefusalError, StructuralError
from bpkit.network_utils import diameter
from bpkit.oracle_utils import exact_posteriors
from bpkit.pearl_utils import pearl_beliefs
from bpkit.possibilistic_utils import semiring_message_pass
from bpkit.schemas import Distribution, LbpStatus

logger = logging.getLogger(__name__)

UNSTABLE_NOTE = "no stable beliefs; diff vs final round"

Beliefs = Dict[str, Distribution]


def register(subparsers) -> None:
    parser = subparsers.add_parser("compare", help="diff engines against exact posteriors")
    parser.add_argument("network", help="network file")
    parser.add_argument(
        "--engines", nargs="+", choices=("pearl", "lbp"), default=["pearl", "lbp"],
        help="engines to diff (default: pearl lbp)",
    )
    add_mode_argument(parser)
    add_evidence_arguments(parser)
    add_lbp_arguments(parser)
    parser.set_defaults(handler=cmd_compare)


def belief_diffs(first: Beliefs, second: Beliefs, nodes: List[str]) -> Dict[str, Tuple[float, float]]:
    """(L1, max-abs) difference per node."""
    diffs = {}
    for x in nodes:
        delta = np.abs(first[x].as_array() - second[x].as_array())
        diffs[x] = (float(delta.sum()), float(delta.max()))
    return diffs


def _print_diffs(title: str, diffs: Dict[str, Tuple[float, float]]) -> None:
    print(title)
    for x, (l1, max_abs) in diffs.items():
        print(f"  {x}: l1={l1:.3e} max_abs={max_abs:.3e}")
    if diffs:
        print(
            f"  overall: l1={max(d[0] for d in diffs.values()):.3e} "
            f"max_abs={max(d[1] for d in diffs.values()):.3e}"
        )


def cmd_compare(args: argparse.Namespace) -> int:
    """
    Diff each engine against the oracle, or pairwise when the oracle refuses.

    Exit code 6 when the oracle refused, 0 otherwise; non-converged loopy
    runs are annotated, not failed.
    """
    opts = lbp_options(args)
    semiring = semiring_for(args)
    net = read_network(args.network, semiring)
    ev = read_evidence(args, net)
    nodes = query_nodes(net, ev, None) or list(net.node_ids)

    results: Dict[str, Beliefs] = {}
    for engine in args.engines:
        if engine == "pearl":
            try:
                exact = pearl_beliefs(net, ev, semiring)
            except StructuralError as e:
                print(f"pearl: skipped: {e.detail}")
                continue
            results[engine] = exact.beliefs
            print(
                f"pearl: {exact.messages_sent} messages in {exact.rounds} rounds "
                f"(diameter {diameter(net)})"
            )
            continue
        run = semiring_message_pass(net, ev, semiring, opts)
        results[engine] = run.beliefs
        print(f"lbp: {run.status_text} after {run.iterations_run} iterations")
        if run.status is not LbpStatus.CONVERGED:
            print(f"lbp: {UNSTABLE_NOTE}")

    try:
        reference = exact_posteriors(net, ev, semiring)
    except OracleRefusalError as e:
        logger.warning("%s", e.detail)
        print(e.detail)
        for first, second in itertools.combinations(results, 2):
            _print_diffs(f"{first} vs {second}", belief_diffs(results[first], results[second], nodes))
        return EXIT_ORACLE_REFUSAL

    for engine, beliefs in results.items():
        _print_diffs(f"{engine} vs exact", belief_diffs(beliefs, reference, nodes))
    return EXIT_OK
