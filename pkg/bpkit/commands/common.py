"""Flags and helpers shared by several subcommands."""
import argparse
from typing import Dict, Iterable, List, Optional, Sequence

from bpkit.exceptions import BpkitError, ParseError
from bpkit.file_handler import load_evidence, load_network, merge_evidence, parse_observations
from bpkit.schemas import Distribution, Evidence, GenSpec, LbpOptions, Network
from bpkit.semiring import MODE_SEMIRINGS, Semiring, get_semiring

DEFAULT_PRECISION = 6


def add_mode_argument(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--mode",
        choices=sorted(MODE_SEMIRINGS),
        default="prob",
        help="prob (sum-product), poss-product (max-product) or poss-min (max-min)",
    )


def add_evidence_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--evidence", "-e", metavar="PATH", help="evidence file (<node> = <state> lines)")
    parser.add_argument(
        "--observe", "-o", metavar="X=STATE", action="append", default=[],
        help="inline observation; may be repeated",
    )


def add_lbp_arguments(parser: argparse.ArgumentParser) -> None:
    defaults = LbpOptions()
    group = parser.add_argument_group("loopy propagation")
    group.add_argument("--threshold", type=float, default=defaults.threshold)
    group.add_argument("--max-iterations", type=int, default=defaults.max_iterations)
    group.add_argument("--damping", "--gamma", dest="damping", type=float, default=defaults.damping)
    group.add_argument("--history-depth", type=int, default=defaults.history_depth)
    group.add_argument(
        "--momentum-target", choices=("messages", "node_values"), default=defaults.momentum_target,
    )


def add_precision_argument(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--precision", type=int, default=DEFAULT_PRECISION,
        help="decimals printed per value (17 for full precision)",
    )


def lbp_options(args: argparse.Namespace) -> LbpOptions:
    """LbpOptions from flags; range violations raise pydantic's ValidationError."""
    return LbpOptions(
        threshold=args.threshold,
        max_iterations=args.max_iterations,
        damping=args.damping,
        history_depth=args.history_depth,
        momentum_target=args.momentum_target,
    )


def semiring_for(args: argparse.Namespace) -> Semiring:
    return get_semiring(args.mode)


def read_network(path: str, semiring: Semiring) -> Network:
    """Load a network, prefixing parse errors with the file name."""
    try:
        return load_network(path, semiring.mode)
    except ParseError as e:
        raise BpkitError(f"{path}:{e.detail}")


def read_evidence(args: argparse.Namespace, net: Network) -> Evidence:
    """Evidence file and --observe flags combined."""
    ev = Evidence()
    if args.evidence:
        try:
            ev = load_evidence(args.evidence, net)
        except ParseError as e:
            raise BpkitError(f"{args.evidence}:{e.detail}")
    if args.observe:
        try:
            inline = parse_observations(args.observe, net)
        except ParseError as e:
            raise BpkitError(f"--observe: {e.message}")
        ev = merge_evidence(ev, inline)
    return ev


def query_nodes(net: Network, ev: Evidence, requested: Optional[Sequence[str]]) -> List[str]:
    """Requested nodes in the order given, or every unobserved node."""
    if not requested:
        return [x for x in net.node_ids if x not in ev]
    known = set(net.node_ids)
    for x in requested:
        if x not in known:
            raise BpkitError(f"unknown query node {x}")
    return list(requested)


def format_distribution(dist: Distribution, precision: int = DEFAULT_PRECISION) -> str:
    """``A: 0.341463 0.658537  [a0 a1]``"""
    values = " ".join(f"{v:.{precision}f}" for v in dist.values)
    return f"{dist.node}: {values}  [{' '.join(dist.states)}]"


def format_beliefs(
    beliefs: Dict[str, Distribution],
    nodes: Iterable[str],
    precision: int = DEFAULT_PRECISION,
) -> List[str]:
    return [format_distribution(beliefs[x], precision) for x in nodes]


def add_genspec_arguments(parser: argparse.ArgumentParser) -> None:
    defaults = GenSpec(family="random_polytree")
    group = parser.add_argument_group("network family")
    group.add_argument("--family", choices=("random_polytree", "pyramid", "toyqmr", "agreement"), default="random_polytree")
    group.add_argument("--nodes", type=int, default=defaults.nodes, help="random_polytree size")
    group.add_argument("--widths", type=int, nargs="+", default=list(defaults.widths), help="pyramid layer widths")
    group.add_argument("--diseases", type=int, default=defaults.diseases)
    group.add_argument("--findings", type=int, default=defaults.findings)
    group.add_argument("--max-parents", type=int, default=defaults.max_parents)
    group.add_argument("--cardinality", type=int, default=defaults.cardinality)
    group.add_argument("--prior-scale", type=float, default=defaults.prior_scale)
    group.add_argument("--concentration", type=float, default=defaults.concentration)
    group.add_argument("--possibilistic", action="store_true", help="max-normalize every CPT row")
    group.add_argument("--evidence-count", type=int, default=defaults.evidence_count)


def gen_spec(args: argparse.Namespace, seed: int) -> GenSpec:
    """GenSpec from flags; invalid sizes raise pydantic's ValidationError."""
    return GenSpec(
        family=args.family,
        nodes=args.nodes,
        widths=tuple(args.widths),
        diseases=args.diseases,
        findings=args.findings,
        max_parents=args.max_parents,
        cardinality=args.cardinality,
        seed=seed,
        prior_scale=args.prior_scale,
        concentration=args.concentration,
        mode="possibilistic" if args.possibilistic else "probabilistic",
        evidence_count=args.evidence_count,
    )
