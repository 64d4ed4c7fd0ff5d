"""Exact inference by enumerating the full joint.

This is the reference the propagation engines are tested against. The joint
is laid out with one axis per node in topological order and refused when it
would exceed ORACLE_MAX_JOINT_STATES entries.
"""
import logging
import math
from functools import reduce
from typing import Dict, Mapping, Optional, Tuple

import numpy as np

from bpkit.config import ORACLE_MAX_JOINT_STATES
from bpkit.exceptions import ImpossibleEvidenceError, OracleRefusalError
from bpkit.network_utils import index_network, validate_evidence
from bpkit.schemas import Distribution, Evidence, Network
from bpkit.semiring import PROB_SUM_PRODUCT, Semiring, SemiringId, poss_normalize

logger = logging.getLogger(__name__)


def joint_size(net: Network) -> int:
    """Number of full assignments of the network."""
    return math.prod(node.cardinality for node in net.nodes)


def joint_weight(
    net: Network,
    assignment: Mapping[str, str],
    semiring: Semiring = PROB_SUM_PRODUCT,
) -> float:
    """
    Combination of every node's CPT entry under a full assignment.

    Args:
        net: Valid network
        assignment: State label for every node
        semiring: product combination, or min for qualitative possibility

    Returns:
        Joint probability or possibility degree
    """
    entries = []
    for node in net.nodes:
        cpt = net.cpts[node.id]
        row = 0
        for parent in cpt.parents:
            parent_node = net.node(parent)
            row = row * parent_node.cardinality + parent_node.state_index(assignment[parent])
        entries.append(cpt.table[row][node.state_index(assignment[node.id])])
    return float(reduce(semiring.combine, entries, semiring.combine_unit))


def _enumerate(
    net: Network,
    ev: Evidence,
    semiring: Semiring,
    max_states: int,
) -> Tuple[np.ndarray, Dict[str, int], Dict[str, int], float]:
    size = joint_size(net)
    if size > max_states:
        raise OracleRefusalError(
            f"oracle refused: joint has {size} states, above the bound of {max_states}"
        )
    observed = validate_evidence(net, ev)
    index = index_network(net)
    axes = {x: i for i, x in enumerate(index.order)}
    shape = tuple(index.cardinality[x] for x in index.order)

    joint = np.full(shape, semiring.combine_unit)
    for x in index.order:
        scope = list(index.parents[x]) + [x]
        positions = [axes[v] for v in scope]
        permutation = np.argsort(positions)
        factor_shape = [1] * len(shape)
        for v in scope:
            factor_shape[axes[v]] = index.cardinality[v]
        factor = index.tables[x].transpose(permutation).reshape(factor_shape)
        semiring.combine(joint, factor, out=joint)

    slicer = tuple(
        slice(observed[x], observed[x] + 1) if x in observed else slice(None)
        for x in index.order
    )
    restricted = joint[slicer]
    total = float(semiring.reduce(restricted, range(len(shape)))) if shape else 1.0
    if not total > 0:
        raise ImpossibleEvidenceError("impossible evidence: zero total weight")
    return restricted, axes, observed, total


def _posterior(
    net: Network,
    restricted: np.ndarray,
    axes: Dict[str, int],
    observed: Dict[str, int],
    total: float,
    query: str,
    semiring: Semiring,
) -> Distribution:
    node = net.node(query)
    others = [axis for x, axis in axes.items() if x != query]
    marginal = np.asarray(semiring.reduce(restricted, others), dtype=float).reshape(-1)
    if query in observed:
        full = np.zeros(node.cardinality)
        full[observed[query]] = marginal[0]
        marginal = full
    if semiring.id is SemiringId.PROB_SUM_PRODUCT:
        values = marginal / total
    else:
        values = poss_normalize(marginal, semiring.conditioning)
    return Distribution(node=query, states=node.states, values=tuple(values.tolist()))


def exact_posterior(
    net: Network,
    ev: Evidence,
    query: str,
    semiring: Semiring = PROB_SUM_PRODUCT,
    max_states: int = ORACLE_MAX_JOINT_STATES,
) -> Distribution:
    """
    Posterior of one node by full enumeration.

    Probabilistic: sum out the other nodes and divide by the evidence
    weight. Possibilistic: max out the other nodes, then divide by the
    maximum (product-based) or lift the maximal entries to 1 (min-based).

    Raises:
        OracleRefusalError: If the joint exceeds max_states
        ImpossibleEvidenceError: If the evidence has zero weight
    """
    restricted, axes, observed, total = _enumerate(net, ev, semiring, max_states)
    return _posterior(net, restricted, axes, observed, total, query, semiring)


def exact_posteriors(
    net: Network,
    ev: Optional[Evidence] = None,
    semiring: Semiring = PROB_SUM_PRODUCT,
    max_states: int = ORACLE_MAX_JOINT_STATES,
) -> Dict[str, Distribution]:
    """Posterior of every node from one shared enumeration."""
    restricted, axes, observed, total = _enumerate(net, ev or Evidence(), semiring, max_states)
    logger.debug("enumerated %d joint states, evidence weight %.6g", restricted.size, total)
    return {
        x: _posterior(net, restricted, axes, observed, total, x, semiring)
        for x in net.node_ids
    }
