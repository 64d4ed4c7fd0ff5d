"""Pearl's exact belief propagation on polytrees.

Initialization clamps evidence and seeds roots and leaves, scheduling sends
each lambda and pi message once all its inputs have arrived, and beliefs
are the normalized product lambda(x) pi(x). Once its neighbours have
reported, an observed node combines its indicator with the support they
carry, so zero-weight evidence vanishes instead of being masked.
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, Optional, Set, Tuple

import numpy as np

from bpkit.exceptions import InconsistentEvidenceError, SchedulingError, StructuralError
from bpkit.message_utils import cpt_lambda_to_parent, cpt_pi
from bpkit.network_utils import NetworkIndex, index_network, is_polytree, validate_evidence
from bpkit.schemas import Distribution, Evidence, Network
from bpkit.semiring import PROB_SUM_PRODUCT, Semiring

logger = logging.getLogger(__name__)


@dataclass
class EdgeMessages:
    """Messages and node values of one propagation.

    ``pi[(u, x)]`` is the message from parent u to child x (over u's states);
    ``lam[(y, x)]`` is the message from child y to parent x (over x's
    states). A key is present once its message has been sent. ``pi_done``
    and ``lambda_done`` hold the nodes whose pi(x) and lambda(x) have taken
    in every neighbour message they depend on.
    """
    index: NetworkIndex
    semiring: Semiring
    observed: Dict[str, int]
    pi: Dict[Tuple[str, str], np.ndarray] = field(default_factory=dict)
    lam: Dict[Tuple[str, str], np.ndarray] = field(default_factory=dict)
    node_pi: Dict[str, np.ndarray] = field(default_factory=dict)
    node_lambda: Dict[str, np.ndarray] = field(default_factory=dict)
    pi_done: Set[str] = field(default_factory=set)
    lambda_done: Set[str] = field(default_factory=set)
    rounds: int = 0

    def indicator(self, x: str) -> np.ndarray:
        return self.index.evidence_vector(x, self.observed.get(x))

    @property
    def messages_sent(self) -> int:
        return len(self.pi) + len(self.lam)


@dataclass(frozen=True)
class PearlResult:
    beliefs: Dict[str, Distribution]
    messages_sent: int
    rounds: int


def init_messages(
    net: Network,
    ev: Evidence,
    semiring: Semiring = PROB_SUM_PRODUCT,
) -> EdgeMessages:
    """
    Initialization step: clamp evidence, seed root priors and leaf lambdas.

    Args:
        net: Valid polytree
        ev: Evidence on the network
        semiring: Operators to propagate with

    Returns:
        EdgeMessages with no message sent yet

    Raises:
        StructuralError: If the network has an undirected loop
    """
    if not is_polytree(net):
        raise StructuralError(
            "network has undirected loops; exact propagation needs a polytree"
        )
    index = index_network(net)
    msgs = EdgeMessages(index=index, semiring=semiring, observed=validate_evidence(net, ev))
    for x in index.order:
        if x in msgs.observed:
            indicator = msgs.indicator(x)
            msgs.node_lambda[x] = indicator
            msgs.node_pi[x] = indicator.copy()
            continue
        if not index.parents[x]:
            msgs.node_pi[x] = index.tables[x].copy()
            msgs.pi_done.add(x)
        if not index.children[x]:
            msgs.node_lambda[x] = np.ones(index.cardinality[x])
            msgs.lambda_done.add(x)
    return msgs


def lambda_value(msgs: EdgeMessages, x: str) -> np.ndarray:
    """lambda(x): combination of the messages from all children (and x's own evidence)."""
    value = msgs.indicator(x)
    for child in msgs.index.children[x]:
        if (child, x) not in msgs.lam:
            raise SchedulingError(f"lambda({x}) needs the message from {child}")
        value = msgs.semiring.combine(value, msgs.lam[(child, x)])
    return value


def pi_value(msgs: EdgeMessages, x: str) -> np.ndarray:
    """pi(x): CPT of x marginalized against the messages from its parents, restricted to its evidence."""
    incoming = {}
    for parent in msgs.index.parents[x]:
        if (parent, x) not in msgs.pi:
            raise SchedulingError(f"pi({x}) needs the message from {parent}")
        incoming[parent] = msgs.pi[(parent, x)]
    causal = cpt_pi(msgs.index, x, incoming, msgs.semiring)
    if x not in msgs.observed:
        return causal
    return msgs.semiring.combine(msgs.indicator(x), causal)


def pi_message_to_child(msgs: EdgeMessages, x: str, child: str) -> np.ndarray:
    """
    Normalized pi(x) combined with the lambda messages of x's other children.

    For an observed x this is the indicator of its state under the scaling
    semirings; max-min keeps the degree of the observed state.

    Raises:
        InconsistentEvidenceError: If the combination is zero everywhere
    """
    if x not in msgs.node_pi:
        raise SchedulingError(f"pi({x}) is not computed yet")
    value = msgs.node_pi[x]
    for other in msgs.index.children[x]:
        if other == child:
            continue
        if (other, x) not in msgs.lam:
            raise SchedulingError(f"pi message {x}->{child} needs the message from {other}")
        value = msgs.semiring.combine(value, msgs.lam[(other, x)])
    try:
        return msgs.semiring.normalize_message(value)
    except InconsistentEvidenceError as e:
        raise type(e)(f"{e.detail} from {x} to {child}")


def lambda_message_to_parent(msgs: EdgeMessages, y: str, parent: str) -> np.ndarray:
    """Normalized diagnostic message from y to one parent."""
    if y not in msgs.node_lambda:
        raise SchedulingError(f"lambda({y}) is not computed yet")
    incoming = {}
    for other in msgs.index.parents[y]:
        if other == parent:
            continue
        if (other, y) not in msgs.pi:
            raise SchedulingError(f"lambda message {y}->{parent} needs the message from {other}")
        incoming[other] = msgs.pi[(other, y)]
    value = cpt_lambda_to_parent(
        msgs.index, y, parent, msgs.node_lambda[y], incoming, msgs.semiring
    )
    try:
        return msgs.semiring.normalize_message(value)
    except InconsistentEvidenceError as e:
        raise type(e)(f"{e.detail} from {y} to {parent}")


def _visit(msgs: EdgeMessages, x: str) -> int:
    """Apply the readiness rules at one node; returns how many messages it sent."""
    index = msgs.index
    parents, children = index.parents[x], index.children[x]
    if x not in msgs.pi_done and all((u, x) in msgs.pi for u in parents):
        msgs.node_pi[x] = pi_value(msgs, x)
        msgs.pi_done.add(x)
    if x not in msgs.lambda_done and all((y, x) in msgs.lam for y in children):
        msgs.node_lambda[x] = lambda_value(msgs, x)
        msgs.lambda_done.add(x)

    sent = 0
    if x in msgs.pi_done:
        for child in children:
            if (x, child) in msgs.pi:
                continue
            if all((other, x) in msgs.lam for other in children if other != child):
                msgs.pi[(x, child)] = pi_message_to_child(msgs, x, child)
                sent += 1
    if x in msgs.lambda_done:
        for parent in parents:
            if (x, parent) in msgs.lam:
                continue
            if all((other, x) in msgs.pi for other in parents if other != parent):
                msgs.lam[(x, parent)] = lambda_message_to_parent(msgs, x, parent)
                sent += 1
    return sent


def propagate(
    net: Network,
    ev: Evidence,
    semiring: Semiring = PROB_SUM_PRODUCT,
) -> EdgeMessages:
    """
    Send every lambda and pi message exactly once.

    Each round sweeps the nodes in topological order and then in reverse,
    sending whatever has become ready; propagation stops after the first
    round that sends nothing.

    Raises:
        StructuralError: If the network is not a polytree
        SchedulingError: If the round cap (number of nodes) is breached
    """
    msgs = init_messages(net, ev, semiring)
    order = msgs.index.order
    while True:
        sent = sum(_visit(msgs, x) for x in order)
        sent += sum(_visit(msgs, x) for x in reversed(order))
        if not sent:
            break
        msgs.rounds += 1
        logger.debug("round %d: %d messages", msgs.rounds, sent)
        if msgs.rounds > len(order):
            raise SchedulingError(f"propagation did not quiesce within {len(order)} rounds")

    expected = 2 * len(net.edges)
    if msgs.messages_sent != expected:
        raise SchedulingError(f"sent {msgs.messages_sent} messages, expected {expected}")
    for x in order:
        if x not in msgs.pi_done:
            msgs.node_pi[x] = pi_value(msgs, x)
        if x not in msgs.lambda_done:
            msgs.node_lambda[x] = lambda_value(msgs, x)
    return msgs


def belief(msgs: EdgeMessages, x: str) -> Distribution:
    """BEL(x): normalized combination of lambda(x) and pi(x)."""
    values = msgs.semiring.combine(msgs.node_lambda[x], msgs.node_pi[x])
    try:
        normalized = msgs.semiring.normalize_belief(values)
    except InconsistentEvidenceError as e:
        raise type(e)(f"{e.detail} at node {x}")
    return Distribution(node=x, states=msgs.index.states[x], values=tuple(normalized.tolist()))


def pearl_beliefs(
    net: Network,
    ev: Optional[Evidence] = None,
    semiring: Semiring = PROB_SUM_PRODUCT,
) -> PearlResult:
    """Propagate and return the belief of every node."""
    msgs = propagate(net, ev or Evidence(), semiring)
    beliefs = {x: belief(msgs, x) for x in net.node_ids}
    logger.info(
        "exact propagation: %d messages in %d rounds", msgs.messages_sent, msgs.rounds
    )
    return PearlResult(beliefs=beliefs, messages_sent=msgs.messages_sent, rounds=msgs.rounds)
