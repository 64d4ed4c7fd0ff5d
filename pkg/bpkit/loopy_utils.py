"""Loopy belief propagation with synchronous (parallel) updates.

Every round reads the message buffer of round t only and writes a fresh
buffer for round t+1. Iteration stops when no belief and no message moves
by the threshold or more, when the belief history repeats with a period of
at least 2, or at the iteration cap. The engine is parameterized by a Semiring; the
probabilistic engine is its sum-product instance.
"""
import logging
from collections import deque
from dataclasses import dataclass
from typing import Deque, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from bpkit.exceptions import InconsistentEvidenceError
from bpkit.message_utils import cpt_lambda_to_parent, cpt_pi
from bpkit.network_utils import NetworkIndex, index_network, validate_evidence
from bpkit.schemas import Distribution, Evidence, LbpOptions, LbpResult, LbpStatus, Network
from bpkit.semiring import PROB_SUM_PRODUCT, Semiring

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class MessageBuffer:
    """Edge messages of one iteration.

    ``pi[(u, x)]``: parent u to child x, over u's states.
    ``lam[(y, x)]``: child y to parent x, over x's states.
    """
    t: int
    pi: Dict[Tuple[str, str], np.ndarray]
    lam: Dict[Tuple[str, str], np.ndarray]


@dataclass(frozen=True)
class IterationState:
    """Double-buffered messages plus each node's evidence self-message."""
    index: NetworkIndex
    current: MessageBuffer
    previous: Optional[MessageBuffer]
    self_lambda: Dict[str, np.ndarray]
    # damped (lambda, pi) node values of the last round, for node-value momentum
    node_values: Optional[Dict[str, Tuple[np.ndarray, np.ndarray]]] = None

    @property
    def t(self) -> int:
        return self.current.t


def lbp_init(
    net: Network,
    ev: Evidence,
    semiring: Semiring = PROB_SUM_PRODUCT,
) -> IterationState:
    """
    Initial state: uniform pi messages, all-ones lambda messages.

    Observed nodes get an indicator self-message, others all-ones. Loops are
    allowed.
    """
    index = index_network(net)
    observed = validate_evidence(net, ev)
    pi = {}
    lam = {}
    for x in index.order:
        for child in index.children[x]:
            pi[(x, child)] = semiring.uniform(index.cardinality[x])
            lam[(child, x)] = np.ones(index.cardinality[x])
    self_lambda = {x: index.evidence_vector(x, observed.get(x)) for x in index.order}
    return IterationState(
        index=index,
        current=MessageBuffer(t=0, pi=pi, lam=lam),
        previous=None,
        self_lambda=self_lambda,
    )


def node_values(
    state: IterationState,
    x: str,
    semiring: Semiring = PROB_SUM_PRODUCT,
) -> Tuple[np.ndarray, np.ndarray]:
    """lambda^(t)(x) (self-message included) and pi^(t)(x) from buffer t."""
    index, buffer = state.index, state.current
    lam = semiring.combine_all(
        state.self_lambda[x], (buffer.lam[(y, x)] for y in index.children[x])
    )
    incoming = {u: buffer.pi[(u, x)] for u in index.parents[x]}
    return lam, cpt_pi(index, x, incoming, semiring)


def apply_damping(
    new_msg: np.ndarray,
    old_msg: np.ndarray,
    gamma: float,
    semiring: Semiring = PROB_SUM_PRODUCT,
) -> np.ndarray:
    """Normalized convex blend (1 - gamma) * new + gamma * old; gamma=0 returns new."""
    if gamma == 0:
        return new_msg
    return semiring.normalize_message((1.0 - gamma) * new_msg + gamma * old_msg)


def lbp_round(
    state: IterationState,
    semiring: Semiring = PROB_SUM_PRODUCT,
    opts: Optional[LbpOptions] = None,
) -> IterationState:
    """
    One synchronous round: every node reads buffer t and writes buffer t+1.

    Args:
        state: State at iteration t
        semiring: Operators to propagate with
        opts: Damping settings (undamped when omitted)

    Returns:
        State at iteration t+1

    Raises:
        InconsistentEvidenceError: If a message vanishes everywhere
    """
    opts = opts or LbpOptions()
    index, buffer = state.index, state.current
    gamma = opts.damping
    damp_messages = gamma > 0 and opts.momentum_target == "messages"
    damp_nodes = gamma > 0 and opts.momentum_target == "node_values"

    values = {x: node_values(state, x, semiring) for x in index.order}
    if damp_nodes and state.node_values is not None:
        values = {
            x: (
                apply_damping(lam, state.node_values[x][0], gamma, semiring),
                apply_damping(pi, state.node_values[x][1], gamma, semiring),
            )
            for x, (lam, pi) in values.items()
        }

    new_pi = {}
    new_lam = {}
    try:
        for x in index.order:
            lam_x, pi_x = values[x]
            parents, children = index.parents[x], index.children[x]
            incoming_pi = {u: buffer.pi[(u, x)] for u in parents}
            for u in parents:
                message = cpt_lambda_to_parent(index, x, u, lam_x, incoming_pi, semiring)
                new_lam[(x, u)] = semiring.normalize_message(message)
            for child in children:
                message = semiring.combine_all(
                    semiring.combine(pi_x, state.self_lambda[x]),
                    (buffer.lam[(other, x)] for other in children if other != child),
                )
                new_pi[(x, child)] = semiring.normalize_message(message)
    except InconsistentEvidenceError as e:
        raise InconsistentEvidenceError(f"{e.detail} at iteration {buffer.t + 1}, node {x}")

    if damp_messages:
        new_pi = {k: apply_damping(v, buffer.pi[k], gamma, semiring) for k, v in new_pi.items()}
        new_lam = {k: apply_damping(v, buffer.lam[k], gamma, semiring) for k, v in new_lam.items()}

    return IterationState(
        index=index,
        current=MessageBuffer(t=buffer.t + 1, pi=new_pi, lam=new_lam),
        previous=buffer,
        self_lambda=state.self_lambda,
        node_values=values if damp_nodes else None,
    )


def compute_beliefs(
    state: IterationState,
    semiring: Semiring = PROB_SUM_PRODUCT,
) -> Dict[str, Distribution]:
    """BEL(x) from the node values of the state's current buffer."""
    beliefs = {}
    for x in state.index.order:
        lam, pi = node_values(state, x, semiring)
        try:
            values = semiring.normalize_belief(semiring.combine(lam, pi))
        except InconsistentEvidenceError as e:
            raise type(e)(f"{e.detail} at node {x}, iteration {state.t}")
        beliefs[x] = Distribution(
            node=x, states=state.index.states[x], values=tuple(values.tolist())
        )
    return beliefs


def _snapshot(beliefs: Mapping[str, Distribution], order: Sequence[str]) -> Tuple[float, ...]:
    return tuple(v for x in order for v in beliefs[x].values)


def _max_delta(first: Sequence[float], second: Sequence[float]) -> float:
    if not first:
        return 0.0
    return float(np.max(np.abs(np.asarray(first) - np.asarray(second))))


def message_delta(state: IterationState) -> float:
    """Largest entry change between the current and previous message buffers."""
    if state.previous is None:
        return float("inf")
    current, previous = state.current, state.previous
    deltas = [np.max(np.abs(v - previous.pi[k])) for k, v in current.pi.items()]
    deltas += [np.max(np.abs(v - previous.lam[k])) for k, v in current.lam.items()]
    return float(max(deltas, default=0.0))


def detect_oscillation(
    history: Sequence[Sequence[float]],
    threshold: float,
    max_period: Optional[int] = None,
) -> Optional[int]:
    """
    Smallest period p >= 2 with which the belief history repeats.

    A period p is reported when the last 2p+1 snapshots agree with the
    snapshot p steps earlier (within threshold, componentwise) while the last
    two snapshots differ.

    Args:
        history: Belief snapshots, oldest first
        threshold: Agreement tolerance
        max_period: Largest period to test (defaults to what the history allows)

    Returns:
        The period, or None
    """
    n = len(history)
    if n < 2 or _max_delta(history[-1], history[-2]) < threshold:
        return None
    max_period = max_period if max_period is not None else (n - 1) // 2
    for period in range(2, max_period + 1):
        if n < 2 * period + 1:
            break
        if all(
            _max_delta(history[-1 - i], history[-1 - i - period]) < threshold
            for i in range(period + 1)
        ):
            return period
    return None


def run_lbp(
    net: Network,
    ev: Optional[Evidence] = None,
    opts: Optional[LbpOptions] = None,
    semiring: Semiring = PROB_SUM_PRODUCT,
) -> LbpResult:
    """
    Iterate synchronous rounds until beliefs settle, oscillate or hit the cap.

    Args:
        net: Valid network, loops allowed
        ev: Evidence (none when omitted)
        opts: Threshold, iteration cap, damping, history depth
        semiring: Operators to propagate with

    Returns:
        LbpResult with the final round's beliefs and the termination status

    Raises:
        InconsistentEvidenceError: If a message or belief vanishes everywhere
    """
    opts = opts or LbpOptions()
    state = lbp_init(net, ev or Evidence(), semiring)
    order = state.index.order
    beliefs = compute_beliefs(state, semiring)
    history: Deque[Tuple[float, ...]] = deque(
        [_snapshot(beliefs, order)], maxlen=opts.history_depth + 1
    )
    trace: List[float] = []
    status, period = LbpStatus.ITERATION_CAP, None

    iteration = 0
    while iteration < opts.max_iterations:
        iteration += 1
        state = lbp_round(state, semiring, opts)
        beliefs = compute_beliefs(state, semiring)
        snapshot = _snapshot(beliefs, order)
        delta = _max_delta(snapshot, history[-1])
        history.append(snapshot)
        trace.append(delta)
        logger.debug("iteration %d: max belief change %.3g", iteration, delta)
        # under max-min, beliefs can stand still while messages move
        if delta < opts.threshold and message_delta(state) < opts.threshold:
            status = LbpStatus.CONVERGED
            break
        period = detect_oscillation(list(history), opts.threshold, opts.history_depth // 2)
        if period is not None:
            status = LbpStatus.OSCILLATING
            break

    logger.info(
        "loopy propagation (%s, damping %g): %s after %d iterations",
        semiring.id.value, opts.damping, status.value, iteration,
    )
    return LbpResult(
        status=status,
        iterations_run=iteration,
        beliefs=beliefs,
        history=tuple(history),
        max_delta_trace=tuple(trace),
        period=period,
        semiring=semiring.id,
        final_state=state,
    )


def check_convergence(
    result: LbpResult,
    opts: Optional[LbpOptions] = None,
    semiring: Semiring = PROB_SUM_PRODUCT,
) -> Optional[bool]:
    """
    Force one extra round after a converged run.

    Returns:
        True if no belief entry moves by the threshold or more, False if one
        does, None when the run did not report convergence
    """
    if result.status is not LbpStatus.CONVERGED or result.final_state is None:
        return None
    opts = opts or LbpOptions()
    order = result.final_state.index.order
    extra = compute_beliefs(lbp_round(result.final_state, semiring, opts), semiring)
    return _max_delta(_snapshot(extra, order), _snapshot(result.beliefs, order)) < opts.threshold


def belief_l1_errors(
    beliefs: Mapping[str, Distribution],
    reference: Mapping[str, Distribution],
) -> Dict[str, float]:
    """Per-node L1 distance between two belief sets."""
    return {
        x: float(np.abs(beliefs[x].as_array() - reference[x].as_array()).sum())
        for x in reference
    }
