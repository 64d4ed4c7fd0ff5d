"""CPT-level message kernels shared by the exact and loopy engines."""
from typing import Mapping

import numpy as np

from bpkit.network_utils import NetworkIndex
from bpkit.semiring import Semiring


def _along(vector: np.ndarray, axis: int, ndim: int) -> np.ndarray:
    shape = [1] * ndim
    shape[axis] = vector.shape[0]
    return vector.reshape(shape)


def cpt_pi(
    index: NetworkIndex,
    x: str,
    incoming_pi: Mapping[str, np.ndarray],
    semiring: Semiring,
) -> np.ndarray:
    """
    Causal support of x: marginalize the CPT weighted by parent messages.

    pi(x) = MARG_u COMB(P(x|u), pi_X(u_1), ..., pi_X(u_p)); a root returns
    its prior.

    Args:
        index: Engine view of the network
        x: Node id
        incoming_pi: Message over each parent's states, keyed by parent id
        semiring: Marginalization/combination pair

    Returns:
        Vector over x's states
    """
    table = index.tables[x]
    parents = index.parents[x]
    tensor = table
    for axis, parent in enumerate(parents):
        tensor = semiring.combine(tensor, _along(incoming_pi[parent], axis, table.ndim))
    return semiring.reduce(tensor, range(len(parents)))


def cpt_lambda_to_parent(
    index: NetworkIndex,
    y: str,
    parent: str,
    node_lambda: np.ndarray,
    incoming_pi: Mapping[str, np.ndarray],
    semiring: Semiring,
) -> np.ndarray:
    """
    Diagnostic message from y to one of its parents (unnormalized).

    For each state of the receiving parent: marginalize over y's states and
    the other parents of COMB(lambda(y), P(y|parents), pi messages of the
    other parents). The receiving parent's own message is not used.

    Args:
        index: Engine view of the network
        y: Sending node
        parent: Receiving parent
        node_lambda: lambda(y)
        incoming_pi: Messages from y's other parents (the receiver's entry is ignored)
        semiring: Marginalization/combination pair

    Returns:
        Vector over the parent's states
    """
    table = index.tables[y]
    parents = index.parents[y]
    receiver = parents.index(parent)
    tensor = semiring.combine(table, _along(node_lambda, table.ndim - 1, table.ndim))
    for axis, other in enumerate(parents):
        if axis != receiver:
            tensor = semiring.combine(tensor, _along(incoming_pi[other], axis, table.ndim))
    return semiring.reduce(tensor, [axis for axis in range(table.ndim) if axis != receiver])
