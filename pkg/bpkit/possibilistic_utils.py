"""Possibilistic message passing.

The loopy engine runs unchanged with sums replaced by max and products by
product (quantitative possibility) or min (qualitative possibility).
"""
import logging
from typing import Optional

from bpkit.exceptions import StructuralError
from bpkit.loopy_utils import run_lbp
from bpkit.network_utils import validate_network
from bpkit.schemas import Evidence, LbpOptions, LbpResult, Network
from bpkit.semiring import Semiring, poss_normalize  # noqa: F401

logger = logging.getLogger(__name__)


def semiring_message_pass(
    net: Network,
    ev: Optional[Evidence],
    semiring: Semiring,
    opts: Optional[LbpOptions] = None,
) -> LbpResult:
    """
    Loopy propagation under an arbitrary semiring.

    The network must be valid in the semiring's mode (row sums of 1 for
    prob_sum_product, row maxima of 1 for the possibilistic semirings).

    Args:
        net: Network, loops allowed
        ev: Evidence (none when omitted)
        semiring: prob_sum_product, poss_max_product or poss_max_min
        opts: Threshold, iteration cap, damping, history depth

    Returns:
        LbpResult; with prob_sum_product it equals run_lbp's result

    Raises:
        StructuralError: If the network is invalid in the semiring's mode
        ImpossibleEvidenceError: If the evidence has zero possibility
    """
    report = validate_network(net, semiring.mode)
    if not report.ok:
        first = report.errors[0]
        raise StructuralError(
            f"network is not valid in {semiring.mode} mode: {first.location}: {first.message}"
        )
    logger.debug("message passing with %s", semiring.id.value)
    return run_lbp(net, ev, opts, semiring)
