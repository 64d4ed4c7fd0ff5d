"""Semirings that parameterize message passing.

Probabilistic propagation uses (sum, product); the possibilistic variants
marginalize with max, which is how possibility measures decompose over
unions, and combine with product (quantitative) or min (qualitative).
"""
from dataclasses import dataclass
from typing import Iterable, Literal

import numpy as np

from bpkit.exceptions import ImpossibleEvidenceError, InconsistentEvidenceError
from bpkit.schemas import Mode, SemiringId

Conditioning = Literal["min_based", "product_based"]


@dataclass(frozen=True)
class Semiring:
    """Combination/marginalization pair with their neutral elements."""
    id: SemiringId
    combine: np.ufunc
    marginalize: np.ufunc
    combine_unit: float = 1.0
    marginalize_unit: float = 0.0

    @property
    def mode(self) -> Mode:
        return "probabilistic" if self.id is SemiringId.PROB_SUM_PRODUCT else "possibilistic"

    @property
    def conditioning(self) -> Conditioning:
        return "min_based" if self.id is SemiringId.POSS_MAX_MIN else "product_based"

    def combine_all(self, first: np.ndarray, others: Iterable[np.ndarray]) -> np.ndarray:
        result = first
        for other in others:
            result = self.combine(result, other)
        return result

    def reduce(self, tensor: np.ndarray, axes) -> np.ndarray:
        """Marginalize the given axes out of a tensor."""
        axes = tuple(axes)
        if not axes:
            return tensor
        return self.marginalize.reduce(tensor, axis=axes)

    def normalize_message(self, values: np.ndarray) -> np.ndarray:
        """
        Rescale an outgoing message.

        Sum-normalized for probabilities, max-normalized under max-product.
        Max-min messages are returned as is: min does not commute with
        rescaling, and their entries never leave the set of input values.

        Raises:
            InconsistentEvidenceError: If every entry is zero
        """
        if self.id is SemiringId.POSS_MAX_MIN:
            if not np.any(values > 0):
                raise InconsistentEvidenceError("inconsistent evidence: all-zero message")
            return values
        scale = values.sum() if self.id is SemiringId.PROB_SUM_PRODUCT else values.max()
        if not scale > 0:
            raise InconsistentEvidenceError("inconsistent evidence: all-zero message")
        return values / scale

    def normalize_belief(self, values: np.ndarray) -> np.ndarray:
        """Turn an unnormalized belief into a posterior (probabilistic or possibilistic)."""
        if self.id is SemiringId.PROB_SUM_PRODUCT:
            total = values.sum()
            if not total > 0:
                raise InconsistentEvidenceError("inconsistent evidence: all-zero belief")
            return values / total
        return poss_normalize(values, self.conditioning)

    def uniform(self, size: int) -> np.ndarray:
        return self.normalize_message(np.ones(size))


def poss_normalize(values: np.ndarray, conditioning: Conditioning) -> np.ndarray:
    """
    Condition a possibility vector on its own support.

    Args:
        values: Joint possibility degrees pi(x, e)
        conditioning: "product_based" divides by the max; "min_based" lifts
            the maximal entries to 1 and keeps the others

    Returns:
        Vector whose maximum is 1

    Raises:
        ImpossibleEvidenceError: If every entry is zero
    """
    values = np.asarray(values, dtype=float)
    peak = values.max() if values.size else 0.0
    if not peak > 0:
        raise ImpossibleEvidenceError("impossible evidence: zero possibility")
    if conditioning == "product_based":
        return values / peak
    return np.where(values == peak, 1.0, values)


PROB_SUM_PRODUCT = Semiring(SemiringId.PROB_SUM_PRODUCT, np.multiply, np.add)
POSS_MAX_PRODUCT = Semiring(SemiringId.POSS_MAX_PRODUCT, np.multiply, np.maximum)
POSS_MAX_MIN = Semiring(SemiringId.POSS_MAX_MIN, np.minimum, np.maximum)

SEMIRINGS = {s.id.value: s for s in (PROB_SUM_PRODUCT, POSS_MAX_PRODUCT, POSS_MAX_MIN)}

# CLI --mode values
MODE_SEMIRINGS = {
    "prob": PROB_SUM_PRODUCT,
    "poss-product": POSS_MAX_PRODUCT,
    "poss-min": POSS_MAX_MIN,
}


def get_semiring(name: str) -> Semiring:
    """Look up a semiring by id or CLI mode name."""
    if name in MODE_SEMIRINGS:
        return MODE_SEMIRINGS[name]
    try:
        return SEMIRINGS[name]
    except KeyError:
        raise ValueError(f"unknown semiring {name!r}")
