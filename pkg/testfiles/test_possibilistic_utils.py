"""Tests for semiring message passing and possibilistic conditioning."""
import numpy as np
import pytest

from bpkit.exceptions import ImpossibleEvidenceError, StructuralError
from bpkit.file_handler import parse_network
from bpkit.genbench_utils import generate, sample_evidence
from bpkit.loopy_utils import LbpStatus, run_lbp
from bpkit.oracle_utils import exact_posteriors
from bpkit.pearl_utils import pearl_beliefs
from bpkit.possibilistic_utils import poss_normalize, semiring_message_pass
from bpkit.schemas import GenSpec, LbpOptions
from bpkit.semiring import (
    POSS_MAX_MIN,
    POSS_MAX_PRODUCT,
    PROB_SUM_PRODUCT,
    SemiringId,
    get_semiring,
)

from conftest import max_abs_diff, observe
from test_pearl_utils import MAX_MIN_CHAIN_TEXT


# -- poss_normalize -------------------------------------------------------------

def test_product_based_conditioning():
    np.testing.assert_array_equal(poss_normalize(np.array([0.5, 1.0]), "product_based"), (0.5, 1.0))
    np.testing.assert_allclose(poss_normalize(np.array([0.2, 0.4]), "product_based"), (0.5, 1.0))


def test_min_based_conditioning_lifts_the_maximum():
    np.testing.assert_array_equal(poss_normalize(np.array([0.2, 0.4]), "min_based"), (0.2, 1.0))
    np.testing.assert_array_equal(poss_normalize(np.array([0.4, 0.1, 0.4]), "min_based"), (1.0, 0.1, 1.0))


def test_zero_possibility_is_impossible_evidence():
    with pytest.raises(ImpossibleEvidenceError):
        poss_normalize(np.zeros(3), "min_based")


# -- semirings ------------------------------------------------------------------

def test_semiring_lookup():
    assert get_semiring("prob") is PROB_SUM_PRODUCT
    assert get_semiring("poss_max_min") is POSS_MAX_MIN
    assert POSS_MAX_MIN.conditioning == "min_based"
    assert POSS_MAX_PRODUCT.mode == "possibilistic"
    with pytest.raises(ValueError):
        get_semiring("tropical")


def test_max_min_messages_are_not_rescaled():
    message = np.array([0.2, 0.7])
    assert POSS_MAX_MIN.normalize_message(message) is message
    np.testing.assert_allclose(POSS_MAX_PRODUCT.normalize_message(message), (0.2 / 0.7, 1.0))


# -- message passing --------------------------------------------------------------

def test_sum_product_instance_is_identical_to_run_lbp():
    for seed in range(50):
        family = "random_polytree" if seed % 2 else "pyramid"
        spec = GenSpec(family=family, nodes=6, widths=(2, 3, 2), seed=seed, evidence_count=2)
        net = generate(spec)
        ev = sample_evidence(net, spec.evidence_count, spec.seed)
        assert semiring_message_pass(net, ev, PROB_SUM_PRODUCT).model_dump() == run_lbp(net, ev).model_dump()


@pytest.mark.parametrize("semiring", [POSS_MAX_PRODUCT, POSS_MAX_MIN])
def test_exact_on_possibilistic_polytrees(semiring):
    for seed in range(100):
        spec = GenSpec(
            family="random_polytree",
            nodes=1 + seed % 9,
            cardinality=2 + seed % 2,
            seed=seed,
            mode="possibilistic",
            evidence_count=seed % 4,
        )
        net = generate(spec)
        ev = sample_evidence(net, spec.evidence_count, spec.seed)
        result = semiring_message_pass(net, ev, semiring)
        assert result.status is LbpStatus.CONVERGED
        assert result.semiring is semiring.id
        assert max_abs_diff(result.beliefs, exact_posteriors(net, ev, semiring)) <= 1e-12
        for x, dist in result.beliefs.items():
            assert max(dist.values) == 1.0
            if x in ev:
                assert sorted(dist.values)[-2:] == [0.0, 1.0]


def test_max_min_chain_matches_hand_enumeration(poss_chain):
    result = semiring_message_pass(poss_chain, observe(B="1"), POSS_MAX_MIN)
    assert result.beliefs["A"].values == (0.2, 1.0)
    assert result.beliefs["B"].values == (0.0, 1.0)


def test_probabilistic_network_is_rejected_in_possibilistic_mode(chain):
    with pytest.raises(StructuralError, match="possibilistic"):
        semiring_message_pass(chain, observe(), POSS_MAX_MIN)


def test_possibilistic_network_is_rejected_in_probabilistic_mode(poss_chain):
    with pytest.raises(StructuralError):
        semiring_message_pass(poss_chain, observe(), PROB_SUM_PRODUCT, LbpOptions())


def test_zero_possibility_evidence(poss_chain):
    net = poss_chain.model_copy(update={"cpts": {
        "A": poss_chain.cpts["A"].model_copy(update={"table": ((1.0, 0.0),)}),
        "B": poss_chain.cpts["B"].model_copy(update={"table": ((1.0, 0.0), (0.7, 1.0))}),
    }})
    with pytest.raises(ImpossibleEvidenceError):
        exact_posteriors(net, observe(B="1"), POSS_MAX_MIN)
    with pytest.raises(ImpossibleEvidenceError):
        semiring_message_pass(net, observe(B="1"), POSS_MAX_MIN)


def test_semiring_id_values():
    assert [s.value for s in SemiringId] == ["prob_sum_product", "poss_max_product", "poss_max_min"]


def test_max_min_evidence_keeps_the_causal_support():
    net = parse_network(MAX_MIN_CHAIN_TEXT, "possibilistic")
    ev = observe(B="1")
    result = semiring_message_pass(net, ev, POSS_MAX_MIN)
    assert result.status is LbpStatus.CONVERGED
    assert result.beliefs["C"].values == pytest.approx((1.0, 1.0), abs=1e-12)
    assert max_abs_diff(result.beliefs, exact_posteriors(net, ev, POSS_MAX_MIN)) <= 1e-12


# -- degenerate and idempotent cases ------------------------------------------------

DETERMINISTIC_CHAIN_TEXT = """\
node A { t f }
node B { t f }
node C { t f }
prior A ( 0 1 )
cpt B | A {
  ( 1 0 )
  ( 0 1 )
}
cpt C | B {
  ( 0 1 )
  ( 1 0 )
}
"""

TWIN_FINDINGS_TEXT = """\
node A { 0 1 }
node B { 0 1 }
node B2 { 0 1 }
prior A ( 1.0 0.7 )
cpt B | A {
  ( 1.0 0.2 )
  ( 0.7 1.0 )
}
cpt B2 | A {
  ( 1.0 0.2 )
  ( 0.7 1.0 )
}
"""


@pytest.mark.parametrize(
    "mode, semiring",
    [
        ("probabilistic", PROB_SUM_PRODUCT),
        ("possibilistic", POSS_MAX_PRODUCT),
        ("possibilistic", POSS_MAX_MIN),
    ],
)
def test_zero_one_tables_give_the_same_beliefs_in_every_semiring(mode, semiring):
    net = parse_network(DETERMINISTIC_CHAIN_TEXT, mode)
    ev = observe(C="t")
    expected = {"A": (0.0, 1.0), "B": (0.0, 1.0), "C": (1.0, 0.0)}
    for beliefs in (
        exact_posteriors(net, ev, semiring),
        pearl_beliefs(net, ev, semiring).beliefs,
        semiring_message_pass(net, ev, semiring).beliefs,
    ):
        for x, values in expected.items():
            assert beliefs[x].values == pytest.approx(values, abs=1e-12)


def test_min_ignores_a_duplicated_finding(poss_chain):
    twins = parse_network(TWIN_FINDINGS_TEXT, "possibilistic")
    single = exact_posteriors(poss_chain, observe(B="1"), POSS_MAX_MIN)["A"].values
    both = observe(B="1", B2="1")
    assert exact_posteriors(twins, both, POSS_MAX_MIN)["A"].values == single
    assert pearl_beliefs(twins, both, POSS_MAX_MIN).beliefs["A"].values == single
    assert semiring_message_pass(twins, both, POSS_MAX_MIN).beliefs["A"].values == single
    # product counts the duplicate twice
    assert exact_posteriors(twins, both, POSS_MAX_PRODUCT)["A"].values != pytest.approx(
        exact_posteriors(poss_chain, observe(B="1"), POSS_MAX_PRODUCT)["A"].values
    )
    message = np.array([0.2, 0.7])
    np.testing.assert_array_equal(POSS_MAX_MIN.combine(message, message), message)
