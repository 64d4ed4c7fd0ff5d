"""Tests for exact propagation on polytrees."""
import numpy as np
import pytest

from bpkit.exceptions import InconsistentEvidenceError, SchedulingError, StructuralError
from bpkit.file_handler import parse_network
from bpkit.genbench_utils import add_barren_leaf, generate, sample_evidence
from bpkit.network_utils import diameter
from bpkit.oracle_utils import exact_posteriors
from bpkit.pearl_utils import (
    belief,
    init_messages,
    lambda_message_to_parent,
    lambda_value,
    pearl_beliefs,
    pi_message_to_child,
    pi_value,
    propagate,
)
from bpkit.schemas import Evidence, GenSpec
from bpkit.semiring import POSS_MAX_MIN, POSS_MAX_PRODUCT

from conftest import max_abs_diff, observe


def random_polytrees(count, seed_offset=0):
    """Seeded polytrees of up to 12 nodes with evidence on up to 3 nodes."""
    rng = np.random.default_rng(seed_offset)
    for seed in range(count):
        spec = GenSpec(
            family="random_polytree",
            nodes=int(rng.integers(1, 13)),
            cardinality=int(rng.integers(2, 4)),
            seed=seed + seed_offset,
        )
        net = generate(spec)
        yield net, sample_evidence(net, int(rng.integers(0, 4)), spec.seed)


# -- initialization -----------------------------------------------------------

def test_init_seeds_roots_leaves_and_evidence(chain3):
    msgs = init_messages(chain3, observe(B="t"))
    np.testing.assert_allclose(msgs.node_pi["A"], (0.3, 0.7))
    np.testing.assert_array_equal(msgs.node_lambda["B"], (1.0, 0.0))
    np.testing.assert_array_equal(msgs.node_pi["B"], (1.0, 0.0))
    np.testing.assert_array_equal(msgs.node_lambda["C"], (1.0, 1.0))
    assert msgs.messages_sent == 0


def test_init_rejects_loops(diamond):
    with pytest.raises(StructuralError):
        init_messages(diamond, Evidence())


# -- node values ----------------------------------------------------------------

def test_lambda_value_is_the_product_of_child_messages(polytree):
    msgs = init_messages(polytree, Evidence())
    msgs.lam[("Y1", "X")] = np.array([0.5, 0.2])
    msgs.lam[("Y2", "X")] = np.array([0.4, 0.1])
    np.testing.assert_allclose(lambda_value(msgs, "X"), (0.2, 0.02))
    np.testing.assert_array_equal(lambda_value(msgs, "Y1"), (1.0, 1.0))


def test_lambda_value_waits_for_every_child(polytree):
    msgs = init_messages(polytree, Evidence())
    msgs.lam[("Y1", "X")] = np.array([1.0, 1.0])
    with pytest.raises(SchedulingError):
        lambda_value(msgs, "X")


def test_pi_value(chain3):
    msgs = init_messages(chain3, Evidence())
    np.testing.assert_allclose(pi_value(msgs, "A"), (0.3, 0.7))
    msgs.pi[("A", "B")] = np.array([1.0, 0.0])
    np.testing.assert_allclose(pi_value(msgs, "B"), (0.9, 0.1))
    msgs.pi[("A", "B")] = np.array([0.3, 0.7])
    np.testing.assert_allclose(pi_value(msgs, "B"), (0.41, 0.59))
    with pytest.raises(SchedulingError):
        pi_value(msgs, "C")


# -- messages -------------------------------------------------------------------

def test_pi_message_with_a_single_child(chain3):
    msgs = init_messages(chain3, Evidence())
    np.testing.assert_allclose(pi_message_to_child(msgs, "A", "B"), (0.3, 0.7))


def test_pi_message_uses_the_other_children(polytree):
    msgs = init_messages(polytree, Evidence())
    msgs.node_pi["X"] = np.array([0.5, 0.5])
    msgs.lam[("Y2", "X")] = np.array([0.2, 0.8])
    np.testing.assert_allclose(pi_message_to_child(msgs, "X", "Y1"), (0.2, 0.8))


def test_pi_message_of_an_observed_node(chain3):
    msgs = init_messages(chain3, observe(B="f"))
    np.testing.assert_array_equal(pi_message_to_child(msgs, "B", "C"), (0.0, 1.0))


def test_lambda_message_from_an_unobserved_leaf(chain):
    msgs = init_messages(chain, Evidence())
    message = lambda_message_to_parent(msgs, "B", "A")
    np.testing.assert_allclose(message, (0.5, 0.5))


def test_lambda_message_from_an_observed_child(chain):
    msgs = init_messages(chain, observe(B="1"))
    message = lambda_message_to_parent(msgs, "B", "A")
    np.testing.assert_allclose(message * 1.1, (0.2, 0.9))


def test_lambda_message_with_an_indicator_co_parent(polytree):
    msgs = init_messages(polytree, observe(X="yes"))
    msgs.pi[("U2", "X")] = np.array([1.0, 0.0, 0.0])
    message = lambda_message_to_parent(msgs, "X", "U1")
    # P(X=yes | U1, U2=a) = (0.1, 0.2)
    np.testing.assert_allclose(message, (1 / 3, 2 / 3))


def test_lambda_message_waits_for_co_parents(polytree):
    msgs = init_messages(polytree, observe(X="yes"))
    with pytest.raises(SchedulingError):
        lambda_message_to_parent(msgs, "X", "U1")


# -- propagation ----------------------------------------------------------------

def test_chain_with_evidence_at_the_leaf(chain3):
    msgs = propagate(chain3, observe(C="t"))
    assert set(msgs.lam) == {("C", "B"), ("B", "A")}
    assert set(msgs.pi) == {("A", "B"), ("B", "C")}
    assert msgs.rounds <= diameter(chain3) + 1


def test_isolated_node_sends_nothing():
    net = parse_network("node X { a b }\nprior X ( 0.25 0.75 )\n")
    result = pearl_beliefs(net)
    assert result.messages_sent == 0
    assert result.rounds == 0
    assert result.beliefs["X"].values == (0.25, 0.75)


def test_two_causes_two_effects_send_eight_messages(polytree, polytree_evidence):
    result = pearl_beliefs(polytree, polytree_evidence)
    assert result.messages_sent == 8
    assert result.rounds <= diameter(polytree) + 1


def test_chain_belief_matches_bayes_rule(chain):
    result = pearl_beliefs(chain, observe(B="1"))
    assert result.beliefs["A"].values == pytest.approx((0.14 / 0.41, 0.27 / 0.41), abs=1e-12)
    assert result.beliefs["B"].values == (0.0, 1.0)


def test_root_without_evidence_keeps_its_prior(chain3):
    assert pearl_beliefs(chain3).beliefs["A"].values == pytest.approx((0.3, 0.7))


def test_belief_from_propagated_messages(polytree, polytree_evidence):
    msgs = propagate(polytree, polytree_evidence)
    assert belief(msgs, "Y1").values == (0.0, 1.0)
    assert sum(belief(msgs, "U2").values) == pytest.approx(1.0, abs=1e-12)


def test_pearl_matches_the_oracle_on_random_polytrees():
    for net, ev in random_polytrees(200):
        result = pearl_beliefs(net, ev)
        assert max_abs_diff(result.beliefs, exact_posteriors(net, ev)) <= 1e-9
        assert result.messages_sent == 2 * len(net.edges)
        assert result.rounds <= diameter(net) + 1
        for x, dist in result.beliefs.items():
            assert sum(dist.values) == pytest.approx(1.0, abs=1e-12)
            if x in ev:
                assert max(dist.values) == 1.0


@pytest.mark.parametrize("semiring", [POSS_MAX_PRODUCT, POSS_MAX_MIN])
def test_pearl_is_exact_for_possibility_on_polytrees(semiring):
    for seed in range(30):
        spec = GenSpec(family="random_polytree", nodes=7, seed=seed, mode="possibilistic")
        net = generate(spec)
        ev = sample_evidence(net, 2, seed)
        result = pearl_beliefs(net, ev, semiring)
        assert max_abs_diff(result.beliefs, exact_posteriors(net, ev, semiring)) <= 1e-12


def test_barren_leaf_changes_no_belief():
    for net, ev in random_polytrees(20, seed_offset=1000):
        before = pearl_beliefs(net, ev).beliefs
        after = pearl_beliefs(add_barren_leaf(net, net.node_ids[-1]), ev).beliefs
        assert max_abs_diff(after, before) <= 1e-12


# -- evidence ---------------------------------------------------------------------

DETERMINISTIC_TEXT = """\
node A { t f }
node B { t f }
prior A ( 1 0 )
cpt B | A {
  ( 1 0 )
  ( 0.5 0.5 )
}
"""

MAX_MIN_CHAIN_TEXT = """\
node A { 0 1 }
node B { 0 1 }
node C { 0 1 }
prior A ( 1.0 0.2 )
cpt B | A {
  ( 1.0 0.3 )
  ( 0.5 1.0 )
}
cpt C | B {
  ( 1.0 0.2 )
  ( 1.0 0.6 )
}
"""


@pytest.mark.parametrize("observations", [{"A": "t", "B": "f"}, {"A": "f"}])
def test_zero_weight_evidence_is_detected(observations):
    net = parse_network(DETERMINISTIC_TEXT)
    with pytest.raises(InconsistentEvidenceError):
        pearl_beliefs(net, Evidence(observations=observations))


def test_observed_node_passes_on_its_causal_support():
    net = parse_network(MAX_MIN_CHAIN_TEXT, "possibilistic")
    ev = observe(B="1")
    result = pearl_beliefs(net, ev, POSS_MAX_MIN)
    assert result.beliefs["C"].values == pytest.approx((1.0, 1.0), abs=1e-12)
    assert result.beliefs["A"].values == pytest.approx((1.0, 0.2), abs=1e-12)
    assert max_abs_diff(result.beliefs, exact_posteriors(net, ev, POSS_MAX_MIN)) <= 1e-12


def test_scaling_a_message_leaves_beliefs_unchanged(polytree, polytree_evidence):
    msgs = propagate(polytree, polytree_evidence)
    before = {x: belief(msgs, x) for x in polytree.node_ids}
    msgs.lam[("Y1", "X")] = msgs.lam[("Y1", "X")] * 3.7
    msgs.node_lambda["X"] = lambda_value(msgs, "X")
    msgs.pi[("U1", "X")] = msgs.pi[("U1", "X")] * 0.25
    msgs.node_pi["X"] = pi_value(msgs, "X")
    after = {x: belief(msgs, x) for x in polytree.node_ids}
    assert max_abs_diff(after, before) <= 1e-12
