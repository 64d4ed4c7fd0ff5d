"""Tests for synchronous loopy propagation."""
from dataclasses import replace

import numpy as np
import pytest
from pydantic import ValidationError

from bpkit.exceptions import InconsistentEvidenceError
from bpkit.file_handler import parse_network
from bpkit.genbench_utils import find_oscillator, generate, sample_evidence, verify_period
from bpkit.loopy_utils import (
    LbpStatus,
    apply_damping,
    belief_l1_errors,
    check_convergence,
    compute_beliefs,
    detect_oscillation,
    lbp_init,
    lbp_round,
    run_lbp,
)
from bpkit.network_utils import diameter
from bpkit.oracle_utils import exact_posteriors
from bpkit.pearl_utils import pearl_beliefs, propagate
from bpkit.schemas import Evidence, GenSpec, LbpOptions, LbpResult

from conftest import max_abs_diff, observe
from test_pearl_utils import DETERMINISTIC_TEXT, random_polytrees


# -- initialization and rounds --------------------------------------------------

def test_self_lambda_marks_evidence(chain3):
    state = lbp_init(chain3, observe(B="t"))
    np.testing.assert_array_equal(state.self_lambda["A"], (1.0, 1.0))
    np.testing.assert_array_equal(state.self_lambda["B"], (1.0, 0.0))
    np.testing.assert_allclose(state.current.pi[("A", "B")], (0.5, 0.5))
    np.testing.assert_array_equal(state.current.lam[("B", "A")], (1.0, 1.0))
    assert state.t == 0
    assert state.previous is None


def test_first_round_lambda_equals_the_exact_message(chain):
    ev = observe(B="1")
    state = lbp_round(lbp_init(chain, ev))
    exact = propagate(chain, ev).lam[("B", "A")]
    np.testing.assert_allclose(state.current.lam[("B", "A")], exact)
    assert state.t == 1
    assert state.previous.t == 0


def test_round_reads_only_the_previous_buffer(chain3):
    start = lbp_init(chain3, Evidence())
    first = lbp_round(start)
    # after one round the pi message into C still reflects the uniform pi into B
    expected = np.array([0.5 * 0.9 + 0.5 * 0.2, 0.5 * 0.1 + 0.5 * 0.8])
    np.testing.assert_allclose(first.current.pi[("B", "C")], expected)
    second = lbp_round(first)
    np.testing.assert_allclose(second.current.pi[("B", "C")], (0.41, 0.59))


def test_contradictory_evidence_raises():
    net = parse_network(DETERMINISTIC_TEXT)
    for ev in (observe(A="t", B="f"), observe(A="f")):
        with pytest.raises(InconsistentEvidenceError):
            run_lbp(net, ev)
        with pytest.raises(InconsistentEvidenceError):
            pearl_beliefs(net, ev)


def test_round_order_does_not_matter(diamond):
    state = lbp_round(lbp_round(lbp_init(diamond, observe(D="t"))))
    order = tuple(reversed(state.index.order))
    shuffled = replace(state, index=replace(state.index, order=order))
    forward, backward = lbp_round(state).current, lbp_round(shuffled).current
    assert forward.pi.keys() == backward.pi.keys()
    assert forward.lam.keys() == backward.lam.keys()
    for key in forward.pi:
        np.testing.assert_array_equal(forward.pi[key], backward.pi[key])
    for key in forward.lam:
        np.testing.assert_array_equal(forward.lam[key], backward.lam[key])


# -- damping ----------------------------------------------------------------------

def test_apply_damping():
    new, old = np.array([1.0, 0.0]), np.array([0.0, 1.0])
    assert apply_damping(new, old, 0.0) is new
    np.testing.assert_allclose(apply_damping(new, old, 0.5), (0.5, 0.5))
    same = np.array([0.3, 0.7])
    np.testing.assert_allclose(apply_damping(same, same.copy(), 0.8), same)


def test_damped_run_still_matches_pearl_on_a_polytree(polytree, polytree_evidence):
    exact = pearl_beliefs(polytree, polytree_evidence).beliefs
    for target in ("messages", "node_values"):
        opts = LbpOptions(threshold=1e-10, damping=0.5, momentum_target=target, max_iterations=500)
        result = run_lbp(polytree, polytree_evidence, opts)
        assert result.status is LbpStatus.CONVERGED
        assert max_abs_diff(result.beliefs, exact) <= 1e-8


def test_fixed_point_survives_damping(polytree, polytree_evidence):
    result = run_lbp(polytree, polytree_evidence, LbpOptions(threshold=1e-12))
    assert result.status is LbpStatus.CONVERGED
    fixed = result.final_state.current
    damped = lbp_round(result.final_state, opts=LbpOptions(damping=0.5)).current
    for key in fixed.pi:
        np.testing.assert_allclose(damped.pi[key], fixed.pi[key], atol=1e-10)
    for key in fixed.lam:
        np.testing.assert_allclose(damped.lam[key], fixed.lam[key], atol=1e-10)


# -- oscillation detection -----------------------------------------------------

def test_constant_history_is_not_an_oscillation():
    assert detect_oscillation([(0.5, 0.5)] * 9, 1e-4) is None


def test_alternating_history_has_period_two():
    a, b = (0.9, 0.1), (0.2, 0.8)
    assert detect_oscillation([a, b, a, b, a, b, a], 1e-4) == 2


def test_short_history_is_inconclusive():
    a, b = (0.9, 0.1), (0.2, 0.8)
    assert detect_oscillation([a, b, a, b], 1e-4) is None
    assert detect_oscillation([b, a, b, a, b], 1e-4) == 2


def test_period_three():
    a, b, c = (1.0, 0.0), (0.0, 1.0), (0.5, 0.5)
    history = [a, b, c, a, b, c, a, b, c]
    assert detect_oscillation(history, 1e-4) == 3
    assert detect_oscillation(history, 1e-4, max_period=2) is None


# -- runs ---------------------------------------------------------------------------

def test_chain_converges_to_the_exact_posterior(chain):
    result = run_lbp(chain, observe(B="1"), LbpOptions(threshold=1e-8))
    assert result.status is LbpStatus.CONVERGED
    assert result.beliefs["A"].values == pytest.approx((0.14 / 0.41, 0.27 / 0.41), abs=1e-10)
    assert result.status_text == "converged"
    assert len(result.max_delta_trace) == result.iterations_run


def test_tree_specialization_on_random_polytrees():
    opts = LbpOptions(threshold=1e-8)
    for net, ev in random_polytrees(200):
        result = run_lbp(net, ev, opts)
        assert result.status is LbpStatus.CONVERGED
        assert result.iterations_run <= 2 * (diameter(net) + 2)
        assert max_abs_diff(result.beliefs, pearl_beliefs(net, ev).beliefs) <= 1e-6
        for x, dist in result.beliefs.items():
            assert sum(dist.values) == pytest.approx(1.0, abs=1e-12)
            if x in ev:
                assert max(dist.values) == 1.0


def test_diamond_error_is_measured(diamond):
    ev = observe(D="t")
    result = run_lbp(diamond, ev)
    reference = exact_posteriors(diamond, ev)
    errors = belief_l1_errors(result.beliefs, reference)
    assert set(errors) == {"A", "B", "C", "D"}
    assert errors["D"] == pytest.approx(0.0, abs=1e-12)
    assert all(np.isfinite(e) for e in errors.values())


def test_iteration_cap_reports_final_round(diamond):
    result = run_lbp(diamond, observe(D="t"), LbpOptions(threshold=1e-15, max_iterations=2))
    assert result.status is LbpStatus.ITERATION_CAP
    assert result.iterations_run == 2
    assert result.period is None
    assert set(result.beliefs) == {"A", "B", "C", "D"}


def test_history_keeps_the_configured_depth(diamond):
    result = run_lbp(diamond, observe(D="t"), LbpOptions(threshold=1e-15, max_iterations=30, history_depth=4))
    assert len(result.history) == 5


def test_reported_convergence_survives_an_extra_round():
    for seed in range(30):
        spec = GenSpec(family="pyramid", widths=(2, 3, 3), seed=seed, evidence_count=2)
        net = generate(spec)
        ev = sample_evidence(net, spec.evidence_count, spec.seed)
        opts = LbpOptions()
        result = run_lbp(net, ev, opts)
        verdict = check_convergence(result, opts)
        if result.status is LbpStatus.CONVERGED:
            assert verdict is True
        else:
            assert verdict is None


def test_result_is_a_frozen_model(chain):
    result = run_lbp(chain, observe(B="1"))
    with pytest.raises(ValidationError):
        result.status = LbpStatus.OSCILLATING
    dumped = result.model_dump()
    assert "final_state" not in dumped
    assert dumped["status"] is LbpStatus.CONVERGED
    with pytest.raises(ValidationError):
        LbpResult(status="converged", iterations_run=-1, beliefs={}, history=(), max_delta_trace=())
    with pytest.raises(ValidationError):
        LbpResult(status="converged", iterations_run=1, beliefs={}, history=(), max_delta_trace=(), period=1)


def test_beliefs_of_the_initial_state_are_normalized(diamond):
    beliefs = compute_beliefs(lbp_init(diamond, Evidence()))
    for dist in beliefs.values():
        assert sum(dist.values) == pytest.approx(1.0, abs=1e-12)


def test_a_period_two_oscillator_exists():
    found = find_oscillator(attempts=30, seed=0)
    assert found is not None
    assert found.undamped.status is LbpStatus.OSCILLATING
    assert found.undamped.status_text == "oscillating(2)"
    assert found.verified
    assert verify_period(found.undamped, 2, LbpOptions().threshold)
    assert found.damped.status in tuple(LbpStatus)
    assert len(found.spec.label) > 0
