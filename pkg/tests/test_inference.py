"""Decoder oracles: residual arithmetic, tie rules, belief updates."""
from __future__ import annotations

import math

import numpy as np
import pytest

from gracesim.equilibrium import GameTable, Tolerance, nash_set
from gracesim.game import AgentGeometry, LossParams
from gracesim.inference import (
    MotionDistribution,
    baseline_motion_distribution,
    candidate_residuals,
    equilibrium_projection,
    infer_batch,
    infer_step,
    update_history,
)

GEO_UP = AgentGeometry(start=(0.0, -2.0), direction=(0.0, 1.0))
GEO_LEFT = AgentGeometry(start=(2.0, 0.0), direction=(-1.0, 0.0))
CANDIDATES = (-1.0, 0.0, 1.0, 2.0, 3.0, 4.0, 5.0)
INTENTS = (1.0, 1000.0)


def observer_table(state_m=(0.0, -2.0), state_h=(2.0, 0.0)) -> GameTable:
    """Game as the m agent sees it: itself on rows, h on columns."""
    return GameTable(
        np.asarray(state_m, dtype=float),
        np.asarray(state_h, dtype=float),
        GEO_UP,
        GEO_LEFT,
        CANDIDATES,
        CANDIDATES,
        100,
        LossParams(),
    )


def h_action(motion: float) -> np.ndarray:
    return (motion / 100.0) * GEO_LEFT.heading


def test_motion_distribution_point_mass_detection():
    sharp = MotionDistribution((1.0, 5.0), (0.0, 1.0))
    soft = MotionDistribution((1.0, 5.0), (0.3, 0.7))
    assert sharp.point_mass() == 5.0
    assert soft.point_mass() is None


def test_motion_distribution_mixture_weights_components():
    a = MotionDistribution((1.0, 5.0), (1.0, 0.0))
    b = MotionDistribution((1.0, 5.0), (0.0, 1.0))
    mix = MotionDistribution.mixture([a, b], np.asarray([0.25, 0.75]))
    assert mix.mass == pytest.approx((0.25, 0.75))


def test_candidate_residuals_are_squared_action_distances():
    table = observer_table()
    observed = h_action(5.0)
    residuals = candidate_residuals(table, observed)
    for k, motion in enumerate(CANDIDATES):
        gap = (motion - 5.0) / 100.0
        assert residuals[k] == pytest.approx(gap**2)


def test_equilibrium_projection_counts_appearances():
    table = observer_table()
    eq = nash_set(table, 1.0, 1.0)
    counts = equilibrium_projection(eq, table.candidates_j, "j")
    assert counts.sum() == len(eq.pairs)
    dist = baseline_motion_distribution(table, 1.0, 1.0)
    assert sum(dist.mass) == pytest.approx(1.0)


def test_strict_step_inference_matches_hand_scoring():
    """The strict decoder's winners recomputed with independent arithmetic."""
    table = observer_table()
    observed = h_action(5.0)
    step = infer_step(table, observed, INTENTS, INTENTS)

    # hand scoring: for each pairing, find the most frequent h-motions in
    # its equilibrium set, score the pairing by the worst squared action
    # gap among them, and keep the global minimizers
    scores = {}
    for mirrored in INTENTS:
        for opponent in INTENTS:
            eq = nash_set(table, mirrored, opponent)
            counts: dict[float, int] = {}
            for _, xj in eq.pairs:
                counts[xj] = counts.get(xj, 0) + 1
            top = max(counts.values())
            tied = [xj for xj, n in counts.items() if n == top]
            scores[(mirrored, opponent)] = max(
                ((xj - 5.0) / 100.0) ** 2 for xj in tied
            )
    best = min(scores.values())
    expected = {
        pair for pair, s in scores.items() if s <= best + max(1e-9 * best, 1e-18)
    }
    assert set(step.solution.pairs) == expected
    assert step.solution.residual == pytest.approx(best)


def test_step_joint_is_uniform_over_winners():
    table = observer_table()
    step = infer_step(table, h_action(5.0), INTENTS, INTENTS)
    winners = step.joint > 0
    assert step.joint.sum() == pytest.approx(1.0)
    values = step.joint[winners]
    assert np.allclose(values, values[0])


def test_update_history_multiplies_prior_and_evidence():
    table = observer_table()
    step = infer_step(table, h_action(5.0), INTENTS, INTENTS)
    prior = np.asarray([0.8, 0.2])
    belief = update_history(prior, step)
    product = prior * step.opponent_marginal()
    assert not belief.conflict
    assert np.asarray(belief.marginal) == pytest.approx(product / product.sum())
    assert sum(belief.marginal) == pytest.approx(1.0, abs=1e-12)


def test_update_history_conflict_keeps_fresh_evidence():
    table = observer_table()
    step = infer_step(table, h_action(5.0), INTENTS, INTENTS)
    step_marginal = step.opponent_marginal()
    # prior concentrated exactly where the step put no mass
    prior = np.where(step_marginal > 0, 0.0, 1.0)
    if prior.sum() == 0:
        pytest.skip("step left every intent alive; no conflict constructible")
    belief = update_history(prior, step)
    assert belief.conflict
    assert np.asarray(belief.marginal) == pytest.approx(
        step_marginal / step_marginal.sum()
    )


def test_observing_fast_approach_decodes_aggressive_intent():
    table = observer_table()
    belief = update_history(
        np.asarray([0.5, 0.5]), infer_step(table, h_action(5.0), INTENTS, INTENTS)
    )
    assert belief.opponent_point_mass() == 1000.0


def test_observing_crawl_decodes_cooperative_intent():
    table = observer_table()
    belief = update_history(
        np.asarray([0.5, 0.5]), infer_step(table, h_action(-1.0), INTENTS, INTENTS)
    )
    assert belief.opponent_point_mass() == 1.0


def test_batch_agrees_with_recursion_on_a_fixed_history():
    states = [
        ((0.0, -2.0), (2.0, 0.0)),
        ((0.0, -1.95), (1.95, 0.0)),
        ((0.0, -1.9), (1.9, 0.0)),
    ]
    motions = (5.0, 5.0, 4.0)
    tables = [observer_table(sm, sh) for sm, sh in states]
    actions = [h_action(x) for x in motions]

    marginal = np.full(len(INTENTS), 0.5)
    conflicted = False
    for table, action in zip(tables, actions):
        belief = update_history(
            marginal, infer_step(table, action, INTENTS, INTENTS)
        )
        conflicted = conflicted or belief.conflict
        marginal = np.asarray(belief.marginal)
    assert not conflicted

    recursive_support = {
        INTENTS[k] for k in range(len(INTENTS)) if marginal[k] > 0
    }
    batch = infer_batch(tables, actions, INTENTS, INTENTS)
    assert set(batch.opponent_values()) == recursive_support


def test_tie_rules_agree_when_no_tie_exists():
    table = observer_table(state_m=(0.0, -1.2), state_h=(1.4, 0.0))
    observed = h_action(2.0)
    outcomes = {}
    for rule in ("strict", "expected", "charitable", "smallest"):
        step = infer_step(table, observed, INTENTS, INTENTS, tie_rule=rule)
        for hyp in step.hypotheses:
            if len(hyp.top_motions) == 1:
                key = (rule, hyp.mirrored, hyp.opponent)
                outcomes[key] = hyp.residual
    # single-motion hypotheses must score identically under every rule
    by_pair: dict[tuple, set] = {}
    for (rule, mirrored, opponent), residual in outcomes.items():
        by_pair.setdefault((mirrored, opponent), set()).add(round(residual, 15))
    for residuals in by_pair.values():
        assert len(residuals) == 1


def test_unknown_tie_rule_is_rejected():
    table = observer_table()
    with pytest.raises(ValueError):
        infer_step(table, h_action(1.0), INTENTS, INTENTS, tie_rule="nonsense")
