"""Motion selection strategies built on the inferred beliefs.

Three planners, in increasing order of how much of the other agent they
model: reactive planning scores candidates against the inferred opponent
motion belief as-is; proactive planning scores each candidate against
the best responses it would provoke; socially-aware planning adds a
penalty for straying from the motions the opponent would most like to
see, trading own efficiency for the opponent's expectations.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .equilibrium import GameTable, argmin_mask, best_response_sets, favored_motions
from .game import NoFeasibleMotionError
from .inference import BeliefState, MotionDistribution

STRATEGY_KINDS = ("reactive", "proactive", "social")


@dataclass(frozen=True)
class Strategy:
    """Planner selection plus the social trade-off weight."""

    kind: str
    social_weight: float = 0.1

    def __post_init__(self) -> None:
        if self.kind not in STRATEGY_KINDS:
            raise ValueError(f"unknown strategy kind {self.kind!r}")
        if self.social_weight < 0:
            raise ValueError("social_weight must be non-negative")


@dataclass(frozen=True)
class PlanContext:
    """One agent's view of the game at the moment it must commit.

    ``table`` is oriented with the planning agent on the row side and
    evaluated at the current states; ``belief`` is the inference state
    already updated with this tick's observation.
    """

    table: GameTable
    intent: float
    belief: BeliefState
    grace_metric: str = "scalar"
    grace_gain: float = 1.0


def _finite_argmin(expected: np.ndarray, table: GameTable) -> float:
    """Smallest candidate among near-minimal finite expectations."""
    mask = argmin_mask(expected, table.tol)
    if not mask.any():
        raise NoFeasibleMotionError("every candidate motion prices at +inf")
    return table.candidates_i[int(np.nonzero(mask)[0][0])]


def _expected_against(ctx: PlanContext, opponent_mass: np.ndarray) -> np.ndarray:
    """Expected payoff of each own candidate under an opponent-motion mass."""
    payoffs = ctx.table.payoff_matrix(ctx.intent)
    finite_rows = ctx.table.feasible_i
    safe = np.where(finite_rows[:, None], payoffs, 0.0)
    expected = safe @ np.asarray(opponent_mass, dtype=float)
    return np.where(finite_rows, expected, math.inf)


def plan_reactive(ctx: PlanContext) -> float:
    """Best candidate against the opponent-motion belief as it stands."""
    mass = np.asarray(ctx.belief.opponent_motions.mass)
    return _finite_argmin(_expected_against(ctx, mass), ctx.table)


def conditional_opponent_distribution(
    ctx: PlanContext, motion_index: int
) -> MotionDistribution:
    """How the opponent would answer one specific own motion.

    Mixes, over the opponent-intent belief, a uniform choice among the
    opponent's best responses to the candidate motion.
    """
    marginal = ctx.belief.marginal
    responses = best_response_sets(
        ctx.table, motion_index, ctx.belief.opponent_support
    )
    mass = np.zeros(len(ctx.table.candidates_j))
    for weight, intent_j in zip(marginal, ctx.belief.opponent_support):
        if weight == 0.0:
            continue
        response = responses[intent_j]
        share = weight / len(response.indices)
        for k in response.indices:
            mass[k] += share
    return MotionDistribution(ctx.table.candidates_j, tuple(mass.tolist()))


def _proactive_expected(ctx: PlanContext) -> np.ndarray:
    payoffs = ctx.table.payoff_matrix(ctx.intent)
    expected = np.full(len(ctx.table.candidates_i), math.inf)
    for ii in range(len(ctx.table.candidates_i)):
        if not ctx.table.feasible_i[ii]:
            continue
        conditional = conditional_opponent_distribution(ctx, ii)
        expected[ii] = float(payoffs[ii] @ np.asarray(conditional.mass))
    return expected


def plan_proactive(ctx: PlanContext) -> float:
    """Best candidate given the responses it would itself provoke."""
    return _finite_argmin(_proactive_expected(ctx), ctx.table)


def wanted_motion_distribution(ctx: PlanContext) -> MotionDistribution | None:
    """Belief over the motions the opponent most wants the planner to take.

    The favor the planner can do for the opponent is judged in the game
    the planner actually faces: its own intent against each surviving
    opponent-intent hypothesis.  The opponent's favorite equilibria of
    that pairing nominate planner motions, and hypotheses mix by their
    marginal mass.  Hypotheses with no equilibria contribute nothing and
    the rest renormalize.  Returns None when nothing survives.
    """
    mass = np.zeros(len(ctx.table.candidates_i))
    index = {x: k for k, x in enumerate(ctx.table.candidates_i)}
    total = 0.0
    for oi, opponent in enumerate(ctx.belief.opponent_support):
        weight = float(ctx.belief.marginal[oi])
        if weight == 0.0:
            continue
        favored = favored_motions(ctx.table, ctx.intent, opponent)
        if not favored.motions:
            continue
        share = weight / len(favored.motions)
        for x in favored.motions:
            mass[index[x]] += share
        total += weight
    if total <= 0.0:
        return None
    return MotionDistribution(ctx.table.candidates_i, tuple((mass / total).tolist()))


def _grace_penalty(ctx: PlanContext, wanted: MotionDistribution | None) -> np.ndarray:
    """Expected squared deviation of each candidate from the wanted motions.

    The metric names how two motions are compared: ``scalar`` (the
    default) takes the squared difference of the motion values,
    ``sequence`` the squared distance between the per-tick action
    sequences, ``trajectory`` the squared distance between the unrolled
    state sequences, and ``accumulated`` charges the scalar difference
    once per tick.
    """
    if wanted is None:
        return np.zeros(len(ctx.table.candidates_i))
    own = np.asarray(ctx.table.candidates_i)
    diff2 = (own[:, None] - own[None, :]) ** 2
    horizon = ctx.table.horizon
    if ctx.grace_metric == "sequence":
        diff2 = diff2 / horizon
    elif ctx.grace_metric == "trajectory":
        diff2 = diff2 * ((horizon - 1) * (2 * horizon - 1) / (6 * horizon))
    elif ctx.grace_metric == "accumulated":
        diff2 = diff2 * horizon
    elif ctx.grace_metric != "scalar":
        raise ValueError(f"unknown grace_metric {ctx.grace_metric!r}")
    return diff2 @ np.asarray(wanted.mass)


def plan_social(ctx: PlanContext, social_weight: float) -> float:
    """Proactive objective plus a weighted pull toward wanted motions."""
    expected = _proactive_expected(ctx)
    penalty = _grace_penalty(ctx, wanted_motion_distribution(ctx))
    return _finite_argmin(
        expected + social_weight * ctx.grace_gain * penalty, ctx.table
    )


def plan(ctx: PlanContext, strategy: Strategy) -> float:
    """Dispatch on strategy kind; returns the chosen motion value."""
    if strategy.kind == "reactive":
        return plan_reactive(ctx)
    if strategy.kind == "proactive":
        return plan_proactive(ctx)
    return plan_social(ctx, strategy.social_weight)
