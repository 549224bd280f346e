"""Empathetic intent inference from observed opponent actions.

The observing agent explains the opponent's last action by searching over
joint intent hypotheses: one intent the opponent might be assuming about
the observer (the "mirrored" axis) and one intent the opponent might
actually hold (the "opponent" axis).  Each hypothesis predicts opponent
motions through the equilibria of the corresponding game; hypotheses
whose most likely motion best matches the observation survive.  Tick
evidence accumulates as a product over the opponent-intent marginal,
with a uniform reset whenever new evidence contradicts everything seen
before.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .equilibrium import (
    EmptyEquilibriumError,
    EquilibriumSet,
    GameTable,
    Tolerance,
    nash_set,
)

POINT_MASS_TOL = 1e-9


class ConflictAllInfeasibleError(Exception):
    """No intent hypothesis can explain the observation at all."""


@dataclass(frozen=True)
class MotionDistribution:
    """Probability mass over a fixed tuple of candidate motions."""

    support: tuple[float, ...]
    mass: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.support) != len(self.mass):
            raise ValueError("support and mass lengths differ")

    @classmethod
    def from_counts(
        cls, support: tuple[float, ...], counts: np.ndarray
    ) -> "MotionDistribution":
        counts = np.asarray(counts, dtype=float)
        total = counts.sum()
        if total <= 0:
            raise ValueError("counts must not all be zero")
        return cls(support, tuple((counts / total).tolist()))

    @classmethod
    def mixture(
        cls, components: list["MotionDistribution"], weights: np.ndarray
    ) -> "MotionDistribution":
        if not components:
            raise ValueError("mixture needs at least one component")
        support = components[0].support
        acc = np.zeros(len(support))
        for comp, w in zip(components, np.asarray(weights, dtype=float)):
            if comp.support != support:
                raise ValueError("mixture components must share a support")
            acc += w * np.asarray(comp.mass)
        return cls(support, tuple(acc.tolist()))

    def total(self) -> float:
        return float(sum(self.mass))

    def point_mass(self) -> float | None:
        """The single supported motion if the mass has collapsed, else None."""
        arr = np.asarray(self.mass)
        k = int(arr.argmax())
        if arr[k] >= 1.0 - POINT_MASS_TOL:
            return self.support[k]
        return None

    def expectation(self, values: np.ndarray) -> float:
        return float(np.asarray(values, dtype=float) @ np.asarray(self.mass))


def equilibrium_projection(
    eq: EquilibriumSet, candidates: tuple[float, ...], side: str
) -> np.ndarray:
    """Counts of appearances of each candidate on one side of the pairs."""
    pick = 0 if side == "i" else 1
    counts = np.zeros(len(candidates))
    index = {x: k for k, x in enumerate(candidates)}
    for pair in eq.pairs:
        counts[index[pair[pick]]] += 1
    return counts


def baseline_motion_distribution(
    table: GameTable, intent_i: float, intent_j: float
) -> MotionDistribution:
    """Opponent-motion mass proportional to equilibrium appearance counts.

    Models an opponent that picks uniformly among the equilibria of the
    game it believes it is playing.
    """
    eq = nash_set(table, intent_i, intent_j)
    if not eq.pairs:
        raise EmptyEquilibriumError("no equilibria to project a distribution from")
    counts = equilibrium_projection(eq, table.candidates_j, "j")
    return MotionDistribution.from_counts(table.candidates_j, counts)


def self_motion_distribution(
    table: GameTable, intent_i: float, intent_j: float
) -> MotionDistribution:
    """Own-motion mass from the same equilibrium counting, row side."""
    eq = nash_set(table, intent_i, intent_j)
    if not eq.pairs:
        raise EmptyEquilibriumError("no equilibria to project a distribution from")
    counts = equilibrium_projection(eq, table.candidates_i, "i")
    return MotionDistribution.from_counts(table.candidates_i, counts)


@dataclass(frozen=True)
class PairHypothesis:
    """One (mirrored, opponent) intent pairing and what it predicts."""

    mirrored: float
    opponent: float
    residual: float
    top_motions: tuple[float, ...]
    equilibrium: EquilibriumSet
    opponent_motions: MotionDistribution
    self_motions: MotionDistribution


@dataclass(frozen=True)
class SolutionSet:
    """Global minimizers of the one-tick explanation residual."""

    pairs: tuple[tuple[float, float], ...]
    residual: float


@dataclass(frozen=True)
class StepInference:
    """Everything one tick of observation reveals."""

    mirrored_support: tuple[float, ...]
    opponent_support: tuple[float, ...]
    hypotheses: tuple[PairHypothesis, ...]
    solution: SolutionSet
    joint: np.ndarray

    def hypothesis(self, mirrored: float, opponent: float) -> PairHypothesis:
        k = self.mirrored_support.index(mirrored) * len(self.opponent_support)
        return self.hypotheses[k + self.opponent_support.index(opponent)]

    def opponent_marginal(self) -> np.ndarray:
        return self.joint.sum(axis=0)

    def mirrored_marginal(self) -> np.ndarray:
        return self.joint.sum(axis=1)


def candidate_residuals(table: GameTable, observed_action: np.ndarray) -> np.ndarray:
    """Squared distance from each column candidate's first action."""
    diff = table.first_actions_j() - np.asarray(observed_action, dtype=float)
    return (diff**2).sum(axis=1)


def _tie_objective(
    residuals: np.ndarray,
    counts: np.ndarray,
    candidates: tuple[float, ...],
    tie_rule: str,
    first_actions: np.ndarray,
    observed: np.ndarray,
) -> tuple[float, tuple[float, ...]]:
    """Residual assigned to a hypothesis whose argmax motions may tie.

    ``strict`` holds the hypothesis accountable for every motion it deems
    most likely and scores it by the worst tied motion, ``expected``
    predicts the mean first action of the tied motions, ``charitable``
    scores the hypothesis by its best tied motion, and ``smallest``
    commits to the smallest tied motion.
    """
    top = counts == counts.max()
    tied = np.nonzero(top)[0]
    if tie_rule == "strict":
        value = float(residuals[tied].max())
    elif tie_rule == "expected":
        predicted = first_actions[tied].mean(axis=0)
        value = float(((predicted - observed) ** 2).sum())
    elif tie_rule == "charitable":
        value = float(residuals[tied].min())
    elif tie_rule == "smallest":
        value = float(residuals[tied[0]])
    else:
        raise ValueError(f"unknown tie_rule {tie_rule!r}")
    return value, tuple(candidates[k] for k in tied)


def infer_step(
    table: GameTable,
    observed_action: np.ndarray,
    mirrored_support: tuple[float, ...],
    opponent_support: tuple[float, ...],
    tie_rule: str = "strict",
    residual_tol: Tolerance = Tolerance(rel=1e-9, abs=1e-18),
) -> StepInference:
    """Explain one observed opponent action over the intent grid.

    The table must be oriented with the observer on the row side and
    describe the game at the states where the observed action was taken.
    """
    observed = np.asarray(observed_action, dtype=float)
    residuals = candidate_residuals(table, observed)
    first_actions = table.first_actions_j()
    hypotheses: list[PairHypothesis] = []
    objectives = np.full((len(mirrored_support), len(opponent_support)), math.inf)
    for mi, mirrored in enumerate(mirrored_support):
        for oi, opponent in enumerate(opponent_support):
            try:
                eq = nash_set(table, mirrored, opponent)
                opp = baseline_motion_distribution(table, mirrored, opponent)
                own = self_motion_distribution(table, mirrored, opponent)
            except EmptyEquilibriumError:
                continue
            counts = equilibrium_projection(eq, table.candidates_j, "j")
            value, top = _tie_objective(
                residuals, counts, table.candidates_j, tie_rule,
                first_actions, observed,
            )
            objectives[mi, oi] = value
            hypotheses.append(
                PairHypothesis(mirrored, opponent, value, top, eq, opp, own)
            )
    if not hypotheses:
        raise ConflictAllInfeasibleError(
            "every intent hypothesis leads to an empty game"
        )
    best = objectives.min()
    slack = max(residual_tol.rel * abs(best), residual_tol.abs)
    winners = objectives <= best + slack
    joint = winners / winners.sum()
    pairs = tuple(
        (mirrored_support[mi], opponent_support[oi])
        for mi, oi in zip(*np.nonzero(winners))
    )
    return StepInference(
        tuple(mirrored_support),
        tuple(opponent_support),
        tuple(hypotheses),
        SolutionSet(pairs, float(best)),
        joint,
    )


@dataclass(frozen=True)
class BeliefState:
    """Accumulated inference after folding in one more tick."""

    mirrored_support: tuple[float, ...]
    opponent_support: tuple[float, ...]
    marginal: tuple[float, ...]
    joint: np.ndarray
    conflict: bool
    opponent_motions: MotionDistribution
    expected_self: MotionDistribution

    def opponent_point_mass(self) -> float | None:
        arr = np.asarray(self.marginal)
        k = int(arr.argmax())
        if arr[k] >= 1.0 - POINT_MASS_TOL:
            return self.opponent_support[k]
        return None


def update_history(prior_marginal: np.ndarray, step: StepInference) -> BeliefState:
    """Fold one tick of evidence into the opponent-intent marginal.

    The marginal multiplies tick after tick; a product that vanishes
    everywhere means the history contradicts the new evidence, in which
    case the prior resets to uniform — leaving the fresh evidence alone
    in force — and the tick is flagged.  The joint is rebuilt by scaling
    each opponent-intent column of the step joint to the updated
    marginal, spreading mass uniformly across mirrored intents where the
    step put none.
    """
    prior = np.asarray(prior_marginal, dtype=float)
    step_marginal = step.opponent_marginal()
    product = prior * step_marginal
    total = product.sum()
    conflict = bool(total <= 0.0)
    if conflict:
        marginal = step_marginal / step_marginal.sum()
    else:
        marginal = product / total

    n_m = len(step.mirrored_support)
    joint = np.zeros_like(step.joint)
    for oi in range(len(step.opponent_support)):
        column = step.joint[:, oi]
        mass = column.sum()
        if mass > 0:
            joint[:, oi] = column * (marginal[oi] / mass)
        else:
            joint[:, oi] = marginal[oi] / n_m

    opponent_motions = infer_motion_marginal(step, joint)
    expected_self = infer_expected_self_motion(step, joint)
    return BeliefState(
        step.mirrored_support,
        step.opponent_support,
        tuple(marginal.tolist()),
        joint,
        conflict,
        opponent_motions,
        expected_self,
    )


def _lookup(step: StepInference, mi: int, oi: int) -> PairHypothesis | None:
    mirrored = step.mirrored_support[mi]
    opponent = step.opponent_support[oi]
    for hyp in step.hypotheses:
        if hyp.mirrored == mirrored and hyp.opponent == opponent:
            return hyp
    return None


def _weighted_motion_mixture(
    step: StepInference, joint: np.ndarray, side: str
) -> MotionDistribution:
    components: list[MotionDistribution] = []
    weights: list[float] = []
    dropped = 0.0
    for mi in range(len(step.mirrored_support)):
        for oi in range(len(step.opponent_support)):
            w = float(joint[mi, oi])
            if w == 0.0:
                continue
            hyp = _lookup(step, mi, oi)
            if hyp is None:
                dropped += w
                continue
            components.append(
                hyp.opponent_motions if side == "j" else hyp.self_motions
            )
            weights.append(w)
    if not components:
        raise ConflictAllInfeasibleError("no surviving hypothesis carries mass")
    scale = 1.0 / (1.0 - dropped) if dropped > 0 else 1.0
    return MotionDistribution.mixture(
        components, np.asarray(weights, dtype=float) * scale
    )


def infer_motion_marginal(step: StepInference, joint: np.ndarray) -> MotionDistribution:
    """Opponent-motion belief under a joint intent weighting."""
    return _weighted_motion_mixture(step, joint, "j")


def infer_expected_self_motion(
    step: StepInference, joint: np.ndarray
) -> MotionDistribution:
    """What the opponent is inferred to expect of the observer."""
    return _weighted_motion_mixture(step, joint, "i")


@dataclass(frozen=True)
class BatchSolution:
    """Joint minimizers over a whole observation history."""

    histories: tuple[tuple[float, ...], ...]
    opponents: tuple[float, ...]
    residual: float

    def opponent_values(self) -> tuple[float, ...]:
        return tuple(sorted(set(self.opponents)))


def infer_batch(
    tables: list[GameTable],
    observed_actions: list[np.ndarray],
    mirrored_support: tuple[float, ...],
    opponent_support: tuple[float, ...],
    tie_rule: str = "strict",
    residual_tol: Tolerance = Tolerance(rel=1e-9, abs=1e-18),
) -> BatchSolution:
    """Explain a whole history with one shared opponent intent.

    The opponent intent is constant across the history while the mirrored
    intent is free to vary per tick, so the best residual decomposes as a
    per-tick minimum inside each opponent-intent slice.  The full
    cross-product is still enumerated; histories here are a few ticks.
    """
    if len(tables) != len(observed_actions):
        raise ValueError("one observed action per table is required")
    steps = [
        infer_step(
            table, action, mirrored_support, opponent_support, tie_rule, residual_tol
        )
        for table, action in zip(tables, observed_actions)
    ]
    per_tick = [
        {
            (h.mirrored, h.opponent): h.residual
            for h in step.hypotheses
        }
        for step in steps
    ]
    scored: list[tuple[float, tuple[float, ...], float]] = []
    for opponent in opponent_support:
        tick_choices: list[list[tuple[float, float]]] = []
        feasible = True
        for table_residuals in per_tick:
            choices = [
                (mirrored, table_residuals[(mirrored, opponent)])
                for mirrored in mirrored_support
                if (mirrored, opponent) in table_residuals
            ]
            if not choices:
                feasible = False
                break
            tick_choices.append(choices)
        if not feasible:
            continue
        for combo in itertools.product(*tick_choices):
            total = sum(r for _, r in combo)
            history = tuple(m for m, _ in combo)
            scored.append((total, history, opponent))
    if not scored:
        raise ConflictAllInfeasibleError("no hypothesis explains the history")
    best = min(total for total, _, _ in scored)
    slack = max(residual_tol.rel * abs(best), residual_tol.abs)
    winners = [(h, o) for total, h, o in scored if total <= best + slack]
    histories = tuple(h for h, _ in winners)
    opponents = tuple(o for _, o in winners)
    return BatchSolution(histories, opponents, float(best))
