"""Nash equilibria of the finite crossing game at a fixed pair of states.

A ``GameTable`` precomputes, for one pair of agent states, everything the
payoff of any (motion_i, motion_j, intent) combination needs: the mean
per-tick proximity matrix over candidate pairs and the per-candidate
progress penalties.  Payoff matrices for arbitrary intents are then cheap
broadcasts, which keeps exhaustive equilibrium scans fast enough to run
thousands of times per simulation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .game import AgentGeometry, LossParams, Rect, unroll_batch


class EmptyEquilibriumError(Exception):
    """No equilibrium exists because one agent has no feasible motion."""


@dataclass(frozen=True)
class Tolerance:
    """Relative/absolute slack for near-minimum ties."""

    rel: float = 1e-9
    abs: float = 1e-12


def argmin_mask(values: np.ndarray, tol: Tolerance) -> np.ndarray:
    """Boolean mask of entries within tolerance of the minimum.

    Entries equal to +inf never match unless everything is +inf, in which
    case the mask is all False.
    """
    values = np.asarray(values, dtype=float)
    low = values.min()
    if math.isinf(low):
        return np.zeros(values.shape, dtype=bool)
    slack = max(tol.rel * abs(low), tol.abs)
    return values <= low + slack


@dataclass(frozen=True)
class EquilibriumSet:
    """All pure equilibria of one intent pairing, ascending by motion."""

    intent_i: float
    intent_j: float
    pairs: tuple[tuple[float, float], ...]
    index_pairs: tuple[tuple[int, int], ...]

    def motions_i(self) -> tuple[float, ...]:
        return tuple(sorted({p[0] for p in self.pairs}))

    def motions_j(self) -> tuple[float, ...]:
        return tuple(sorted({p[1] for p in self.pairs}))


@dataclass(frozen=True)
class BestResponseSet:
    """Opponent motions that best answer one fixed own motion."""

    intent_j: float
    motion_i: float
    motions: tuple[float, ...]
    indices: tuple[int, ...]


@dataclass(frozen=True)
class FavoredMotionSet:
    """Own motions appearing in the equilibria the opponent likes best."""

    intent_i: float
    intent_j: float
    motions: tuple[float, ...]
    indices: tuple[int, ...]


class GameTable:
    """Payoff tables of the finite game at one pair of agent states."""

    def __init__(
        self,
        state_i: np.ndarray,
        state_j: np.ndarray,
        geometry_i: AgentGeometry,
        geometry_j: AgentGeometry,
        candidates_i: tuple[float, ...],
        candidates_j: tuple[float, ...],
        horizon: int,
        params: LossParams,
        bounds_i: Rect | None = None,
        bounds_j: Rect | None = None,
        tol: Tolerance = Tolerance(),
    ) -> None:
        self.state_i = np.asarray(state_i, dtype=float)
        self.state_j = np.asarray(state_j, dtype=float)
        self.geometry_i = geometry_i
        self.geometry_j = geometry_j
        self.candidates_i = tuple(float(x) for x in candidates_i)
        self.candidates_j = tuple(float(x) for x in candidates_j)
        self.horizon = horizon
        self.params = params
        self.tol = tol

        traj_i = unroll_batch(self.candidates_i, geometry_i, self.state_i, horizon)
        traj_j = unroll_batch(self.candidates_j, geometry_j, self.state_j, horizon)
        self.traj_i = traj_i
        self.traj_j = traj_j

        window_i = traj_i[:, :horizon, :]
        window_j = traj_j[:, :horizon, :]
        in_i = params.region.contains(window_i)
        in_j = params.region.contains(window_j)
        d2 = ((window_i[:, None, :, :] - window_j[None, :, :, :]) ** 2).sum(axis=-1)
        exponent = params.safety_gain * (params.safety_margin - d2**2)
        tick_loss = np.where(
            in_i[:, None, :] & in_j[None, :, :],
            np.exp(np.minimum(exponent, 700.0)),
            0.0,
        )
        self.safety = tick_loss.mean(axis=2)

        center = np.asarray(params.region.center, dtype=float)
        progress_i = (traj_i[:, -1, :] - center) @ geometry_i.heading
        progress_j = (traj_j[:, -1, :] - center) @ geometry_j.heading
        self.task_i = np.exp(-progress_i + params.task_offset)
        self.task_j = np.exp(-progress_j + params.task_offset)

        self.feasible_i = self._feasible_mask(traj_i, bounds_i)
        self.feasible_j = self._feasible_mask(traj_j, bounds_j)
        self.bounds_i = bounds_i
        self.bounds_j = bounds_j
        self._cache: dict[tuple, object] = {}

    @staticmethod
    def _feasible_mask(trajectories: np.ndarray, bounds: Rect | None) -> np.ndarray:
        if bounds is None:
            return np.ones(trajectories.shape[0], dtype=bool)
        return bounds.contains(trajectories).all(axis=1)

    def payoff_matrix(self, intent_i: float) -> np.ndarray:
        """Loss to the row agent for every (motion_i, motion_j) pair."""
        key = ("payoff_i", intent_i)
        cached = self._cache.get(key)
        if cached is None:
            m = self.safety + intent_i * self.task_i[:, None]
            cached = np.where(self.feasible_i[:, None], m, math.inf)
            self._cache[key] = cached
        return cached  # type: ignore[return-value]

    def opponent_matrix(self, intent_j: float) -> np.ndarray:
        """Loss to the column agent, on the same (row, column) layout."""
        key = ("payoff_j", intent_j)
        cached = self._cache.get(key)
        if cached is None:
            m = self.safety + intent_j * self.task_j[None, :]
            cached = np.where(self.feasible_j[None, :], m, math.inf)
            self._cache[key] = cached
        return cached  # type: ignore[return-value]

    def first_actions_i(self) -> np.ndarray:
        """(n_i, 2) first-tick displacements of the row agent's candidates."""
        return (
            np.asarray(self.candidates_i)[:, None]
            / self.horizon
            * self.geometry_i.heading
        )

    def first_actions_j(self) -> np.ndarray:
        return (
            np.asarray(self.candidates_j)[:, None]
            / self.horizon
            * self.geometry_j.heading
        )

    def swapped(self) -> "GameTable":
        """The same game seen from the column agent's side."""
        key = ("swapped",)
        cached = self._cache.get(key)
        if cached is None:
            cached = GameTable.__new__(GameTable)
            cached.state_i, cached.state_j = self.state_j, self.state_i
            cached.geometry_i, cached.geometry_j = self.geometry_j, self.geometry_i
            cached.candidates_i, cached.candidates_j = (
                self.candidates_j,
                self.candidates_i,
            )
            cached.horizon = self.horizon
            cached.params = self.params
            cached.tol = self.tol
            cached.traj_i, cached.traj_j = self.traj_j, self.traj_i
            cached.safety = self.safety.T
            cached.task_i, cached.task_j = self.task_j, self.task_i
            cached.feasible_i, cached.feasible_j = self.feasible_j, self.feasible_i
            cached.bounds_i, cached.bounds_j = self.bounds_j, self.bounds_i
            cached._cache = {("swapped",): self}
            self._cache[key] = cached
        return cached  # type: ignore[return-value]


def nash_set(table: GameTable, intent_i: float, intent_j: float) -> EquilibriumSet:
    """All pure-strategy equilibria, deterministically ordered.

    A pair is an equilibrium when each motion is, within tolerance, a best
    response to the other.  The scan is exhaustive over the candidate
    grid, so the set is exact for the finite game.
    """
    key = ("nash", intent_i, intent_j)
    cached = table._cache.get(key)
    if cached is not None:
        return cached  # type: ignore[return-value]
    if not table.feasible_i.any() or not table.feasible_j.any():
        raise EmptyEquilibriumError(
            "an agent has no feasible motion, the equilibrium set is empty"
        )
    p_i = table.payoff_matrix(intent_i)
    p_j = table.opponent_matrix(intent_j)
    low_i = p_i.min(axis=0, keepdims=True)
    slack_i = np.maximum(table.tol.rel * np.abs(low_i), table.tol.abs)
    best_i = p_i <= low_i + slack_i
    low_j = p_j.min(axis=1, keepdims=True)
    slack_j = np.maximum(table.tol.rel * np.abs(low_j), table.tol.abs)
    best_j = p_j <= low_j + slack_j
    rows, cols = np.nonzero(best_i & best_j)
    index_pairs = tuple(zip(rows.tolist(), cols.tolist()))
    pairs = tuple(
        (table.candidates_i[r], table.candidates_j[c]) for r, c in index_pairs
    )
    result = EquilibriumSet(intent_i, intent_j, pairs, index_pairs)
    table._cache[key] = result
    return result


def best_response_sets(
    table: GameTable, motion_index: int, intents_j: tuple[float, ...]
) -> dict[float, BestResponseSet]:
    """Column-agent argmin sets against one fixed row motion, per intent."""
    out: dict[float, BestResponseSet] = {}
    for intent_j in intents_j:
        key = ("bri", motion_index, intent_j)
        cached = table._cache.get(key)
        if cached is None:
            row = table.opponent_matrix(intent_j)[motion_index, :]
            mask = argmin_mask(row, table.tol)
            if not mask.any():
                raise EmptyEquilibriumError(
                    "opponent has no feasible motion to respond with"
                )
            idx = tuple(np.nonzero(mask)[0].tolist())
            cached = BestResponseSet(
                intent_j,
                table.candidates_i[motion_index],
                tuple(table.candidates_j[k] for k in idx),
                idx,
            )
            table._cache[key] = cached
        out[intent_j] = cached  # type: ignore[assignment]
    return out


def favored_motions(
    table: GameTable, intent_i: float, intent_j: float
) -> FavoredMotionSet:
    """Row-agent motions in the equilibria the column agent favors.

    Among all equilibria of the pairing, keep those whose column-agent
    loss is minimal; the row-agent coordinates of the survivors are what
    the column agent would most like the row agent to do.
    """
    key = ("favored", intent_i, intent_j)
    cached = table._cache.get(key)
    if cached is not None:
        return cached  # type: ignore[return-value]
    eq = nash_set(table, intent_i, intent_j)
    if not eq.index_pairs:
        result = FavoredMotionSet(intent_i, intent_j, (), ())
        table._cache[key] = result
        return result
    p_j = table.opponent_matrix(intent_j)
    values = np.asarray([p_j[r, c] for r, c in eq.index_pairs])
    mask = argmin_mask(values, table.tol)
    kept = [eq.index_pairs[k] for k in np.nonzero(mask)[0]]
    indices = tuple(sorted({r for r, _ in kept}))
    result = FavoredMotionSet(
        intent_i,
        intent_j,
        tuple(table.candidates_i[r] for r in indices),
        indices,
    )
    table._cache[key] = result
    return result
