"""Losses, payoffs and kinematics of the two-agent crossing game.

Each agent travels along a fixed unit direction at uniform speed.  A
candidate motion is the signed distance the agent would cover over a
planning horizon of ``horizon`` ticks; negative motions back the agent
up.  The instantaneous loss combines a proximity penalty, active only
while both agents occupy the interaction region, with an exponential
penalty on failing to progress past the intersection.  An intent value
scales the progress term: large intents model agents that care far more
about getting through than about safety margins.  A plan's payoff is
the average per-tick loss over the horizon, which keeps payoffs on the
same footing regardless of horizon length.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class NoFeasibleMotionError(Exception):
    """Every candidate motion violates the agent's state bounds."""


@dataclass(frozen=True)
class Rect:
    """Axis-aligned rectangle, closed on its boundary."""

    center: tuple[float, float] = (0.0, 0.0)
    half: tuple[float, float] = (math.inf, math.inf)

    def contains(self, points: np.ndarray) -> np.ndarray:
        """Membership test for an array of points with trailing dim 2."""
        pts = np.asarray(points, dtype=float)
        offset = np.abs(pts - np.asarray(self.center))
        return np.all(offset <= np.asarray(self.half), axis=-1)

    def extent_along(self, direction: np.ndarray) -> float:
        """Support extent of the rectangle along a direction (from center)."""
        d = np.asarray(direction, dtype=float)
        return float(self.half[0] * abs(d[0]) + self.half[1] * abs(d[1]))


@dataclass(frozen=True)
class AgentGeometry:
    """Where an agent starts, which way it travels, and how long it is."""

    start: tuple[float, float]
    direction: tuple[float, float]
    car_length: float = 1.33

    def __post_init__(self) -> None:
        norm = math.hypot(*self.direction)
        if not math.isclose(norm, 1.0, rel_tol=0, abs_tol=1e-9):
            raise ValueError(f"direction must be a unit vector, norm={norm}")
        if self.car_length <= 0:
            raise ValueError("car_length must be positive")

    @property
    def heading(self) -> np.ndarray:
        return np.asarray(self.direction, dtype=float)


@dataclass(frozen=True)
class Motion:
    """Signed travel distance covered uniformly over ``horizon`` ticks."""

    distance: float
    horizon: int = 100

    def __post_init__(self) -> None:
        if self.horizon < 1:
            raise ValueError("horizon must be at least 1")

    @property
    def step(self) -> float:
        """Per-tick displacement magnitude (signed)."""
        return self.distance / self.horizon


@dataclass(frozen=True)
class LossParams:
    """Constants of the loss model.

    The proximity penalty compares the squared separation of the two
    agents against ``safety_margin``: separations whose square exceeds
    the margin are effectively safe, so the protected bubble has radius
    ``safety_margin ** 0.25`` — about one car length at the defaults.
    """

    safety_gain: float = 5.0
    safety_margin: float = 1.5 * 1.33**2
    task_offset: float = 0.4
    region: Rect = field(default_factory=lambda: Rect((0.0, 0.0), (1.33, 1.33)))

    def __post_init__(self) -> None:
        if self.safety_gain <= 0 or self.safety_margin <= 0:
            raise ValueError("safety_gain and safety_margin must be positive")


def unroll(motion: Motion, geometry: AgentGeometry, start: np.ndarray) -> np.ndarray:
    """States visited while executing a motion, shape (horizon+1, 2).

    Row 0 is the start state itself; row k is the state after k uniform
    steps of ``motion.step`` along the travel direction.
    """
    return unroll_batch(
        np.asarray([motion.distance]), geometry, start, motion.horizon
    )[0]


def unroll_batch(
    distances: np.ndarray,
    geometry: AgentGeometry,
    start: np.ndarray,
    horizon: int,
) -> np.ndarray:
    """Vectorized unroll: (n,) distances -> (n, horizon+1, 2) states."""
    distances = np.asarray(distances, dtype=float)
    steps = np.arange(horizon + 1, dtype=float)
    travel = np.multiply.outer(distances / horizon, steps)
    return np.asarray(start, dtype=float) + travel[..., None] * geometry.heading


def progress(position: np.ndarray, geometry: AgentGeometry, params: LossParams) -> float:
    """Signed distance already covered past the region center."""
    rel = np.asarray(position, dtype=float) - np.asarray(params.region.center)
    return float(rel @ geometry.heading)


def task_loss(trajectory: np.ndarray, geometry: AgentGeometry, params: LossParams) -> float:
    """Progress penalty of a plan: exponential in the final state's shortfall."""
    return math.exp(-progress(trajectory[-1], geometry, params) + params.task_offset)


def safety_loss(traj_i: np.ndarray, traj_j: np.ndarray, params: LossParams) -> np.ndarray:
    """Per-tick proximity penalty between two equally long state sequences.

    Zero at ticks where either agent is outside the interaction region;
    inside it, exponential in the gap between ``safety_margin`` and the
    square of the squared separation, so the penalty falls off with the
    fourth power of distance.
    """
    traj_i = np.asarray(traj_i, dtype=float)
    traj_j = np.asarray(traj_j, dtype=float)
    if traj_i.shape != traj_j.shape:
        raise ValueError("state sequences must have equal shape")
    both_in = params.region.contains(traj_i) & params.region.contains(traj_j)
    d2 = ((traj_i - traj_j) ** 2).sum(axis=-1)
    exponent = params.safety_gain * (params.safety_margin - d2**2)
    return np.where(both_in, np.exp(np.minimum(exponent, 700.0)), 0.0)


def instantaneous_loss(
    motion_i: Motion,
    motion_j: Motion,
    intent_i: float,
    state_i: np.ndarray,
    state_j: np.ndarray,
    geometry_i: AgentGeometry,
    geometry_j: AgentGeometry,
    params: LossParams,
) -> float:
    """One tick of loss for agent i at the given joint state.

    The proximity term only needs the current states; the progress term
    looks ahead to where ``motion_i`` would leave agent i.  ``motion_j``
    is part of the game form but does not enter the per-tick value.
    """
    del motion_j
    tick_safety = safety_loss(
        np.asarray([state_i], dtype=float), np.asarray([state_j], dtype=float), params
    )[0]
    traj_i = unroll(motion_i, geometry_i, state_i)
    return float(tick_safety + intent_i * task_loss(traj_i, geometry_i, params))


def feasible(
    motion: Motion,
    geometry: AgentGeometry,
    start: np.ndarray,
    bounds: Rect | None,
) -> bool:
    """True when every unrolled state stays inside the agent's bounds."""
    if bounds is None:
        return True
    states = unroll(motion, geometry, start)
    return bool(bounds.contains(states).all())


def payoff(
    motion_i: Motion,
    motion_j: Motion,
    intent_i: float,
    state_i: np.ndarray,
    state_j: np.ndarray,
    geometry_i: AgentGeometry,
    geometry_j: AgentGeometry,
    params: LossParams,
    bounds_i: Rect | None = None,
) -> float:
    """Mean per-tick loss of agent i executing ``motion_i`` against ``motion_j``.

    Safety is averaged over the horizon's tick window (indices 0..T-1 of
    the unrolled states); the progress penalty, constant across the
    window, joins at full weight.  Infeasible motions price at +inf so
    they never win an argmin.
    """
    if motion_i.horizon != motion_j.horizon:
        raise ValueError("motions must share a horizon")
    if not feasible(motion_i, geometry_i, state_i, bounds_i):
        return math.inf
    traj_i = unroll(motion_i, geometry_i, state_i)
    traj_j = unroll(motion_j, geometry_j, state_j)
    window = motion_i.horizon
    mean_safety = float(safety_loss(traj_i[:window], traj_j[:window], params).mean())
    return mean_safety + intent_i * task_loss(traj_i, geometry_i, params)


def first_action(motion: Motion, geometry: AgentGeometry) -> np.ndarray:
    """Displacement executed on the first tick of a motion."""
    return motion.step * geometry.heading
