"""Closed-loop simulation of two planning agents crossing an intersection.

Each tick every agent first explains the opponent's previous action
(updating its intent belief), then commits to a fresh motion plan from
the current states; both first actions execute simultaneously.  The
trace records states, choices, beliefs and the per-tick ingredients of
the social metrics as plain JSON-ready data.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .equilibrium import GameTable, Tolerance, favored_motions
from .game import NoFeasibleMotionError, progress
from .inference import (
    BeliefState,
    MotionDistribution,
    infer_step,
    update_history,
)
from .planning import PlanContext, Strategy, plan
from .scenario import ScenarioConfig

AGENTS = ("m", "h")


class SimulationFault(Exception):
    """The run could not continue; carries the failing tick."""

    def __init__(self, message: str, tick: int) -> None:
        super().__init__(f"tick {tick}: {message}")
        self.tick = tick


@dataclass
class AgentRuntime:
    """Mutable per-agent state threaded through the run."""

    name: str
    opponent: str
    intent: float
    strategy: Strategy
    empathetic: bool
    marginal: np.ndarray
    belief: BeliefState | None = None


@dataclass(frozen=True)
class TickRecord:
    """One tick of trace, all fields JSON-plain."""

    tick: int
    states: dict
    motions: dict
    actions: dict
    inference: dict | None
    agreement: dict | None
    wanted: dict | None
    grace_increment: float

    def to_json(self) -> str:
        return json.dumps(
            {
                "tick": self.tick,
                "states": self.states,
                "motions": self.motions,
                "actions": self.actions,
                "inference": self.inference,
                "agreement": self.agreement,
                "wanted": self.wanted,
                "grace_increment": self.grace_increment,
            },
            sort_keys=True,
        )

    @classmethod
    def from_dict(cls, node: dict) -> "TickRecord":
        return cls(
            tick=node["tick"],
            states=node["states"],
            motions=node["motions"],
            actions=node["actions"],
            inference=node["inference"],
            agreement=node["agreement"],
            wanted=node["wanted"],
            grace_increment=node["grace_increment"],
        )


@dataclass(frozen=True)
class SimulationTrace:
    """Everything a run produced, serializable line by line."""

    config: ScenarioConfig
    records: list[TickRecord]

    def to_ndjson(self) -> str:
        return "\n".join(r.to_json() for r in self.records) + "\n"

    @classmethod
    def from_ndjson(cls, text: str, config: ScenarioConfig) -> "SimulationTrace":
        records = [
            TickRecord.from_dict(json.loads(line))
            for line in text.splitlines()
            if line.strip()
        ]
        return cls(config, records)


@dataclass(frozen=True)
class MetricsReport:
    """Social metrics of one run."""

    gracefulness: float
    efficiency: float
    right_of_way: str | None
    executed_ticks: int
    conflicts: dict

    def to_dict(self) -> dict:
        return {
            "gracefulness": self.gracefulness,
            "efficiency": "inf" if math.isinf(self.efficiency) else self.efficiency,
            "right_of_way": self.right_of_way,
            "executed_ticks": self.executed_ticks,
            "conflicts": self.conflicts,
        }


def _dist_dict(dist: MotionDistribution) -> dict:
    return {"support": list(dist.support), "mass": list(dist.mass)}


def _belief_dict(runtime: AgentRuntime, step_joint: np.ndarray, solution) -> dict:
    belief = runtime.belief
    assert belief is not None
    return {
        "marginal": {
            "support": list(belief.opponent_support),
            "mass": list(belief.marginal),
        },
        "joint": {
            "mirrored": list(belief.mirrored_support),
            "opponent": list(belief.opponent_support),
            "mass": [list(row) for row in belief.joint.tolist()],
        },
        "step_joint": [list(row) for row in step_joint.tolist()],
        "conflict": belief.conflict,
        "solution": {
            "pairs": [list(p) for p in solution.pairs],
            "residual": solution.residual,
        },
        "opponent_motions": _dist_dict(belief.opponent_motions),
        "expected_self": _dist_dict(belief.expected_self),
    }


def wanted_ground_truth(
    table_mh: GameTable, intent_m: float, intent_h: float
) -> MotionDistribution | None:
    """What the h agent actually wants m to do, given both true intents.

    Uniform over the m-motions of the equilibria h likes best in the game
    parameterized by the agents' true intents: the evaluation-side ground
    truth, deliberately independent of what either agent believes.
    """
    favored = favored_motions(table_mh, intent_m, intent_h)
    if not favored.motions:
        return None
    share = 1.0 / len(favored.motions)
    mass = tuple(
        share if k in favored.indices else 0.0
        for k in range(len(table_mh.candidates_i))
    )
    return MotionDistribution(table_mh.candidates_i, mass)


def _grace_increment(
    wanted: MotionDistribution | None, chosen_m: float, horizon: int
) -> float:
    """Expected squared deviation of m's executed action from the wanted one."""
    if wanted is None:
        return 0.0
    deltas = (np.asarray(wanted.support) - chosen_m) / horizon
    return float((deltas**2) @ np.asarray(wanted.mass))


def _crossing_threshold(config: ScenarioConfig, name: str) -> float:
    agent = config.agent(name)
    region = config.loss.region.to_rect()
    heading = agent.geometry().heading
    return region.extent_along(heading) + agent.car_length


def run(config: ScenarioConfig) -> SimulationTrace:
    """Simulate the scenario until both agents cross or ticks run out."""
    params = config.loss.to_params()
    tol = Tolerance(config.eq_rel, config.eq_abs)
    residual_tol = Tolerance(config.residual_rel, config.residual_abs)
    candidates = config.motion_candidates
    intents = config.intent_candidates
    geometry = {a: config.agent(a).geometry() for a in AGENTS}
    bounds = {
        a: config.agent(a).bounds.to_rect() if config.agent(a).bounds else None
        for a in AGENTS
    }
    thresholds = {a: _crossing_threshold(config, a) for a in AGENTS}

    runtimes = {
        a: AgentRuntime(
            name=a,
            opponent="h" if a == "m" else "m",
            intent=config.agent(a).intent,
            strategy=Strategy(config.agent(a).strategy, config.agent(a).social_weight),
            empathetic=config.agent(a).empathetic,
            marginal=np.full(len(intents), 1.0 / len(intents)),
        )
        for a in AGENTS
    }

    def make_table(states: dict) -> GameTable:
        return GameTable(
            states["m"],
            states["h"],
            geometry["m"],
            geometry["h"],
            candidates,
            candidates,
            config.plan_horizon,
            params,
            bounds["m"],
            bounds["h"],
            tol,
        )

    states = {a: np.asarray(config.agent(a).start, dtype=float) for a in AGENTS}
    motions = {a: float(config.initial_motion) for a in AGENTS}
    actions = {
        a: (motions[a] / config.plan_horizon) * geometry[a].heading for a in AGENTS
    }

    table_prev = make_table(states)
    wanted0 = wanted_ground_truth(
        table_prev, runtimes["m"].intent, runtimes["h"].intent
    )
    records = [
        TickRecord(
            tick=0,
            states={a: states[a].tolist() for a in AGENTS},
            motions=dict(motions),
            actions={a: actions[a].tolist() for a in AGENTS},
            inference=None,
            agreement=None,
            wanted=_dist_dict(wanted0) if wanted0 else None,
            grace_increment=_grace_increment(
                wanted0, motions["m"], config.plan_horizon
            ),
        )
    ]

    for tick in range(1, config.sim_ticks + 1):
        new_states = {a: states[a] + actions[a] for a in AGENTS}
        table_cur = make_table(new_states)

        step_views: dict[str, tuple] = {}
        chosen: dict[str, float] = {}
        for a in AGENTS:
            rt = runtimes[a]
            oriented_prev = table_prev if a == "m" else table_prev.swapped()
            oriented_cur = table_cur if a == "m" else table_cur.swapped()
            mirrored = intents if rt.empathetic else (rt.intent,)
            try:
                step = infer_step(
                    oriented_prev,
                    actions[rt.opponent],
                    mirrored,
                    intents,
                    config.tie_rule,
                    residual_tol,
                )
                rt.belief = update_history(rt.marginal, step)
                rt.marginal = np.asarray(rt.belief.marginal)
                ctx = PlanContext(
                    oriented_cur,
                    rt.intent,
                    rt.belief,
                    config.grace_metric,
                    config.grace_gain,
                )
                chosen[a] = plan(ctx, rt.strategy)
            except NoFeasibleMotionError as exc:
                raise SimulationFault(str(exc), tick) from exc
            step_views[a] = (step, rt.belief)

        agreement: dict[str, dict[str, bool]] = {}
        for a in AGENTS:
            rt = runtimes[a]
            other = runtimes[rt.opponent]
            assert rt.belief is not None and other.belief is not None
            agreement[a] = {
                "self": rt.belief.expected_self.point_mass() == chosen[a],
                "watched": other.belief.opponent_motions.point_mass() == chosen[a],
            }

        states = new_states
        motions = chosen
        actions = {
            a: (motions[a] / config.plan_horizon) * geometry[a].heading
            for a in AGENTS
        }
        wanted = wanted_ground_truth(
            table_cur, runtimes["m"].intent, runtimes["h"].intent
        )
        records.append(
            TickRecord(
                tick=tick,
                states={a: states[a].tolist() for a in AGENTS},
                motions=dict(motions),
                actions={a: actions[a].tolist() for a in AGENTS},
                inference={
                    a: _belief_dict(runtimes[a], step_views[a][0].joint, step_views[a][0].solution)
                    for a in AGENTS
                },
                agreement=agreement,
                wanted=_dist_dict(wanted) if wanted else None,
                grace_increment=_grace_increment(
                    wanted, motions["m"], config.plan_horizon
                ),
            )
        )
        table_prev = table_cur

        crossed = all(
            progress(states[a], geometry[a], params) > thresholds[a] for a in AGENTS
        )
        if crossed:
            break

    return SimulationTrace(config, records)


def gracefulness(trace: SimulationTrace) -> float:
    """Accumulated deviation of m's actions from what h wanted of them."""
    return float(sum(r.grace_increment for r in trace.records))


def efficiency(trace: SimulationTrace) -> float:
    """First tick whose beliefs correctly foretold both next actions.

    Agreement holds at tick t when the motion belief each agent carried
    out of tick t's observation is a point mass on exactly the motion
    the opponent then picks at tick t+1, in both directions at once.
    The belief a record stores was formed from the previous tick's
    observation, so the record at tick t+1 carries the agreement flags
    for tick t.  Returns +inf when no tick qualifies.
    """
    for record in trace.records:
        if not record.agreement:
            continue
        if all(record.agreement[a]["watched"] for a in AGENTS):
            return float(record.tick - 1)
    return math.inf


def right_of_way(trace: SimulationTrace) -> str | None:
    """Which agent first carried its position into the interaction region.

    Claiming the region is what settles who goes first, so the winner is
    the agent that enters strictly ahead of the other; a same-tick entry
    with identical penetration depth counts as unresolved (None).
    """
    config = trace.config
    params = config.loss.to_params()
    geometry = {a: config.agent(a).geometry() for a in AGENTS}
    margin = 1e-9
    thresholds = {
        a: -params.region.extent_along(geometry[a].heading) for a in AGENTS
    }
    for record in trace.records:
        entered = sorted(
            (
                (p - thresholds[a], a)
                for a in AGENTS
                if (p := progress(np.asarray(record.states[a]), geometry[a], params))
                > thresholds[a] + margin
            ),
            key=lambda pair: -pair[0],
        )
        if not entered:
            continue
        if len(entered) == 1 or entered[0][0] > entered[1][0] + margin:
            return entered[0][1]
        return None
    return None


def conflict_ticks(trace: SimulationTrace) -> dict:
    """Ticks where each agent's belief history had to reset."""
    out: dict[str, list[int]] = {a: [] for a in AGENTS}
    for record in trace.records:
        if not record.inference:
            continue
        for a in AGENTS:
            if record.inference[a]["conflict"]:
                out[a].append(record.tick)
    return out


def metrics_report(trace: SimulationTrace) -> MetricsReport:
    return MetricsReport(
        gracefulness=gracefulness(trace),
        efficiency=efficiency(trace),
        right_of_way=right_of_way(trace),
        executed_ticks=len(trace.records) - 1,
        conflicts=conflict_ticks(trace),
    )
