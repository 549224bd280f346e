"""Batch experiment drivers over the two-agent intersection scenario.

Three canned studies, each reducing closed-loop runs to a flat result
table: the strategy/intent matrix (every planner pairing against a
cooperative and an aggressive opponent), the social-weight sweep (how
hard the socially-aware planner leans on the opponent's wishes), and
the empathy ablation (what one agent concludes about the other when it
assumes its own intent is already known).  Tables serialize to CSV and
to a versioned JSON envelope; unbounded efficiency is written as the
token ``"inf"`` because CSV has no native infinity and bare JSON
``Infinity`` is non-standard.
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .equilibrium import GameTable, Tolerance, nash_set
from .planning import STRATEGY_KINDS
from .scenario import ScenarioConfig, with_agents
from .simulation import (
    AGENTS,
    MetricsReport,
    SimulationTrace,
    metrics_report,
    run,
)

TABLE_SCHEMA = "gracesim/table/v1"
DEFAULT_SOCIAL_WEIGHTS = (0.05, 0.1, 0.15, 0.3, 0.5, 0.7)
DEFAULT_OPPONENT_INTENTS = (1.0, 1e9)
POINT_BELIEF_TOL = 1e-9


def _cell(value):
    """JSON/CSV-safe scalar: infinities become the string token "inf"."""
    if isinstance(value, float) and math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return value


@dataclass(frozen=True)
class ResultTable:
    """A named rectangle of results, one writer per interchange format."""

    name: str
    columns: tuple[str, ...]
    rows: tuple[tuple, ...]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.columns)
        for row in self.rows:
            writer.writerow(
                ["" if v is None else _cell(v) for v in row]
            )
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps(
            {
                "schema": TABLE_SCHEMA,
                "name": self.name,
                "columns": list(self.columns),
                "rows": [[_cell(v) for v in row] for row in self.rows],
            },
            sort_keys=True,
            indent=2,
        ) + "\n"

    def column(self, name: str) -> list:
        k = self.columns.index(name)
        return [row[k] for row in self.rows]


def atomic_write(path: str | Path, text: str) -> Path:
    """Write via a same-directory temp file so readers never see a torn file."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w") as handle:
            handle.write(text)
        umask = os.umask(0)
        os.umask(umask)
        os.chmod(tmp, 0o666 & ~umask)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise
    return path


def write_table(table: ResultTable, out_dir: str | Path, fmt: str) -> Path:
    if fmt == "csv":
        return atomic_write(Path(out_dir) / f"{table.name}.csv", table.to_csv())
    if fmt == "json":
        return atomic_write(Path(out_dir) / f"{table.name}.json", table.to_json())
    raise ValueError(f"unknown table format {fmt!r} (expected 'csv' or 'json')")


def simulate_with_report(config: ScenarioConfig) -> tuple[SimulationTrace, MetricsReport]:
    trace = run(config)
    return trace, metrics_report(trace)


# --- strategy/intent matrix ------------------------------------------------

MATRIX_COLUMNS = (
    "m_strategy",
    "h_strategy",
    "m_intent",
    "h_intent",
    "social_weight",
    "gracefulness",
    "efficiency",
    "right_of_way",
    "executed_ticks",
    "m_conflicts",
    "h_conflicts",
)


def _matrix_cell_config(
    base: ScenarioConfig,
    m_strategy: str,
    h_strategy: str,
    h_intent: float,
    social_weight: float,
) -> ScenarioConfig:
    return with_agents(
        base,
        m={"strategy": m_strategy, "social_weight": social_weight},
        h={"strategy": h_strategy, "social_weight": social_weight, "intent": h_intent},
    )


def _matrix_row(config: ScenarioConfig) -> tuple:
    report = metrics_report(run(config))
    return (
        config.m.strategy,
        config.h.strategy,
        config.m.intent,
        config.h.intent,
        config.m.social_weight,
        report.gracefulness,
        report.efficiency,
        report.right_of_way,
        report.executed_ticks,
        len(report.conflicts["m"]),
        len(report.conflicts["h"]),
    )


def run_matrix(
    base: ScenarioConfig,
    strategies: tuple[str, ...] = STRATEGY_KINDS,
    opponent_intents: tuple[float, ...] = DEFAULT_OPPONENT_INTENTS,
    social_weight: float = 0.1,
    workers: int = 0,
) -> ResultTable:
    """Metrics for every planner pairing against each opponent intent.

    Cells are independent closed-loop runs (the planning side always
    keeps its cooperative intent; only the opponent's true intent
    varies), so they may be farmed out to a process pool; row order is
    fixed regardless of scheduling.
    """
    configs = [
        _matrix_cell_config(base, ms, hs, hi, social_weight)
        for ms in strategies
        for hs in strategies
        for hi in opponent_intents
    ]
    if workers > 0:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_matrix_row, configs))
    else:
        rows = [_matrix_row(c) for c in configs]
    return ResultTable("matrix", MATRIX_COLUMNS, tuple(rows))


# --- social-weight sweep ----------------------------------------------------

SWEEP_COLUMNS = (
    "social_weight",
    "gracefulness",
    "efficiency",
    "right_of_way",
    "executed_ticks",
)


def run_beta_sweep(
    base: ScenarioConfig,
    weights: tuple[float, ...] = DEFAULT_SOCIAL_WEIGHTS,
) -> ResultTable:
    """Socially-aware planner against a reactive opponent, one row per weight."""
    rows = []
    for weight in weights:
        config = with_agents(
            base,
            m={"strategy": "social", "social_weight": weight},
            h={"strategy": "reactive"},
        )
        report = metrics_report(run(config))
        rows.append(
            (
                weight,
                report.gracefulness,
                report.efficiency,
                report.right_of_way,
                report.executed_ticks,
            )
        )
    return ResultTable("beta_sweep", SWEEP_COLUMNS, tuple(rows))


# --- empathy ablation --------------------------------------------------------

TIMELINE_COLUMNS = (
    "tick",
    "empathetic_m_motion",
    "empathetic_h_motion",
    "empathetic_aggressive_mass",
    "non_empathetic_m_motion",
    "non_empathetic_h_motion",
    "non_empathetic_aggressive_mass",
)

EQUILIBRIA_COLUMNS = ("m_intent", "h_intent", "m_motions", "h_motions")


@dataclass(frozen=True)
class EmpathyAblation:
    """Paired runs differing only in whether m decodes its own image."""

    empathetic: SimulationTrace
    non_empathetic: SimulationTrace
    timeline: ResultTable
    equilibria: ResultTable
    summary: dict


def _aggressive_mass(record, intents: tuple[float, ...]) -> float | None:
    """Mass m's belief puts on the most aggressive decodable opponent intent."""
    if not record.inference:
        return None
    marginal = record.inference["m"]["marginal"]
    target = max(intents)
    return sum(
        m for s, m in zip(marginal["support"], marginal["mass"]) if s == target
    )


def _aggressive_point_tick(trace: SimulationTrace) -> int | None:
    intents = trace.config.intent_candidates
    for record in trace.records:
        mass = _aggressive_mass(record, intents)
        if mass is not None and mass >= 1.0 - POINT_BELIEF_TOL:
            return record.tick
    return None


def _first_divergence_tick(a: SimulationTrace, b: SimulationTrace) -> int | None:
    for ra, rb in zip(a.records, b.records):
        if ra.motions != rb.motions:
            return ra.tick
    return None


def intent_pairing_equilibria(
    config: ScenarioConfig, states: dict[str, list[float]]
) -> ResultTable:
    """Equilibrium motion sets of every decodable intent pairing at given states.

    The diagnostic view the ablation turns on: which joint explanations
    of behavior exist at a moment of interest, one row per (m, h)
    intent hypothesis pair.
    """
    params = config.loss.to_params()
    geometry = {a: config.agent(a).geometry() for a in AGENTS}
    bounds = {
        a: config.agent(a).bounds.to_rect() if config.agent(a).bounds else None
        for a in AGENTS
    }
    table = GameTable(
        np.asarray(states["m"], dtype=float),
        np.asarray(states["h"], dtype=float),
        geometry["m"],
        geometry["h"],
        config.motion_candidates,
        config.motion_candidates,
        config.plan_horizon,
        params,
        bounds["m"],
        bounds["h"],
        Tolerance(config.eq_rel, config.eq_abs),
    )
    rows = []
    for ci in config.intent_candidates:
        for cj in config.intent_candidates:
            eqs = nash_set(table, ci, cj)
            rows.append(
                (
                    ci,
                    cj,
                    " ".join(str(x) for x in sorted(set(eqs.motions_i()))),
                    " ".join(str(x) for x in sorted(set(eqs.motions_j()))),
                )
            )
    return ResultTable("empathy_equilibria", EQUILIBRIA_COLUMNS, tuple(rows))


def run_empathy_ablation(base: ScenarioConfig) -> EmpathyAblation:
    """Reactive m against a covertly aggressive reactive h, twice.

    Both runs give h the most aggressive decodable intent.  The
    empathetic run lets m weigh every hypothesis about what h believes
    m's intent to be; the ablated run pins that mirror image to m's
    true intent.  The timeline pairs the two runs tick by tick; the
    equilibria table snapshots every intent pairing's equilibrium
    motion sets at the moment the runs diverge (or the first tick if
    they never do).
    """
    aggressive = max(base.intent_candidates)
    emp_cfg = with_agents(
        base,
        m={"strategy": "reactive", "empathetic": True},
        h={"strategy": "reactive", "intent": aggressive},
    )
    non_cfg = with_agents(
        base,
        m={"strategy": "reactive", "empathetic": False},
        h={"strategy": "reactive", "intent": aggressive},
    )
    emp = run(emp_cfg)
    non = run(non_cfg)

    intents = base.intent_candidates
    length = max(len(emp.records), len(non.records))
    rows = []
    for k in range(length):
        re_ = emp.records[k] if k < len(emp.records) else None
        rn = non.records[k] if k < len(non.records) else None
        rows.append(
            (
                k,
                re_.motions["m"] if re_ else None,
                re_.motions["h"] if re_ else None,
                _aggressive_mass(re_, intents) if re_ else None,
                rn.motions["m"] if rn else None,
                rn.motions["h"] if rn else None,
                _aggressive_mass(rn, intents) if rn else None,
            )
        )
    timeline = ResultTable("empathy_timeline", TIMELINE_COLUMNS, tuple(rows))

    divergence = _first_divergence_tick(emp, non)
    snapshot_tick = divergence if divergence is not None else 0
    snapshot_states = emp.records[snapshot_tick].states
    equilibria = intent_pairing_equilibria(emp_cfg, snapshot_states)

    summary = {
        "opponent_intent": aggressive,
        "first_divergence_tick": divergence,
        "empathetic": {
            "aggressive_point_tick": _aggressive_point_tick(emp),
            "metrics": metrics_report(emp).to_dict(),
        },
        "non_empathetic": {
            "aggressive_point_tick": _aggressive_point_tick(non),
            "metrics": metrics_report(non).to_dict(),
        },
        "equilibria_snapshot_tick": snapshot_tick,
    }
    return EmpathyAblation(emp, non, timeline, equilibria, summary)
