"""HTTP face of the simulator.

Thin pydantic envelopes over the engine: every route validates its
request model, folds scenario overrides onto the default intersection,
and delegates to a handler function.  The handlers are plain functions
so in-process callers (the command-line tool, tests) can use them
directly with the exact request/response types the wire carries.
"""
from __future__ import annotations

import json
from typing import Literal

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, ConfigDict, Field

from . import __version__
from .experiments import (
    DEFAULT_OPPONENT_INTENTS,
    DEFAULT_SOCIAL_WEIGHTS,
    TABLE_SCHEMA,
    ResultTable,
    run_beta_sweep,
    run_empathy_ablation,
    run_matrix,
    simulate_with_report,
)
from .plot import plot_sweep, plot_trace
from .scenario import (
    ScenarioConfig,
    ScenarioParseError,
    ScenarioValidationError,
    apply_overrides,
    default_intersection,
    serialize,
    validate,
)
from .simulation import MetricsReport


def build_config(overrides: dict | None) -> ScenarioConfig:
    """Default intersection with an override tree folded in, validated."""
    config = default_intersection()
    if overrides:
        config = apply_overrides(config, overrides)
    problems = validate(config)
    if problems:
        raise ScenarioValidationError("; ".join(problems))
    return config


class HealthResponse(BaseModel):
    status: Literal["ok"] = "ok"
    version: str = __version__


class ScenarioResponse(BaseModel):
    scenario: dict


class MetricsModel(BaseModel):
    gracefulness: float
    efficiency: float | str
    right_of_way: str | None
    executed_ticks: int
    conflicts: dict[str, list[int]]

    @classmethod
    def from_report(cls, report: MetricsReport) -> "MetricsModel":
        return cls(**report.to_dict())


class TableModel(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    envelope: str = Field(alias="schema", default=TABLE_SCHEMA)
    name: str
    columns: list[str]
    rows: list[list]

    @classmethod
    def from_table(cls, table: ResultTable) -> "TableModel":
        return cls(**json.loads(table.to_json()))

    def to_table(self) -> ResultTable:
        return ResultTable(
            self.name, tuple(self.columns), tuple(tuple(r) for r in self.rows)
        )


class SimulateRequest(BaseModel):
    overrides: dict = Field(default_factory=dict)
    include_trace: bool = True


class SimulateResponse(BaseModel):
    metrics: MetricsModel
    trace_ndjson: str | None
    scenario: dict


class MatrixRequest(BaseModel):
    overrides: dict = Field(default_factory=dict)
    social_weight: float = 0.1
    opponent_intents: list[float] = Field(
        default_factory=lambda: list(DEFAULT_OPPONENT_INTENTS)
    )
    workers: int = Field(default=0, ge=0)


class BetaSweepRequest(BaseModel):
    overrides: dict = Field(default_factory=dict)
    weights: list[float] = Field(
        default_factory=lambda: list(DEFAULT_SOCIAL_WEIGHTS)
    )


class TableResponse(BaseModel):
    table: TableModel


class EmpathyRequest(BaseModel):
    overrides: dict = Field(default_factory=dict)


class EmpathyResponse(BaseModel):
    summary: dict
    timeline: TableModel
    equilibria: TableModel


class PlotRequest(BaseModel):
    overrides: dict = Field(default_factory=dict)
    kind: Literal["trace", "sweep"] = "trace"


class PlotResponse(BaseModel):
    kind: str
    svg: str


def handle_scenario_default() -> ScenarioResponse:
    return ScenarioResponse(scenario=serialize(default_intersection()))


def handle_simulate(request: SimulateRequest) -> SimulateResponse:
    config = build_config(request.overrides)
    trace, report = simulate_with_report(config)
    return SimulateResponse(
        metrics=MetricsModel.from_report(report),
        trace_ndjson=trace.to_ndjson() if request.include_trace else None,
        scenario=serialize(config),
    )


def handle_matrix(request: MatrixRequest) -> TableResponse:
    config = build_config(request.overrides)
    table = run_matrix(
        config,
        opponent_intents=tuple(request.opponent_intents),
        social_weight=request.social_weight,
        workers=request.workers,
    )
    return TableResponse(table=TableModel.from_table(table))


def handle_beta_sweep(request: BetaSweepRequest) -> TableResponse:
    config = build_config(request.overrides)
    table = run_beta_sweep(config, weights=tuple(request.weights))
    return TableResponse(table=TableModel.from_table(table))


def handle_empathy(request: EmpathyRequest) -> EmpathyResponse:
    config = build_config(request.overrides)
    result = run_empathy_ablation(config)
    return EmpathyResponse(
        summary=result.summary,
        timeline=TableModel.from_table(result.timeline),
        equilibria=TableModel.from_table(result.equilibria),
    )


def handle_plot(request: PlotRequest) -> PlotResponse:
    config = build_config(request.overrides)
    if request.kind == "trace":
        trace, _ = simulate_with_report(config)
        svg = plot_trace(trace)
    else:
        svg = plot_sweep(run_beta_sweep(config))
    return PlotResponse(kind=request.kind, svg=svg)


app = FastAPI(
    title="gracesim",
    version=__version__,
    description="Two-agent intersection games: intent inference, social planning, metrics.",
)


def _guarded(handler, request):
    try:
        return handler(request) if request is not None else handler()
    except (ScenarioParseError, ScenarioValidationError) as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc


@app.get("/health", response_model=HealthResponse)
def health() -> HealthResponse:
    return HealthResponse()


@app.get("/scenario/default", response_model=ScenarioResponse)
def scenario_default() -> ScenarioResponse:
    return handle_scenario_default()


@app.post("/simulate", response_model=SimulateResponse)
def simulate(request: SimulateRequest) -> SimulateResponse:
    return _guarded(handle_simulate, request)


@app.post("/matrix", response_model=TableResponse)
def matrix(request: MatrixRequest) -> TableResponse:
    return _guarded(handle_matrix, request)


@app.post("/beta-sweep", response_model=TableResponse)
def beta_sweep(request: BetaSweepRequest) -> TableResponse:
    return _guarded(handle_beta_sweep, request)


@app.post("/empathy", response_model=EmpathyResponse)
def empathy(request: EmpathyRequest) -> EmpathyResponse:
    return _guarded(handle_empathy, request)


@app.post("/plot", response_model=PlotResponse)
def plot(request: PlotRequest) -> PlotResponse:
    return _guarded(handle_plot, request)
