"""Command-line front end.

Each verb is a thin client of the service layer: it assembles the same
request models the HTTP routes accept, calls the shared handlers, and
writes the response artifacts to disk.  No domain logic lives here.
"""
from __future__ import annotations

import json
from pathlib import Path

import click

from .experiments import ResultTable, atomic_write, write_table
from .scenario import (
    ScenarioParseError,
    ScenarioValidationError,
    load,
    serialize,
    warnings as scenario_warnings,
)
from .service import (
    BetaSweepRequest,
    EmpathyRequest,
    MatrixRequest,
    PlotRequest,
    SimulateRequest,
    handle_beta_sweep,
    handle_empathy,
    handle_matrix,
    handle_plot,
    handle_simulate,
)

FORMATS = ("csv", "json")


def _overrides_from(scenario: str | None) -> dict:
    """The CLI ships scenario files to the handlers as override trees."""
    if scenario is None:
        return {}
    try:
        config = load(scenario)
    except (ScenarioParseError, ScenarioValidationError) as exc:
        raise click.ClickException(str(exc)) from exc
    for note in scenario_warnings(config):
        click.echo(f"warning: {note}", err=True)
    return serialize(config)


def _emit(path: Path) -> None:
    click.echo(str(path))


def _write_tables(table: ResultTable, out_dir: str, fmt: str) -> None:
    _emit(write_table(table, out_dir, fmt))


scenario_option = click.option(
    "--scenario",
    type=click.Path(exists=True, dir_okay=False),
    default=None,
    help="Scenario file (YAML/JSON); defaults to the built-in intersection.",
)
out_dir_option = click.option(
    "--out-dir",
    type=click.Path(file_okay=False),
    default=".",
    show_default=True,
    help="Directory artifacts are written into.",
)
format_option = click.option(
    "--format",
    "fmt",
    type=click.Choice(FORMATS),
    default="csv",
    show_default=True,
    help="Table serialization format.",
)


@click.group()
@click.version_option(package_name="gracesim")
def main() -> None:
    """Two-agent intersection games: inference, planning, social metrics."""


@main.command()
@scenario_option
@out_dir_option
@format_option
def simulate(scenario: str | None, out_dir: str, fmt: str) -> None:
    """Run one closed-loop simulation; write the trace and its metrics."""
    response = handle_simulate(
        SimulateRequest(overrides=_overrides_from(scenario), include_trace=True)
    )
    assert response.trace_ndjson is not None
    _emit(atomic_write(Path(out_dir) / "trace.ndjson", response.trace_ndjson))
    metrics = response.metrics.model_dump()
    if fmt == "json":
        _emit(
            atomic_write(
                Path(out_dir) / "metrics.json",
                json.dumps(metrics, sort_keys=True, indent=2) + "\n",
            )
        )
    else:
        columns = ("gracefulness", "efficiency", "right_of_way", "executed_ticks")
        table = ResultTable(
            "metrics", columns, (tuple(metrics[c] for c in columns),)
        )
        _write_tables(table, out_dir, "csv")


@main.command()
@scenario_option
@out_dir_option
@format_option
@click.option(
    "--workers",
    type=click.IntRange(min=0),
    default=0,
    show_default=True,
    help="Process pool size for independent cells (0 = run serially).",
)
def matrix(scenario: str | None, out_dir: str, fmt: str, workers: int) -> None:
    """Run every planner pairing against both opponent intents."""
    response = handle_matrix(
        MatrixRequest(overrides=_overrides_from(scenario), workers=workers)
    )
    _write_tables(response.table.to_table(), out_dir, fmt)


@main.command(name="beta-sweep")
@scenario_option
@out_dir_option
@format_option
def beta_sweep(scenario: str | None, out_dir: str, fmt: str) -> None:
    """Sweep the social planner's weight against a reactive opponent."""
    response = handle_beta_sweep(
        BetaSweepRequest(overrides=_overrides_from(scenario))
    )
    _write_tables(response.table.to_table(), out_dir, fmt)


@main.command()
@scenario_option
@out_dir_option
@format_option
def empathy(scenario: str | None, out_dir: str, fmt: str) -> None:
    """Compare empathetic and pinned-mirror inference on one scenario."""
    response = handle_empathy(EmpathyRequest(overrides=_overrides_from(scenario)))
    _write_tables(response.timeline.to_table(), out_dir, fmt)
    _write_tables(response.equilibria.to_table(), out_dir, fmt)
    _emit(
        atomic_write(
            Path(out_dir) / "empathy_summary.json",
            json.dumps(response.summary, sort_keys=True, indent=2) + "\n",
        )
    )


@main.command()
@scenario_option
@out_dir_option
@click.option(
    "--kind",
    type=click.Choice(("trace", "sweep")),
    default="trace",
    show_default=True,
    help="trace: one run's positions and motions; sweep: gracefulness vs weight.",
)
def plot(scenario: str | None, out_dir: str, kind: str) -> None:
    """Render an SVG figure for one run or the social-weight sweep."""
    response = handle_plot(
        PlotRequest(overrides=_overrides_from(scenario), kind=kind)
    )
    _emit(atomic_write(Path(out_dir) / f"plot_{kind}.svg", response.svg))


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
def serve(host: str, port: int) -> None:
    """Serve the HTTP API."""
    import uvicorn

    uvicorn.run("gracesim.service:app", host=host, port=port)


if __name__ == "__main__":
    main()
