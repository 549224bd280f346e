"""Command-line verbs: artifacts land where asked, in the asked format."""
from __future__ import annotations

import json

import pytest
from click.testing import CliRunner

from gracesim.cli import main

runner = CliRunner()


def all_output(result) -> str:
    """stdout plus stderr, tolerant of click versions that merge them."""
    try:
        return result.output + result.stderr
    except (ValueError, AttributeError):
        return result.output


@pytest.fixture()
def tiny_scenario(tmp_path):
    path = tmp_path / "tiny.yaml"
    path.write_text("sim_ticks: 5\n")
    return str(path)


def test_simulate_writes_trace_and_metrics(tmp_path, tiny_scenario):
    result = runner.invoke(
        main,
        [
            "simulate",
            "--scenario",
            tiny_scenario,
            "--out-dir",
            str(tmp_path),
            "--format",
            "json",
        ],
    )
    assert result.exit_code == 0, result.output
    trace = (tmp_path / "trace.ndjson").read_text()
    assert len(trace.strip().splitlines()) == 6
    metrics = json.loads((tmp_path / "metrics.json").read_text())
    assert metrics["executed_ticks"] == 5


def test_simulate_csv_metrics(tmp_path, tiny_scenario):
    result = runner.invoke(
        main,
        ["simulate", "--scenario", tiny_scenario, "--out-dir", str(tmp_path)],
    )
    assert result.exit_code == 0, result.output
    lines = (tmp_path / "metrics.csv").read_text().splitlines()
    assert lines[0] == "gracefulness,efficiency,right_of_way,executed_ticks"
    assert len(lines) == 2


def test_matrix_csv(tmp_path, tiny_scenario):
    result = runner.invoke(
        main,
        ["matrix", "--scenario", tiny_scenario, "--out-dir", str(tmp_path)],
    )
    assert result.exit_code == 0, result.output
    lines = (tmp_path / "matrix.csv").read_text().splitlines()
    assert len(lines) == 19  # header + 18 cells


def test_beta_sweep_json(tmp_path, tiny_scenario):
    result = runner.invoke(
        main,
        [
            "beta-sweep",
            "--scenario",
            tiny_scenario,
            "--out-dir",
            str(tmp_path),
            "--format",
            "json",
        ],
    )
    assert result.exit_code == 0, result.output
    node = json.loads((tmp_path / "beta_sweep.json").read_text())
    assert node["name"] == "beta_sweep"
    assert len(node["rows"]) == 6


def test_empathy_writes_three_artifacts(tmp_path, tiny_scenario):
    result = runner.invoke(
        main,
        ["empathy", "--scenario", tiny_scenario, "--out-dir", str(tmp_path)],
    )
    assert result.exit_code == 0, result.output
    assert (tmp_path / "empathy_timeline.csv").exists()
    assert (tmp_path / "empathy_equilibria.csv").exists()
    summary = json.loads((tmp_path / "empathy_summary.json").read_text())
    assert summary["opponent_intent"] == 1000.0


def test_plot_writes_svg(tmp_path, tiny_scenario):
    result = runner.invoke(
        main,
        [
            "plot",
            "--scenario",
            tiny_scenario,
            "--out-dir",
            str(tmp_path),
            "--kind",
            "trace",
        ],
    )
    assert result.exit_code == 0, result.output
    assert (tmp_path / "plot_trace.svg").read_text().lstrip().startswith("<?xml")


def test_scenario_file_errors_are_reported(tmp_path):
    bad = tmp_path / "bad.yaml"
    bad.write_text("sim_ticks: 0\n")
    result = runner.invoke(
        main, ["simulate", "--scenario", str(bad), "--out-dir", str(tmp_path)]
    )
    assert result.exit_code != 0
    assert "sim_ticks" in all_output(result)


def test_undecodable_intent_warning_surfaces(tmp_path):
    scen = tmp_path / "hot.yaml"
    scen.write_text("h:\n  intent: 1.0e9\nsim_ticks: 4\n")
    result = runner.invoke(
        main,
        ["simulate", "--scenario", str(scen), "--out-dir", str(tmp_path)],
    )
    assert result.exit_code == 0, result.output
    assert "intent_candidates" in all_output(result)


def test_help_lists_all_verbs():
    result = runner.invoke(main, ["--help"])
    assert result.exit_code == 0
    for verb in ("simulate", "matrix", "beta-sweep", "empathy", "plot", "serve"):
        assert verb in result.output
