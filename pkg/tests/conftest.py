"""Shared fixtures and the acceptance summary hook.

The acceptance tests record one verdict line per criterion; the hook
replays them in the terminal summary so the verdicts are visible even
when pytest captures stdout.
"""
from __future__ import annotations

import pytest

from gracesim.scenario import default_intersection, with_agents


def pytest_configure(config):
    config._criterion_lines = {}


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "_criterion_lines", {})
    if lines:
        terminalreporter.section("acceptance criteria")
        for number in sorted(lines):
            terminalreporter.write_line(lines[number])


@pytest.fixture
def criterion(request):
    """Record and print one acceptance verdict; returns the verdict."""

    def record(number: int, name: str, passed: bool, note: str = "") -> bool:
        suffix = f" ({note})" if note else ""
        line = f"criterion {number}: {name}: {'PASS' if passed else 'FAIL'}{suffix}"
        request.config._criterion_lines[number] = line
        print(line)
        return passed

    return record


@pytest.fixture
def base_config():
    return default_intersection()


@pytest.fixture
def quick_config():
    """Short run for tests that only need structure, not full interactions."""
    return with_agents(default_intersection(), sim_ticks=8)
