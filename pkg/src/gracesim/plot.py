"""SVG renderings of runs and sweeps.

Figures are built straight on matplotlib's object API (no pyplot, no
global state) and returned as SVG text so callers decide where bytes
land.  The hash salt and stripped date metadata keep output stable
across rebuilds of the same data.
"""
from __future__ import annotations

import io

import matplotlib
from matplotlib.backends.backend_svg import FigureCanvasSVG
from matplotlib.figure import Figure

from .experiments import ResultTable
from .simulation import AGENTS, SimulationTrace

matplotlib.rcParams["svg.hashsalt"] = "gracesim"

_AGENT_STYLE = {
    "m": {"color": "#1f77b4", "label": "machine"},
    "h": {"color": "#d62728", "label": "human"},
}


def _render(fig: Figure) -> str:
    FigureCanvasSVG(fig)
    buf = io.StringIO()
    fig.savefig(buf, format="svg", metadata={"Date": None})
    return buf.getvalue()


def _travel_axis(trace: SimulationTrace, agent: str) -> list[float]:
    """Signed distance travelled along the agent's own heading."""
    geometry = trace.config.agent(agent).geometry()
    hx, hy = geometry.heading
    start = trace.records[0].states[agent]
    return [
        (r.states[agent][0] - start[0]) * hx + (r.states[agent][1] - start[1]) * hy
        for r in trace.records
    ]


def plot_trace(trace: SimulationTrace) -> str:
    """Two panels: progress toward/through the shared region, and motions."""
    config = trace.config
    region = config.loss.region.to_rect()
    ticks = [r.tick for r in trace.records]

    fig = Figure(figsize=(9, 6), layout="constrained")
    ax_pos, ax_mot = fig.subplots(2, 1, sharex=True)

    for agent in AGENTS:
        style = _AGENT_STYLE[agent]
        geometry = config.agent(agent).geometry()
        start = trace.records[0].states[agent]
        hx, hy = geometry.heading
        offset = -(start[0] * hx + start[1] * hy)
        half = region.extent_along(geometry.heading)
        ax_pos.axhspan(
            offset - half,
            offset + half,
            color=style["color"],
            alpha=0.08,
            lw=0,
        )
        ax_pos.plot(
            ticks,
            _travel_axis(trace, agent),
            color=style["color"],
            label=style["label"],
        )
        ax_mot.step(
            ticks,
            [r.motions[agent] for r in trace.records],
            where="post",
            color=style["color"],
            label=style["label"],
        )

    ax_pos.set_ylabel("distance along own heading")
    ax_pos.set_title("shaded: the shared region, per agent")
    ax_pos.legend(loc="upper left")
    ax_mot.set_ylabel("chosen motion")
    ax_mot.set_xlabel("tick")
    ax_mot.set_yticks(list(config.motion_candidates))
    return _render(fig)


def plot_sweep(table: ResultTable) -> str:
    """Gracefulness against social weight, right-of-way marked per point."""
    weights = table.column("social_weight")
    grace = table.column("gracefulness")
    winners = table.column("right_of_way")

    fig = Figure(figsize=(7, 4.5), layout="constrained")
    ax = fig.subplots()
    ax.plot(weights, grace, color="#444444", zorder=1)
    for agent in AGENTS:
        xs = [w for w, who in zip(weights, winners) if who == agent]
        ys = [g for g, who in zip(grace, winners) if who == agent]
        ax.scatter(
            xs,
            ys,
            color=_AGENT_STYLE[agent]["color"],
            label=f"{_AGENT_STYLE[agent]['label']} goes first",
            zorder=2,
        )
    ax.set_xlabel("social weight")
    ax.set_ylabel("gracefulness (lower is better)")
    ax.legend()
    return _render(fig)
