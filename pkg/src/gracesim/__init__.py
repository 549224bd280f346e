"""Two-agent intersection games with intent inference and social planning."""

__version__ = "0.1.0"

from .experiments import (
    ResultTable,
    run_beta_sweep,
    run_empathy_ablation,
    run_matrix,
)
from .game import AgentGeometry, LossParams, Motion, Rect
from .scenario import ScenarioConfig, default_intersection, load, loads
from .simulation import MetricsReport, SimulationTrace, metrics_report, run

__all__ = [
    "AgentGeometry",
    "LossParams",
    "Motion",
    "Rect",
    "ResultTable",
    "ScenarioConfig",
    "default_intersection",
    "load",
    "loads",
    "MetricsReport",
    "SimulationTrace",
    "metrics_report",
    "run",
    "run_beta_sweep",
    "run_empathy_ablation",
    "run_matrix",
    "__version__",
]
