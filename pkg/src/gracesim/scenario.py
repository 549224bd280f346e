"""Scenario configuration: defaults, YAML parsing, validation.

A scenario file is a key-value tree that overrides the default
intersection setup; an empty file reproduces the defaults exactly.
Unknown keys are rejected so typos fail loudly instead of silently
running the default.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import yaml

from .game import AgentGeometry, LossParams, Rect

TIE_RULES = ("strict", "expected", "charitable", "smallest")
GRACE_METRICS = ("scalar", "sequence", "trajectory", "accumulated")
STRATEGIES = ("reactive", "proactive", "social")

CAR_LENGTH = 1.33


class ScenarioParseError(Exception):
    """The scenario text is not a well-formed key-value tree."""


class ScenarioValidationError(Exception):
    """The scenario tree violates a structural invariant."""


@dataclass(frozen=True)
class RectConfig:
    center: tuple[float, float] = (0.0, 0.0)
    half: tuple[float, float] = (1.33, 1.33)

    def to_rect(self) -> Rect:
        return Rect(tuple(self.center), tuple(self.half))


@dataclass(frozen=True)
class LossConfig:
    safety_gain: float = 5.0
    safety_margin: float = 1.5 * CAR_LENGTH**2
    task_offset: float = 0.4
    region: RectConfig = field(default_factory=RectConfig)

    def to_params(self) -> LossParams:
        return LossParams(
            safety_gain=self.safety_gain,
            safety_margin=self.safety_margin,
            task_offset=self.task_offset,
            region=self.region.to_rect(),
        )


@dataclass(frozen=True)
class AgentConfig:
    start: tuple[float, float]
    direction: tuple[float, float]
    intent: float = 1.0
    strategy: str = "reactive"
    social_weight: float = 0.1
    empathetic: bool = True
    car_length: float = CAR_LENGTH
    bounds: RectConfig | None = None

    def geometry(self) -> AgentGeometry:
        return AgentGeometry(
            start=tuple(self.start),
            direction=tuple(self.direction),
            car_length=self.car_length,
        )


@dataclass(frozen=True)
class ScenarioConfig:
    name: str = "intersection"
    m: AgentConfig = field(
        default_factory=lambda: AgentConfig(start=(0.0, -2.0), direction=(0.0, 1.0))
    )
    h: AgentConfig = field(
        default_factory=lambda: AgentConfig(start=(2.0, 0.0), direction=(-1.0, 0.0))
    )
    motion_candidates: tuple[float, ...] = (-1.0, 0.0, 1.0, 2.0, 3.0, 4.0, 5.0)
    intent_candidates: tuple[float, ...] = (1.0, 1000.0)
    plan_horizon: int = 100
    sim_ticks: int = 100
    initial_motion: float = 5.0
    loss: LossConfig = field(default_factory=LossConfig)
    grace_metric: str = "scalar"
    grace_gain: float = 3.8
    tie_rule: str = "strict"
    eq_rel: float = 1e-9
    eq_abs: float = 1e-12
    residual_rel: float = 1e-9
    residual_abs: float = 1e-18

    def agent(self, name: str) -> AgentConfig:
        if name == "m":
            return self.m
        if name == "h":
            return self.h
        raise KeyError(name)


def default_intersection() -> ScenarioConfig:
    """The canonical two-car crossing setup used throughout."""
    return ScenarioConfig()


def serialize(config: ScenarioConfig) -> dict:
    """Plain nested-dict form, suitable for YAML or JSON dumping."""
    out = asdict(config)

    def tuples_to_lists(node):
        if isinstance(node, dict):
            return {k: tuples_to_lists(v) for k, v in node.items()}
        if isinstance(node, tuple):
            return [tuples_to_lists(v) for v in node]
        return node

    return tuples_to_lists(out)


def _merge(base: dict, overrides: dict, path: str = "") -> dict:
    merged = dict(base)
    for key, value in overrides.items():
        where = f"{path}.{key}" if path else key
        if key not in base:
            raise ScenarioValidationError(f"unknown scenario key: {where}")
        if isinstance(base[key], dict) and isinstance(value, dict):
            merged[key] = _merge(base[key], value, where)
        else:
            merged[key] = value
    return merged


def _rect_from(node, where: str) -> RectConfig:
    if not isinstance(node, dict):
        raise ScenarioValidationError(f"{where} must be a mapping")
    allowed = {"center", "half"}
    unknown = set(node) - allowed
    if unknown:
        raise ScenarioValidationError(f"unknown keys under {where}: {sorted(unknown)}")
    base = RectConfig()
    center = node.get("center", list(base.center))
    half = node.get("half", list(base.half))
    return RectConfig(tuple(float(v) for v in center), tuple(float(v) for v in half))


def from_dict(tree: dict) -> ScenarioConfig:
    """Build a config from a full nested dict (as produced by serialize)."""
    base = serialize(default_intersection())
    merged = _merge(base, tree) if tree else base

    def agent_from(node: dict, where: str) -> AgentConfig:
        bounds = node.get("bounds")
        return AgentConfig(
            start=tuple(float(v) for v in node["start"]),
            direction=tuple(float(v) for v in node["direction"]),
            intent=float(node["intent"]),
            strategy=str(node["strategy"]),
            social_weight=float(node["social_weight"]),
            empathetic=bool(node["empathetic"]),
            car_length=float(node["car_length"]),
            bounds=_rect_from(bounds, f"{where}.bounds") if bounds else None,
        )

    loss_node = merged["loss"]
    loss = LossConfig(
        safety_gain=float(loss_node["safety_gain"]),
        safety_margin=float(loss_node["safety_margin"]),
        task_offset=float(loss_node["task_offset"]),
        region=_rect_from(loss_node["region"], "loss.region"),
    )
    return ScenarioConfig(
        name=str(merged["name"]),
        m=agent_from(merged["m"], "m"),
        h=agent_from(merged["h"], "h"),
        motion_candidates=tuple(float(v) for v in merged["motion_candidates"]),
        intent_candidates=tuple(float(v) for v in merged["intent_candidates"]),
        plan_horizon=int(merged["plan_horizon"]),
        sim_ticks=int(merged["sim_ticks"]),
        initial_motion=float(merged["initial_motion"]),
        loss=loss,
        grace_metric=str(merged["grace_metric"]),
        grace_gain=float(merged["grace_gain"]),
        tie_rule=str(merged["tie_rule"]),
        eq_rel=float(merged["eq_rel"]),
        eq_abs=float(merged["eq_abs"]),
        residual_rel=float(merged["residual_rel"]),
        residual_abs=float(merged["residual_abs"]),
    )


def apply_overrides(config: ScenarioConfig, overrides: dict) -> ScenarioConfig:
    """A new config with a nested override tree folded in."""
    if not overrides:
        return config
    merged = _merge(serialize(config), overrides)
    return from_dict(merged)


def loads(text: str) -> ScenarioConfig:
    """Parse scenario text (YAML, of which JSON is a subset)."""
    try:
        tree = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ScenarioParseError(f"scenario is not valid YAML: {exc}") from exc
    if tree is None:
        tree = {}
    if not isinstance(tree, dict):
        raise ScenarioParseError("scenario must be a mapping at the top level")
    config = from_dict(tree)
    problems = validate(config)
    if problems:
        raise ScenarioValidationError("; ".join(problems))
    return config


def load(path: str | Path) -> ScenarioConfig:
    return loads(Path(path).read_text())


def validate(config: ScenarioConfig) -> list[str]:
    """All structural violations, empty iff the scenario is usable."""
    problems: list[str] = []
    if not config.motion_candidates:
        problems.append("motion_candidates must not be empty")
    if len(set(config.motion_candidates)) != len(config.motion_candidates):
        problems.append("motion_candidates must be distinct")
    if list(config.motion_candidates) != sorted(config.motion_candidates):
        problems.append("motion_candidates must be ascending")
    if not config.intent_candidates:
        problems.append("intent_candidates must not be empty")
    if any(c <= 0 for c in config.intent_candidates):
        problems.append("intent_candidates must be positive")
    if config.plan_horizon < 1:
        problems.append("plan_horizon must be at least 1")
    if config.sim_ticks < 1:
        problems.append("sim_ticks must be at least 1")
    if config.loss.safety_gain <= 0:
        problems.append("loss.safety_gain must be positive")
    if config.loss.safety_margin <= 0:
        problems.append("loss.safety_margin must be positive")
    if any(h <= 0 for h in config.loss.region.half):
        problems.append("loss.region.half must be positive")
    if config.grace_metric not in GRACE_METRICS:
        problems.append(f"grace_metric must be one of {GRACE_METRICS}")
    if config.grace_gain <= 0:
        problems.append("grace_gain must be positive")
    if config.tie_rule not in TIE_RULES:
        problems.append(f"tie_rule must be one of {TIE_RULES}")
    for label in ("m", "h"):
        agent = config.agent(label)
        if agent.intent <= 0:
            problems.append(f"{label}.intent must be positive")
        if agent.strategy not in STRATEGIES:
            problems.append(f"{label}.strategy must be one of {STRATEGIES}")
        if agent.social_weight < 0:
            problems.append(f"{label}.social_weight must be non-negative")
        if agent.car_length <= 0:
            problems.append(f"{label}.car_length must be positive")
        norm = math.hypot(*agent.direction)
        if not math.isclose(norm, 1.0, rel_tol=0, abs_tol=1e-9):
            problems.append(f"{label}.direction must be a unit vector")
        if not all(math.isfinite(v) for v in agent.start):
            problems.append(f"{label}.start must be finite")
    for tol_name in ("eq_rel", "eq_abs", "residual_rel", "residual_abs"):
        if getattr(config, tol_name) < 0:
            problems.append(f"{tol_name} must be non-negative")
    return problems


def warnings(config: ScenarioConfig) -> list[str]:
    """Suspicious but permitted settings, for surfacing to users."""
    notes: list[str] = []
    for label in ("m", "h"):
        agent = config.agent(label)
        if agent.intent not in config.intent_candidates:
            notes.append(
                f"{label}.intent {agent.intent} is outside intent_candidates; "
                "the opponent can never decode it exactly"
            )
    return notes


def with_agents(
    config: ScenarioConfig,
    m: dict | None = None,
    h: dict | None = None,
    **top_level,
) -> ScenarioConfig:
    """Convenience override builder used by the experiment drivers."""
    overrides: dict = dict(top_level)
    if m:
        overrides["m"] = m
    if h:
        overrides["h"] = h
    return apply_overrides(config, overrides)
