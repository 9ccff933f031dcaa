"""Scenario files: a single YAML document binding a world, mode profiles
with their rule strings, planner knobs, and the scripted event schedule."""

from __future__ import annotations

import os
from dataclasses import dataclass, field, fields
from typing import Any, Mapping, Optional, Sequence

import numpy as np
import yaml

from .errors import SpecSyntaxError, ValidationError
from .planner import PlannerConfig, _derive_seed
from .rules import Rule, parse_rule
from .runtime import DisturbanceModel, ModeProfile, validate_mode_strictness
from .schema import base_schema
from .semantic_map import CostVector
from .world import WorldModel

SCENARIO_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class ModeSwitchEvent:
    tick: int
    target: str

    def __post_init__(self) -> None:
        if self.tick < 0:
            raise ValidationError("mode switch tick must be nonnegative")


@dataclass(frozen=True, eq=False)
class Scenario:
    """Validated scenario: world, modes, planner config, events, seeds."""

    name: str
    world_ref: str
    world: WorldModel
    dt: float
    start: tuple[float, float]
    goal: tuple[float, float]
    modes: Mapping[str, ModeProfile]
    initial_mode: str
    planner: PlannerConfig
    cruise_explicit: bool
    mode_switches: tuple[ModeSwitchEvent, ...] = ()
    disturbance_schedule: tuple[tuple[int, int, float, float], ...] = ()
    jitter_kph: float = 0.0
    trials: int = 1
    master_seed: int = 0
    max_ticks: int = 2000
    t0: float = 0.0
    initial_battery: float = 1.0
    battery_drain_per_tick: float = 0.0
    auto_low_battery_threshold: Optional[float] = None
    segmentation_noise: float = 0.0
    confusion: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        if self.dt <= 0:
            raise ValidationError("dt must be positive")
        if self.trials < 1:
            raise ValidationError("trial count must be at least 1")
        if self.max_ticks < 0:
            raise ValidationError("tick budget must be nonnegative")
        if self.initial_mode not in self.modes:
            raise ValidationError(f"initial mode {self.initial_mode!r} is not defined")
        for event in self.mode_switches:
            if event.target not in self.modes:
                raise ValidationError(f"mode switch targets unknown mode {event.target!r}")
        if not self.world.in_bounds(*self.start):
            raise ValidationError("start position lies outside the world")
        if not self.world.in_bounds(*self.goal):
            raise ValidationError("goal position lies outside the world")
        validate_mode_strictness(self.modes)

    def disturbance_for(self, trial_seed: int) -> DisturbanceModel:
        return DisturbanceModel(
            schedule=self.disturbance_schedule,
            jitter_kph=self.jitter_kph,
            seed=_derive_seed(trial_seed, "disturbance"),
        )

    def to_dict(self) -> dict[str, Any]:
        doc: dict[str, Any] = {
            "version": SCENARIO_SCHEMA_VERSION,
            "name": self.name,
            "world": self.world_ref,
            "dt": self.dt,
            "start": [self.start[0], self.start[1]],
            "goal": [self.goal[0], self.goal[1]],
            "initial_mode": self.initial_mode,
            "trials": self.trials,
            "seed": self.master_seed,
            "max_ticks": self.max_ticks,
            "planner": self._planner_dict(),
            "modes": {name: _mode_to_dict(mode) for name, mode in self.modes.items()},
        }
        events: dict[str, Any] = {}
        if self.mode_switches:
            events["mode_switches"] = [
                {"tick": e.tick, "target": e.target} for e in self.mode_switches
            ]
        if self.disturbance_schedule:
            events["disturbances"] = [
                {
                    "first_tick": lo,
                    "last_tick": hi,
                    "speed_offset_kph": dv,
                    "advance_offset_m": dx,
                }
                for lo, hi, dv, dx in self.disturbance_schedule
            ]
        if self.jitter_kph:
            events["jitter_kph"] = self.jitter_kph
        if events:
            doc["events"] = events
        battery: dict[str, Any] = {}
        if self.initial_battery != 1.0:
            battery["initial"] = self.initial_battery
        if self.battery_drain_per_tick:
            battery["drain_per_tick"] = self.battery_drain_per_tick
        if self.auto_low_battery_threshold is not None:
            battery["auto_switch_threshold"] = self.auto_low_battery_threshold
        if battery:
            doc["battery"] = battery
        seg: dict[str, Any] = {}
        if self.segmentation_noise:
            seg["noise"] = self.segmentation_noise
        if self.confusion is not None:
            seg["confusion"] = [[float(v) for v in row] for row in self.confusion]
        if seg:
            doc["segmentation"] = seg
        if self.t0:
            doc["t0"] = self.t0
        return doc

    def _planner_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {}
        defaults = PlannerConfig()
        for spec in fields(PlannerConfig):
            value = getattr(self.planner, spec.name)
            if spec.name == "cruise_speed_kph" and not self.cruise_explicit:
                continue
            if value != getattr(defaults, spec.name):
                out[spec.name] = value
        return out

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Scenario):
            return NotImplemented
        if self.to_dict() != other.to_dict():
            return False
        return (
            self.world.labels == other.world.labels
            and self.world.resolution == other.world.resolution
            and np.array_equal(self.world.grid, other.world.grid)
        )


def _mode_to_dict(mode: ModeProfile) -> dict[str, Any]:
    return {
        "speed_limit_kph": mode.speed_limit_kph,
        "clearance_margin_m": mode.clearance_margin,
        "costs": {
            label: float(cost)
            for label, cost in zip(mode.cost_vector.labels, mode.cost_vector.costs)
        },
        "rules": [
            {
                "id": rule.rule_id,
                "description": rule.description,
                "formula": rule.text,
                **({"threshold": rule.threshold} if rule.threshold else {}),
            }
            for rule in mode.rules
        ],
    }


def _require(data: Mapping[str, Any], key: str, context: str) -> Any:
    if key not in data:
        raise ValidationError(f"{context}: missing required field {key!r}")
    return data[key]


def _parse_mode(name: str, data: Mapping[str, Any], world: WorldModel) -> ModeProfile:
    context = f"mode {name!r}"
    if not isinstance(data, Mapping):
        raise ValidationError(f"{context}: expected a mapping")
    schema = base_schema(world.labels)
    costs_raw = _require(data, "costs", context)
    cost_vector = CostVector.from_mapping(costs_raw, world.labels)
    rules: list[Rule] = []
    for entry in _require(data, "rules", context):
        rule_id = str(_require(entry, "id", context))
        formula_text = str(_require(entry, "formula", f"{context} rule {rule_id!r}"))
        try:
            rule = parse_rule(
                rule_id,
                formula_text,
                schema,
                threshold=float(entry.get("threshold", 0.0)),
                description=str(entry.get("description", "")),
            )
        except SpecSyntaxError as exc:
            wrapped = SpecSyntaxError(f"{context} rule {rule_id!r}: {exc.args[0]}")
            wrapped.text = getattr(exc, "text", formula_text)
            wrapped.pos = getattr(exc, "pos", None)
            raise wrapped from exc
        rules.append(rule)
    return ModeProfile(
        name=name,
        rules=tuple(rules),
        cost_vector=cost_vector,
        clearance_margin=float(_require(data, "clearance_margin_m", context)),
        speed_limit_kph=float(_require(data, "speed_limit_kph", context)),
    )


def _parse_planner(data: Mapping[str, Any]) -> tuple[PlannerConfig, bool]:
    valid = {spec.name for spec in fields(PlannerConfig)}
    unknown = set(data) - valid
    if unknown:
        raise ValidationError(f"planner: unknown fields {sorted(unknown)}")
    return PlannerConfig(**data), "cruise_speed_kph" in data


def _parse_point(value: Any, label: str) -> tuple[float, float]:
    if not isinstance(value, Sequence) or len(value) != 2:
        raise ValidationError(f"{label} must be a [x, y] pair")
    return float(value[0]), float(value[1])


def scenario_from_dict(doc: Mapping[str, Any], base_dir: str = ".") -> Scenario:
    version = doc.get("version", SCENARIO_SCHEMA_VERSION)
    if version != SCENARIO_SCHEMA_VERSION:
        raise ValidationError(f"unsupported scenario version {version!r}")
    name = str(_require(doc, "name", "scenario"))
    world_ref = str(_require(doc, "world", "scenario"))
    world_path = world_ref
    if not os.path.isabs(world_path):
        world_path = os.path.join(base_dir, world_path)
    if not os.path.exists(world_path):
        raise ValidationError(f"world file not found: {world_path}")
    world = WorldModel.from_file(world_path)

    modes_raw = _require(doc, "modes", "scenario")
    if not isinstance(modes_raw, Mapping) or not modes_raw:
        raise ValidationError("scenario: modes must be a non-empty mapping")
    modes = {
        str(mode_name): _parse_mode(str(mode_name), mode_data, world)
        for mode_name, mode_data in modes_raw.items()
    }

    planner, cruise_explicit = _parse_planner(doc.get("planner", {}) or {})

    events = doc.get("events", {}) or {}
    switches = tuple(
        ModeSwitchEvent(tick=int(_require(e, "tick", "mode switch")),
                        target=str(_require(e, "target", "mode switch")))
        for e in events.get("mode_switches", [])
    )
    schedule = tuple(
        (
            int(_require(e, "first_tick", "disturbance")),
            int(e.get("last_tick", e["first_tick"])),
            float(e.get("speed_offset_kph", 0.0)),
            float(e.get("advance_offset_m", 0.0)),
        )
        for e in events.get("disturbances", [])
    )

    battery = doc.get("battery", {}) or {}
    seg = doc.get("segmentation", {}) or {}
    confusion = None
    if "confusion" in seg:
        confusion = np.asarray(seg["confusion"], dtype=np.float64)

    return Scenario(
        name=name,
        world_ref=world_ref,
        world=world,
        dt=float(_require(doc, "dt", "scenario")),
        start=_parse_point(_require(doc, "start", "scenario"), "start"),
        goal=_parse_point(_require(doc, "goal", "scenario"), "goal"),
        modes=modes,
        initial_mode=str(_require(doc, "initial_mode", "scenario")),
        planner=planner,
        cruise_explicit=cruise_explicit,
        mode_switches=switches,
        disturbance_schedule=schedule,
        jitter_kph=float(events.get("jitter_kph", 0.0)),
        trials=int(doc.get("trials", 1)),
        master_seed=int(doc.get("seed", 0)),
        max_ticks=int(doc.get("max_ticks", 2000)),
        t0=float(doc.get("t0", 0.0)),
        initial_battery=float(battery.get("initial", 1.0)),
        battery_drain_per_tick=float(battery.get("drain_per_tick", 0.0)),
        auto_low_battery_threshold=(
            float(battery["auto_switch_threshold"])
            if battery.get("auto_switch_threshold") is not None
            else None
        ),
        segmentation_noise=float(seg.get("noise", 0.0)),
        confusion=confusion,
    )


def load_scenario(path: str) -> Scenario:
    """Load and fully validate a scenario document; every formula is parsed
    against the world's signal schema and all cross-references resolved."""
    with open(path, "r", encoding="utf-8") as handle:
        doc = yaml.safe_load(handle)
    if not isinstance(doc, Mapping):
        raise ValidationError(f"scenario file {path} is not a mapping")
    return scenario_from_dict(doc, base_dir=os.path.dirname(os.path.abspath(path)))


def save_scenario(scenario: Scenario, path: str) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        yaml.safe_dump(scenario.to_dict(), handle, sort_keys=True)
