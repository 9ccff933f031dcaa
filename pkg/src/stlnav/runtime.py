"""Episode execution: kinematic point robot, disturbances, online monitors,
violation-triggered replanning, and the normal/low-battery mode switch."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from typing import TYPE_CHECKING, Mapping, Optional, Sequence

import numpy as np

from .errors import InfeasibleError, ValidationError
from .kernels import segment_cost
from .planner import PlannerConfig, ScreeningReport, _derive_seed, certify_plan, screen_plan
from .rules import Rule
from .schema import base_schema
from .semantic_map import (
    CostMap,
    CostVector,
    build_cost_map,
    inflate_obstacle_buffer,
    mock_segmentation,
)
from .stl import MonitorState, Verdict, monitor_step
from .traces import KPH_PER_MPS, Sample, TimedPath, state_sample
from .world import WorldModel

if TYPE_CHECKING:
    from .scenario import Scenario

LOG_SCHEMA_VERSION = 1
MODE_NAMES = ("normal", "low_battery")


@dataclass(frozen=True)
class RobotState:
    """Kinematic point state. Speed is the actual (disturbed) value in kph."""

    x: float
    y: float
    speed: float  # kph
    heading: float  # radians
    battery: float  # fraction of charge
    t: float  # seconds

    def __post_init__(self) -> None:
        if self.speed < 0:
            raise ValidationError("speed must be nonnegative")
        if not 0.0 <= self.battery <= 1.0:
            raise ValidationError("battery must lie in [0, 1]")


@dataclass(frozen=True)
class ModeProfile:
    """Named bundle of hard rules, terrain costs, clearance, and speed cap."""

    name: str
    rules: tuple[Rule, ...]
    cost_vector: CostVector
    clearance_margin: float  # meters
    speed_limit_kph: float

    def __post_init__(self) -> None:
        if self.name not in MODE_NAMES:
            raise ValidationError(f"unknown mode name {self.name!r}")
        if self.clearance_margin < 0:
            raise ValidationError("clearance margin must be nonnegative")
        if self.speed_limit_kph <= 0:
            raise ValidationError("speed limit must be positive")
        ids = [rule.rule_id for rule in self.rules]
        if len(set(ids)) != len(ids):
            raise ValidationError("duplicate rule ids in a mode profile")

    def rule(self, rule_id: str) -> Rule:
        for rule in self.rules:
            if rule.rule_id == rule_id:
                return rule
        raise KeyError(rule_id)


def validate_mode_strictness(profiles: Mapping[str, ModeProfile]) -> None:
    """Low-battery must cap speed no higher and demand clearance no smaller
    than normal."""
    if "normal" not in profiles or "low_battery" not in profiles:
        return
    normal = profiles["normal"]
    low = profiles["low_battery"]
    if low.speed_limit_kph > normal.speed_limit_kph:
        raise ValidationError("low_battery speed limit exceeds normal")
    if low.clearance_margin < normal.clearance_margin:
        raise ValidationError("low_battery clearance margin below normal")


@dataclass(frozen=True)
class DisturbanceModel:
    """Scheduled additive offsets plus optional seeded per-tick jitter.

    Each schedule entry is (first_tick, last_tick, speed_offset_kph,
    advance_offset_m); ticks in [first, last] receive the offsets. Jitter
    adds amplitude-scaled Gaussian noise to the speed offset, drawn from a
    per-tick generator so query order cannot matter."""

    schedule: tuple[tuple[int, int, float, float], ...] = ()
    jitter_kph: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        for lo, hi, _, _ in self.schedule:
            if lo < 0 or hi < lo:
                raise ValidationError(
                    "disturbance tick interval must satisfy 0 <= first <= last"
                )
        if self.jitter_kph < 0:
            raise ValidationError("jitter amplitude must be nonnegative")

    def offsets_at(self, tick: int) -> tuple[float, float]:
        speed = 0.0
        advance = 0.0
        for lo, hi, dv, dx in self.schedule:
            if lo <= tick <= hi:
                speed += dv
                advance += dx
        if self.jitter_kph > 0.0:
            rng = np.random.default_rng(np.random.SeedSequence([self.seed, tick]))
            speed += self.jitter_kph * float(rng.standard_normal())
        return speed, advance

    @property
    def is_null(self) -> bool:
        return not self.schedule and self.jitter_kph == 0.0


class ExecutionLog:
    """Append-only record of one episode: a header, one row per elapsed
    tick, and event records. Serializes to line-delimited JSON."""

    def __init__(self, records: Optional[list[dict]] = None):
        self.records: list[dict] = list(records) if records else []

    @property
    def header(self) -> dict:
        if not self.records or self.records[0].get("type") != "header":
            raise ValidationError("log has no header record")
        return self.records[0]

    def set_header(self, **fields) -> None:
        if self.records:
            raise ValidationError("header must be the first record")
        self.records.append({"type": "header", "version": LOG_SCHEMA_VERSION, **fields})

    def append_tick(self, **fields) -> None:
        self.records.append({"type": "tick", **fields})

    def append_event(self, kind: str, tick: int, t: float, **detail) -> None:
        self.records.append(
            {"type": "event", "kind": kind, "tick": tick, "t": t, **detail}
        )

    def ticks(self) -> list[dict]:
        return [r for r in self.records if r.get("type") == "tick"]

    def events(self, kind: Optional[str] = None) -> list[dict]:
        out = [r for r in self.records if r.get("type") == "event"]
        if kind is not None:
            out = [r for r in out if r.get("kind") == kind]
        return out

    def to_jsonl(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as handle:
            for record in self.records:
                handle.write(json.dumps(record, sort_keys=True))
                handle.write("\n")

    @classmethod
    def from_jsonl(cls, path: str) -> "ExecutionLog":
        records = []
        with open(path, "r", encoding="utf-8") as handle:
            for line in handle:
                line = line.strip()
                if line:
                    records.append(json.loads(line))
        log = cls(records)
        if log.records and log.records[0].get("type") == "header":
            version = log.records[0].get("version")
            if version != LOG_SCHEMA_VERSION:
                raise ValidationError(f"unsupported log schema version {version!r}")
        return log


def step_dynamics(
    state: RobotState,
    command_kph: float,
    direction: tuple[float, float],
    dt: float,
    speed_offset_kph: float = 0.0,
) -> RobotState:
    """One point-mass step: actual speed = max(command + offset, 0) moves
    the robot along the given direction; the actual speed enters the state."""
    if command_kph < 0:
        raise ValidationError("commanded speed must be nonnegative")
    actual = max(command_kph + speed_offset_kph, 0.0)
    advance = actual / KPH_PER_MPS * dt
    heading = state.heading
    if actual > 0.0 and (direction[0] != 0.0 or direction[1] != 0.0):
        heading = math.atan2(direction[1], direction[0])
    return RobotState(
        x=state.x + advance * math.cos(heading),
        y=state.y + advance * math.sin(heading),
        speed=actual,
        heading=heading,
        battery=state.battery,
        t=state.t + dt,
    )


class PathFollower:
    """Tracks progress along a timed path by path-clock time. Disturbance
    scales the clock rate (actual / commanded); with no disturbance the
    clock hits exactly t_start + k*dt, so sampled positions and speeds match
    the planning-time trace bit for bit."""

    def __init__(self, path: TimedPath, dt: float):
        self.path = path
        self.dt = float(dt)
        self.t0 = path.t_start
        self.ticks = 0
        self.drift = 0.0
        # when set, the next advance lands on t_start instead of moving
        self.hold_first = False

    def reset(self, path: TimedPath) -> None:
        self.path = path
        self.t0 = path.t_start
        self.ticks = 0
        self.drift = 0.0
        self.hold_first = True

    @property
    def tau(self) -> float:
        return self.t0 + (self.ticks * self.dt + self.drift)

    def advance(
        self, actual_kph: float, command_kph: float, extra_advance_m: float = 0.0
    ) -> None:
        if self.hold_first:
            self.hold_first = False
            return
        self.ticks += 1
        if command_kph > 0.0:
            ratio = actual_kph / command_kph
            if ratio != 1.0:
                self.drift += self.dt * (ratio - 1.0)
            if extra_advance_m != 0.0:
                self.drift += extra_advance_m * KPH_PER_MPS / command_kph

    def position(self) -> tuple[float, float]:
        return self.path.position_at(self.tau)

    def command_kph(self) -> float:
        # past the final timestamp the reference is exhausted: command a stop
        # rather than replaying the last segment's speed
        tau = self.tau
        if tau > self.path.t_end + 1e-9:
            return 0.0
        return self.path.speed_mps_at(tau) * KPH_PER_MPS

    @property
    def finished(self) -> bool:
        return self.tau >= self.path.t_end - 1e-9


def build_mode_cost_map(
    world: WorldModel,
    profile: ModeProfile,
    seg_seed: int,
    version: int,
    confusion: Optional[np.ndarray] = None,
    noise_amplitude: float = 0.0,
) -> CostMap:
    """Segment the world (mock model), contract with the mode's cost vector,
    and inflate obstacles at the mode's clearance margin."""
    if confusion is None:
        confusion = np.eye(len(world.labels))
    tensor = mock_segmentation(world.grid, confusion, seg_seed, world.labels, noise_amplitude)
    cost_map = build_cost_map(
        tensor, profile.cost_vector, world.resolution, (profile.name, version)
    )
    return inflate_obstacle_buffer(cost_map, world.obstacle_mask(), profile.clearance_margin)


def switch_mode(
    world: WorldModel,
    target: ModeProfile,
    position: tuple[float, float],
    goal: tuple[float, float],
    cfg: PlannerConfig,
    dt: float,
    start_time: float,
    seg_seed: int,
    version: int,
    confusion: Optional[np.ndarray] = None,
    noise_amplitude: float = 0.0,
) -> tuple[CostMap, TimedPath, ScreeningReport]:
    """Rebuild the cost map under the target profile and certify a fresh
    plan from the current position. Raises InfeasibleError when no
    acceptable plan exists under the new constraints."""
    cost_map = build_mode_cost_map(world, target, seg_seed, version, confusion, noise_amplitude)
    path, report = certify_plan(
        cost_map, position, goal, target.rules, world, cfg, dt=dt, start_time=start_time
    )
    return cost_map, path, report


class _MonitorBank:
    """One online monitor per rule; restarted wholesale on replans and
    mode switches."""

    def __init__(self, rules: Sequence[Rule], dt: float, schema):
        self.rules = tuple(rules)
        self.monitors = {
            rule.rule_id: MonitorState(rule.formula, dt, schema) for rule in rules
        }

    def step(self, sample: Sample) -> dict[str, Verdict]:
        return {
            rule_id: monitor_step(monitor, sample)
            for rule_id, monitor in self.monitors.items()
        }

    def verdicts(self) -> dict[str, Verdict]:
        return {rule_id: monitor.verdict for rule_id, monitor in self.monitors.items()}


def _verdict_fields(verdicts: Mapping[str, Verdict]) -> dict[str, dict]:
    return {
        rule_id: {"status": verdict.status, "robustness": float(verdict.robustness)}
        for rule_id, verdict in sorted(verdicts.items())
    }


def _rules_fields(rules: Sequence[Rule]) -> list[dict]:
    return [
        {
            "rule_id": rule.rule_id,
            "text": rule.text,
            "threshold": rule.threshold,
            "description": rule.description,
        }
        for rule in rules
    ]


def run_episode(scenario: "Scenario", trial: int = 0) -> ExecutionLog:
    """Certify, then execute tick by tick with online monitors.

    Violations pause the robot and trigger re-certification from the
    current position; scheduled mode-switch events rebuild the cost map and
    plan under the target profile. Terminates at goal arrival, infeasible
    replanning, or the tick budget."""
    world = scenario.world
    schema = base_schema(world.labels)
    dt = scenario.dt
    mode = scenario.modes[scenario.initial_mode]
    trial_seed = int(
        np.random.SeedSequence([scenario.master_seed, trial]).generate_state(1)[0]
    )
    seg_seed = _derive_seed(trial_seed, "segmentation")
    disturbance = scenario.disturbance_for(trial_seed)
    switch_at = {event.tick: event.target for event in scenario.mode_switches}

    plan_count = 0
    map_version = 0

    def mode_cfg(profile: ModeProfile) -> PlannerConfig:
        cruise = scenario.planner.cruise_speed_kph
        if not scenario.cruise_explicit:
            cruise = 0.9 * profile.speed_limit_kph
        return replace(
            scenario.planner,
            cruise_speed_kph=cruise,
            seed=_derive_seed(trial_seed, f"plan-{plan_count}"),
        )

    cost_map = build_mode_cost_map(
        world, mode, seg_seed, map_version, scenario.confusion, scenario.segmentation_noise
    )
    cfg = mode_cfg(mode)
    path, report = certify_plan(
        cost_map, scenario.start, scenario.goal, mode.rules, world, cfg,
        dt=dt, start_time=scenario.t0,
    )
    plan_count += 1

    t0 = scenario.t0
    follower = PathFollower(path, dt)
    x, y = follower.position()
    command = follower.command_kph()
    speed_offset, _ = disturbance.offsets_at(0)
    actual = max(command + speed_offset, 0.0)
    battery = scenario.initial_battery
    state = RobotState(
        x=x, y=y, speed=actual, heading=_initial_heading(path), battery=battery, t=t0
    )
    first_sample = state_sample(state, world, None)
    monitors = _MonitorBank(mode.rules, dt, schema)
    initial_verdicts = monitors.step(first_sample)

    log = ExecutionLog()
    log.set_header(
        scenario=scenario.name,
        dt=dt,
        t0=t0,
        trial=trial,
        master_seed=scenario.master_seed,
        trial_seed=trial_seed,
        labels=list(world.labels),
        start=[scenario.start[0], scenario.start[1]],
        goal=[scenario.goal[0], scenario.goal[1]],
        mode=mode.name,
        rules=_rules_fields(mode.rules),
        start_signals=dict(first_sample.values),
        initial_verdicts=_verdict_fields(initial_verdicts),
        initial_battery=battery,
    )
    log.append_event(
        "certified", tick=0, t=t0,
        mode=mode.name, screening=report.to_dict(),
        path_waypoints=len(path.waypoints),
    )

    goal = scenario.goal
    previous = first_sample
    last_command = command
    last_actual = actual

    for tick in range(1, scenario.max_ticks + 1):
        t = t0 + tick * dt
        battery = max(battery - scenario.battery_drain_per_tick, 0.0)
        switch_target = switch_at.get(tick)
        if (
            switch_target is None
            and scenario.auto_low_battery_threshold is not None
            and mode.name == "normal"
            and "low_battery" in scenario.modes
            and battery < scenario.auto_low_battery_threshold
        ):
            switch_target = "low_battery"
        switching = switch_target is not None

        prev_x, prev_y = previous.values["x"], previous.values["y"]
        speed_offset, advance_offset = disturbance.offsets_at(tick)
        follower.advance(last_actual, last_command, advance_offset)
        x, y = follower.position()
        command = 0.0 if switching else follower.command_kph()
        actual = max(command + speed_offset, 0.0)

        heading = _heading_from(prev_x, prev_y, x, y, state.heading)
        state = RobotState(x=x, y=y, speed=actual, heading=heading, battery=battery, t=t)
        sample = state_sample(state, world, previous)
        verdicts = monitors.step(sample)
        tick_cost, _ = segment_cost(
            cost_map.values, prev_x, prev_y, x, y,
            cost_map.resolution, cfg.blocked_at, cfg.length_weight,
        )

        log.append_tick(
            tick=tick,
            t=t,
            mode=mode.name,
            command_kph=command,
            battery=battery,
            heading=heading,
            signals=dict(sample.values),
            verdicts=_verdict_fields(verdicts),
            segment_cost=tick_cost,
        )

        violated = [
            (rule_id, verdict)
            for rule_id, verdict in sorted(verdicts.items())
            if verdict.status == "violated"
        ]
        previous = sample
        last_command = command
        last_actual = actual

        if switching:
            target = scenario.modes[switch_target]
            log.append_event(
                "monitors_finalized", tick=tick, t=t,
                mode=mode.name, verdicts=_verdict_fields(monitors.verdicts()),
            )
            old_screening = screen_plan(path, target.rules, world, dt).to_dict()
            map_version += 1
            cfg = mode_cfg(target)
            try:
                cost_map, path, new_report = switch_mode(
                    world, target, (x, y), goal, cfg, dt, t + dt,
                    seg_seed, map_version, scenario.confusion, scenario.segmentation_noise,
                )
            except InfeasibleError as exc:
                log.append_event(
                    "infeasible", tick=tick, t=t, mode=target.name, message=str(exc)
                )
                return log
            plan_count += 1
            log.append_event(
                "mode_switch", tick=tick, t=t,
                from_mode=mode.name, to_mode=target.name,
                old_path_screening=old_screening,
                rules=_rules_fields(target.rules),
            )
            log.append_event(
                "replan", tick=tick, t=t, reason="mode_switch", mode=target.name,
                screening=new_report.to_dict(),
                path_waypoints=len(path.waypoints),
                rules=_rules_fields(target.rules),
            )
            mode = target
            follower.reset(path)
            monitors = _MonitorBank(mode.rules, dt, schema)
            continue

        if violated:
            for rule_id, verdict in violated:
                log.append_event(
                    "violation", tick=tick, t=t, rule_id=rule_id,
                    robustness=float(verdict.robustness),
                    decided_at=verdict.decided_at,
                )
            log.append_event(
                "monitors_finalized", tick=tick, t=t,
                mode=mode.name, verdicts=_verdict_fields(monitors.verdicts()),
            )
            cfg = mode_cfg(mode)
            try:
                path, new_report = certify_plan(
                    cost_map, (x, y), goal, mode.rules, world, cfg,
                    dt=dt, start_time=t + dt,
                )
            except InfeasibleError as exc:
                log.append_event(
                    "infeasible", tick=tick, t=t, mode=mode.name, message=str(exc)
                )
                return log
            plan_count += 1
            log.append_event(
                "replan", tick=tick, t=t, reason="violation", mode=mode.name,
                screening=new_report.to_dict(),
                path_waypoints=len(path.waypoints),
                rules=_rules_fields(mode.rules),
            )
            follower.reset(path)
            monitors = _MonitorBank(mode.rules, dt, schema)
            continue

        if follower.finished and math.hypot(x - goal[0], y - goal[1]) <= cfg.goal_tol:
            log.append_event("goal_reached", tick=tick, t=t)
            return log

    if scenario.max_ticks > 0:
        log.append_event(
            "tick_budget", tick=scenario.max_ticks, t=t0 + scenario.max_ticks * dt
        )
    return log


def _initial_heading(path: TimedPath) -> float:
    if len(path.waypoints) < 2:
        return 0.0
    (x0, y0, _), (x1, y1, _) = path.waypoints[0], path.waypoints[1]
    if x1 == x0 and y1 == y0:
        return 0.0
    return math.atan2(y1 - y0, x1 - x0)


def _heading_from(x0: float, y0: float, x1: float, y1: float, fallback: float) -> float:
    if x1 == x0 and y1 == y0:
        return fallback
    return math.atan2(y1 - y0, x1 - x0)
