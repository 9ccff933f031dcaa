"""Post-hoc evaluation: per-run robustness metrics from execution logs,
cross-trial aggregation, report emission, and monitor replay."""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np
import yaml

from .errors import ValidationError
from .rules import Rule, parse_rule
from .runtime import ExecutionLog, _MonitorBank, _verdict_fields
from .schema import base_schema
from .traces import Sample

REPORT_SCHEMA_VERSION = 1

SPEC_METRIC_NAMES = (
    "final_robustness",
    "worst_case",
    "average_margin",
    "violation_ticks",
    "violation_intervals",
    "average_violation_magnitude",
)


@dataclass(frozen=True)
class SpecMetrics:
    """Robustness summary for one rule over the run's monitored ticks."""

    final_robustness: float
    worst_case: float
    average_margin: float
    violation_ticks: int
    violation_intervals: int
    average_violation_magnitude: float

    def values(self) -> dict[str, float]:
        return {name: float(getattr(self, name)) for name in SPEC_METRIC_NAMES}


@dataclass(frozen=True)
class RunMetrics:
    """One episode's metrics: per-rule robustness plus run-level totals."""

    per_spec: Mapping[str, SpecMetrics]
    total_path_cost: float
    duration: float
    tick_count: int
    replan_count: int
    mode_switch_count: int
    cost_composition: Mapping[str, float]

    def run_values(self) -> dict[str, float]:
        out = {
            "total_path_cost": float(self.total_path_cost),
            "duration": float(self.duration),
            "tick_count": float(self.tick_count),
            "replan_count": float(self.replan_count),
            "mode_switch_count": float(self.mode_switch_count),
        }
        for label in sorted(self.cost_composition):
            out[f"cost_fraction.{label}"] = float(self.cost_composition[label])
        return out

    def to_dict(self) -> dict:
        return {
            "per_spec": {
                spec_id: metrics.values()
                for spec_id, metrics in sorted(self.per_spec.items())
            },
            "run": self.run_values(),
        }


@dataclass(frozen=True)
class Stats:
    mean: float
    std: float
    min: float
    max: float

    def values(self) -> dict[str, float]:
        return {
            "mean": self.mean,
            "std": self.std,
            "min": self.min,
            "max": self.max,
        }


@dataclass(frozen=True)
class AggregateReport:
    """Mean/std/min/max for every metric across a list of runs."""

    run_count: int
    per_spec: Mapping[str, Mapping[str, Stats]]
    run_level: Mapping[str, Stats]

    def to_dict(self) -> dict:
        return {
            "schema_version": REPORT_SCHEMA_VERSION,
            "run_count": self.run_count,
            "specs": {
                spec_id: {name: stats.values() for name, stats in sorted(group.items())}
                for spec_id, group in sorted(self.per_spec.items())
            },
            "run": {name: stats.values() for name, stats in sorted(self.run_level.items())},
        }


def _rows_and_events(log: ExecutionLog) -> tuple[list[dict], list[dict]]:
    header = log.header  # raises on a missing header
    rows = log.ticks()
    for row in rows:
        if "verdicts" not in row or "signals" not in row or "tick" not in row:
            raise ValidationError(f"malformed tick record: {sorted(row)}")
    return rows, log.events()


def _spec_series(log: ExecutionLog, rows: Sequence[dict]) -> dict[str, list[float]]:
    """Per-rule robustness series for the run's final mode. History from
    before the last mode switch belongs to discarded monitors and is left
    out; restarts after violation replans stay in (same rule set)."""
    switches = log.events("mode_switch")
    last_switch = switches[-1]["tick"] if switches else None
    series: dict[str, list[float]] = {}
    if last_switch is None:
        for spec_id, verdict in log.header.get("initial_verdicts", {}).items():
            series.setdefault(spec_id, []).append(float(verdict["robustness"]))
    for row in rows:
        if last_switch is not None and row["tick"] <= last_switch:
            continue
        for spec_id, verdict in row["verdicts"].items():
            series.setdefault(spec_id, []).append(float(verdict["robustness"]))
    return series


def _interval_count(flags: Sequence[bool]) -> int:
    count = 0
    previous = False
    for flag in flags:
        if flag and not previous:
            count += 1
        previous = flag
    return count


def compute_run_metrics(
    log: ExecutionLog, specs: Optional[Sequence[str]] = None
) -> RunMetrics:
    """Summarize one execution log.

    Per rule: final/worst-case/mean of the monitor's running robustness,
    negative-robustness tick and interval counts, and the mean violation
    magnitude (0 when there are no violations). Run level: path cost,
    duration, replan and mode-switch counts, and the fraction of path cost
    spent on each terrain label."""
    rows, _ = _rows_and_events(log)
    series = _spec_series(log, rows)
    if specs is not None:
        missing = [spec_id for spec_id in specs if spec_id not in series]
        if missing:
            raise ValidationError(f"log has no verdicts for spec(s): {', '.join(missing)}")
        series = {spec_id: series[spec_id] for spec_id in specs}

    per_spec: dict[str, SpecMetrics] = {}
    for spec_id, values in series.items():
        arr = np.asarray(values, dtype=np.float64)
        negative = arr < 0.0
        magnitudes = -arr[negative]
        per_spec[spec_id] = SpecMetrics(
            final_robustness=float(arr[-1]),
            worst_case=float(arr.min()),
            average_margin=float(arr.mean()),
            violation_ticks=int(negative.sum()),
            violation_intervals=_interval_count(negative.tolist()),
            average_violation_magnitude=(
                float(magnitudes.mean()) if magnitudes.size else 0.0
            ),
        )

    header = log.header
    t0 = float(header.get("t0", 0.0))
    labels = list(header.get("labels", []))
    total_cost = 0.0
    label_cost = {label: 0.0 for label in labels}
    for row in rows:
        cost = float(row.get("segment_cost", 0.0))
        total_cost += cost
        for label in labels:
            if row["signals"].get(f"status_{label}", 0.0) > 0.5:
                label_cost[label] += cost
                break
    composition = {
        label: (label_cost[label] / total_cost if total_cost > 0.0 else 0.0)
        for label in labels
    }
    return RunMetrics(
        per_spec=per_spec,
        total_path_cost=total_cost,
        duration=(float(rows[-1]["t"]) - t0) if rows else 0.0,
        tick_count=len(rows),
        replan_count=len(log.events("replan")),
        mode_switch_count=len(log.events("mode_switch")),
        cost_composition=composition,
    )


def _stats(values: Sequence[float]) -> Stats:
    # sorted reduction makes the result invariant to run order
    arr = np.sort(np.asarray(values, dtype=np.float64))
    return Stats(
        mean=float(arr.mean()),
        std=float(arr.std()),
        min=float(arr[0]),
        max=float(arr[-1]),
    )


def aggregate(runs: Sequence[RunMetrics]) -> AggregateReport:
    """Exact mean, population std, min, and max for every metric across
    runs. All runs must cover the same rule ids."""
    if not runs:
        raise ValidationError("cannot aggregate an empty run list")
    spec_ids = sorted(runs[0].per_spec)
    for run in runs[1:]:
        if sorted(run.per_spec) != spec_ids:
            raise ValidationError("runs cover different spec id sets")
    per_spec = {
        spec_id: {
            name: _stats([run.per_spec[spec_id].values()[name] for run in runs])
            for name in SPEC_METRIC_NAMES
        }
        for spec_id in spec_ids
    }
    run_names = sorted({name for run in runs for name in run.run_values()})
    run_level = {
        name: _stats([run.run_values().get(name, 0.0) for run in runs])
        for name in run_names
    }
    return AggregateReport(run_count=len(runs), per_spec=per_spec, run_level=run_level)


def _csv_value(value: float) -> str:
    if float(value).is_integer() and abs(value) < 1e15:
        return str(int(value))
    return repr(float(value))


def emit_report(report: AggregateReport, destination: str) -> tuple[str, str]:
    """Write the aggregate as a CSV metric table plus a YAML summary.
    Identical reports produce byte-identical files."""
    if not destination:
        raise ValidationError("report destination path is empty")
    os.makedirs(destination, exist_ok=True)
    csv_path = os.path.join(destination, "metrics.csv")
    yaml_path = os.path.join(destination, "summary.yaml")

    lines = ["spec_id,metric,value"]
    lines.append(f"__report__,schema_version,{REPORT_SCHEMA_VERSION}")
    lines.append(f"__report__,run_count,{report.run_count}")
    for spec_id in sorted(report.per_spec):
        group = report.per_spec[spec_id]
        for name in sorted(group):
            for stat_name, value in sorted(group[name].values().items()):
                lines.append(f"{spec_id},{name}.{stat_name},{_csv_value(value)}")
    for name in sorted(report.run_level):
        for stat_name, value in sorted(report.run_level[name].values().items()):
            lines.append(f"__run__,{name}.{stat_name},{_csv_value(value)}")
    with open(csv_path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write("\n".join(lines) + "\n")

    with open(yaml_path, "w", encoding="utf-8", newline="\n") as handle:
        yaml.safe_dump(report.to_dict(), handle, sort_keys=True)
    return csv_path, yaml_path


def _parse_logged_rules(entries: Sequence[Mapping], schema) -> tuple[Rule, ...]:
    return tuple(
        parse_rule(
            entry["rule_id"],
            entry["text"],
            schema,
            threshold=float(entry.get("threshold", 0.0)),
            description=str(entry.get("description", "")),
        )
        for entry in entries
    )


def replay(log: ExecutionLog) -> ExecutionLog:
    """Re-run the online monitors over a log's recorded signals, without the
    planner. Returns a copy of the log whose verdict fields (header and
    every tick row) are recomputed; replan events mark monitor restarts and
    carry the rule set for the next segment."""
    header = log.header
    labels = tuple(header.get("labels", ()))
    if not labels:
        raise ValidationError("log header lacks the label list")
    schema = base_schema(labels)
    dt = float(header["dt"])
    rules = _parse_logged_rules(header.get("rules", ()), schema)

    bank = _MonitorBank(rules, dt, schema)
    start = Sample(t=float(header["t0"]), values=dict(header["start_signals"]))
    new_header = dict(header)
    new_header["initial_verdicts"] = _verdict_fields(bank.step(start))

    records: list[dict] = [new_header]
    restart_pending: Optional[tuple[Rule, ...]] = None
    for record in log.records[1:]:
        if record.get("type") == "tick":
            if restart_pending is not None:
                bank = _MonitorBank(restart_pending, dt, schema)
                restart_pending = None
            sample = Sample(t=float(record["t"]), values=dict(record["signals"]))
            new_row = dict(record)
            new_row["verdicts"] = _verdict_fields(bank.step(sample))
            records.append(new_row)
        else:
            if record.get("type") == "event" and record.get("kind") == "replan":
                restart_pending = _parse_logged_rules(record.get("rules", ()), schema)
            records.append(record)
    return ExecutionLog(records)


def robustness_series(log: ExecutionLog) -> list[tuple[float, str, float]]:
    """Long-form (t, spec_id, robustness) rows for plotting, ordered by
    time then rule id."""
    header = log.header
    out: list[tuple[float, str, float]] = []
    t0 = float(header.get("t0", 0.0))
    for spec_id, verdict in sorted(header.get("initial_verdicts", {}).items()):
        out.append((t0, spec_id, float(verdict["robustness"])))
    for row in log.ticks():
        for spec_id, verdict in sorted(row["verdicts"].items()):
            out.append((float(row["t"]), spec_id, float(verdict["robustness"])))
    return out


def write_series_csv(log: ExecutionLog, path: str) -> str:
    lines = ["t,spec_id,robustness"]
    for t, spec_id, value in robustness_series(log):
        lines.append(f"{_csv_value(t)},{spec_id},{_csv_value(value)}")
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write("\n".join(lines) + "\n")
    return path
