"""Command line front end: certify, run, screen, replay, report, plot.

Exit codes: 0 success, 2 validation error, 3 infeasible plan,
4 episode ended in a terminal runtime violation."""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace
from typing import Optional, Sequence

import numpy as np
import yaml

from .errors import InfeasibleError, StlnavError, ValidationError
from .planner import _derive_seed, certify_plan, screen_plan
from .runtime import ExecutionLog, build_mode_cost_map, run_episode
from .scenario import Scenario, load_scenario
from .tne import (
    RunMetrics,
    SpecMetrics,
    aggregate,
    compute_run_metrics,
    emit_report,
    replay,
    write_series_csv,
)
from .traces import TimedPath

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_INFEASIBLE = 3
EXIT_RUNTIME_VIOLATION = 4


def _json_dump(data, path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        json.dump(data, handle, sort_keys=True, indent=2)
        handle.write("\n")


def _apply_overrides(scenario: Scenario, args: argparse.Namespace) -> Scenario:
    changes = {}
    if getattr(args, "seed", None) is not None:
        changes["master_seed"] = args.seed
    if getattr(args, "mode", None) is not None:
        changes["initial_mode"] = args.mode
    if getattr(args, "trials", None) is not None:
        if args.trials < 1:
            raise ValidationError("--trials must be at least 1")
        changes["trials"] = args.trials
    return replace(scenario, **changes) if changes else scenario


def _initial_plan(scenario: Scenario, trial: int):
    """The same cost map and certified plan run_episode starts from."""
    mode = scenario.modes[scenario.initial_mode]
    trial_seed = int(
        np.random.SeedSequence([scenario.master_seed, trial]).generate_state(1)[0]
    )
    seg_seed = _derive_seed(trial_seed, "segmentation")
    cruise = scenario.planner.cruise_speed_kph
    if not scenario.cruise_explicit:
        cruise = 0.9 * mode.speed_limit_kph
    cfg = replace(
        scenario.planner,
        cruise_speed_kph=cruise,
        seed=_derive_seed(trial_seed, "plan-0"),
    )
    cost_map = build_mode_cost_map(
        scenario.world, mode, seg_seed, 0,
        scenario.confusion, scenario.segmentation_noise,
    )
    path, report = certify_plan(
        cost_map, scenario.start, scenario.goal, mode.rules, scenario.world, cfg,
        dt=scenario.dt, start_time=scenario.t0,
    )
    return cost_map, path, report


def _path_to_dict(path: TimedPath) -> dict:
    return {"waypoints": [[x, y, t] for x, y, t in path.waypoints]}


def _load_path_file(path: str) -> TimedPath:
    with open(path, "r", encoding="utf-8") as handle:
        data = yaml.safe_load(handle)
    if not isinstance(data, dict) or "waypoints" not in data:
        raise ValidationError(f"path file {path} needs a waypoints list")
    waypoints = [(float(x), float(y), float(t)) for x, y, t in data["waypoints"]]
    return TimedPath(tuple(waypoints))


def _cmd_certify(args: argparse.Namespace) -> int:
    scenario = _apply_overrides(load_scenario(args.scenario), args)
    os.makedirs(args.out_dir, exist_ok=True)
    try:
        _, path, report = _initial_plan(scenario, trial=0)
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    _json_dump(_path_to_dict(path), os.path.join(args.out_dir, "path.json"))
    _json_dump(report.to_dict(), os.path.join(args.out_dir, "screening.json"))
    print(
        f"certified: {len(path.waypoints)} waypoints, "
        f"duration {path.duration:.1f} s, accepted={report.accepted}"
    )
    return EXIT_OK


def _cmd_run(args: argparse.Namespace) -> int:
    scenario = _apply_overrides(load_scenario(args.scenario), args)
    os.makedirs(args.out_dir, exist_ok=True)
    runs: list[RunMetrics] = []
    terminal = False
    for trial in range(scenario.trials):
        try:
            log = run_episode(scenario, trial)
        except InfeasibleError as exc:
            print(f"trial {trial} infeasible at certification: {exc}", file=sys.stderr)
            return EXIT_INFEASIBLE
        log_path = os.path.join(args.out_dir, f"trial_{trial:03d}.log.jsonl")
        log.to_jsonl(log_path)
        metrics = compute_run_metrics(log)
        runs.append(metrics)
        _json_dump(
            metrics.to_dict(),
            os.path.join(args.out_dir, f"trial_{trial:03d}.metrics.json"),
        )
        outcome = "goal" if log.events("goal_reached") else "stopped"
        if log.events("infeasible"):
            outcome = "infeasible"
            terminal = True
        print(
            f"trial {trial}: {outcome}, {len(log.ticks())} ticks, "
            f"{metrics.replan_count} replans, {metrics.mode_switch_count} switches"
        )
    report = aggregate(runs)
    csv_path, yaml_path = emit_report(report, args.out_dir)
    print(f"report: {csv_path} {yaml_path}")
    return EXIT_RUNTIME_VIOLATION if terminal else EXIT_OK


def _cmd_screen(args: argparse.Namespace) -> int:
    scenario = _apply_overrides(load_scenario(args.scenario), args)
    path = _load_path_file(args.path_file)
    mode = scenario.modes[scenario.initial_mode]
    report = screen_plan(path, mode.rules, scenario.world, scenario.dt)
    os.makedirs(args.out_dir, exist_ok=True)
    _json_dump(report.to_dict(), os.path.join(args.out_dir, "screening.json"))
    for result in report.results:
        print(
            f"{result.rule_id}: robustness {result.robustness:+.4f} "
            f"({'pass' if result.passed else 'FAIL'})"
        )
    print(f"accepted={report.accepted}")
    return EXIT_OK


def _cmd_replay(args: argparse.Namespace) -> int:
    log = ExecutionLog.from_jsonl(args.log)
    replayed = replay(log)
    os.makedirs(args.out_dir, exist_ok=True)
    replayed.to_jsonl(os.path.join(args.out_dir, "replayed.log.jsonl"))
    metrics = compute_run_metrics(replayed)
    _json_dump(metrics.to_dict(), os.path.join(args.out_dir, "replayed.metrics.json"))
    live = compute_run_metrics(log)
    drift = 0.0
    for spec_id, spec in metrics.per_spec.items():
        for name, value in spec.values().items():
            drift = max(drift, abs(value - live.per_spec[spec_id].values()[name]))
    print(f"replayed {len(replayed.ticks())} ticks, max metric drift {drift:.3g}")
    return EXIT_OK


def _cmd_report(args: argparse.Namespace) -> int:
    runs = []
    for path in args.metrics:
        with open(path, "r", encoding="utf-8") as handle:
            data = json.load(handle)
        if "per_spec" not in data or "run" not in data:
            raise ValidationError(f"{path} is not a run metrics file")
        per_spec = {
            spec_id: SpecMetrics(**values)
            for spec_id, values in data["per_spec"].items()
        }
        run = data["run"]
        composition = {
            key.split(".", 1)[1]: value
            for key, value in run.items()
            if key.startswith("cost_fraction.")
        }
        runs.append(
            RunMetrics(
                per_spec=per_spec,
                total_path_cost=run["total_path_cost"],
                duration=run["duration"],
                tick_count=int(run["tick_count"]),
                replan_count=int(run["replan_count"]),
                mode_switch_count=int(run["mode_switch_count"]),
                cost_composition=composition,
            )
        )
    csv_path, yaml_path = emit_report(aggregate(runs), args.out_dir)
    print(f"report: {csv_path} {yaml_path}")
    return EXIT_OK


def _cmd_plot(args: argparse.Namespace) -> int:
    log = ExecutionLog.from_jsonl(args.log)
    os.makedirs(args.out_dir, exist_ok=True)
    out = write_series_csv(log, os.path.join(args.out_dir, "series.csv"))
    print(f"series: {out}")
    return EXIT_OK


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stlnav",
        description="Rule-screened navigation: plan certification, "
        "monitored execution, and post-hoc metrics.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, scenario: bool = True) -> None:
        p.add_argument("--out-dir", default="out", help="output directory")
        if scenario:
            p.add_argument("--seed", type=int, default=None, help="override master seed")
            p.add_argument("--mode", default=None, help="force the initial mode")

    p = sub.add_parser("certify", help="plan and screen, emit path + report")
    p.add_argument("scenario")
    common(p)
    p.set_defaults(func=_cmd_certify)

    p = sub.add_parser("run", help="run episodes, emit logs + metrics + report")
    p.add_argument("scenario")
    p.add_argument("--trials", type=int, default=None, help="trial count override")
    common(p)
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("screen", help="screen an external path file")
    p.add_argument("path_file")
    p.add_argument("scenario")
    common(p)
    p.set_defaults(func=_cmd_screen)

    p = sub.add_parser("replay", help="recompute monitors and metrics from a log")
    p.add_argument("log")
    common(p, scenario=False)
    p.set_defaults(func=_cmd_replay)

    p = sub.add_parser("report", help="aggregate run metrics files")
    p.add_argument("metrics", nargs="+")
    common(p, scenario=False)
    p.set_defaults(func=_cmd_report)

    p = sub.add_parser("plot", help="emit robustness-vs-time CSV from a log")
    p.add_argument("log")
    common(p, scenario=False)
    p.set_defaults(func=_cmd_plot)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (StlnavError, OSError, yaml.YAMLError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
