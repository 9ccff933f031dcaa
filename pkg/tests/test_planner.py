"""Planner: timing, deterministic tree growth, screening localization,
stop dwells, segment repair, certification, and incremental graph updates."""

import math

import numpy as np
import pytest

from stlnav.errors import InfeasibleError
from stlnav.planner import (
    PlannerConfig,
    build_graph,
    certify_plan,
    insert_stop_dwells,
    path_cost,
    plan,
    repair_plan,
    screen_plan,
    screen_trace,
    time_positions,
    update_plan_graph,
    violating_cells,
)
from stlnav.kernels import segment_cost
from stlnav.rules import parse_rule
from stlnav.schema import base_schema
from stlnav.semantic_map import CostMap, CostVector, build_cost_map, mock_segmentation
from stlnav.traces import TimedPath, derive_trace
from stlnav.world import StopZone, WorldModel

from conftest import make_trace, small_world


def uniform_map(n=20, resolution=0.5, cost=1.0):
    return CostMap(np.full((n, n), cost), resolution)


def test_time_positions_constant_speed():
    path = time_positions([(0.0, 0.0), (3.0, 0.0), (3.0, 4.0)], 3.6, start_time=2.0)
    # 3.6 kph = 1 m/s
    assert path.waypoints == ((0.0, 0.0, 2.0), (3.0, 0.0, 5.0), (3.0, 4.0, 9.0))
    # zero-length gaps are dropped rather than breaking monotonicity
    path = time_positions([(0.0, 0.0), (0.0, 0.0), (2.0, 0.0)], 3.6)
    assert path.waypoints == ((0.0, 0.0, 0.0), (2.0, 0.0, 2.0))


def test_planner_config_validation():
    with pytest.raises(ValueError):
        PlannerConfig(max_iterations=0)
    with pytest.raises(ValueError):
        PlannerConfig(goal_bias=1.5)
    with pytest.raises(ValueError):
        PlannerConfig(cruise_speed_kph=0.0)
    with pytest.raises(ValueError):
        PlannerConfig(repair_growth=0.5)
    with pytest.raises(ValueError):
        PlannerConfig(reweight_factor=0.9)
    cfg = PlannerConfig(step_size=1.5)
    assert cfg.radius == 3.0
    assert cfg.goal_tol == 1.5
    assert PlannerConfig(rewire_radius=5.0, goal_tolerance=0.4).radius == 5.0


def test_plan_is_deterministic_and_hits_endpoints():
    cmap = uniform_map()
    cfg = PlannerConfig(max_iterations=500, step_size=1.0, seed=7)
    a = plan(cmap, (1.0, 1.0), (8.5, 8.5), cfg)
    b = plan(cmap, (1.0, 1.0), (8.5, 8.5), cfg)
    assert a.waypoints == b.waypoints
    assert a.waypoints[0][:2] == (1.0, 1.0)
    assert a.waypoints[-1][:2] == (8.5, 8.5)
    assert a.t_start == 0.0
    other = plan(cmap, (1.0, 1.0), (8.5, 8.5), PlannerConfig(max_iterations=500, step_size=1.0, seed=8))
    assert other.waypoints[-1][:2] == (8.5, 8.5)


def test_plan_respects_start_time():
    cmap = uniform_map()
    cfg = PlannerConfig(max_iterations=300, step_size=1.0, seed=1)
    path = plan(cmap, (1.0, 1.0), (5.0, 5.0), cfg, start_time=12.5)
    assert path.t_start == 12.5


def test_plan_rejects_blocked_endpoints():
    values = np.ones((20, 20))
    values[2, 2] = 1e6
    cmap = CostMap(values, 0.5)
    cfg = PlannerConfig(max_iterations=100)
    with pytest.raises(InfeasibleError, match="start.*forbidden region"):
        plan(cmap, (1.25, 1.25), (8.0, 8.0), cfg)
    with pytest.raises(InfeasibleError, match="goal.*forbidden region"):
        plan(cmap, (8.0, 8.0), (1.25, 1.25), cfg)
    with pytest.raises(InfeasibleError, match="outside the map"):
        plan(cmap, (-1.0, 1.0), (8.0, 8.0), cfg)


def test_plan_infeasible_when_walled_off():
    values = np.ones((20, 20))
    values[10, :] = 1e6  # full wall
    cmap = CostMap(values, 0.5)
    cfg = PlannerConfig(max_iterations=400, step_size=1.0, seed=0)
    with pytest.raises(InfeasibleError, match="no path to goal"):
        plan(cmap, (1.0, 1.0), (9.0, 9.0), cfg)


def test_path_cost_matches_segment_kernel():
    cmap = uniform_map(cost=2.0)
    cfg = PlannerConfig(length_weight=0.5)
    path = TimedPath(((1.0, 1.0, 0.0), (4.0, 1.0, 3.0), (4.0, 5.0, 8.0)))
    total = 0.0
    for (x0, y0, _), (x1, y1, _) in zip(path.waypoints, path.waypoints[1:]):
        cost, blocked = segment_cost(
            cmap.values, x0, y0, x1, y1, cmap.resolution, cfg.blocked_at, cfg.length_weight
        )
        assert not blocked
        total += cost
    assert path_cost(cmap, path, cfg) == total
    assert math.isclose(total, 2.0 * 7.0 + 0.5 * 7.0, abs_tol=1e-9)


def test_path_cost_infinite_when_blocked():
    values = np.ones((10, 10))
    values[0, 5] = 1e6
    cmap = CostMap(values, 1.0)
    path = TimedPath(((0.5, 0.5, 0.0), (9.5, 0.5, 9.0)))
    assert path_cost(cmap, path, PlannerConfig()) == math.inf


# -- screening ---------------------------------------------------------------

SIDEWALK_SCHEMA = base_schema(("grass", "sidewalk"))
LINGER_RULE = parse_rule(
    "R3", "G[0,inf](status_sidewalk -> F[0,5](!status_sidewalk))", SIDEWALK_SCHEMA
)


def make_band_world():
    """20x20 m of grass with a sidewalk band across y in [9, 11)."""
    grid = np.zeros((40, 40), dtype=np.int16)
    grid[18:22, :] = 1
    return WorldModel(grid, ("grass", "sidewalk"), 0.5, obstacle_labels=())


def make_band_cost_map(world):
    tensor = mock_segmentation(world.grid, np.eye(2), 0, world.labels)
    costs = CostVector.from_mapping({"grass": 1.0, "sidewalk": 3.0}, world.labels)
    return build_cost_map(tensor, costs, resolution=world.resolution)


def lingering_path():
    """Crosses the band at 0.25 m/s, spending 7 s over sidewalk."""
    return TimedPath(
        (
            (10.0, 2.0, 0.0),
            (10.0, 5.0, 2.4),
            (10.0, 8.0, 4.8),
            (10.0, 9.0, 5.6),
            (10.0, 10.75, 12.6),
            (10.0, 11.5, 13.2),
            (10.0, 15.0, 16.0),
            (10.0, 18.0, 18.4),
        )
    )


def test_screening_localizes_linger_violation():
    world = make_band_world()
    report = screen_plan(lingering_path(), [LINGER_RULE], world, dt=0.5)
    assert not report.accepted
    result = report.results[0]
    assert result.robustness == -1.0
    assert result.verdict.status == "violated"
    # the violating samples are exactly the ticks that start a 5 s stay
    assert result.violating == ((12, 15),)
    assert report.violations == (("R3", (12, 15)),)
    assert report.sample_count == 37


def test_screening_accepts_quick_crossing():
    world = make_band_world()
    quick = time_positions([(10.0, 2.0), (10.0, 18.0)], 4.5)
    report = screen_plan(quick, [LINGER_RULE], world, dt=0.5)
    assert report.accepted
    assert report.results[0].violating == ()


def test_screen_trace_threshold_and_whole_trace_fallback():
    trace = make_trace(1.0, {"a": [1.0, 0.2, 1.0], "b": [0.0] * 3, "p": [1] * 3, "q": [1] * 3})
    lenient = parse_rule("L", "F[0,2](a > 0.5)")
    strict = parse_rule("S", "F[0,2](a > 2)")
    report = screen_trace(trace, [lenient, strict])
    assert report.results[0].passed
    assert not report.results[1].passed
    # non-G shapes fall back to the whole trace as the repair window
    assert report.results[1].violating == ((0, 2),)


def test_screen_report_to_dict():
    trace = make_trace(1.0, {"a": [1.0], "b": [0.0], "p": [1], "q": [1]})
    report = screen_trace(trace, [parse_rule("R", "a > 0")])
    data = report.to_dict()
    assert data["accepted"] is True
    assert data["rules"][0]["rule_id"] == "R"
    assert data["rules"][0]["robustness"] == 1.0
    assert data["rules"][0]["violating_samples"] == []


def test_violating_cells_cover_the_linger_span():
    world = make_band_world()
    path = lingering_path()
    report = screen_plan(path, [LINGER_RULE], world, dt=0.5)
    cells = violating_cells(report, path, world, 0.5)
    assert cells  # samples 12..15 sit at x=10, y in the band's lower half
    for row, col in cells:
        assert col == 20
        assert 18 <= row <= 21


# -- stop dwells ---------------------------------------------------------------


def make_zone_world():
    grid = np.zeros((30, 30), dtype=np.int16)
    return WorldModel(
        grid,
        ("grass",),
        0.5,
        obstacle_labels=(),
        stop_zones=(StopZone(0.0, 15.0, 7.0, 8.5),),
    )


def test_insert_stop_dwells_anchors_zero_speed_entry():
    world = make_zone_world()
    rule = parse_rule("R4_2", "G[0,inf](at_stop -> G[0,3](speed == 0))", base_schema(world.labels))
    cmap = uniform_map(30)
    cfg = PlannerConfig(max_iterations=800, step_size=1.5, seed=4)
    raw = plan(cmap, (7.0, 2.0), (7.0, 13.0), cfg)
    assert not screen_plan(raw, [rule], world, dt=0.5).accepted

    dwelled = insert_stop_dwells(raw, world, 0.5)
    report = screen_plan(dwelled, [rule], world, dt=0.5)
    assert report.accepted
    assert report.results[0].robustness == 0.05  # the == band at zero speed

    trace = derive_trace(dwelled, world, 0.5)
    entry = int(np.flatnonzero(trace.signal("at_stop") > 0)[0])
    held = trace.signal("speed")[entry : entry + 8]
    assert np.all(held == 0.0)  # 3 s window + slack at dt=0.5
    # dwell length is the hold window plus two ticks of slack
    assert dwelled.duration - raw.duration == pytest.approx(4.0, abs=1e-9)


def test_insert_stop_dwells_idempotent_and_noop_cases():
    world = make_zone_world()
    cmap = uniform_map(30)
    raw = plan(cmap, (7.0, 2.0), (7.0, 13.0), PlannerConfig(max_iterations=800, step_size=1.5, seed=4))
    once = insert_stop_dwells(raw, world, 0.5)
    twice = insert_stop_dwells(once, world, 0.5)
    assert twice.waypoints == once.waypoints
    flat = WorldModel(np.zeros((30, 30), dtype=np.int16), ("grass",), 0.5, obstacle_labels=())
    assert insert_stop_dwells(raw, flat, 0.5) is raw


# -- repair --------------------------------------------------------------------


def test_repair_keeps_waypoints_outside_the_window():
    world = make_band_world()
    cmap = make_band_cost_map(world)
    path = lingering_path()
    report = screen_plan(path, [LINGER_RULE], world, dt=0.5)
    cfg = PlannerConfig(max_iterations=1500, step_size=2.0, seed=9)
    fixed = repair_plan(path, report, cmap, [LINGER_RULE], cfg, world, dt=0.5)

    assert screen_plan(fixed, [LINGER_RULE], world, dt=0.5).accepted
    orig, new = path.waypoints, fixed.waypoints
    # untouched prefix is bitwise identical, times included
    prefix = 0
    while prefix < min(len(orig), len(new)) and orig[prefix] == new[prefix]:
        prefix += 1
    assert prefix >= 1
    # untouched suffix keeps exact coordinates, shifted by one constant
    suffix = 0
    while suffix < min(len(orig), len(new)) - prefix:
        ox, oy, _ = orig[-1 - suffix]
        nx, ny, _ = new[-1 - suffix]
        if (ox, oy) != (nx, ny):
            break
        suffix += 1
    assert suffix >= 1
    shifts = {new[-1 - k][2] - orig[-1 - k][2] for k in range(suffix)}
    assert len(shifts) == 1


def test_repair_accepted_report_returns_input():
    world = make_band_world()
    cmap = make_band_cost_map(world)
    quick = time_positions([(10.0, 2.0), (10.0, 18.0)], 4.5)
    report = screen_plan(quick, [LINGER_RULE], world, dt=0.5)
    assert repair_plan(quick, report, cmap, [LINGER_RULE], PlannerConfig(), world, dt=0.5) is quick


# -- certification ---------------------------------------------------------------


def test_certify_plan_accepts_clean_scenario():
    world = make_band_world()
    cmap = make_band_cost_map(world)
    cfg = PlannerConfig(max_iterations=1200, step_size=2.0, seed=3)
    path, report = certify_plan(cmap, (10.0, 2.0), (10.0, 18.0), [LINGER_RULE], world, cfg, dt=0.5)
    assert report.accepted
    assert path.waypoints[0][:2] == (10.0, 2.0)
    assert path.waypoints[-1][:2] == (10.0, 18.0)


def test_certify_plan_propagates_infeasibility():
    values = np.ones((20, 20))
    values[10, :] = 1e6
    cmap = CostMap(values, 0.5)
    world = small_world(np.zeros((20, 20), dtype=np.int16))
    cfg = PlannerConfig(max_iterations=300, step_size=1.0, seed=0)
    with pytest.raises(InfeasibleError, match="certification failed"):
        certify_plan(cmap, (1.0, 1.0), (9.0, 9.0), [], world, cfg, dt=0.5)


# -- incremental updates ----------------------------------------------------------


def test_update_plan_graph_recovers_after_blocking():
    base = CostMap(np.ones((20, 20)), 0.5, ("normal", 0))
    cfg = PlannerConfig(max_iterations=600, step_size=1.0, seed=2)
    graph = build_graph(base, (1.0, 1.0), (9.0, 9.0), cfg)
    before = time_positions(graph.waypoint_positions(), cfg.cruise_speed_kph)

    values = base.values.copy()
    values[8:12, :16] = 1e6  # wall with a gap on the right
    updated_map = CostMap(values, 0.5, ("normal", 1))
    changed = [(r, c) for r in range(8, 12) for c in range(16)]
    graph = update_plan_graph(graph, changed, updated_map)

    assert graph.map_version == 1
    assert graph.cost_map is updated_map
    after = time_positions(graph.waypoint_positions(), cfg.cruise_speed_kph)
    assert path_cost(updated_map, before, cfg) == math.inf
    assert path_cost(updated_map, after, cfg) < math.inf


def test_update_plan_graph_recosts_without_severing():
    base = CostMap(np.ones((10, 10)), 1.0, ("normal", 0))
    cfg = PlannerConfig(max_iterations=200, step_size=2.0, seed=5)
    graph = build_graph(base, (1.0, 1.0), (8.0, 8.0), cfg)
    old_goal_cost = float(graph.cost[graph.GOAL])

    values = base.values * 3.0  # everywhere pricier, nothing blocked
    new_map = CostMap(values, 1.0, ("normal", 1))
    changed = [(r, c) for r in range(10) for c in range(10)]
    size_before = graph.size
    graph = update_plan_graph(graph, changed, new_map)
    assert graph.size == size_before  # no severing, no new sampling
    assert float(graph.cost[graph.GOAL]) > old_goal_cost


def test_update_plan_graph_no_change_is_cheap():
    base = CostMap(np.ones((10, 10)), 1.0, ("normal", 0))
    cfg = PlannerConfig(max_iterations=200, step_size=2.0, seed=5)
    graph = build_graph(base, (1.0, 1.0), (8.0, 8.0), cfg)
    path_before = graph.waypoint_positions()
    graph = update_plan_graph(graph, [], base)
    assert graph.waypoint_positions() == path_before
