"""Sampling-based planning over cost maps with formal screening and repair.

The planner grows a rewiring tree (RRT*-style) whose edge costs are exact
path integrals of the cost map plus a length weight. Candidate paths are
timed at a constant cruise speed with stop-zone dwells, screened offline
against the active hard rules, and repaired segment-by-segment with growing
windows; the certify loop re-weights violating cells and escalates up to a
bounded number of full replans.
"""

from __future__ import annotations

import math
import zlib
from dataclasses import dataclass, replace
from typing import Iterable, Iterator, Optional, Sequence

import numpy as np
import yaml

from .errors import InfeasibleError, IrreparableError
from .kernels import segment_cost
from .rules import Rule
from .semantic_map import DEFAULT_OBSTACLE_COST, CostMap, reweight_region
from .stl.ast import Globally
from .stl.semantics import Verdict, evaluate_offline, interval_offsets, robustness_signal
from .traces import KPH_PER_MPS, TimedPath, Trace, derive_trace
from .world import WorldModel

R42_HOLD_SECONDS = 3.0  # stop-hold window of the stop-sign dwell rule


@dataclass(frozen=True)
class PlannerConfig:
    """Knobs for tree growth, timing, and the screen/repair loop."""

    max_iterations: int = 4000
    step_size: float = 2.0
    goal_bias: float = 0.1
    length_weight: float = 1.0
    seed: int = 0
    repair_growth: float = 2.0
    max_escalations: int = 4
    rewire_radius: Optional[float] = None
    goal_tolerance: Optional[float] = None
    cruise_speed_kph: float = 4.5
    blocked_at: float = DEFAULT_OBSTACLE_COST
    reweight_factor: float = 10.0

    def __post_init__(self) -> None:
        if self.max_iterations <= 0 or self.step_size <= 0:
            raise ValueError("max_iterations and step_size must be positive")
        if not 0.0 <= self.goal_bias <= 1.0:
            raise ValueError("goal_bias must lie in [0, 1]")
        if self.length_weight < 0 or self.cruise_speed_kph <= 0:
            raise ValueError("length_weight must be >= 0 and cruise speed positive")
        if self.repair_growth < 1.0 or self.max_escalations < 0:
            raise ValueError("repair growth must be >= 1 and escalations >= 0")
        if self.reweight_factor < 1.0:
            raise ValueError("reweight factor must be >= 1")

    @property
    def radius(self) -> float:
        return self.rewire_radius if self.rewire_radius is not None else 2.0 * self.step_size

    @property
    def goal_tol(self) -> float:
        return self.goal_tolerance if self.goal_tolerance is not None else self.step_size


@dataclass(frozen=True)
class RuleResult:
    """Screening outcome for one rule."""

    rule_id: str
    robustness: float
    verdict: Verdict
    threshold: float
    violating: tuple[tuple[int, int], ...]  # inclusive sample-index intervals

    @property
    def passed(self) -> bool:
        return self.robustness >= self.threshold


@dataclass(frozen=True)
class ScreeningReport:
    """Per-rule robustness and violation localization for one candidate."""

    results: tuple[RuleResult, ...]
    sample_count: int

    @property
    def accepted(self) -> bool:
        return all(result.passed for result in self.results)

    @property
    def violations(self) -> tuple[tuple[str, tuple[int, int]], ...]:
        out = []
        for result in self.results:
            if not result.passed:
                for interval in result.violating:
                    out.append((result.rule_id, interval))
        return tuple(out)

    def to_dict(self) -> dict:
        return {
            "accepted": self.accepted,
            "sample_count": self.sample_count,
            "rules": [
                {
                    "rule_id": r.rule_id,
                    "robustness": float(r.robustness),
                    "status": r.verdict.status,
                    "threshold": r.threshold,
                    "violating_samples": [list(iv) for iv in r.violating],
                }
                for r in self.results
            ],
        }

    def to_text(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=True)


class PlanGraph:
    """Rewiring tree over the cost map. Node 0 is the start anchor; node 1
    is the goal anchor (parent -1 and infinite cost until connected)."""

    def __init__(self, cost_map: CostMap, start, goal, cfg: PlannerConfig):
        capacity = cfg.max_iterations + 2
        self.positions = np.zeros((capacity, 2))
        self.parent = np.full(capacity, -1, dtype=np.int64)
        self.cost = np.full(capacity, np.inf)
        self.edge_cost = np.zeros(capacity)
        self.children: list[set[int]] = [set() for _ in range(capacity)]
        self.size = 2
        self.positions[0] = start
        self.positions[1] = goal
        self.cost[0] = 0.0
        # rows with infinite cost (disconnected); excluded from queries
        self._dead: set[int] = {1}
        self.cost_map = cost_map
        self.map_version = cost_map.provenance[1]
        self.cfg = cfg
        # every edge costs at least (cheapest cell + length weight) per meter
        self.edge_rate_floor = float(cost_map.values.min()) + cfg.length_weight
        self.rng = np.random.default_rng(np.random.SeedSequence(cfg.seed))

    START = 0
    GOAL = 1

    def _edge(self, a: np.ndarray, b: np.ndarray) -> tuple[float, bool]:
        return segment_cost(
            self.cost_map.values,
            float(a[0]),
            float(a[1]),
            float(b[0]),
            float(b[1]),
            self.cost_map.resolution,
            self.cfg.blocked_at,
            self.cfg.length_weight,
        )

    def _grow_capacity(self, extra: int) -> None:
        needed = self.size + extra
        if needed <= self.positions.shape[0]:
            return
        new_cap = max(needed, 2 * self.positions.shape[0])
        grow = new_cap - self.positions.shape[0]
        self.positions = np.vstack([self.positions, np.zeros((grow, 2))])
        self.parent = np.append(self.parent, np.full(grow, -1, dtype=np.int64))
        self.cost = np.append(self.cost, np.full(grow, np.inf))
        self.edge_cost = np.append(self.edge_cost, np.zeros(grow))
        self.children.extend(set() for _ in range(grow))

    def _attach(self, node: int, parent: int, edge: float) -> None:
        old = self.parent[node]
        if old >= 0:
            self.children[old].discard(node)
        self.parent[node] = parent
        self.edge_cost[node] = edge
        self.children[parent].add(node)
        self._refresh_subtree(node)

    def _refresh_subtree(self, root: int) -> None:
        dead = self._dead
        stack = [root]
        while stack:
            node = stack.pop()
            self.cost[node] = self.cost[self.parent[node]] + self.edge_cost[node]
            if dead:
                dead.discard(node)
            stack.extend(self.children[node])

    def _orphan_subtree(self, root: int) -> list[int]:
        old = self.parent[root]
        if old >= 0:
            self.children[old].discard(root)
        self.parent[root] = -1
        orphans = []
        stack = [root]
        while stack:
            node = stack.pop()
            orphans.append(node)
            self.cost[node] = np.inf
            self._dead.add(node)
            stack.extend(self.children[node])
        return orphans

    def _try_goal(self, node: int) -> None:
        goal_pos = self.positions[self.GOAL]
        gap = _dist(self.positions[node], goal_pos)
        if gap > self.cfg.goal_tol:
            return
        if self.cost[node] + gap * self.edge_rate_floor >= self.cost[self.GOAL]:
            return
        edge, blocked = self._edge(self.positions[node], goal_pos)
        if blocked:
            return
        if self.cost[node] + edge < self.cost[self.GOAL]:
            self._attach(self.GOAL, node, edge)

    def grow(self, iterations: int) -> None:
        """Run the sampling loop for a fixed number of iterations."""
        cfg = self.cfg
        h, w = self.cost_map.shape
        span_x = w * self.cost_map.resolution
        span_y = h * self.cost_map.resolution
        gx = float(self.positions[self.GOAL, 0])
        gy = float(self.positions[self.GOAL, 1])
        self._grow_capacity(iterations)
        radius_sq = cfg.radius * cfg.radius

        for _ in range(iterations):
            if self.rng.random() < cfg.goal_bias:
                tx, ty = gx, gy
            else:
                tx = self.rng.uniform(0.0, span_x)
                ty = self.rng.uniform(0.0, span_y)
            n = self.size
            dx = self.positions[:n, 0] - tx
            dy = self.positions[:n, 1] - ty
            dist_sq = dx * dx + dy * dy
            for j in self._dead:
                dist_sq[j] = np.inf
            nearest = int(np.argmin(dist_sq))
            gap = math.sqrt(float(dist_sq[nearest]))
            if gap < 1e-9:
                continue
            step = min(cfg.step_size, gap)
            nearest_x = float(self.positions[nearest, 0])
            nearest_y = float(self.positions[nearest, 1])
            px = nearest_x + (tx - nearest_x) / gap * step
            py = nearest_y + (ty - nearest_y) / gap * step
            if not (0.0 <= px < span_x and 0.0 <= py < span_y):
                continue

            dx = self.positions[:n, 0] - px
            dy = self.positions[:n, 1] - py
            near_sq = dx * dx + dy * dy
            for j in self._dead:
                near_sq[j] = np.inf
            if float(np.min(near_sq)) < 1e-12:
                continue  # duplicate of an existing node
            neighbors = np.flatnonzero(near_sq <= radius_sq)
            near_lb = np.sqrt(near_sq[neighbors]) * self.edge_rate_floor
            near_cost = self.cost[neighbors]
            new_pos = np.array([px, py])

            best_parent = -1
            best_cost = np.inf
            best_edge = 0.0
            # edge_rate_floor * distance lower-bounds the edge cost, so the
            # sweep can stop at the first bound that is already worse
            for k in np.argsort(near_cost + near_lb, kind="stable"):
                if near_cost[k] + near_lb[k] >= best_cost:
                    break
                j = int(neighbors[k])
                edge, blocked = self._edge(self.positions[j], new_pos)
                if blocked:
                    continue
                if near_cost[k] + edge < best_cost:
                    best_parent = j
                    best_cost = near_cost[k] + edge
                    best_edge = edge
            if best_parent < 0:
                continue

            node = self.size
            self._grow_capacity(1)
            self.positions[node, 0] = px
            self.positions[node, 1] = py
            self.size += 1
            self.children[node] = set()
            self.parent[node] = -1
            self._attach(node, best_parent, best_edge)

            # rewire: pull neighbors through the new node when cheaper.
            # Ancestors of the new node cost no more than best_cost (edge
            # costs are nonnegative), so the slack test filters them out and
            # no attachment here can close a cycle.
            for k, j in enumerate(neighbors):
                j = int(j)
                if j == self.START:
                    continue
                slack = self.cost[j] - (best_cost + near_lb[k])
                if slack <= 1e-12:
                    continue
                edge, blocked = self._edge(new_pos, self.positions[j])
                if blocked:
                    continue
                if best_cost + edge + 1e-12 < self.cost[j]:
                    self._attach(j, node, edge)
            self._try_goal(node)

    def waypoint_positions(self) -> list[tuple[float, float]]:
        """Start-to-goal positions along the tree, or Infeasible."""
        if not np.isfinite(self.cost[self.GOAL]):
            raise InfeasibleError("no path to goal within the iteration budget")
        chain = []
        node = self.GOAL
        while node >= 0:
            chain.append((float(self.positions[node][0]), float(self.positions[node][1])))
            node = int(self.parent[node])
        chain.reverse()
        return chain


def _dist(a, b) -> float:
    return float(math.hypot(float(a[0]) - float(b[0]), float(a[1]) - float(b[1])))


def cells_of_segment(
    x0: float, y0: float, x1: float, y1: float, resolution: float, shape: tuple[int, int]
) -> Iterator[tuple[int, int]]:
    """Cells a straight segment crosses, in traversal order (the same walk
    the cost kernel performs)."""
    h, w = shape
    length = math.hypot(x1 - x0, y1 - y0)
    col = math.floor(x0 / resolution)
    row = math.floor(y0 / resolution)
    if not (0 <= col < w and 0 <= row < h):
        return
    yield row, col
    if length == 0.0:
        return
    dx = (x1 - x0) / length
    dy = (y1 - y0) / length
    step_c = 1 if dx > 0 else (-1 if dx < 0 else 0)
    step_r = 1 if dy > 0 else (-1 if dy < 0 else 0)
    if step_c != 0:
        next_cx = (col + (1 if step_c > 0 else 0)) * resolution
        t_max_x = (next_cx - x0) / dx
        t_dx = resolution / abs(dx)
    else:
        t_max_x = math.inf
        t_dx = math.inf
    if step_r != 0:
        next_cy = (row + (1 if step_r > 0 else 0)) * resolution
        t_max_y = (next_cy - y0) / dy
        t_dy = resolution / abs(dy)
    else:
        t_max_y = math.inf
        t_dy = math.inf
    while True:
        t_next = min(t_max_x, t_max_y)
        if t_next >= length:
            return
        if t_max_x < t_max_y:
            col += step_c
            t_max_x += t_dx
        elif t_max_y < t_max_x:
            row += step_r
            t_max_y += t_dy
        else:
            col += step_c
            row += step_r
            t_max_x += t_dx
            t_max_y += t_dy
        if not (0 <= col < w and 0 <= row < h):
            return
        yield row, col


# -- timing -------------------------------------------------------------------


def time_positions(
    positions: Sequence[tuple[float, float]],
    cruise_speed_kph: float,
    start_time: float = 0.0,
) -> TimedPath:
    """Assign waypoint times at a constant cruise speed."""
    speed_mps = cruise_speed_kph / KPH_PER_MPS
    waypoints = [(positions[0][0], positions[0][1], start_time)]
    t = start_time
    for (x0, y0), (x1, y1) in zip(positions, positions[1:]):
        gap = math.hypot(x1 - x0, y1 - y0)
        if gap <= 0.0:
            continue
        t += gap / speed_mps
        waypoints.append((x1, y1, t))
    return TimedPath(tuple(waypoints))


def insert_stop_dwells(path: TimedPath, world: WorldModel, dt: float) -> TimedPath:
    """Insert a stop-and-hold dwell at every stop-zone entry.

    The dwell anchor is the first trace tick whose position falls inside a
    zone, so the entry tick itself samples zero speed; the hold lasts the
    stop rule's window plus two ticks of slack.
    """
    if not world.stop_zones or len(path.waypoints) < 2:
        return path
    dwell = R42_HOLD_SECONDS + 2.0 * dt
    out = path
    guard = 0
    search_from = out.t_start
    while guard < 32:
        guard += 1
        entry = _first_zone_entry(out, world, dt, search_from)
        if entry is None:
            return out
        entry_t, x, y = entry
        out = _splice_dwell(out, entry_t, x, y, dwell)
        search_from = entry_t + dwell + dt / 2
    return out


def _first_zone_entry(
    path: TimedPath, world: WorldModel, dt: float, search_from: float
) -> Optional[tuple[float, float, float]]:
    """First tick at or after search_from where the path enters a stop zone
    from outside, unless it is already a zero-speed dwell."""
    n = int(math.floor(path.duration / dt + 1e-9)) + 1
    times = path.t_start + np.arange(n) * dt
    xs, ys = path.positions_at(times)
    inside = np.zeros(n, dtype=bool)
    for zone in world.stop_zones:
        inside |= (zone.x0 <= xs) & (xs < zone.x1) & (zone.y0 <= ys) & (ys < zone.y1)
    previous = np.concatenate([[False], inside[:-1]])
    entries = inside & ~previous
    speeds = path.speeds_mps_at(times)
    for k in np.flatnonzero(entries):
        t = float(times[k])
        if t < search_from - 1e-9:
            continue
        if speeds[k] <= 1e-12:
            continue  # already dwelling here
        return t, float(xs[k]), float(ys[k])
    return None


def _splice_dwell(path: TimedPath, entry_t: float, x: float, y: float, dwell: float) -> TimedPath:
    """Hold position (x, y) for `dwell` seconds starting at entry_t; later
    waypoints shift by the dwell duration."""
    waypoints: list[tuple[float, float, float]] = []
    for wx, wy, wt in path.waypoints:
        if wt < entry_t - 1e-9:
            waypoints.append((wx, wy, wt))
        else:
            break
    waypoints.append((x, y, entry_t))
    waypoints.append((x, y, entry_t + dwell))
    for wx, wy, wt in path.waypoints:
        if wt > entry_t + 1e-9:
            waypoints.append((wx, wy, wt + dwell))
    return TimedPath(tuple(waypoints))


# -- planning ----------------------------------------------------------------


def build_graph(
    cost_map: CostMap,
    start: tuple[float, float],
    goal: tuple[float, float],
    cfg: PlannerConfig,
) -> PlanGraph:
    _require_free(cost_map, start, cfg.blocked_at, "start")
    _require_free(cost_map, goal, cfg.blocked_at, "goal")
    graph = PlanGraph(cost_map, start, goal, cfg)
    if _dist(start, goal) < 1e-9:
        graph._attach(graph.GOAL, graph.START, 0.0)
        return graph
    edge, blocked = graph._edge(graph.positions[graph.START], graph.positions[graph.GOAL])
    if not blocked and _dist(start, goal) <= cfg.goal_tol:
        graph._attach(graph.GOAL, graph.START, edge)
    graph.grow(cfg.max_iterations)
    return graph


def _require_free(cost_map: CostMap, pos, blocked_at: float, name: str) -> None:
    h, w = cost_map.shape
    col = math.floor(pos[0] / cost_map.resolution)
    row = math.floor(pos[1] / cost_map.resolution)
    if not (0 <= row < h and 0 <= col < w):
        raise InfeasibleError(f"{name} position {tuple(pos)} outside the map")
    if cost_map.values[row, col] >= blocked_at:
        raise InfeasibleError(f"{name} position {tuple(pos)} lies in a forbidden region")


def plan(
    cost_map: CostMap,
    start: tuple[float, float],
    goal: tuple[float, float],
    cfg: PlannerConfig,
    start_time: float = 0.0,
) -> TimedPath:
    """Grow a tree and return the best start-to-goal path, timed at the
    configured cruise speed. Deterministic for a given seed."""
    graph = build_graph(cost_map, start, goal, cfg)
    positions = graph.waypoint_positions()
    return time_positions(positions, cfg.cruise_speed_kph, start_time)


def path_cost(cost_map: CostMap, path: TimedPath, cfg: PlannerConfig) -> float:
    """Accumulated cost-map integral plus length weight along a path."""
    total = 0.0
    for (x0, y0, _), (x1, y1, _) in zip(path.waypoints, path.waypoints[1:]):
        cost, blocked = segment_cost(
            cost_map.values,
            x0,
            y0,
            x1,
            y1,
            cost_map.resolution,
            cfg.blocked_at,
            cfg.length_weight,
        )
        if blocked:
            return math.inf
        total += cost
    return total


# -- screening ----------------------------------------------------------------


def screen_plan(
    path: TimedPath,
    specs: Sequence[Rule],
    world: WorldModel,
    dt: float = 0.5,
) -> ScreeningReport:
    """Derive the path's trace and evaluate every hard rule offline,
    localizing violations to sample-index intervals."""
    trace = derive_trace(path, world, dt)
    return screen_trace(trace, specs)


def screen_trace(trace: Trace, specs: Sequence[Rule]) -> ScreeningReport:
    results = []
    for rule in specs:
        verdict = evaluate_offline(rule.formula, trace)
        violating: tuple[tuple[int, int], ...] = ()
        if verdict.robustness < rule.threshold:
            violating = _violating_intervals(rule, trace)
        results.append(
            RuleResult(rule.rule_id, verdict.robustness, verdict, rule.threshold, violating)
        )
    return ScreeningReport(tuple(results), len(trace))


def _violating_intervals(rule: Rule, trace: Trace) -> tuple[tuple[int, int], ...]:
    """Sample intervals whose modification could restore satisfaction. For
    G[a,*](body) rules these are the runs of samples where the body margin
    drops below the threshold; other shapes get the whole trace."""
    formula = rule.formula
    n = len(trace)
    if isinstance(formula, Globally):
        ka, _ = interval_offsets(formula.interval, trace.dt)
        body = robustness_signal(formula.child, trace)
        bad = np.flatnonzero(body < rule.threshold)
        bad = bad[bad >= ka]
        if bad.size:
            return _group_runs(bad)
    return ((0, max(n - 1, 0)),)


def _group_runs(indices: np.ndarray) -> tuple[tuple[int, int], ...]:
    runs = []
    start = prev = int(indices[0])
    for value in indices[1:]:
        value = int(value)
        if value == prev + 1:
            prev = value
            continue
        runs.append((start, prev))
        start = prev = value
    runs.append((start, prev))
    return tuple(runs)


def violating_cells(
    report: ScreeningReport, path: TimedPath, world: WorldModel, dt: float
) -> list[tuple[int, int]]:
    """Grid cells touched during violating sample intervals, for
    re-weighting."""
    n = report.sample_count
    times = path.t_start + np.arange(n) * dt
    xs, ys = path.positions_at(times)
    cells: set[tuple[int, int]] = set()
    for _, (lo, hi) in report.violations:
        for k in range(max(lo, 0), min(hi, n - 1) + 1):
            if world.in_bounds(float(xs[k]), float(ys[k])):
                cells.add(world.cell_of(float(xs[k]), float(ys[k])))
    return sorted(cells)


# -- repair -------------------------------------------------------------------


def repair_plan(
    path: TimedPath,
    report: ScreeningReport,
    cost_map: CostMap,
    specs: Sequence[Rule],
    cfg: PlannerConfig,
    world: WorldModel,
    dt: float = 0.5,
) -> TimedPath:
    """Replace the offending span of the path, growing the repair window by
    the configured factor until the candidate screens clean, escalating to
    a full replan. Waypoints outside the final window keep their exact
    coordinates."""
    if report.accepted:
        return path
    waypoints = path.waypoints
    m = len(waypoints)
    lo_idx, hi_idx = _violation_waypoint_window(path, report, dt)

    for escalation in range(cfg.max_escalations + 1):
        grown = int(math.ceil((hi_idx - lo_idx + 1) * cfg.repair_growth**escalation))
        center = (lo_idx + hi_idx) / 2.0
        w_lo = max(int(math.floor(center - grown / 2.0)), 0)
        w_hi = min(int(math.ceil(center + grown / 2.0)), m - 1)
        if w_lo == 0 and w_hi == m - 1:
            break  # window covers everything: full replan
        candidate = _splice_repair(path, w_lo, w_hi, cost_map, cfg, world, dt, escalation)
        if candidate is not None:
            verdict = screen_plan(candidate, specs, world, dt)
            if verdict.accepted:
                return candidate

    replan_cfg = replace(cfg, seed=_derive_seed(cfg.seed, "full-replan"))
    start = (waypoints[0][0], waypoints[0][1])
    goal = (waypoints[-1][0], waypoints[-1][1])
    try:
        fresh = plan(cost_map, start, goal, replan_cfg, start_time=path.t_start)
    except InfeasibleError as exc:
        raise IrreparableError(f"full replan failed: {exc}") from exc
    fresh = insert_stop_dwells(fresh, world, dt)
    verdict = screen_plan(fresh, specs, world, dt)
    if not verdict.accepted:
        raise IrreparableError("full replan still violates the hard rules")
    return fresh


def _violation_waypoint_window(
    path: TimedPath, report: ScreeningReport, dt: float
) -> tuple[int, int]:
    """Initial repair window: waypoints covering the violating samples,
    padded by one waypoint on each side as reconnection anchors."""
    spans = [iv for _, iv in report.violations]
    lo_sample = min(s[0] for s in spans)
    hi_sample = max(s[1] for s in spans)
    t_lo = path.t_start + lo_sample * dt
    t_hi = path.t_start + hi_sample * dt
    m = len(path.waypoints)
    lo_idx = m - 1
    hi_idx = 0
    for i, (_, _, t) in enumerate(path.waypoints):
        if t >= t_lo - 1e-9 and i < lo_idx:
            lo_idx = i
        if t <= t_hi + 1e-9 and i > hi_idx:
            hi_idx = i
    if lo_idx > hi_idx:  # violation span between two waypoints
        hi_idx = min(lo_idx, m - 1)
        lo_idx = max(hi_idx - 1, 0)
    lo_idx = max(lo_idx - 1, 0)
    hi_idx = min(hi_idx + 1, m - 1)
    return lo_idx, hi_idx


def _splice_repair(
    path: TimedPath,
    w_lo: int,
    w_hi: int,
    cost_map: CostMap,
    cfg: PlannerConfig,
    world: WorldModel,
    dt: float,
    escalation: int,
) -> Optional[TimedPath]:
    """Reroute between waypoints w_lo and w_hi, keeping everything outside
    the window bitwise intact (suffix times shift by the new duration)."""
    waypoints = path.waypoints
    anchor_a = waypoints[w_lo]
    anchor_b = waypoints[w_hi]
    sub_cfg = replace(cfg, seed=_derive_seed(cfg.seed, f"repair-{escalation}"))
    try:
        sub = plan(
            cost_map,
            (anchor_a[0], anchor_a[1]),
            (anchor_b[0], anchor_b[1]),
            sub_cfg,
            start_time=anchor_a[2],
        )
    except InfeasibleError:
        return None
    sub = insert_stop_dwells(sub, world, dt)

    new_points = list(waypoints[:w_lo])
    new_points.extend(sub.waypoints)
    shift = sub.t_end - anchor_b[2]
    for x, y, t in waypoints[w_hi + 1 :]:
        new_points.append((x, y, t + shift))
    return TimedPath(tuple(new_points))


def _derive_seed(seed: int, label: str) -> int:
    token = zlib.crc32(label.encode("utf-8"))
    return int(np.random.SeedSequence([seed, token]).generate_state(1)[0])


# -- incremental graph repair --------------------------------------------------


def update_plan_graph(
    graph: PlanGraph,
    changed_cells: Iterable[tuple[int, int]],
    new_map: CostMap,
) -> PlanGraph:
    """Re-cost edges crossing changed cells against the new map, sever
    newly forbidden edges, reconnect or orphan their subtrees, and (only if
    structure changed) resume sampling to recover coverage."""
    changed = set(changed_cells)
    graph.cost_map = new_map
    graph.edge_rate_floor = float(new_map.values.min()) + graph.cfg.length_weight
    graph.map_version = new_map.provenance[1]
    if not changed:
        return graph

    affected = []
    for node in range(graph.size):
        p = int(graph.parent[node])
        if p < 0:
            continue
        cells = cells_of_segment(
            float(graph.positions[p][0]),
            float(graph.positions[p][1]),
            float(graph.positions[node][0]),
            float(graph.positions[node][1]),
            new_map.resolution,
            new_map.shape,
        )
        if any(cell in changed for cell in cells):
            affected.append(node)
    if not affected:
        return graph

    severed = False
    orphans: list[int] = []
    for node in affected:
        p = int(graph.parent[node])
        if p < 0:
            continue  # already orphaned by an earlier severing
        edge, blocked = graph._edge(graph.positions[p], graph.positions[node])
        if blocked:
            severed = True
            orphans.extend(graph._orphan_subtree(node))
        else:
            graph.edge_cost[node] = edge
            graph._refresh_subtree(node)

    if orphans:
        _reconnect(graph, orphans)
    if severed:
        graph.grow(max(graph.cfg.max_iterations // 2, 1))
    return graph


def _reconnect(graph: PlanGraph, orphans: list[int]) -> None:
    """Try to reattach orphaned nodes through surviving neighbors."""
    orphan_set = set(orphans)
    for _ in range(2):  # a second pass lets chains reattach
        progress = False
        for node in sorted(orphan_set):
            if np.isfinite(graph.cost[node]):
                continue
            live = np.flatnonzero(np.isfinite(graph.cost[: graph.size]))
            if live.size == 0:
                break
            deltas = graph.positions[live] - graph.positions[node]
            dists = np.hypot(deltas[:, 0], deltas[:, 1])
            order = np.argsort(dists, kind="stable")
            for j in order:
                if dists[j] > graph.cfg.radius:
                    break
                parent = int(live[j])
                edge, blocked = graph._edge(graph.positions[parent], graph.positions[node])
                if blocked:
                    continue
                graph._attach(node, parent, edge)
                progress = True
                break
        if not progress:
            break


# -- certify loop --------------------------------------------------------------


def certify_plan(
    cost_map: CostMap,
    start: tuple[float, float],
    goal: tuple[float, float],
    specs: Sequence[Rule],
    world: WorldModel,
    cfg: PlannerConfig,
    dt: float = 0.5,
    start_time: float = 0.0,
) -> tuple[TimedPath, ScreeningReport]:
    """Plan, screen, re-weight violating cells, and repair until a
    candidate satisfies every hard rule; bounded by max_escalations."""
    work_map = cost_map
    last_error: Optional[Exception] = None
    for attempt in range(cfg.max_escalations + 1):
        attempt_cfg = replace(cfg, seed=_derive_seed(cfg.seed, f"certify-{attempt}"))
        try:
            candidate = plan(work_map, start, goal, attempt_cfg, start_time)
        except InfeasibleError as exc:
            last_error = exc
            break  # a harder map will not appear by reweighting alone
        candidate = insert_stop_dwells(candidate, world, dt)
        report = screen_plan(candidate, specs, world, dt)
        if report.accepted:
            return candidate, report
        cells = violating_cells(report, candidate, world, dt)
        if cells:
            work_map = reweight_region(work_map, cells, cfg.reweight_factor)
        try:
            repaired = repair_plan(candidate, report, work_map, specs, attempt_cfg, world, dt)
            return repaired, screen_plan(repaired, specs, world, dt)
        except (InfeasibleError, IrreparableError) as exc:
            last_error = exc
            continue
    if last_error is not None:
        raise InfeasibleError(f"certification failed: {last_error}")
    raise InfeasibleError("certification failed after the escalation budget")
