"""Discrete-time multi-signal traces derived from timed paths and worlds.

A trace samples the signals the rules speak about (speed, obstacle
distance, terrain status, stop events) at a uniform tick. The same
derivation serves planning-time screening (from a candidate path) and
runtime monitoring (from executed robot states), so both see identical
semantics.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Iterator, Mapping, Optional, Sequence

import numpy as np

from .errors import TraceError, WorldError
from .schema import SignalInfo, base_schema

if TYPE_CHECKING:
    from .runtime import RobotState
    from .world import WorldModel

KPH_PER_MPS = 3.6
SLOW_THRESHOLD_KPH = 5.0  # "slow" atom: speed strictly below this
STOP_EPS_KPH = 0.05  # "stop" atom: speed within this band of zero
_TIME_TOL = 1e-9


@dataclass(frozen=True)
class Sample:
    """One tick: time in seconds and a value per schema signal."""

    t: float
    values: Mapping[str, float]


class Trace:
    """Uniformly sampled signal bundle; value-like, treat as immutable."""

    def __init__(
        self,
        dt: float,
        times: np.ndarray,
        signals: Mapping[str, np.ndarray],
        schema: Mapping[str, SignalInfo],
    ):
        if dt <= 0:
            raise TraceError("dt must be positive")
        times = np.asarray(times, dtype=np.float64)
        n = times.shape[0]
        if n:
            expected = times[0] + np.arange(n) * dt
            if np.max(np.abs(times - expected)) > _TIME_TOL:
                raise TraceError("timestamps must advance uniformly at dt")
        arrays: dict[str, np.ndarray] = {}
        for name, info in schema.items():
            if name not in signals:
                raise TraceError(f"missing signal {name!r}")
            arr = np.asarray(signals[name], dtype=np.float64)
            if arr.shape != (n,):
                raise TraceError(f"signal {name!r} has {arr.shape[0]} samples, expected {n}")
            if info.kind == "bool" and n and not np.all(np.abs(arr) == 1.0):
                raise TraceError(f"Boolean signal {name!r} must be exactly +1/-1")
            arrays[name] = arr
        extra = set(signals) - set(schema)
        if extra:
            raise TraceError(f"signals not in schema: {', '.join(sorted(extra))}")
        self.dt = float(dt)
        self.times = times
        self._signals = arrays
        self.schema = dict(schema)

    def __len__(self) -> int:
        return self.times.shape[0]

    @property
    def t0(self) -> float:
        if not len(self):
            raise TraceError("empty trace has no start time")
        return float(self.times[0])

    def signal(self, name: str) -> np.ndarray:
        try:
            return self._signals[name]
        except KeyError:
            raise TraceError(f"missing signal {name!r}") from None

    def sample(self, index: int) -> Sample:
        if not 0 <= index < len(self):
            raise TraceError(f"sample index {index} out of range")
        return Sample(
            float(self.times[index]),
            {name: float(arr[index]) for name, arr in self._signals.items()},
        )

    def samples(self) -> Iterator[Sample]:
        for index in range(len(self)):
            yield self.sample(index)

    def prefix(self, count: int) -> "Trace":
        count = max(0, min(count, len(self)))
        return Trace(
            self.dt,
            self.times[:count],
            {name: arr[:count] for name, arr in self._signals.items()},
            self.schema,
        )

    @classmethod
    def from_samples(
        cls,
        dt: float,
        samples: Sequence[Sample],
        schema: Mapping[str, SignalInfo],
    ) -> "Trace":
        times = np.array([s.t for s in samples], dtype=np.float64)
        signals = {
            name: np.array([s.values[name] for s in samples], dtype=np.float64)
            for name in schema
        }
        return cls(dt, times, signals, schema)


def append_sample(trace: Trace, sample: Sample) -> Trace:
    """Extend a trace by one sample, enforcing the uniform tick."""
    n = len(trace)
    if n:
        expected = trace.times[-1] + trace.dt
        if sample.t <= trace.times[-1]:
            raise TraceError(f"timestamp {sample.t} does not advance past {trace.times[-1]}")
        if abs(sample.t - expected) > _TIME_TOL:
            raise TraceError(f"timestamp {sample.t} is not one dt after {trace.times[-1]}")
    times = np.append(trace.times, sample.t)
    signals = {}
    for name in trace.schema:
        if name not in sample.values:
            raise TraceError(f"sample missing signal {name!r}")
        signals[name] = np.append(trace.signal(name), float(sample.values[name]))
    return Trace(trace.dt, times, signals, trace.schema)


@dataclass(frozen=True)
class TimedPath:
    """Piecewise-linear path: (x, y, t) waypoints with strictly increasing
    times. Repeated positions at later times encode dwells."""

    waypoints: tuple[tuple[float, float, float], ...]

    def __post_init__(self) -> None:
        if not self.waypoints:
            raise TraceError("path needs at least one waypoint")
        points = tuple((float(x), float(y), float(t)) for x, y, t in self.waypoints)
        object.__setattr__(self, "waypoints", points)
        xs = np.array([p[0] for p in points])
        ys = np.array([p[1] for p in points])
        ts = np.array([p[2] for p in points])
        if len(points) > 1:
            gaps = np.diff(ts)
            if np.any(gaps <= 0):
                raise TraceError("waypoint times must strictly increase")
            speeds = np.hypot(np.diff(xs), np.diff(ys)) / gaps
            if not np.all(np.isfinite(speeds)):
                raise TraceError("segment speed must be finite")
            object.__setattr__(self, "_speeds", speeds)
        else:
            object.__setattr__(self, "_speeds", np.zeros(0))
        object.__setattr__(self, "_xs", xs)
        object.__setattr__(self, "_ys", ys)
        object.__setattr__(self, "_ts", ts)

    @property
    def t_start(self) -> float:
        return self.waypoints[0][2]

    @property
    def t_end(self) -> float:
        return self.waypoints[-1][2]

    @property
    def duration(self) -> float:
        return self.t_end - self.t_start

    def _segment_indices(self, times: np.ndarray) -> np.ndarray:
        """Index of the segment containing each time (forward-looking: t on
        a waypoint belongs to the segment starting there; times at or past
        the end map to the last segment)."""
        idx = np.searchsorted(self._ts, times, side="right") - 1
        return np.clip(idx, 0, max(len(self.waypoints) - 2, 0))

    def positions_at(self, times: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        times = np.asarray(times, dtype=np.float64)
        if len(self.waypoints) == 1:
            return (
                np.full(times.shape, self._xs[0]),
                np.full(times.shape, self._ys[0]),
            )
        idx = self._segment_indices(times)
        t0 = self._ts[idx]
        t1 = self._ts[idx + 1]
        frac = np.clip((times - t0) / (t1 - t0), 0.0, 1.0)
        return (
            self._xs[idx] + frac * (self._xs[idx + 1] - self._xs[idx]),
            self._ys[idx] + frac * (self._ys[idx + 1] - self._ys[idx]),
        )

    def speeds_mps_at(self, times: np.ndarray) -> np.ndarray:
        times = np.asarray(times, dtype=np.float64)
        if len(self.waypoints) == 1:
            return np.zeros(times.shape)
        return self._speeds[self._segment_indices(times)]

    def position_at(self, t: float) -> tuple[float, float]:
        """Linear interpolation, clamped to the path's time span."""
        xs, ys = self.positions_at(np.array([t]))
        return float(xs[0]), float(ys[0])

    def speed_mps_at(self, t: float) -> float:
        """Speed of the segment containing t (forward-looking); the final
        timestamp takes the last segment's speed; single waypoint -> 0."""
        return float(self.speeds_mps_at(np.array([t]))[0])

    def length(self) -> float:
        return float(np.sum(np.hypot(np.diff(self._xs), np.diff(self._ys))))


def derive_trace(
    path: TimedPath,
    world: "WorldModel",
    dt: float,
    slow_threshold: float = SLOW_THRESHOLD_KPH,
    stop_eps: float = STOP_EPS_KPH,
) -> Trace:
    """Sample a timed path into a trace at tick dt.

    Signals: position (x, y), speed (kph, forward-looking segment speed),
    dist_o (distance-field value of the occupied cell, meters), one
    status_<label> Boolean per world label (argmax cell label), stop_obs /
    at_stop (entry events: +1 on the first tick inside a stop sign's
    detection radius / a stop zone after being outside), and slow / stop
    (speed below the slow threshold / within the stop band).
    """
    if dt <= 0:
        raise TraceError("dt must be positive")
    n = int(math.floor(path.duration / dt + _TIME_TOL)) + 1
    t0 = path.t_start
    times = t0 + np.arange(n) * dt

    schema = base_schema(world.labels)
    xs, ys = path.positions_at(times)
    speeds = path.speeds_mps_at(times) * KPH_PER_MPS

    span_x, span_y = world.extent
    outside = (xs < 0) | (xs >= span_x) | (ys < 0) | (ys >= span_y)
    if np.any(outside):
        k = int(np.argmax(outside))
        raise WorldError(
            f"path leaves world bounds at t={float(times[k]):.3f} "
            f"({xs[k]:.2f}, {ys[k]:.2f})"
        )
    rows = np.floor(ys / world.resolution).astype(np.int64)
    cols = np.floor(xs / world.resolution).astype(np.int64)
    label_idx = world.grid[rows, cols].astype(np.int64)
    dists = world.distance_field().values[rows, cols]

    near_sign = np.zeros(n, dtype=bool)
    for sign in world.stop_signs:
        near_sign |= np.hypot(xs - sign.x, ys - sign.y) <= sign.radius
    in_zone = np.zeros(n, dtype=bool)
    for zone in world.stop_zones:
        in_zone |= (zone.x0 <= xs) & (xs < zone.x1) & (zone.y0 <= ys) & (ys < zone.y1)

    signals: dict[str, np.ndarray] = {
        "x": xs,
        "y": ys,
        "speed": speeds,
        "dist_o": dists,
        "stop_obs": _entry_events(near_sign),
        "at_stop": _entry_events(in_zone),
        "slow": np.where(speeds < slow_threshold, 1.0, -1.0),
        "stop": np.where(speeds <= stop_eps, 1.0, -1.0),
    }
    for index, label in enumerate(world.labels):
        signals[f"status_{label}"] = np.where(label_idx == index, 1.0, -1.0)
    return Trace(dt, times, signals, schema)


def _entry_events(membership: np.ndarray) -> np.ndarray:
    """+1 on ticks where membership starts (first tick counts if inside)."""
    previous = np.concatenate([[False], membership[:-1]])
    return np.where(membership & ~previous, 1.0, -1.0)


def state_sample(
    state: "RobotState",
    world: "WorldModel",
    previous: Optional[Sample],
    labels: Optional[tuple[str, ...]] = None,
    slow_threshold: float = SLOW_THRESHOLD_KPH,
    stop_eps: float = STOP_EPS_KPH,
) -> Sample:
    """Derive one trace sample from a robot state, using the previous
    sample's position for the stop entry events."""
    x, y = state.x, state.y
    if not world.in_bounds(x, y):
        raise WorldError(f"robot leaves world bounds at t={state.t:.3f}")
    labels = labels if labels is not None else world.labels
    speed = state.speed
    was_near = previous is not None and world.near_stop_sign(
        previous.values["x"], previous.values["y"]
    )
    was_in_zone = previous is not None and world.in_stop_zone(
        previous.values["x"], previous.values["y"]
    )
    values: dict[str, float] = {
        "x": x,
        "y": y,
        "speed": speed,
        "dist_o": world.distance_at(x, y),
        "stop_obs": 1.0 if world.near_stop_sign(x, y) and not was_near else -1.0,
        "at_stop": 1.0 if world.in_stop_zone(x, y) and not was_in_zone else -1.0,
        "slow": 1.0 if speed < slow_threshold else -1.0,
        "stop": 1.0 if speed <= stop_eps else -1.0,
    }
    cell_label = world.label_at(x, y)
    for label in labels:
        values[f"status_{label}"] = 1.0 if label == cell_label else -1.0
    return Sample(state.t, values)


def append_execution_sample(trace: Trace, state: "RobotState", world: "WorldModel") -> Trace:
    """Extend an execution trace with one robot state, deriving signals
    identically to derive_trace (actual speed, disturbances included)."""
    previous = trace.sample(len(trace) - 1) if len(trace) else None
    return append_sample(trace, state_sample(state, world, previous))


# -- CSV serialization (bit-exact round trip) --------------------------------


def _format_value(value: float, info: SignalInfo) -> str:
    if info.kind == "bool":
        return "+1" if value > 0 else "-1"
    return repr(value)


def trace_to_csv(trace: Trace, path: str) -> None:
    names = list(trace.schema)
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["t"] + names)
        for k in range(len(trace)):
            row = [repr(float(trace.times[k]))]
            for name in names:
                row.append(_format_value(float(trace.signal(name)[k]), trace.schema[name]))
            writer.writerow(row)


def trace_from_csv(
    path: str,
    schema: Mapping[str, SignalInfo],
    dt: Optional[float] = None,
) -> Trace:
    with open(path, "r", encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise TraceError(f"trace file {path} is empty") from None
        expected = ["t"] + list(schema)
        if header != expected:
            raise TraceError(f"trace header {header} does not match schema {expected}")
        rows = [[float(cell) for cell in row] for row in reader]
    times = np.array([row[0] for row in rows], dtype=np.float64)
    if dt is None:
        if len(times) < 2:
            raise TraceError("cannot infer dt from fewer than two samples")
        dt = float(times[1] - times[0])
    signals = {
        name: np.array([row[i + 1] for row in rows], dtype=np.float64)
        for i, name in enumerate(schema)
    }
    return Trace(dt, times, signals, schema)


def path_to_csv(path_obj: TimedPath, path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["x", "y", "t"])
        for x, y, t in path_obj.waypoints:
            writer.writerow([repr(x), repr(y), repr(t)])


def path_from_csv(path: str) -> TimedPath:
    with open(path, "r", encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise TraceError(f"path file {path} is empty") from None
        if header != ["x", "y", "t"]:
            raise TraceError(f"path header {header} must be x,y,t")
        waypoints = [(float(row[0]), float(row[1]), float(row[2])) for row in reader]
    return TimedPath(tuple(waypoints))
