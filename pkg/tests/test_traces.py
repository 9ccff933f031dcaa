"""Trace construction, timed paths, discrete trace derivation, and the
bit-exact CSV round trips."""

import math

import numpy as np
import pytest

from stlnav.errors import TraceError, WorldError
from stlnav.schema import SignalInfo, base_schema
from stlnav.traces import (
    KPH_PER_MPS,
    Sample,
    TimedPath,
    Trace,
    append_sample,
    derive_trace,
    path_from_csv,
    path_to_csv,
    trace_from_csv,
    trace_to_csv,
)
from stlnav.world import StopSign, StopZone, WorldModel

from conftest import TEST_SCHEMA, make_trace, random_trace, small_world


def test_trace_validation():
    good = {"a": [1.0], "b": [2.0], "p": [1.0], "q": [-1.0]}
    with pytest.raises(TraceError, match="dt must be positive"):
        Trace(0.0, np.array([0.0]), good, TEST_SCHEMA)
    with pytest.raises(TraceError, match="uniformly"):
        Trace(1.0, np.array([0.0, 1.0, 2.5]), {k: [v[0]] * 3 for k, v in good.items()}, TEST_SCHEMA)
    with pytest.raises(TraceError, match="missing signal 'q'"):
        Trace(1.0, np.array([0.0]), {"a": [1.0], "b": [1.0], "p": [1.0]}, TEST_SCHEMA)
    with pytest.raises(TraceError, match="has 2 samples"):
        Trace(1.0, np.array([0.0]), dict(good, a=[1.0, 2.0]), TEST_SCHEMA)
    with pytest.raises(TraceError, match=r"exactly \+1/-1"):
        Trace(1.0, np.array([0.0]), dict(good, p=[0.5]), TEST_SCHEMA)
    with pytest.raises(TraceError, match="not in schema"):
        Trace(1.0, np.array([0.0]), dict(good, z=[0.0]), TEST_SCHEMA)


def test_trace_accessors():
    trace = make_trace(0.5, {"a": [1.0, 2.0], "b": [3.0, 4.0], "p": [1, -1], "q": [1, 1]}, t0=2.0)
    assert len(trace) == 2
    assert trace.t0 == 2.0
    assert trace.sample(1).t == 2.5
    assert trace.sample(1).values["a"] == 2.0
    assert [s.t for s in trace.samples()] == [2.0, 2.5]
    short = trace.prefix(1)
    assert len(short) == 1 and short.t0 == 2.0
    assert len(trace.prefix(99)) == 2
    with pytest.raises(TraceError):
        trace.prefix(0).t0
    with pytest.raises(TraceError):
        trace.sample(2)
    with pytest.raises(TraceError):
        trace.signal("nope")


def test_append_sample_enforces_tick():
    trace = make_trace(0.5, {"a": [1.0], "b": [1.0], "p": [1], "q": [1]})
    values = {"a": 2.0, "b": 2.0, "p": 1.0, "q": -1.0}
    grown = append_sample(trace, Sample(0.5, values))
    assert len(grown) == 2 and grown.signal("a")[1] == 2.0
    assert len(trace) == 1  # original untouched
    with pytest.raises(TraceError, match="not one dt"):
        append_sample(trace, Sample(0.7, values))
    with pytest.raises(TraceError, match="does not advance"):
        append_sample(trace, Sample(0.0, values))
    with pytest.raises(TraceError, match="missing signal"):
        append_sample(trace, Sample(0.5, {"a": 1.0}))


def test_timed_path_invariants():
    with pytest.raises(TraceError, match="at least one waypoint"):
        TimedPath(())
    with pytest.raises(TraceError, match="strictly increase"):
        TimedPath(((0.0, 0.0, 0.0), (1.0, 0.0, 0.0)))
    single = TimedPath(((2.0, 3.0, 1.0),))
    assert single.position_at(5.0) == (2.0, 3.0)
    assert single.speed_mps_at(1.0) == 0.0
    assert single.duration == 0.0 and single.length() == 0.0


def test_timed_path_interpolation_and_speeds():
    path = TimedPath(((0.0, 0.0, 0.0), (4.0, 0.0, 4.0), (4.0, 3.0, 5.0)))
    assert path.position_at(2.0) == (2.0, 0.0)
    assert path.position_at(4.5) == (4.0, 1.5)
    # clamped outside the time span
    assert path.position_at(-1.0) == (0.0, 0.0)
    assert path.position_at(99.0) == (4.0, 3.0)
    # forward-looking: a waypoint time takes the outgoing segment's speed
    assert path.speed_mps_at(0.0) == 1.0
    assert path.speed_mps_at(4.0) == 3.0
    # the final time keeps the last segment's speed
    assert path.speed_mps_at(5.0) == 3.0
    assert path.length() == 7.0


def test_timed_path_dwell_encodes_zero_speed():
    path = TimedPath(((1.0, 1.0, 0.0), (1.0, 1.0, 2.0), (3.0, 1.0, 4.0)))
    assert path.speed_mps_at(0.0) == 0.0
    assert path.speed_mps_at(1.9) == 0.0
    assert path.speed_mps_at(2.0) == 1.0
    assert path.length() == 2.0


def make_derive_world():
    """6x4 m strip: grass, one obstacle cell well away from the path, a
    stop sign and a stop zone along it."""
    grid = np.zeros((4, 6), dtype=np.int16)
    grid[3, 3] = 2  # obstacle, top row
    return WorldModel(
        grid,
        ("grass", "sidewalk", "obstacle"),
        1.0,
        obstacle_labels=("obstacle",),
        stop_signs=(StopSign(4.5, 0.5, 1.0),),
        stop_zones=(StopZone(2.0, 3.0, 0.0, 1.0),),
    )


def test_derive_trace_signals():
    world = make_derive_world()
    path = TimedPath(((0.5, 0.5, 0.0), (4.5, 0.5, 4.0)))
    trace = derive_trace(path, world, 1.0)
    assert len(trace) == 5
    assert trace.times.tolist() == [0.0, 1.0, 2.0, 3.0, 4.0]
    assert trace.signal("x").tolist() == [0.5, 1.5, 2.5, 3.5, 4.5]
    # 1 m/s everywhere, forward-looking at the final sample too
    assert np.all(trace.signal("speed") == KPH_PER_MPS)
    assert np.all(trace.signal("slow") == 1.0)  # 3.6 kph < 5
    assert np.all(trace.signal("stop") == -1.0)
    assert np.all(trace.signal("status_grass") == 1.0)
    # entry events fire exactly once per crossing
    assert trace.signal("at_stop").tolist() == [-1.0, -1.0, 1.0, -1.0, -1.0]
    assert trace.signal("stop_obs").tolist() == [-1.0, -1.0, -1.0, 1.0, -1.0]
    # distance to the obstacle cell at (row 3, col 3), in cell centers
    expect = [math.hypot(3, 3 - c) for c in range(5)]
    assert np.allclose(trace.signal("dist_o"), expect, atol=0.0)


def test_derive_trace_first_tick_inside_zone_counts_as_entry():
    world = make_derive_world()
    path = TimedPath(((2.5, 0.5, 0.0), (2.5, 0.5, 1.0), (4.5, 0.5, 3.0)))
    trace = derive_trace(path, world, 1.0)
    assert trace.signal("at_stop")[0] == 1.0
    assert trace.signal("at_stop")[1] == -1.0


def test_derive_trace_counts_samples_by_duration():
    world = make_derive_world()
    path = TimedPath(((0.5, 0.5, 0.0), (1.5, 0.5, 1.0)))
    assert len(derive_trace(path, world, 0.4)) == 3  # 0.0, 0.4, 0.8
    assert len(derive_trace(path, world, 0.5)) == 3  # end time included
    assert len(derive_trace(path, world, 1.0)) == 2


def test_derive_trace_rejects_out_of_bounds():
    world = make_derive_world()
    path = TimedPath(((0.5, 0.5, 0.0), (9.5, 0.5, 9.0)))
    with pytest.raises(WorldError, match="leaves world bounds at t="):
        derive_trace(path, world, 1.0)


def test_derive_trace_obstacle_cell_has_zero_distance():
    world = make_derive_world()
    path = TimedPath(((3.5, 3.5, 0.0), (3.5, 3.5, 1.0)))
    trace = derive_trace(path, world, 1.0)
    assert np.all(trace.signal("dist_o") == 0.0)
    assert np.all(trace.signal("status_obstacle") == 1.0)


def test_trace_csv_round_trip_is_bit_exact(tmp_path, rng):
    trace = random_trace(rng, max_len=40)
    dest = tmp_path / "trace.csv"
    trace_to_csv(trace, str(dest))
    back = trace_from_csv(str(dest), trace.schema, dt=trace.dt)
    assert np.array_equal(back.times, trace.times)
    for name in trace.schema:
        assert np.array_equal(back.signal(name), trace.signal(name)), name
    # header mismatch is rejected
    other_schema = {"z": SignalInfo("real")}
    with pytest.raises(TraceError, match="does not match schema"):
        trace_from_csv(str(dest), other_schema)


def test_trace_csv_dt_inference(tmp_path):
    trace = make_trace(0.25, {"a": [1.0, 2.0], "b": [0.1, 0.2], "p": [1, -1], "q": [1, 1]})
    dest = tmp_path / "t.csv"
    trace_to_csv(trace, str(dest))
    assert trace_from_csv(str(dest), TEST_SCHEMA).dt == 0.25
    single = make_trace(0.25, {"a": [1.0], "b": [0.1], "p": [1], "q": [1]})
    trace_to_csv(single, str(dest))
    with pytest.raises(TraceError, match="cannot infer dt"):
        trace_from_csv(str(dest), TEST_SCHEMA)


def test_path_csv_round_trip_is_bit_exact(tmp_path, rng):
    times = np.cumsum(rng.uniform(0.1, 2.0, size=12))
    waypoints = tuple(
        (float(rng.uniform(0, 50)), float(rng.uniform(0, 50)), float(t)) for t in times
    )
    path = TimedPath(waypoints)
    dest = tmp_path / "path.csv"
    path_to_csv(path, str(dest))
    assert path_from_csv(str(dest)).waypoints == path.waypoints
    with pytest.raises(TraceError, match="must be x,y,t"):
        dest.write_text("a,b,c\n")
        path_from_csv(str(dest))
