"""Shared fixtures: a small test schema, random trace/formula generators,
and an independent brute-force robustness oracle used to cross-check the
recursive evaluator."""

from __future__ import annotations

import math

import numpy as np
import pytest

from stlnav.schema import SignalInfo
from stlnav.stl.ast import (
    And,
    BoolAtom,
    Eventually,
    FalseF,
    Globally,
    Implies,
    Interval,
    Not,
    Or,
    Pred,
    TrueF,
    Until,
)
from stlnav.stl.semantics import CAP
from stlnav.traces import Trace
from stlnav.world import WorldModel

# Plain real/boolean signals with no units, so formula generation does not
# have to track unit agreement.
TEST_SCHEMA = {
    "a": SignalInfo("real"),
    "b": SignalInfo("real"),
    "p": SignalInfo("bool"),
    "q": SignalInfo("bool"),
}

_TIME_TOL = 1e-9


def make_trace(dt, data, schema=None, t0=0.0):
    """Trace from a {name: list} mapping; times start at t0."""
    schema = TEST_SCHEMA if schema is None else schema
    n = len(next(iter(data.values())))
    times = t0 + np.arange(n) * dt
    return Trace(dt, times, {k: np.asarray(v, dtype=np.float64) for k, v in data.items()}, schema)


def random_trace(rng, max_len=50, schema=None, dt=None):
    schema = TEST_SCHEMA if schema is None else schema
    n = int(rng.integers(1, max_len + 1))
    if dt is None:
        dt = float(rng.choice([0.25, 0.5, 1.0]))
    t0 = float(rng.choice([0.0, dt, 3 * dt]))
    signals = {}
    for name, info in schema.items():
        if info.kind == "bool":
            signals[name] = rng.choice([-1.0, 1.0], size=n)
        else:
            vals = rng.uniform(-10.0, 10.0, size=n)
            # park a few values right on comparison thresholds
            on_edge = rng.random(n) < 0.1
            vals[on_edge] = np.round(vals[on_edge])
            signals[name] = vals
    return Trace(dt, t0 + np.arange(n) * dt, signals, schema)


def random_interval(rng, dt, max_window=10, p_unbounded=0.2):
    """Interval whose bounded form covers at most `max_window` samples.

    Bounds sit either exactly on the sample grid or well away from it, so
    the oracle's time-comparison windowing and the evaluator's offset
    rounding always agree.
    """
    lo_k = int(rng.integers(0, 4))
    frac = float(rng.choice([0.0, 0.0, 0.25, 0.5]))
    lo = (lo_k + frac) * dt
    if rng.random() < p_unbounded:
        return Interval(lo, math.inf)
    width = int(rng.integers(0, max_window))
    hi = lo + width * dt
    if rng.random() < 0.3:
        hi += 0.3 * dt
    return Interval(lo, hi)


def random_formula(rng, depth, dt, p_unbounded=0.2):
    """Random formula of operator depth <= depth over TEST_SCHEMA."""
    if depth <= 0:
        k = int(rng.integers(0, 6))
        if k == 0:
            return TrueF()
        if k == 1:
            return FalseF()
        if k in (2, 3):
            name = "a" if rng.random() < 0.5 else "b"
            op = ("<", "<=", ">", ">=", "==")[int(rng.integers(0, 5))]
            return Pred(name, op, float(np.round(rng.uniform(-8.0, 8.0), 3)))
        return BoolAtom("p" if rng.random() < 0.5 else "q")
    k = int(rng.integers(0, 8))
    if k == 0:
        return random_formula(rng, 0, dt, p_unbounded)
    if k == 1:
        return Not(random_formula(rng, depth - 1, dt, p_unbounded))
    if k in (2, 3, 4):
        cls = (And, Or, Implies)[k - 2]
        return cls(
            random_formula(rng, depth - 1, dt, p_unbounded),
            random_formula(rng, depth - 1, dt, p_unbounded),
        )
    interval = random_interval(rng, dt, p_unbounded=p_unbounded)
    if k == 5:
        return Globally(interval, random_formula(rng, depth - 1, dt, p_unbounded))
    if k == 6:
        return Eventually(interval, random_formula(rng, depth - 1, dt, p_unbounded))
    return Until(
        interval,
        random_formula(rng, depth - 1, dt, p_unbounded),
        random_formula(rng, depth - 1, dt, p_unbounded),
    )


def _window_indices(t, n, dt, interval):
    """Future sample indices whose time offset falls inside the interval,
    decided by direct time comparison (independent of offset rounding)."""
    out = []
    for j in range(t, n):
        offset = (j - t) * dt
        if offset < interval.lo - _TIME_TOL:
            continue
        if not math.isinf(interval.hi) and offset > interval.hi + _TIME_TOL:
            break
        out.append(j)
    return out


def oracle_signal(formula, trace):
    """Brute-force robustness at every index, written as explicit loops
    over window expansions rather than recursion over array kernels."""
    n = len(trace)
    dt = trace.dt
    if isinstance(formula, TrueF):
        return [CAP] * n
    if isinstance(formula, FalseF):
        return [-CAP] * n
    if isinstance(formula, Pred):
        out = []
        for v in trace.signal(formula.signal):
            if formula.op in ("<", "<="):
                m = formula.threshold - v
            elif formula.op in (">", ">="):
                m = v - formula.threshold
            else:
                m = formula.eq_band - abs(v - formula.threshold)
            out.append(min(max(m, -CAP), CAP))
        return out
    if isinstance(formula, BoolAtom):
        return [float(v) for v in trace.signal(formula.signal)]
    if isinstance(formula, Not):
        return [-v for v in oracle_signal(formula.child, trace)]
    if isinstance(formula, And):
        left = oracle_signal(formula.left, trace)
        right = oracle_signal(formula.right, trace)
        return [min(l, r) for l, r in zip(left, right)]
    if isinstance(formula, Or):
        left = oracle_signal(formula.left, trace)
        right = oracle_signal(formula.right, trace)
        return [max(l, r) for l, r in zip(left, right)]
    if isinstance(formula, Implies):
        left = oracle_signal(formula.left, trace)
        right = oracle_signal(formula.right, trace)
        return [max(-l, r) for l, r in zip(left, right)]
    if isinstance(formula, Globally):
        child = oracle_signal(formula.child, trace)
        out = []
        for t in range(n):
            window = _window_indices(t, n, dt, formula.interval)
            out.append(min((child[j] for j in window), default=CAP))
        return out
    if isinstance(formula, Eventually):
        child = oracle_signal(formula.child, trace)
        out = []
        for t in range(n):
            window = _window_indices(t, n, dt, formula.interval)
            out.append(max((child[j] for j in window), default=-CAP))
        return out
    if isinstance(formula, Until):
        left = oracle_signal(formula.left, trace)
        right = oracle_signal(formula.right, trace)
        out = []
        for t in range(n):
            best = -CAP
            for j in _window_indices(t, n, dt, formula.interval):
                hold = min(left[t : j + 1])
                best = max(best, min(right[j], hold))
            out.append(best)
        return out
    raise TypeError(f"not a formula node: {formula!r}")


def small_world(rows, resolution=0.5, labels=("grass", "sidewalk", "obstacle"),
                obstacle_labels=("obstacle",), stop_signs=(), stop_zones=()):
    """World from a list of label-index rows (row 0 = bottom, y = 0)."""
    grid = np.asarray(rows, dtype=np.int16)
    return WorldModel(
        grid, labels, resolution,
        obstacle_labels=obstacle_labels,
        stop_signs=stop_signs,
        stop_zones=stop_zones,
    )


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def flat_world():
    """10x10 m of grass at 0.5 m resolution, nothing blocked."""
    return small_world(np.zeros((20, 20), dtype=np.int16))
