"""Quantitative and qualitative formula evaluation over traces.

Robustness follows the usual min/max recursion: predicate margins at each
sample, negation flips sign, conjunction takes min, temporal operators
slide min/max/until windows over sample offsets. Unbounded upper bounds
truncate at the trace end; a nonnegative result under truncation is only
tentative, which evaluate_offline reports as Inconclusive.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..errors import TraceError
from ..kernels import CAP, until_robustness, window_max, window_min
from ..traces import Trace
from .ast import (
    And,
    BoolAtom,
    Eventually,
    FalseF,
    Formula,
    Globally,
    Implies,
    Interval,
    Not,
    Or,
    Pred,
    TrueF,
    Until,
    has_unbounded,
)

SATISFIED = "satisfied"
VIOLATED = "violated"
INCONCLUSIVE = "inconclusive"

_OFFSET_TOL = 1e-9


@dataclass(frozen=True)
class Verdict:
    """Three-valued outcome with its robustness and, for conclusive online
    verdicts, the decision time in seconds."""

    status: str
    robustness: float
    decided_at: Optional[float] = None

    def __post_init__(self) -> None:
        if self.status not in (SATISFIED, VIOLATED, INCONCLUSIVE):
            raise ValueError(f"unknown verdict status {self.status!r}")


def interval_offsets(interval: Interval, dt: float) -> tuple[int, int]:
    """Sample offsets [ka, kb] covered by a time interval at tick dt;
    kb = -1 encodes an unbounded upper end."""
    ka = int(math.ceil(interval.lo / dt - _OFFSET_TOL))
    if interval.unbounded:
        return ka, -1
    kb = int(math.floor(interval.hi / dt + _OFFSET_TOL))
    return ka, kb


def predicate_margin(pred: Pred, values: np.ndarray) -> np.ndarray:
    if pred.op in ("<", "<="):
        margin = pred.threshold - values
    elif pred.op in (">", ">="):
        margin = values - pred.threshold
    else:  # ==
        margin = pred.eq_band - np.abs(values - pred.threshold)
    return np.clip(margin, -CAP, CAP)


def robustness_signal(formula: Formula, trace: Trace) -> np.ndarray:
    """Robustness of the formula at every sample index of the trace."""
    n = len(trace)
    if isinstance(formula, TrueF):
        return np.full(n, CAP)
    if isinstance(formula, FalseF):
        return np.full(n, -CAP)
    if isinstance(formula, Pred):
        return predicate_margin(formula, trace.signal(formula.signal))
    if isinstance(formula, BoolAtom):
        return trace.signal(formula.signal).copy()
    if isinstance(formula, Not):
        return -robustness_signal(formula.child, trace)
    if isinstance(formula, And):
        return np.minimum(
            robustness_signal(formula.left, trace), robustness_signal(formula.right, trace)
        )
    if isinstance(formula, Or):
        return np.maximum(
            robustness_signal(formula.left, trace), robustness_signal(formula.right, trace)
        )
    if isinstance(formula, Implies):
        return np.maximum(
            -robustness_signal(formula.left, trace), robustness_signal(formula.right, trace)
        )
    if isinstance(formula, Globally):
        ka, kb = _effective_offsets(formula.interval, trace.dt, n)
        if _empty_window(ka, kb, n):
            return np.full(n, CAP)
        return window_min(robustness_signal(formula.child, trace), ka, kb)
    if isinstance(formula, Eventually):
        ka, kb = _effective_offsets(formula.interval, trace.dt, n)
        if _empty_window(ka, kb, n):
            return np.full(n, -CAP)
        return window_max(robustness_signal(formula.child, trace), ka, kb)
    if isinstance(formula, Until):
        ka, kb = _effective_offsets(formula.interval, trace.dt, n)
        if _empty_window(ka, kb, n):
            return np.full(n, -CAP)
        return until_robustness(
            robustness_signal(formula.left, trace),
            robustness_signal(formula.right, trace),
            ka,
            kb,
        )
    raise TypeError(f"not a formula node: {formula!r}")


def _effective_offsets(interval: Interval, dt: float, n: int) -> tuple[int, int]:
    ka, kb = interval_offsets(interval, dt)
    if kb >= 0:
        kb = min(kb, max(n - 1, 0))
    return ka, kb


def _empty_window(ka: int, kb: int, n: int) -> bool:
    return ka >= n or (kb >= 0 and kb < ka)


def robustness_at(formula: Formula, trace: Trace, t: int) -> float:
    """Robustness of the formula at sample index t."""
    if not 0 <= t < len(trace):
        raise TraceError(f"sample index {t} out of range for trace of {len(trace)}")
    return float(robustness_signal(formula, trace)[t])


def evaluate_offline(formula: Formula, trace: Trace) -> Verdict:
    """Whole-trace verdict at sample 0. Nonnegative robustness is reported
    Inconclusive (tentatively satisfied) when the formula contains an
    unbounded interval, since the truncated suffix could still change it."""
    if not len(trace):
        raise TraceError("cannot evaluate an empty trace")
    rho = robustness_at(formula, trace, 0)
    if rho < 0:
        return Verdict(VIOLATED, rho)
    if has_unbounded(formula):
        return Verdict(INCONCLUSIVE, rho)
    return Verdict(SATISFIED, rho)


def boolean_eval(formula: Formula, trace: Trace, t: int) -> bool:
    """Classical Boolean satisfaction with the same truncation convention;
    written as an independent recursion so it can cross-check robustness
    signs."""
    n = len(trace)
    if not 0 <= t < n:
        raise TraceError(f"sample index {t} out of range for trace of {n}")
    if isinstance(formula, TrueF):
        return True
    if isinstance(formula, FalseF):
        return False
    if isinstance(formula, Pred):
        value = float(trace.signal(formula.signal)[t])
        if formula.op == "<":
            return value < formula.threshold
        if formula.op == "<=":
            return value <= formula.threshold
        if formula.op == ">":
            return value > formula.threshold
        if formula.op == ">=":
            return value >= formula.threshold
        return abs(value - formula.threshold) <= formula.eq_band
    if isinstance(formula, BoolAtom):
        return float(trace.signal(formula.signal)[t]) > 0
    if isinstance(formula, Not):
        return not boolean_eval(formula.child, trace, t)
    if isinstance(formula, And):
        return boolean_eval(formula.left, trace, t) and boolean_eval(formula.right, trace, t)
    if isinstance(formula, Or):
        return boolean_eval(formula.left, trace, t) or boolean_eval(formula.right, trace, t)
    if isinstance(formula, Implies):
        return (not boolean_eval(formula.left, trace, t)) or boolean_eval(
            formula.right, trace, t
        )
    if isinstance(formula, (Globally, Eventually, Until)):
        ka, kb = interval_offsets(formula.interval, trace.dt)
        k_hi = n - 1 if kb < 0 else min(t + kb, n - 1)
        window = range(t + ka, k_hi + 1)
        if isinstance(formula, Globally):
            return all(boolean_eval(formula.child, trace, k) for k in window)
        if isinstance(formula, Eventually):
            return any(boolean_eval(formula.child, trace, k) for k in window)
        for k in window:
            if boolean_eval(formula.right, trace, k) and all(
                boolean_eval(formula.left, trace, j) for j in range(t, k + 1)
            ):
                return True
        return False
    raise TypeError(f"not a formula node: {formula!r}")
