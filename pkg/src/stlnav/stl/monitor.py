"""Incremental three-valued monitoring.

A monitor ingests uniformly sampled trace samples one at a time and keeps a
running robustness plus a verdict. The monitor classifies the formula shape
once at construction:

* bounded horizon: after the horizon completes, the sign is conclusive;
* G[a,inf) over a bounded body: each position's body robustness becomes
  final once its window has fully arrived, so a negative settled minimum is
  a conclusive (sticky) violation; memory is one body-window ring buffer;
* F[a,inf) over a bounded body: dual, with conclusive satisfaction;
* anything else: full-prefix re-evaluation, never conclusive.

For the first three shapes the running robustness equals evaluate_offline
on the ingested prefix at every step.
"""

from __future__ import annotations

from collections import deque
from typing import Mapping, Optional

import numpy as np

from ..errors import TraceError
from ..kernels import CAP
from ..schema import SignalInfo
from ..traces import Sample, Trace
from .ast import (
    And,
    BoolAtom,
    Eventually,
    FalseF,
    Formula,
    Globally,
    Implies,
    Not,
    Or,
    Pred,
    TrueF,
    Until,
)
from .semantics import (
    INCONCLUSIVE,
    SATISFIED,
    VIOLATED,
    Verdict,
    interval_offsets,
    robustness_signal,
)

_TIME_TOL = 1e-9

_BOUNDED = "bounded"
_G_INF = "g_inf"
_F_INF = "f_inf"
_GENERAL = "general"


def _horizon_ticks(formula: Formula, dt: float) -> Optional[int]:
    """Forward dependency of the formula in ticks, None when unbounded."""
    if isinstance(formula, (TrueF, FalseF, Pred, BoolAtom)):
        return 0
    if isinstance(formula, Not):
        return _horizon_ticks(formula.child, dt)
    if isinstance(formula, (And, Or, Implies)):
        left = _horizon_ticks(formula.left, dt)
        right = _horizon_ticks(formula.right, dt)
        if left is None or right is None:
            return None
        return max(left, right)
    if isinstance(formula, (Globally, Eventually)):
        if formula.interval.unbounded:
            return None
        child = _horizon_ticks(formula.child, dt)
        if child is None:
            return None
        _, kb = interval_offsets(formula.interval, dt)
        return kb + child
    if isinstance(formula, Until):
        if formula.interval.unbounded:
            return None
        left = _horizon_ticks(formula.left, dt)
        right = _horizon_ticks(formula.right, dt)
        if left is None or right is None:
            return None
        _, kb = interval_offsets(formula.interval, dt)
        return kb + max(left, right)
    raise TypeError(f"not a formula node: {formula!r}")


class MonitorState:
    """Single-owner incremental monitor for one formula."""

    def __init__(
        self,
        formula: Formula,
        dt: float,
        schema: Mapping[str, SignalInfo],
    ):
        if dt <= 0:
            raise TraceError("dt must be positive")
        self.formula = formula
        self.dt = float(dt)
        self.schema = dict(schema)
        self.count = 0
        self.last_t: Optional[float] = None
        self.verdict = Verdict(INCONCLUSIVE, CAP, None)
        self.conclusive = False

        whole = _horizon_ticks(formula, dt)
        if whole is not None:
            self.shape = _BOUNDED
            self.horizon = whole
            self._samples: deque[Sample] = deque()
        elif isinstance(formula, Globally) and formula.interval.unbounded:
            body_h = _horizon_ticks(formula.child, dt)
            if body_h is None:
                self.shape = _GENERAL
                self._samples = deque()
            else:
                self.shape = _G_INF
                self.body = formula.child
                self.start_offset, _ = interval_offsets(formula.interval, dt)
                self.horizon = body_h
                self._samples = deque(maxlen=body_h + 1)
                self._settled = CAP
        elif isinstance(formula, Eventually) and formula.interval.unbounded:
            body_h = _horizon_ticks(formula.child, dt)
            if body_h is None:
                self.shape = _GENERAL
                self._samples = deque()
            else:
                self.shape = _F_INF
                self.body = formula.child
                self.start_offset, _ = interval_offsets(formula.interval, dt)
                self.horizon = body_h
                self._samples = deque(maxlen=body_h + 1)
                self._settled = -CAP
        else:
            self.shape = _GENERAL
            self._samples = deque()

    # -- internals ---------------------------------------------------------

    def _validate_time(self, sample: Sample) -> None:
        if self.count == 0:
            return
        assert self.last_t is not None
        if sample.t <= self.last_t + _TIME_TOL:
            raise TraceError(
                f"non-monotone timestamp {sample.t} after {self.last_t}"
            )
        if abs(sample.t - (self.last_t + self.dt)) > _TIME_TOL:
            raise TraceError(
                f"timestamp {sample.t} is not one dt={self.dt} after {self.last_t}"
            )

    def _buffer_trace(self) -> Trace:
        samples = list(self._samples)
        times = samples[0].t + np.arange(len(samples)) * self.dt
        signals = {
            name: np.array([s.values[name] for s in samples]) for name in self.schema
        }
        return Trace(self.dt, times, signals, self.schema)

    def _step_bounded(self, sample: Sample) -> Verdict:
        if self.count - 1 <= self.horizon:
            self._samples.append(sample)
        rho = float(robustness_signal(self.formula, self._buffer_trace())[0])
        if self.count - 1 >= self.horizon:
            status = SATISFIED if rho >= 0 else VIOLATED
            self.conclusive = True
            return Verdict(status, rho, sample.t)
        return Verdict(INCONCLUSIVE, rho)

    def _step_unbounded(self, sample: Sample, globally: bool) -> Verdict:
        self._samples.append(sample)
        rho_body = robustness_signal(self.body, self._buffer_trace())
        first_global = self.count - len(self._samples)

        settle_index = self.count - 1 - self.horizon
        if settle_index >= max(self.start_offset, 0):
            final = float(rho_body[settle_index - first_global])
            if globally:
                self._settled = min(self._settled, final)
            else:
                self._settled = max(self._settled, final)

        tail_values = [
            float(rho_body[i])
            for i in range(len(self._samples))
            if first_global + i > settle_index and first_global + i >= self.start_offset
        ]
        if globally:
            rho = min([self._settled] + tail_values)
            if self._settled < 0:
                self.conclusive = True
                return Verdict(VIOLATED, rho, sample.t)
        else:
            rho = max([self._settled] + tail_values)
            if self._settled >= 0:
                self.conclusive = True
                return Verdict(SATISFIED, rho, sample.t)
        return Verdict(INCONCLUSIVE, rho)

    def _step_general(self, sample: Sample) -> Verdict:
        self._samples.append(sample)
        rho = float(robustness_signal(self.formula, self._buffer_trace())[0])
        return Verdict(INCONCLUSIVE, rho)


def monitor_step(state: MonitorState, sample: Sample) -> Verdict:
    """Ingest one sample and return the verdict over the prefix so far.
    Conclusive verdicts are sticky."""
    state._validate_time(sample)
    state.count += 1
    state.last_t = sample.t
    if state.conclusive:
        if state.shape in (_G_INF, _F_INF, _GENERAL):
            state._samples.append(sample)
        return state.verdict
    if state.shape == _BOUNDED:
        verdict = state._step_bounded(sample)
    elif state.shape == _G_INF:
        verdict = state._step_unbounded(sample, globally=True)
    elif state.shape == _F_INF:
        verdict = state._step_unbounded(sample, globally=False)
    else:
        verdict = state._step_general(sample)
    state.verdict = verdict
    return verdict
