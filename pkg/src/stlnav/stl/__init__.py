"""Specification language: parsing, robustness semantics, online monitoring."""

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
    horizon,
    iter_nodes,
    signals_of,
    to_text,
)
from .monitor import MonitorState, monitor_step
from .parser import parse_formula
from .semantics import (
    INCONCLUSIVE,
    SATISFIED,
    VIOLATED,
    Verdict,
    boolean_eval,
    evaluate_offline,
    interval_offsets,
    robustness_at,
    robustness_signal,
)

__all__ = [
    "And",
    "BoolAtom",
    "Eventually",
    "FalseF",
    "Formula",
    "Globally",
    "Implies",
    "Interval",
    "Not",
    "Or",
    "Pred",
    "TrueF",
    "Until",
    "has_unbounded",
    "horizon",
    "iter_nodes",
    "signals_of",
    "to_text",
    "parse_formula",
    "MonitorState",
    "monitor_step",
    "INCONCLUSIVE",
    "SATISFIED",
    "VIOLATED",
    "Verdict",
    "boolean_eval",
    "evaluate_offline",
    "interval_offsets",
    "robustness_at",
    "robustness_signal",
]
