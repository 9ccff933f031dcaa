"""Formula AST for the specification language.

Nodes are frozen dataclasses, so formulas are hashable values that compare
structurally. `to_text` prints a canonical form that reparses to an equal
AST.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, Optional, Union

EQ_BAND_DEFAULT = 0.05  # half-width of the == band, in the signal's unit

COMPARATORS = ("<", "<=", ">", ">=", "==")


@dataclass(frozen=True)
class Interval:
    """Time interval [lo, hi] in seconds; hi = math.inf for an unbounded
    upper end."""

    lo: float
    hi: float

    def __post_init__(self) -> None:
        if self.lo < 0 or self.hi < 0:
            raise ValueError("interval bounds must be nonnegative")
        if self.lo > self.hi:
            raise ValueError(f"malformed interval [{self.lo}, {self.hi}]")
        if math.isinf(self.lo):
            raise ValueError("lower interval bound must be finite")

    @property
    def unbounded(self) -> bool:
        return math.isinf(self.hi)


@dataclass(frozen=True)
class TrueF:
    pass


@dataclass(frozen=True)
class FalseF:
    pass


@dataclass(frozen=True)
class Pred:
    """Comparison of a real signal against a constant threshold."""

    signal: str
    op: str
    threshold: float
    unit: Optional[str] = None
    eq_band: float = field(default=EQ_BAND_DEFAULT, compare=False)

    def __post_init__(self) -> None:
        if self.op not in COMPARATORS:
            raise ValueError(f"unknown comparator {self.op!r}")


@dataclass(frozen=True)
class BoolAtom:
    signal: str


@dataclass(frozen=True)
class Not:
    child: "Formula"


@dataclass(frozen=True)
class And:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Or:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Implies:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Globally:
    interval: Interval
    child: "Formula"


@dataclass(frozen=True)
class Eventually:
    interval: Interval
    child: "Formula"


@dataclass(frozen=True)
class Until:
    interval: Interval
    left: "Formula"
    right: "Formula"


Formula = Union[
    TrueF, FalseF, Pred, BoolAtom, Not, And, Or, Implies, Globally, Eventually, Until
]


def children(formula: Formula) -> tuple[Formula, ...]:
    if isinstance(formula, Not):
        return (formula.child,)
    if isinstance(formula, (And, Or, Implies)):
        return (formula.left, formula.right)
    if isinstance(formula, (Globally, Eventually)):
        return (formula.child,)
    if isinstance(formula, Until):
        return (formula.left, formula.right)
    return ()


def iter_nodes(formula: Formula) -> Iterator[Formula]:
    """Pre-order traversal."""
    stack = [formula]
    while stack:
        node = stack.pop()
        yield node
        stack.extend(reversed(children(node)))


def signals_of(formula: Formula) -> set[str]:
    names: set[str] = set()
    for node in iter_nodes(formula):
        if isinstance(node, (Pred, BoolAtom)):
            names.add(node.signal)
    return names


def has_unbounded(formula: Formula) -> bool:
    """True when any temporal interval has an infinite upper bound."""
    for node in iter_nodes(formula):
        if isinstance(node, (Globally, Eventually, Until)) and node.interval.unbounded:
            return True
    return False


def horizon(formula: Formula) -> float:
    """Lookahead, in seconds, that the formula's value at a sample depends
    on. math.inf when any interval is unbounded."""
    if isinstance(formula, (TrueF, FalseF, Pred, BoolAtom)):
        return 0.0
    if isinstance(formula, Not):
        return horizon(formula.child)
    if isinstance(formula, (And, Or, Implies)):
        return max(horizon(formula.left), horizon(formula.right))
    if isinstance(formula, (Globally, Eventually)):
        return formula.interval.hi + horizon(formula.child)
    if isinstance(formula, Until):
        return formula.interval.hi + max(horizon(formula.left), horizon(formula.right))
    raise TypeError(f"not a formula node: {formula!r}")


def _fmt_number(value: float) -> str:
    if math.isinf(value):
        return "inf"
    if value == int(value) and abs(value) < 1e16:
        return str(int(value))
    return repr(value)


def _fmt_interval(interval: Interval) -> str:
    return f"[{_fmt_number(interval.lo)},{_fmt_number(interval.hi)}]"


# Precedence levels for the printer; higher binds tighter.
_LEVEL_IMPLIES = 0
_LEVEL_OR = 1
_LEVEL_AND = 2
_LEVEL_UNTIL = 3
_LEVEL_UNARY = 4
_LEVEL_ATOM = 5


def _level(formula: Formula) -> int:
    if isinstance(formula, Implies):
        return _LEVEL_IMPLIES
    if isinstance(formula, Or):
        return _LEVEL_OR
    if isinstance(formula, And):
        return _LEVEL_AND
    if isinstance(formula, Until):
        return _LEVEL_UNTIL
    if isinstance(formula, (Not, Globally, Eventually)):
        return _LEVEL_UNARY
    return _LEVEL_ATOM


def to_text(formula: Formula) -> str:
    """Canonical text form; parse_formula(to_text(f)) reproduces f."""
    if isinstance(formula, TrueF):
        return "true"
    if isinstance(formula, FalseF):
        return "false"
    if isinstance(formula, Pred):
        unit = f" {formula.unit}" if formula.unit else ""
        return f"{formula.signal} {formula.op} {_fmt_number(formula.threshold)}{unit}"
    if isinstance(formula, BoolAtom):
        return formula.signal
    if isinstance(formula, Not):
        if isinstance(formula.child, BoolAtom):
            return f"!{formula.child.signal}"
        return f"!({to_text(formula.child)})"
    if isinstance(formula, (And, Or, Implies)):
        op = {And: "&&", Or: "||", Implies: "->"}[type(formula)]
        lhs = _child_text(formula.left, _level(formula), right=False)
        rhs = _child_text(formula.right, _level(formula), right=True)
        return f"{lhs} {op} {rhs}"
    if isinstance(formula, Globally):
        return f"G{_fmt_interval(formula.interval)}({to_text(formula.child)})"
    if isinstance(formula, Eventually):
        return f"F{_fmt_interval(formula.interval)}({to_text(formula.child)})"
    if isinstance(formula, Until):
        left = to_text(formula.left)
        right = to_text(formula.right)
        return f"({left})U{_fmt_interval(formula.interval)}({right})"
    raise TypeError(f"not a formula node: {formula!r}")


def _child_text(child: Formula, parent_level: int, right: bool) -> str:
    text = to_text(child)
    level = _level(child)
    if level > parent_level:
        return text
    # -> is right-associative; && and || associate left.
    if level == parent_level:
        if parent_level == _LEVEL_IMPLIES:
            return text if right else f"({text})"
        return f"({text})" if right else text
    return f"({text})"
