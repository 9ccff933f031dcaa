"""Named hard rules: a parsed formula plus its acceptance threshold.

Rules are authored as grammar strings in scenario files; the id ties
screening results, monitor verdicts, and metrics together.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

from .schema import Schema
from .stl.ast import Formula
from .stl.parser import parse_formula


@dataclass(frozen=True)
class Rule:
    """One hard constraint with its acceptance threshold (robustness below
    the threshold is rejected; default 0)."""

    rule_id: str
    formula: Formula
    text: str = ""
    threshold: float = 0.0
    description: str = field(default="", compare=False)

    def accepts(self, robustness: float) -> bool:
        return robustness >= self.threshold


def parse_rule(
    rule_id: str,
    text: str,
    schema: Optional[Schema] = None,
    threshold: float = 0.0,
    description: str = "",
) -> Rule:
    return Rule(rule_id, parse_formula(text, schema), text, threshold, description)


def parse_rules(
    items: Sequence[tuple[str, str]],
    schema: Optional[Schema] = None,
) -> tuple[Rule, ...]:
    return tuple(parse_rule(rule_id, text, schema) for rule_id, text in items)
