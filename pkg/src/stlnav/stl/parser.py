"""Recursive-descent parser for the specification grammar.

Grammar (whitespace-insensitive)::

    formula  := or_expr ('->' formula)?
    or_expr  := and_expr ('||' and_expr)*
    and_expr := until    ('&&' until)*
    until    := unary    ('U' interval unary)*
    unary    := '!' unary
              | 'G' interval unary
              | 'F' interval unary
              | '(' formula ')'
              | 'true' | 'false'
              | name comparator number [unit]
              | name
    interval := '[' bound ',' bound ']'       bounds in seconds, 'inf' allowed
                                              as the upper bound

Numbers are decimal literals with an optional unit suffix (kph, m, s)
checked against the signal schema. Thresholds may be negative; interval
bounds may not.
"""

from __future__ import annotations

import math
import re
from typing import NamedTuple, Optional

from ..errors import SpecSyntaxError
from ..schema import Schema
from .ast import (
    EQ_BAND_DEFAULT,
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
)

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<number>\d+\.\d*|\.\d+|\d+)
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op><=|>=|==|->|&&|\|\||[<>!()\[\],\-])
    """,
    re.VERBOSE,
)

_UNITS = ("kph", "m", "s")
_RESERVED = ("true", "false", "inf")


class _Token(NamedTuple):
    kind: str  # "number", "name", "op", "end"
    text: str
    pos: int


def _tokenize(text: str) -> list[_Token]:
    tokens: list[_Token] = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise SpecSyntaxError(f"unexpected character {text[pos]!r}", text, pos)
        if m.lastgroup != "ws":
            tokens.append(_Token(m.lastgroup, m.group(), pos))
        pos = m.end()
    tokens.append(_Token("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str, schema: Optional[Schema], eq_band: float):
        self.text = text
        self.tokens = _tokenize(text)
        self.index = 0
        self.schema = schema
        self.eq_band = eq_band

    # -- token helpers ----------------------------------------------------

    def peek(self) -> _Token:
        return self.tokens[self.index]

    def advance(self) -> _Token:
        token = self.tokens[self.index]
        if token.kind != "end":
            self.index += 1
        return token

    def expect(self, text: str) -> _Token:
        token = self.peek()
        if token.text != text:
            found = token.text or "end of input"
            raise SpecSyntaxError(f"expected {text!r}, found {found!r}", self.text, token.pos)
        return self.advance()

    def at_temporal(self, letter: str) -> bool:
        token = self.peek()
        return (
            token.kind == "name"
            and token.text == letter
            and self.tokens[self.index + 1].text == "["
        )

    # -- grammar ----------------------------------------------------------

    def parse(self) -> Formula:
        formula = self.formula()
        token = self.peek()
        if token.kind != "end":
            raise SpecSyntaxError(f"unexpected {token.text!r}", self.text, token.pos)
        return formula

    def formula(self) -> Formula:
        left = self.or_expr()
        if self.peek().text == "->":
            self.advance()
            return Implies(left, self.formula())
        return left

    def or_expr(self) -> Formula:
        node = self.and_expr()
        while self.peek().text == "||":
            self.advance()
            node = Or(node, self.and_expr())
        return node

    def and_expr(self) -> Formula:
        node = self.until_expr()
        while self.peek().text == "&&":
            self.advance()
            node = And(node, self.until_expr())
        return node

    def until_expr(self) -> Formula:
        node = self.unary()
        while self.at_temporal("U"):
            self.advance()
            interval = self.interval()
            node = Until(interval, node, self.unary())
        return node

    def unary(self) -> Formula:
        token = self.peek()
        if token.text == "!":
            self.advance()
            return Not(self.unary())
        if self.at_temporal("G"):
            self.advance()
            return Globally(self.interval(), self.unary())
        if self.at_temporal("F"):
            self.advance()
            return Eventually(self.interval(), self.unary())
        if token.text == "(":
            self.advance()
            inner = self.formula()
            self.expect(")")
            return inner
        if token.kind == "name":
            return self.atom()
        found = token.text or "end of input"
        raise SpecSyntaxError(f"expected a formula, found {found!r}", self.text, token.pos)

    def interval(self) -> Interval:
        open_token = self.expect("[")
        lo = self.bound(allow_inf=False)
        self.expect(",")
        hi = self.bound(allow_inf=True)
        self.expect("]")
        if lo > hi:
            raise SpecSyntaxError(
                f"malformed interval [{lo:g},{hi:g}]: lower bound exceeds upper",
                self.text,
                open_token.pos,
            )
        return Interval(lo, hi)

    def bound(self, allow_inf: bool) -> float:
        token = self.peek()
        if token.text == "-":
            raise SpecSyntaxError("interval bounds must be nonnegative", self.text, token.pos)
        if token.kind == "name" and token.text == "inf":
            if not allow_inf:
                raise SpecSyntaxError("lower interval bound must be finite", self.text, token.pos)
            self.advance()
            return math.inf
        if token.kind != "number":
            found = token.text or "end of input"
            raise SpecSyntaxError(f"expected interval bound, found {found!r}", self.text, token.pos)
        self.advance()
        value = float(token.text)
        # optional unit on a bound: seconds only
        unit_token = self.peek()
        if unit_token.kind == "name" and unit_token.text in _UNITS:
            if unit_token.text != "s":
                raise SpecSyntaxError(
                    f"interval bounds are in seconds, not {unit_token.text!r}",
                    self.text,
                    unit_token.pos,
                )
            self.advance()
        return value

    def atom(self) -> Formula:
        token = self.advance()
        name = token.text
        if name == "true":
            return TrueF()
        if name == "false":
            return FalseF()
        if name == "inf":
            raise SpecSyntaxError("'inf' is reserved", self.text, token.pos)
        follow = self.peek()
        if follow.text in ("<", "<=", ">", ">=", "=="):
            op = self.advance().text
            threshold, unit = self.number_with_unit()
            self.check_predicate(name, unit, token.pos)
            return Pred(name, op, threshold, unit, eq_band=self.eq_band)
        self.check_bool_atom(name, token.pos)
        return BoolAtom(name)

    def number_with_unit(self) -> tuple[float, Optional[str]]:
        sign = 1.0
        token = self.peek()
        if token.text == "-":
            self.advance()
            sign = -1.0
            token = self.peek()
        if token.kind != "number":
            found = token.text or "end of input"
            raise SpecSyntaxError(f"expected a number, found {found!r}", self.text, token.pos)
        self.advance()
        value = sign * float(token.text)
        unit = None
        unit_token = self.peek()
        if unit_token.kind == "name" and unit_token.text in _UNITS:
            unit = unit_token.text
            self.advance()
        return value, unit

    # -- schema checks ------------------------------------------------------

    def check_predicate(self, name: str, unit: Optional[str], pos: int) -> None:
        if self.schema is None:
            return
        info = self.schema.get(name)
        if info is None:
            raise SpecSyntaxError(f"unknown signal name {name!r}", self.text, pos)
        if info.kind != "real":
            raise SpecSyntaxError(
                f"signal {name!r} is Boolean and cannot be compared to a number",
                self.text,
                pos,
            )
        if unit is not None and unit != info.unit:
            raise SpecSyntaxError(
                f"unit {unit!r} does not match {name!r} (expected {info.unit!r})",
                self.text,
                pos,
            )

    def check_bool_atom(self, name: str, pos: int) -> None:
        if self.schema is None:
            return
        info = self.schema.get(name)
        if info is None:
            raise SpecSyntaxError(f"unknown signal name {name!r}", self.text, pos)
        if info.kind != "bool":
            raise SpecSyntaxError(
                f"signal {name!r} is real-valued and needs a comparator", self.text, pos
            )


def parse_formula(
    text: str,
    schema: Optional[Schema] = None,
    eq_band: float = EQ_BAND_DEFAULT,
) -> Formula:
    """Parse a specification string into a formula AST.

    When a schema is given, signal names, kinds, and unit suffixes are
    validated against it. `eq_band` sets the half-width of the band used by
    the == comparator's robustness.
    """
    return _Parser(text, schema, eq_band).parse()
