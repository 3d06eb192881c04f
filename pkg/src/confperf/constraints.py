"""Constraint expressions over configuration options.

Grammar (lowest to highest precedence)::

    expr    := or ('=>' expr)?
    or      := and ('|' and)*
    and     := unary ('&' unary)*
    unary   := '!' unary | primary
    primary := '(' expr ')' | linear relop linear | NAME
    linear  := ['-'] term (('+' | '-') term)*
    term    := NUMBER ['*' NAME] | NAME

A bare ``NAME`` is a binary literal. Linear comparisons use ``<``, ``<=``,
``=`` (or ``==``), ``>=`` and ``>``. Expressions evaluate element-wise when
the environment maps names to numpy arrays, which is how whole spaces get
filtered without a Python loop per configuration.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping

import numpy as np


class ConstraintSyntaxError(ValueError):
    def __init__(self, message: str, text: str, position: int):
        self.text = text
        self.position = position
        super().__init__(f"{message} at position {position} in {text!r}")


_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+(?:\.\d*)?(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z0-9_.]*)"
    r"|(?P<op>=>|<=|>=|==|[!&|()*+\-<>=]))"
)

_RELOPS = {"<", "<=", "=", "==", ">=", ">"}


@dataclass(frozen=True)
class Literal:
    name: str


@dataclass(frozen=True)
class Not:
    operand: object


@dataclass(frozen=True)
class And:
    operands: tuple


@dataclass(frozen=True)
class Or:
    operands: tuple


@dataclass(frozen=True)
class Implies:
    premise: object
    conclusion: object


@dataclass(frozen=True)
class Linear:
    """``sum(coef * option) + offset  <op>  0``."""

    terms: tuple  # ((name, coefficient), ...) sorted by name
    offset: float
    op: str


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            start = pos + (len(text[pos:]) - len(text[pos:].lstrip()))
            raise ConstraintSyntaxError(f"unexpected character {text[start]!r}", text, start)
        kind = m.lastgroup
        tokens.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self, offset: int = 0):
        return self.tokens[min(self.i + offset, len(self.tokens) - 1)]

    def advance(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def fail(self, message: str, tok=None):
        tok = tok or self.peek()
        raise ConstraintSyntaxError(message, self.text, tok[2])

    def expect_op(self, op: str):
        tok = self.peek()
        if tok[0] != "op" or tok[1] != op:
            self.fail(f"expected {op!r}")
        return self.advance()

    def parse(self):
        if self.peek()[0] == "end":
            self.fail("empty expression")
        node = self.expr()
        if self.peek()[0] != "end":
            self.fail(f"unexpected token {self.peek()[1]!r}")
        return node

    def expr(self):
        left = self.disjunction()
        if self.peek()[:2] == ("op", "=>"):
            self.advance()
            return Implies(left, self.expr())
        return left

    def disjunction(self):
        items = [self.conjunction()]
        while self.peek()[:2] == ("op", "|"):
            self.advance()
            items.append(self.conjunction())
        return items[0] if len(items) == 1 else Or(tuple(items))

    def conjunction(self):
        items = [self.unary()]
        while self.peek()[:2] == ("op", "&"):
            self.advance()
            items.append(self.unary())
        return items[0] if len(items) == 1 else And(tuple(items))

    def unary(self):
        if self.peek()[:2] == ("op", "!"):
            self.advance()
            return Not(self.unary())
        return self.primary()

    def primary(self):
        kind, value, _ = self.peek()
        if kind == "op" and value == "(":
            self.advance()
            node = self.expr()
            self.expect_op(")")
            return node
        if kind == "name":
            nxt = self.peek(1)
            if not (nxt[0] == "op" and (nxt[1] in _RELOPS or nxt[1] in "+-*")):
                self.advance()
                return Literal(value)
        if kind in ("name", "num") or (kind == "op" and value == "-"):
            return self.comparison()
        self.fail(f"unexpected token {value!r}" if value else "unexpected end of expression")

    def comparison(self):
        lhs_terms, lhs_off = self.linear()
        tok = self.peek()
        if tok[0] != "op" or tok[1] not in _RELOPS:
            self.fail("expected comparison operator")
        op = "=" if tok[1] == "==" else tok[1]
        self.advance()
        rhs_terms, rhs_off = self.linear()
        coefs: dict[str, Fraction] = dict(lhs_terms)
        for name, k in rhs_terms.items():
            coefs[name] = coefs.get(name, Fraction(0)) - k
        terms = tuple(sorted((n, float(k)) for n, k in coefs.items() if k != 0))
        return Linear(terms, float(lhs_off - rhs_off), op)

    def linear(self):
        coefs: dict[str, Fraction] = {}
        offset = Fraction(0)
        sign = 1
        if self.peek()[:2] == ("op", "-"):
            self.advance()
            sign = -1
        while True:
            kind, value, _ = self.peek()
            if kind == "num":
                self.advance()
                k = Fraction(value) * sign
                if self.peek()[:2] == ("op", "*"):
                    self.advance()
                    name_tok = self.peek()
                    if name_tok[0] != "name":
                        self.fail("expected option name after '*'")
                    self.advance()
                    coefs[name_tok[1]] = coefs.get(name_tok[1], Fraction(0)) + k
                else:
                    offset += k
            elif kind == "name":
                self.advance()
                coefs[value] = coefs.get(value, Fraction(0)) + sign
            else:
                self.fail("expected number or option name")
            nxt = self.peek()
            if nxt[0] == "op" and nxt[1] in "+-":
                self.advance()
                sign = 1 if nxt[1] == "+" else -1
                continue
            return coefs, offset


def parse_expression(text: str):
    return _Parser(text).parse()


def referenced_names(node) -> frozenset[str]:
    if isinstance(node, Literal):
        return frozenset([node.name])
    if isinstance(node, Not):
        return referenced_names(node.operand)
    if isinstance(node, (And, Or)):
        return frozenset().union(*(referenced_names(o) for o in node.operands))
    if isinstance(node, Implies):
        return referenced_names(node.premise) | referenced_names(node.conclusion)
    if isinstance(node, Linear):
        return frozenset(name for name, _ in node.terms)
    raise TypeError(node)


_COMPARE = {
    "<": np.less,
    "<=": np.less_equal,
    "=": None,
    ">=": np.greater_equal,
    ">": np.greater,
}

# tolerance for '=' atoms over decimal-valued options
_EQ_TOL = 1e-9


def evaluate(node, env: Mapping[str, object]):
    if isinstance(node, Literal):
        return np.asarray(env[node.name]) != 0
    if isinstance(node, Not):
        return np.logical_not(evaluate(node.operand, env))
    if isinstance(node, And):
        out = evaluate(node.operands[0], env)
        for o in node.operands[1:]:
            out = np.logical_and(out, evaluate(o, env))
        return out
    if isinstance(node, Or):
        out = evaluate(node.operands[0], env)
        for o in node.operands[1:]:
            out = np.logical_or(out, evaluate(o, env))
        return out
    if isinstance(node, Implies):
        return np.logical_or(np.logical_not(evaluate(node.premise, env)), evaluate(node.conclusion, env))
    if isinstance(node, Linear):
        total = node.offset
        for name, k in node.terms:
            total = total + k * np.asarray(env[name], dtype=float)
        if node.op == "=":
            return np.abs(total) <= _EQ_TOL
        return _COMPARE[node.op](total, 0.0)
    raise TypeError(node)


def _fmt_num(x: float) -> str:
    return str(int(x)) if float(x).is_integer() else repr(float(x))


def to_text(node) -> str:
    """Render a parsed expression back to grammar text (fully parenthesised)."""
    if isinstance(node, Literal):
        return node.name
    if isinstance(node, Not):
        return f"!{to_text(node.operand)}"
    if isinstance(node, And):
        return "(" + " & ".join(to_text(o) for o in node.operands) + ")"
    if isinstance(node, Or):
        return "(" + " | ".join(to_text(o) for o in node.operands) + ")"
    if isinstance(node, Implies):
        return f"({to_text(node.premise)} => {to_text(node.conclusion)})"
    if isinstance(node, Linear):
        parts = [f"{_fmt_num(k)}*{name}" for name, k in node.terms] or ["0"]
        lhs = " + ".join(parts)
        return f"{lhs} {node.op} {_fmt_num(-node.offset)}"
    raise TypeError(node)
