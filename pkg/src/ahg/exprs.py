"""Parser and jet evaluator for the scalar-field expression language.

Grammar (see the CLI help for the user-facing summary)::

    expr     := ['-'] term (('+'|'-') term)*
    term     := factor (('*'|'/') factor)*
    factor   := base ('^' rational)?
    base     := number | var | func '(' expr ')' | '(' expr ')'
    var      := 'x' digits            -- x1 .. x<dim>, 1-based
    func     := sin cos tan exp log sqrt atan
    rational := ['-'] digits ['/' digits]  (optionally parenthesized)

Exponents are constant rationals, which keeps jet composition closed-form.
Expressions evaluate to :class:`ahg.jets.Jet` values at batches of points.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import jets

__all__ = ["parse_expression", "eval_jet", "to_source", "ParseError", "EvalDomainError",
           "Num", "Var", "Call", "Neg", "Bin", "Pow", "FUNCTIONS"]

FUNCTIONS = {"sin": jets.sin, "cos": jets.cos, "tan": jets.tan, "exp": jets.exp,
             "log": jets.log, "sqrt": jets.sqrt, "atan": jets.atan}


class ParseError(ValueError):
    """Syntax or name error, carrying the byte offset into the source."""

    def __init__(self, message, offset):
        super().__init__(f"{message} (at byte {offset})")
        self.offset = offset


class EvalDomainError(ValueError):
    """Expression left its domain at the evaluation point."""


# ---- AST -------------------------------------------------------------------

@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    index: int  # 0-based


@dataclass(frozen=True)
class Call:
    fn: str
    arg: object


@dataclass(frozen=True)
class Neg:
    arg: object


@dataclass(frozen=True)
class Bin:
    op: str  # + - * /
    left: object
    right: object


@dataclass(frozen=True)
class Pow:
    base: object
    expo: Fraction


_TOKEN = re.compile(r"""
    (?P<num>\d+\.\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?|\d+(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^()])
  | (?P<ws>\s+)
""", re.VERBOSE)


def _tokenize(src):
    toks = []
    pos = 0
    data = src.encode("utf-8").decode("utf-8")  # insist on valid UTF-8 text
    while pos < len(data):
        m = _TOKEN.match(data, pos)
        if m is None:
            raise ParseError(f"unexpected character {data[pos]!r}", pos)
        if m.lastgroup != "ws":
            toks.append((m.lastgroup, m.group(), pos))
        pos = m.end()
    toks.append(("end", "", pos))
    return toks


class _Parser:
    def __init__(self, src, dim):
        self.toks = _tokenize(src)
        self.dim = dim
        self.k = 0

    def peek(self):
        return self.toks[self.k]

    def next(self):
        t = self.toks[self.k]
        self.k += 1
        return t

    def expect(self, text):
        kind, val, off = self.next()
        if val != text:
            raise ParseError(f"expected {text!r}, found {val or 'end of input'!r}", off)

    def parse(self):
        node = self.expr()
        kind, val, off = self.peek()
        if kind != "end":
            raise ParseError(f"trailing input {val!r}", off)
        return node

    def expr(self):
        if self.peek()[1] == "-":
            self.next()
            node = Neg(self.term())
        else:
            node = self.term()
        while self.peek()[1] in ("+", "-"):
            op = self.next()[1]
            node = Bin(op, node, self.term())
        return node

    def term(self):
        node = self.factor()
        while self.peek()[1] in ("*", "/"):
            op = self.next()[1]
            node = Bin(op, node, self.factor())
        return node

    def factor(self):
        node = self.base()
        if self.peek()[1] == "^":
            self.next()
            node = Pow(node, self.rational())
        return node

    def rational(self):
        paren = self.peek()[1] == "("
        if paren:
            self.next()
        sign = 1
        if self.peek()[1] == "-":
            self.next()
            sign = -1
        kind, val, off = self.next()
        if kind != "num" or not val.isdigit():
            raise ParseError("exponent must be a constant integer or rational", off)
        num = int(val)
        den = 1
        if self.peek()[1] == "/":
            self.next()
            kind, val, off = self.next()
            if kind != "num" or not val.isdigit():
                raise ParseError("exponent denominator must be an integer", off)
            den = int(val)
            if den == 0:
                raise ParseError("zero exponent denominator", off)
        if paren:
            self.expect(")")
        return Fraction(sign * num, den)

    def base(self):
        kind, val, off = self.next()
        if kind == "num":
            return Num(float(val))
        if val == "(":
            node = self.expr()
            self.expect(")")
            return node
        if kind == "ident":
            if val in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Call(val, arg)
            m = re.fullmatch(r"x(\d+)", val)
            if m is None:
                raise ParseError(f"unknown identifier {val!r}", off)
            i = int(m.group(1))
            if not (1 <= i <= self.dim):
                raise ParseError(f"variable x{i} exceeds chart dimension {self.dim}", off)
            return Var(i - 1)
        raise ParseError(f"unexpected token {val or 'end of input'!r}", off)


def parse_expression(src: str, dim: int):
    """Parse `src` into an AST over variables x1..x<dim>."""
    if dim < 2:
        raise ValueError("chart dimension must be at least 2")
    return _Parser(src, dim).parse()


def eval_jet(ast, point, order: int, dim: int | None = None) -> jets.Jet:
    """Evaluate an AST as a jet at `point` (a tuple or a (..., dim) batch)."""
    pt = np.asarray(point, dtype=float)
    if dim is None:
        dim = pt.shape[-1]
    if not (0 <= order <= jets.MAX_ORDER):
        raise ValueError(f"jet order {order} not in 0..{jets.MAX_ORDER}")

    def ev(node):
        if isinstance(node, Num):
            return jets.constant(dim, order, np.broadcast_to(node.value, pt.shape[:-1]))
        if isinstance(node, Var):
            return jets.variable(dim, order, node.index, pt[..., node.index])
        if isinstance(node, Neg):
            return -ev(node.arg)
        if isinstance(node, Call):
            try:
                return FUNCTIONS[node.fn](ev(node.arg))
            except ValueError as e:
                raise EvalDomainError(f"{node.fn}: {e}") from e
        if isinstance(node, Pow):
            try:
                return ev(node.base) ** node.expo
            except ValueError as e:
                raise EvalDomainError(str(e)) from e
        if isinstance(node, Bin):
            a, b = ev(node.left), ev(node.right)
            if node.op == "+":
                return a + b
            if node.op == "-":
                return a - b
            if node.op == "*":
                return a * b
            if np.any(b.value == 0.0):
                raise EvalDomainError("division by zero in expression")
            return a / b
        raise TypeError(f"not an expression node: {node!r}")

    return ev(ast)


def _prec(node):
    if isinstance(node, Bin):
        return 1 if node.op in "+-" else 2
    if isinstance(node, Neg):
        return 1
    return 3


def to_source(node) -> str:
    """Print an AST back to parseable source."""
    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, Var):
        return f"x{node.index + 1}"
    if isinstance(node, Neg):
        inner = to_source(node.arg)
        return f"-{inner}" if _prec(node.arg) >= 2 else f"-({inner})"
    if isinstance(node, Call):
        return f"{node.fn}({to_source(node.arg)})"
    if isinstance(node, Pow):
        base = to_source(node.base)
        if _prec(node.base) < 3 or isinstance(node.base, (Pow, Num)):
            base = f"({base})"
        e = node.expo
        return f"{base}^({e.numerator}/{e.denominator})" if e.denominator != 1 else f"{base}^{e.numerator}"
    if isinstance(node, Bin):
        left, right = to_source(node.left), to_source(node.right)
        if _prec(node.left) < _prec(node):
            left = f"({left})"
        if _prec(node.right) < _prec(node) or (node.op in "-/" and _prec(node.right) == _prec(node)):
            right = f"({right})"
        return f"{left} {node.op} {right}"
    raise TypeError(f"not an expression node: {node!r}")
