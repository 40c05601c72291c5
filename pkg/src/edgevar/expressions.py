"""Tiny arithmetic expression grammar for user-supplied model coefficients.

Supported syntax: ``+ - * / ^``, parentheses, unary minus, numeric literals,
the constants ``pi`` and ``e``, the variable ``x``, and the functions
``sin``, ``cos``, ``tanh``, ``exp``.  Expressions parse to a small AST that
can be differentiated symbolically (exponents must be numeric literals) and
evaluated on numpy arrays.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

from .errors import ExpressionError

_FUNCS = {
    "sin": np.sin,
    "cos": np.cos,
    "tanh": np.tanh,
    "exp": np.exp,
}

_CONSTANTS = {"pi": math.pi, "e": math.e}

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>\d+\.?\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_]\w*)"
    r"|(?P<op>[-+*/^()]))"
)


class Expr:
    """Base AST node."""

    def diff(self) -> "Expr":
        raise NotImplementedError

    def __call__(self, x):
        raise NotImplementedError


@dataclass(frozen=True)
class Const(Expr):
    value: float

    def diff(self):
        return Const(0.0)

    def __call__(self, x):
        return np.full_like(np.asarray(x, dtype=float), self.value)

    def __str__(self):
        return repr(self.value)


@dataclass(frozen=True)
class Var(Expr):
    def diff(self):
        return Const(1.0)

    def __call__(self, x):
        return np.asarray(x, dtype=float)

    def __str__(self):
        return "x"


@dataclass(frozen=True)
class BinOp(Expr):
    op: str
    left: Expr
    right: Expr

    def diff(self):
        u, v = self.left, self.right
        du, dv = u.diff(), v.diff()
        if self.op == "+":
            return _add(du, dv)
        if self.op == "-":
            return _sub(du, dv)
        if self.op == "*":
            return _add(_mul(du, v), _mul(u, dv))
        if self.op == "/":
            # (u/v)' = u'/v - u v'/v^2
            return _sub(_div(du, v), _div(_mul(u, dv), _mul(v, v)))
        raise ExpressionError(f"cannot differentiate operator {self.op!r}")

    def __call__(self, x):
        a, b = self.left(x), self.right(x)
        if self.op == "+":
            return a + b
        if self.op == "-":
            return a - b
        if self.op == "*":
            return a * b
        return a / b

    def __str__(self):
        return f"({self.left} {self.op} {self.right})"


@dataclass(frozen=True)
class Pow(Expr):
    base: Expr
    exponent: float  # numeric only, so derivatives stay in the grammar

    def diff(self):
        c = self.exponent
        if c == 0:
            return Const(0.0)
        return _mul(_mul(Const(c), Pow(self.base, c - 1)), self.base.diff())

    def __call__(self, x):
        return self.base(x) ** self.exponent

    def __str__(self):
        return f"({self.base} ^ {self.exponent!r})"


@dataclass(frozen=True)
class Neg(Expr):
    operand: Expr

    def diff(self):
        return Neg(self.operand.diff())

    def __call__(self, x):
        return -self.operand(x)

    def __str__(self):
        return f"(-{self.operand})"


@dataclass(frozen=True)
class Call(Expr):
    func: str
    arg: Expr

    def diff(self):
        u = self.arg
        du = u.diff()
        if self.func == "sin":
            outer = Call("cos", u)
        elif self.func == "cos":
            outer = Neg(Call("sin", u))
        elif self.func == "exp":
            outer = Call("exp", u)
        elif self.func == "tanh":
            # d tanh = 1 - tanh^2, which stays inside the grammar
            outer = _sub(Const(1.0), _mul(Call("tanh", u), Call("tanh", u)))
        else:
            raise ExpressionError(f"unknown function {self.func!r}")
        return _mul(outer, du)

    def __call__(self, x):
        return _FUNCS[self.func](self.arg(x))

    def __str__(self):
        return f"{self.func}({self.arg})"


def _is_const(e, v=None):
    return isinstance(e, Const) and (v is None or e.value == v)


def _add(a, b):
    if _is_const(a) and _is_const(b):
        return Const(a.value + b.value)
    if _is_const(a, 0.0):
        return b
    if _is_const(b, 0.0):
        return a
    return BinOp("+", a, b)


def _sub(a, b):
    if _is_const(a) and _is_const(b):
        return Const(a.value - b.value)
    if _is_const(b, 0.0):
        return a
    if _is_const(a, 0.0):
        return Neg(b)
    return BinOp("-", a, b)


def _mul(a, b):
    if _is_const(a) and _is_const(b):
        return Const(a.value * b.value)
    if _is_const(a, 0.0) or _is_const(b, 0.0):
        return Const(0.0)
    if _is_const(a, 1.0):
        return b
    if _is_const(b, 1.0):
        return a
    return BinOp("*", a, b)


def _div(a, b):
    if _is_const(a, 0.0):
        return Const(0.0)
    if _is_const(b, 1.0):
        return a
    if _is_const(a) and _is_const(b) and b.value != 0:
        return Const(a.value / b.value)
    return BinOp("/", a, b)


class _Parser:
    def __init__(self, text: str):
        self.tokens = self._tokenize(text)
        self.pos = 0

    @staticmethod
    def _tokenize(text):
        tokens = []
        idx = 0
        while idx < len(text):
            m = _TOKEN_RE.match(text, idx)
            if m is None or m.end() == idx:
                if text[idx:].strip() == "":
                    break
                raise ExpressionError(f"unexpected character at {text[idx:]!r}")
            tokens.append(m)
            idx = m.end()
        return tokens

    def _peek(self):
        if self.pos < len(self.tokens):
            m = self.tokens[self.pos]
            return m.lastgroup, m.group(m.lastgroup)
        return None, None

    def _next(self):
        kind, value = self._peek()
        if kind is None:
            raise ExpressionError("unexpected end of expression")
        self.pos += 1
        return kind, value

    def _expect(self, value):
        kind, got = self._next()
        if got != value:
            raise ExpressionError(f"expected {value!r}, got {got!r}")

    def parse(self) -> Expr:
        e = self.expr()
        if self.pos != len(self.tokens):
            _, tok = self._peek()
            raise ExpressionError(f"trailing input at {tok!r}")
        return e

    def expr(self):
        node = self.term()
        while True:
            kind, value = self._peek()
            if kind == "op" and value in "+-":
                self.pos += 1
                node = _add(node, self.term()) if value == "+" else _sub(node, self.term())
            else:
                return node

    def term(self):
        node = self.factor()
        while True:
            kind, value = self._peek()
            if kind == "op" and value in "*/":
                self.pos += 1
                node = _mul(node, self.factor()) if value == "*" else _div(node, self.factor())
            else:
                return node

    def factor(self):
        node = self.unary()
        kind, value = self._peek()
        if kind == "op" and value == "^":
            self.pos += 1
            exponent = self.unary()
            if isinstance(exponent, Neg) and isinstance(exponent.operand, Const):
                exponent = Const(-exponent.operand.value)
            if not isinstance(exponent, Const):
                raise ExpressionError("exponent must be a numeric literal")
            return Pow(node, exponent.value)
        return node

    def unary(self):
        kind, value = self._peek()
        if kind == "op" and value == "-":
            self.pos += 1
            return Neg(self.unary())
        if kind == "op" and value == "+":
            self.pos += 1
            return self.unary()
        return self.atom()

    def atom(self):
        kind, value = self._next()
        if kind == "num":
            return Const(float(value))
        if kind == "name":
            if value in _CONSTANTS:
                return Const(_CONSTANTS[value])
            if value == "x":
                return Var()
            if value in _FUNCS:
                self._expect("(")
                arg = self.expr()
                self._expect(")")
                return Call(value, arg)
            raise ExpressionError(f"unknown name {value!r}")
        if value == "(":
            node = self.expr()
            self._expect(")")
            return node
        raise ExpressionError(f"unexpected token {value!r}")


def parse_expression(text: str) -> Expr:
    """Parse ``text`` into an AST; raises ExpressionError on malformed input."""
    if not isinstance(text, str) or not text.strip():
        raise ExpressionError("empty expression")
    return _Parser(text).parse()


def derivatives(expr: Expr, order: int) -> list[Expr]:
    """Return [expr, expr', ..., expr^(order)]."""
    out = [expr]
    for _ in range(order):
        out.append(out[-1].diff())
    return out
