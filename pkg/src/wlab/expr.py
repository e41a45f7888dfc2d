"""Complex rational expressions in z: a recursive-descent parser and evaluator.

Grammar::

    expr     := term (('+' | '-') term)*
    term     := unary (('*' | '/') unary)*
    unary    := ('+' | '-') unary | power
    power    := atom ('^' exponent)?
    exponent := ['+' | '-'] INT | '(' ['+' | '-'] INT ')'
    atom     := NUMBER ['i'] | 'i' | 'z' | '(' expr ')'
"""

from __future__ import annotations

import re

import numpy as np

from .errors import DivisionByZeroAtPole, ParseError
from .jets import POLE_THRESHOLD, ComplexJet2

_NUMBER = re.compile(r"(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?")
_INT = re.compile(r"\d+")


class ComplexExpr:
    """Node of an expression tree; supports arithmetic to build trees programmatically."""

    def _wrap(self, other):
        return other if isinstance(other, ComplexExpr) else Const(complex(other))

    def __add__(self, other):
        return BinOp("+", self, self._wrap(other))

    def __radd__(self, other):
        return BinOp("+", self._wrap(other), self)

    def __sub__(self, other):
        return BinOp("-", self, self._wrap(other))

    def __rsub__(self, other):
        return BinOp("-", self._wrap(other), self)

    def __mul__(self, other):
        return BinOp("*", self, self._wrap(other))

    def __rmul__(self, other):
        return BinOp("*", self._wrap(other), self)

    def __truediv__(self, other):
        return BinOp("/", self, self._wrap(other))

    def __rtruediv__(self, other):
        return BinOp("/", self._wrap(other), self)

    def __neg__(self):
        return Neg(self)

    def __pow__(self, n):
        return Pow(self, int(n))

    def __call__(self, z):
        return self.evaluate(z)


class Const(ComplexExpr):
    def __init__(self, c):
        self.c = complex(c)

    def evaluate(self, z):
        return np.full(np.shape(z), self.c, dtype=complex)

    def jet(self, z):
        return ComplexJet2.constant(z, self.c)

    def __str__(self):
        if self.c.imag == 0:
            return repr(self.c.real)
        if self.c.real == 0:
            return f"{self.c.imag!r}i"
        return f"({self.c.real!r}+{self.c.imag!r}i)"


class Var(ComplexExpr):
    def evaluate(self, z):
        return np.asarray(z, dtype=complex)

    def jet(self, z):
        return ComplexJet2.variable(z)

    def __str__(self):
        return "z"


class Neg(ComplexExpr):
    def __init__(self, a):
        self.a = a

    def evaluate(self, z):
        return -self.a.evaluate(z)

    def jet(self, z):
        return -self.a.jet(z)

    def __str__(self):
        return f"(-{self.a})"


def _checked_div(a, b):
    if np.any(np.abs(b) < POLE_THRESHOLD):
        raise DivisionByZeroAtPole("denominator vanishes (pole of the expression)")
    return a / b


class BinOp(ComplexExpr):
    def __init__(self, op, a, b):
        self.op, self.a, self.b = op, a, b

    def evaluate(self, z):
        a, b = self.a.evaluate(z), self.b.evaluate(z)
        if self.op == "+":
            return a + b
        if self.op == "-":
            return a - b
        if self.op == "*":
            return a * b
        return _checked_div(a, b)

    def jet(self, z):
        a, b = self.a.jet(z), self.b.jet(z)
        if self.op == "+":
            return a + b
        if self.op == "-":
            return a - b
        if self.op == "*":
            return a * b
        return a / b

    def __str__(self):
        return f"({self.a}{self.op}{self.b})"


class Pow(ComplexExpr):
    def __init__(self, a, n):
        self.a, self.n = a, int(n)

    def evaluate(self, z):
        v = self.a.evaluate(z)
        if self.n < 0:
            return _checked_div(np.ones_like(v), v ** (-self.n))
        return v**self.n

    def jet(self, z):
        return self.a.jet(z) ** self.n

    def __str__(self):
        return f"({self.a}^{self.n})"


class _Parser:
    def __init__(self, src):
        self.src = src
        self.pos = 0

    def _skip(self):
        while self.pos < len(self.src) and self.src[self.pos].isspace():
            self.pos += 1

    def _peek(self):
        self._skip()
        return self.src[self.pos] if self.pos < len(self.src) else ""

    def _fail(self, expected):
        self._skip()
        raise ParseError(self.pos, expected, self.src)

    def parse(self):
        node = self.expr()
        if self._peek():
            self._fail("operator or end of input")
        return node

    def expr(self):
        node = self.term()
        while self._peek() in ("+", "-") and self._peek():
            op = self.src[self.pos]
            self.pos += 1
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self._peek() in ("*", "/") and self._peek():
            op = self.src[self.pos]
            self.pos += 1
            node = BinOp(op, node, self.unary())
        return node

    def unary(self):
        c = self._peek()
        if c == "-":
            self.pos += 1
            return Neg(self.unary())
        if c == "+":
            self.pos += 1
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        if self._peek() == "^":
            self.pos += 1
            return Pow(base, self.exponent())
        return base

    def exponent(self):
        paren = self._peek() == "("
        if paren:
            self.pos += 1
        sign = 1
        c = self._peek()
        if c in ("+", "-"):
            sign = -1 if c == "-" else 1
            self.pos += 1
        self._skip()
        m = _INT.match(self.src, self.pos)
        if not m:
            self._fail("integer exponent")
        self.pos = m.end()
        if paren:
            if self._peek() != ")":
                self._fail("')'")
            self.pos += 1
        return sign * int(m.group())

    def atom(self):
        c = self._peek()
        if c == "(":
            self.pos += 1
            node = self.expr()
            if self._peek() != ")":
                self._fail("')'")
            self.pos += 1
            return node
        if c == "z":
            self.pos += 1
            return Var()
        if c == "i":
            self.pos += 1
            return Const(1j)
        m = _NUMBER.match(self.src, self.pos) if c else None
        if m:
            self.pos = m.end()
            val = float(m.group())
            if self.pos < len(self.src) and self.src[self.pos] == "i":
                self.pos += 1
                return Const(1j * val)
            return Const(val)
        self._fail("number, 'i', 'z' or '('")


def parse_expression(src):
    """Parse text into a ComplexExpr; raises ParseError with the failing offset."""
    return _Parser(src).parse()
