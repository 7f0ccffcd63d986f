"""Scalar coefficient expressions and their second-order jets.

Expressions are parsed once into an immutable AST and evaluated either as
plain floats or as :class:`Jet2` values carrying the exact gradient and
Hessian (forward-mode differentiation, order two).

Grammar, loosest to tightest binding::

    expr  := term (('+' | '-') term)*
    term  := unary (('*' | '/') unary)*
    unary := '-' unary | power
    power := atom ('^' unary)?          # right associative
    atom  := number | name | name '(' expr ')' | '(' expr ')'
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .errors import DomainError, ExpressionSyntaxError, UnknownFunction, UnknownVariable

FUNCTIONS = ("sin", "cos", "tan", "exp", "log", "sqrt", "abs", "atan")


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str
    index: int


@dataclass(frozen=True)
class Neg:
    arg: "Node"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Pow:
    base: "Node"
    exponent: "Node"


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Node"


Node = Union[Num, Var, Neg, BinOp, Pow, Call]


@dataclass(frozen=True)
class Expression:
    """A parsed expression bound to an ordered list of coordinate names."""

    source: str
    coords: tuple
    root: Node

    @property
    def is_constant(self) -> bool:
        return _is_constant(self.root)

    def __str__(self) -> str:
        return unparse(self.root)


# -- tokenizer ---------------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_]\w*)|(?P<op>[-+*/^(),]))"
)


def _tokenize(source: str):
    tokens = []
    pos = 0
    end = len(source)
    while pos < end:
        if source[pos:].strip() == "":
            break
        m = _TOKEN.match(source, pos)
        if m is None or m.end() == pos:
            start = pos + len(source[pos:]) - len(source[pos:].lstrip())
            raise ExpressionSyntaxError(
                f"unexpected character {source[start]!r}", _byte_offset(source, start)
            )
        kind = m.lastgroup
        tokens.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    tokens.append(("end", "", len(source)))
    return tokens


def _byte_offset(source: str, index: int) -> int:
    return len(source[:index].encode("utf-8"))


class _Parser:
    def __init__(self, source: str, coords: Sequence[str]):
        self.source = source
        self.coords = {name: i for i, name in enumerate(coords)}
        self.tokens = _tokenize(source)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def fail(self, message, tok=None):
        tok = tok or self.peek()
        raise ExpressionSyntaxError(message, _byte_offset(self.source, tok[2]))

    def expect(self, text):
        tok = self.peek()
        if tok[0] != "op" or tok[1] != text:
            self.fail(f"expected {text!r}")
        self.take()

    def parse(self) -> Node:
        node = self.expr()
        if self.peek()[0] != "end":
            self.fail(f"unexpected token {self.peek()[1]!r}")
        return node

    def expr(self) -> Node:
        node = self.term()
        while self.peek()[0] == "op" and self.peek()[1] in "+-":
            op = self.take()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Node:
        node = self.unary()
        while self.peek()[0] == "op" and self.peek()[1] in "*/":
            op = self.take()[1]
            node = BinOp(op, node, self.unary())
        return node

    def unary(self) -> Node:
        tok = self.peek()
        if tok[0] == "op" and tok[1] == "-":
            self.take()
            return Neg(self.unary())
        return self.power()

    def power(self) -> Node:
        base = self.atom()
        tok = self.peek()
        if tok[0] == "op" and tok[1] == "^":
            self.take()
            return Pow(base, self.unary())
        return base

    def atom(self) -> Node:
        tok = self.take()
        kind, text, _ = tok
        if kind == "num":
            return Num(float(text))
        if kind == "name":
            nxt = self.peek()
            if nxt[0] == "op" and nxt[1] == "(":
                if text not in FUNCTIONS:
                    raise UnknownFunction(text)
                self.take()
                arg = self.expr()
                self.expect(")")
                return Call(text, arg)
            if text not in self.coords:
                raise UnknownVariable(text)
            return Var(text, self.coords[text])
        if kind == "op" and text == "(":
            node = self.expr()
            self.expect(")")
            return node
        if kind == "end":
            self.fail("unexpected end of input", tok)
        self.fail(f"unexpected token {text!r}", tok)


def parse(source: str, coords: Sequence[str]) -> Expression:
    """Parse ``source`` over the coordinate names ``coords``."""
    if not isinstance(source, str):
        source = repr(float(source))
    if not source.strip():
        raise ExpressionSyntaxError("empty expression", 0)
    return Expression(source, tuple(coords), _Parser(source, coords).parse())


# -- unparse -----------------------------------------------------------------

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}


def _prec(node: Node) -> int:
    if isinstance(node, BinOp):
        return _PREC[node.op]
    if isinstance(node, Neg):
        return 3
    if isinstance(node, Pow):
        return 4
    return 5


def unparse(node: Node) -> str:
    """Render an AST so that reparsing it yields the same AST."""
    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Call):
        return f"{node.func}({unparse(node.arg)})"
    if isinstance(node, Neg):
        inner = unparse(node.arg)
        return f"-{inner}" if _prec(node.arg) >= 3 else f"-({inner})"
    if isinstance(node, Pow):
        base = unparse(node.base)
        if _prec(node.base) <= 4:
            base = f"({base})"
        exp = unparse(node.exponent)
        if _prec(node.exponent) < 3:
            exp = f"({exp})"
        return f"{base}^{exp}"
    p = _PREC[node.op]
    left = unparse(node.left)
    if _prec(node.left) < p:
        left = f"({left})"
    right = unparse(node.right)
    if _prec(node.right) <= p:
        right = f"({right})"
    return f"{left} {node.op} {right}"


def _is_constant(node: Node) -> bool:
    if isinstance(node, Num):
        return True
    if isinstance(node, Var):
        return False
    if isinstance(node, (Neg, Call)):
        return _is_constant(node.arg)
    if isinstance(node, Pow):
        return _is_constant(node.base) and _is_constant(node.exponent)
    return _is_constant(node.left) and _is_constant(node.right)


# -- jets --------------------------------------------------------------------


class Jet2:
    """Value, gradient and Hessian of a scalar at a point.

    The Hessian is symmetrized on construction, so it is bit-exactly
    symmetric regardless of the arithmetic that produced it.
    """

    __slots__ = ("value", "gradient", "hessian")

    def __init__(self, value, gradient, hessian):
        self.value = float(value)
        self.gradient = np.asarray(gradient, dtype=float)
        h = np.asarray(hessian, dtype=float)
        self.hessian = 0.5 * (h + h.T)

    @classmethod
    def constant(cls, value, n):
        return cls(value, np.zeros(n), np.zeros((n, n)))

    @classmethod
    def variable(cls, value, index, n):
        g = np.zeros(n)
        g[index] = 1.0
        return cls(value, g, np.zeros((n, n)))

    def __repr__(self):
        return f"Jet2(value={self.value!r}, gradient={self.gradient!r}, hessian={self.hessian!r})"

    def __add__(self, other):
        if not isinstance(other, Jet2):
            return Jet2(self.value + other, self.gradient, self.hessian)
        return Jet2(self.value + other.value, self.gradient + other.gradient, self.hessian + other.hessian)

    __radd__ = __add__

    def __neg__(self):
        return Jet2(-self.value, -self.gradient, -self.hessian)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, Jet2):
            return Jet2(self.value * other, self.gradient * other, self.hessian * other)
        a, b = self, other
        cross = np.outer(a.gradient, b.gradient)
        return Jet2(
            a.value * b.value,
            a.value * b.gradient + b.value * a.gradient,
            a.value * b.hessian + b.value * a.hessian + cross + cross.T,
        )

    __rmul__ = __mul__

    def chain(self, f0, f1, f2):
        """Compose with a scalar function given its value and two derivatives."""
        g = self.gradient
        return Jet2(f0, f1 * g, f1 * self.hessian + f2 * np.outer(g, g))


def _reciprocal(j: Jet2, node) -> Jet2:
    if j.value == 0.0:
        raise DomainError("division by zero", unparse(node))
    v = j.value
    return j.chain(1.0 / v, -1.0 / v**2, 2.0 / v**3)


def _int_power(j, n: int):
    if n == 0:
        return 1.0 if not isinstance(j, Jet2) else Jet2.constant(1.0, j.gradient.shape[0])
    result = j
    for _ in range(abs(n) - 1):
        result = result * j
    return result


def _constant_value(node: Node) -> float:
    return evaluate_node(node, ())


def _apply(func: str, a: Jet2, node) -> Jet2:
    x = a.value
    if func == "sin":
        s, c = math.sin(x), math.cos(x)
        return a.chain(s, c, -s)
    if func == "cos":
        s, c = math.sin(x), math.cos(x)
        return a.chain(c, -s, -c)
    if func == "tan":
        c = math.cos(x)
        if abs(c) < 1e-300:
            raise DomainError("tan undefined", unparse(node))
        t = math.tan(x)
        sec2 = 1.0 / c**2
        return a.chain(t, sec2, 2.0 * t * sec2)
    if func == "exp":
        e = math.exp(x)
        return a.chain(e, e, e)
    if func == "log":
        if x <= 0.0:
            raise DomainError("log of nonpositive value", unparse(node))
        return a.chain(math.log(x), 1.0 / x, -1.0 / x**2)
    if func == "sqrt":
        if x <= 0.0:
            raise DomainError("sqrt of nonpositive value", unparse(node))
        r = math.sqrt(x)
        return a.chain(r, 0.5 / r, -0.25 / (r * x))
    if func == "abs":
        # derivative taken as sign(x), zero at the kink
        s = math.copysign(1.0, x) if x != 0.0 else 0.0
        return a.chain(abs(x), s, 0.0)
    if func == "atan":
        d = 1.0 / (1.0 + x * x)
        return a.chain(math.atan(x), d, -2.0 * x * d * d)
    raise UnknownFunction(func)


def _jet(node: Node, point, n) -> Jet2:
    if isinstance(node, Num):
        return Jet2.constant(node.value, n)
    if isinstance(node, Var):
        return Jet2.variable(point[node.index], node.index, n)
    if isinstance(node, Neg):
        return -_jet(node.arg, point, n)
    if isinstance(node, Call):
        return _apply(node.func, _jet(node.arg, point, n), node)
    if isinstance(node, Pow):
        base = _jet(node.base, point, n)
        if _is_constant(node.exponent):
            e = _constant_value(node.exponent)
            if float(e).is_integer():
                k = int(e)
                if k < 0 and base.value == 0.0:
                    raise DomainError("division by zero", unparse(node))
                powered = _int_power(base, k)
                return _reciprocal(powered, node) if k < 0 else powered
            if base.value <= 0.0:
                raise DomainError("non-integer power of nonpositive base", unparse(node))
            x = base.value
            return base.chain(x**e, e * x ** (e - 1.0), e * (e - 1.0) * x ** (e - 2.0))
        if base.value <= 0.0:
            raise DomainError("variable power of nonpositive base", unparse(node))
        expo = _jet(node.exponent, point, n)
        log_base = _apply("log", base, node)
        return _apply("exp", expo * log_base, node)
    left = _jet(node.left, point, n)
    right = _jet(node.right, point, n)
    if node.op == "+":
        return left + right
    if node.op == "-":
        return left - right
    if node.op == "*":
        return left * right
    return left * _reciprocal(right, node)


def eval_jet2(e: Expression, p) -> Jet2:
    """Exact value, gradient and Hessian of ``e`` at ``p``."""
    p = np.asarray(p, dtype=float)
    n = len(e.coords)
    if p.shape != (n,):
        raise ValueError(f"point has dimension {p.shape}, expected ({n},)")
    if e.is_constant:
        return Jet2.constant(evaluate_node(e.root, p), n)
    return _jet(e.root, p, n)


_FLOAT_FUNCS = {
    "sin": math.sin,
    "cos": math.cos,
    "tan": math.tan,
    "exp": math.exp,
    "atan": math.atan,
    "abs": abs,
}


def evaluate_node(node: Node, point) -> float:
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        return float(point[node.index])
    if isinstance(node, Neg):
        return -evaluate_node(node.arg, point)
    if isinstance(node, Call):
        x = evaluate_node(node.arg, point)
        if node.func == "log":
            if x <= 0.0:
                raise DomainError("log of nonpositive value", unparse(node))
            return math.log(x)
        if node.func == "sqrt":
            if x < 0.0:
                raise DomainError("sqrt of negative value", unparse(node))
            return math.sqrt(x)
        return _FLOAT_FUNCS[node.func](x)
    if isinstance(node, Pow):
        b = evaluate_node(node.base, point)
        e = evaluate_node(node.exponent, point)
        if float(e).is_integer():
            k = int(e)
            if k < 0 and b == 0.0:
                raise DomainError("division by zero", unparse(node))
            r = _int_power(b, k) if k != 0 else 1.0
            return 1.0 / r if k < 0 else r
        if b <= 0.0:
            raise DomainError("non-integer power of nonpositive base", unparse(node))
        return b**e
    a = evaluate_node(node.left, point)
    b = evaluate_node(node.right, point)
    if node.op == "+":
        return a + b
    if node.op == "-":
        return a - b
    if node.op == "*":
        return a * b
    if b == 0.0:
        raise DomainError("division by zero", unparse(node))
    return a / b


def evaluate(e: Expression, p) -> float:
    """Plain float value of ``e`` at ``p``."""
    return evaluate_node(e.root, p)
