"""Symbolic scalar fields on periodic coordinate charts.

Fields are immutable expression trees over {constants, coordinates, +, -, *,
/, sin, cos, exp, integer powers} with exact differentiation.  Construction
goes through smart factories that fold constants and absorb 0/1, which keeps
the trees produced by repeated bracket/derivative composition small enough to
evaluate quickly.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass

from .errors import (
    ArityError,
    ChartMismatchError,
    ExprSyntaxError,
    SingularEvaluationError,
    UnknownIdentifierError,
)

TWO_PI = 2.0 * math.pi

# Division guard: |denominator| below this raises SingularEvaluationError.
DIVISION_GUARD = 1e-12

# Deep composite trees (matrix inverses, nested brackets) can exceed the
# default interpreter recursion limit during evaluation.
sys.setrecursionlimit(max(sys.getrecursionlimit(), 20000))


@dataclass(frozen=True)
class Chart:
    """A single global periodic chart; every built-in chart is a flat torus."""

    names: tuple
    periodic: tuple = ()

    def __post_init__(self):
        if not self.names:
            raise ValueError("chart needs at least one coordinate")
        if len(set(self.names)) != len(self.names):
            raise ValueError(f"coordinate names not unique: {self.names}")
        if not self.periodic:
            object.__setattr__(self, "periodic", (True,) * len(self.names))
        if len(self.periodic) != len(self.names):
            raise ValueError("periodic flags must match coordinate count")

    @property
    def dim(self):
        return len(self.names)

    def index(self, name):
        try:
            return self.names.index(name)
        except ValueError:
            raise UnknownIdentifierError(
                f"unknown coordinate {name!r} on chart {self.names}"
            ) from None

    def reduce_point(self, p):
        """Reduce periodic coordinates modulo 2*pi."""
        if len(p) != self.dim:
            raise ValueError(f"point has {len(p)} components, chart dim is {self.dim}")
        return tuple(
            (float(c) % TWO_PI) if per else float(c)
            for c, per in zip(p, self.periodic)
        )

    def extend(self, name):
        """Chart with one extra (non-periodic) coordinate, for family parameters."""
        return Chart(self.names + (name,), self.periodic + (False,))


def torus(*names):
    return Chart(tuple(names))


# --------------------------------------------------------------------------
# Expression nodes
# --------------------------------------------------------------------------


class Node:
    __slots__ = ("_d",)

    def __init__(self):
        self._d = {}

    def diff(self, i):
        cache = self._d
        if i not in cache:
            cache[i] = self._diff(i)
        return cache[i]


class Const(Node):
    __slots__ = ("value",)

    def __init__(self, value):
        super().__init__()
        self.value = float(value)

    def _diff(self, i):
        return ZERO

    def ev(self, coords, cache):
        return self.value

    def __repr__(self):
        return repr(self.value)


class Coord(Node):
    __slots__ = ("index",)

    def __init__(self, index):
        super().__init__()
        self.index = index

    def _diff(self, i):
        return ONE if i == self.index else ZERO

    def ev(self, coords, cache):
        return coords[self.index]

    def __repr__(self):
        return f"x{self.index}"


class Add(Node):
    __slots__ = ("a", "b")

    def __init__(self, a, b):
        super().__init__()
        self.a, self.b = a, b

    def _diff(self, i):
        return add(self.a.diff(i), self.b.diff(i))

    def ev(self, coords, cache):
        return _ev(self.a, coords, cache) + _ev(self.b, coords, cache)

    def __repr__(self):
        return f"({self.a!r} + {self.b!r})"


class Sub(Node):
    __slots__ = ("a", "b")

    def __init__(self, a, b):
        super().__init__()
        self.a, self.b = a, b

    def _diff(self, i):
        return sub(self.a.diff(i), self.b.diff(i))

    def ev(self, coords, cache):
        return _ev(self.a, coords, cache) - _ev(self.b, coords, cache)

    def __repr__(self):
        return f"({self.a!r} - {self.b!r})"


class Mul(Node):
    __slots__ = ("a", "b")

    def __init__(self, a, b):
        super().__init__()
        self.a, self.b = a, b

    def _diff(self, i):
        return add(mul(self.a.diff(i), self.b), mul(self.a, self.b.diff(i)))

    def ev(self, coords, cache):
        return _ev(self.a, coords, cache) * _ev(self.b, coords, cache)

    def __repr__(self):
        return f"({self.a!r} * {self.b!r})"


class Div(Node):
    __slots__ = ("a", "b")

    def __init__(self, a, b):
        super().__init__()
        self.a, self.b = a, b

    def _diff(self, i):
        num = sub(mul(self.a.diff(i), self.b), mul(self.a, self.b.diff(i)))
        return div(num, mul(self.b, self.b))

    def ev(self, coords, cache):
        den = _ev(self.b, coords, cache)
        if abs(den) < DIVISION_GUARD:
            raise SingularEvaluationError(f"division by {den!r}")
        return _ev(self.a, coords, cache) / den

    def __repr__(self):
        return f"({self.a!r} / {self.b!r})"


class Neg(Node):
    __slots__ = ("a",)

    def __init__(self, a):
        super().__init__()
        self.a = a

    def _diff(self, i):
        return neg(self.a.diff(i))

    def ev(self, coords, cache):
        return -_ev(self.a, coords, cache)

    def __repr__(self):
        return f"(-{self.a!r})"


class Pow(Node):
    __slots__ = ("a", "n")

    def __init__(self, a, n):
        super().__init__()
        self.a, self.n = a, int(n)

    def _diff(self, i):
        return mul(mul(Const(self.n), powi(self.a, self.n - 1)), self.a.diff(i))

    def ev(self, coords, cache):
        base = _ev(self.a, coords, cache)
        if self.n < 0 and abs(base) < DIVISION_GUARD:
            raise SingularEvaluationError(f"negative power of {base!r}")
        return base**self.n

    def __repr__(self):
        return f"({self.a!r} ^ {self.n})"


class Sin(Node):
    __slots__ = ("a",)

    def __init__(self, a):
        super().__init__()
        self.a = a

    def _diff(self, i):
        return mul(cos(self.a), self.a.diff(i))

    def ev(self, coords, cache):
        return math.sin(_ev(self.a, coords, cache))

    def __repr__(self):
        return f"sin({self.a!r})"


class Cos(Node):
    __slots__ = ("a",)

    def __init__(self, a):
        super().__init__()
        self.a = a

    def _diff(self, i):
        return neg(mul(sin(self.a), self.a.diff(i)))

    def ev(self, coords, cache):
        return math.cos(_ev(self.a, coords, cache))

    def __repr__(self):
        return f"cos({self.a!r})"


class Exp(Node):
    __slots__ = ("a",)

    def __init__(self, a):
        super().__init__()
        self.a = a

    def _diff(self, i):
        return mul(self, self.a.diff(i))

    def ev(self, coords, cache):
        return math.exp(_ev(self.a, coords, cache))

    def __repr__(self):
        return f"exp({self.a!r})"


ZERO = Const(0.0)
ONE = Const(1.0)


def _ev(node, coords, cache):
    key = id(node)
    hit = cache.get(key)
    if hit is None:
        hit = node.ev(coords, cache)
        cache[key] = hit
    return hit


def _is_const(node, value=None):
    if not isinstance(node, Const):
        return False
    return True if value is None else node.value == value


# Smart factories: constant folding plus 0/1 absorption.  No CAS-style
# normal forms are attempted.


def const(v):
    if v == 0.0:
        return ZERO
    if v == 1.0:
        return ONE
    return Const(v)


def add(a, b):
    if _is_const(a) and _is_const(b):
        return const(a.value + b.value)
    if _is_const(a, 0.0):
        return b
    if _is_const(b, 0.0):
        return a
    return Add(a, b)


def sub(a, b):
    if _is_const(a) and _is_const(b):
        return const(a.value - b.value)
    if _is_const(b, 0.0):
        return a
    if _is_const(a, 0.0):
        return neg(b)
    if a is b:
        return ZERO
    return Sub(a, b)


def mul(a, b):
    if _is_const(a) and _is_const(b):
        return const(a.value * b.value)
    if _is_const(a, 0.0) or _is_const(b, 0.0):
        return ZERO
    if _is_const(a, 1.0):
        return b
    if _is_const(b, 1.0):
        return a
    # keep constants on the left and fold through nested constant factors
    if _is_const(b):
        a, b = b, a
    if _is_const(a) and isinstance(b, Mul) and _is_const(b.a):
        return mul(const(a.value * b.a.value), b.b)
    return Mul(a, b)


def div(a, b):
    if _is_const(b):
        if b.value == 0.0:
            raise SingularEvaluationError("symbolic division by constant zero")
        if _is_const(a):
            return const(a.value / b.value)
        return mul(const(1.0 / b.value), a)
    if _is_const(a, 0.0):
        return ZERO
    return Div(a, b)


def neg(a):
    if _is_const(a):
        return const(-a.value)
    if isinstance(a, Neg):
        return a.a
    return Neg(a)


def powi(a, n):
    n = int(n)
    if n == 0:
        return ONE
    if n == 1:
        return a
    if _is_const(a):
        return const(a.value**n)
    return Pow(a, n)


def sin(a):
    if _is_const(a):
        return const(math.sin(a.value))
    return Sin(a)


def cos(a):
    if _is_const(a):
        return const(math.cos(a.value))
    return Cos(a)


def exp(a):
    if _is_const(a):
        return const(math.exp(a.value))
    return Exp(a)


# --------------------------------------------------------------------------
# ScalarField: chart + expression
# --------------------------------------------------------------------------


class ScalarField:
    """Immutable smooth function on a chart with exact differentiation."""

    __slots__ = ("chart", "node")

    def __init__(self, chart, node):
        self.chart = chart
        self.node = node

    # -- arithmetic ---------------------------------------------------------

    def _coerce(self, other):
        if isinstance(other, ScalarField):
            if other.chart != self.chart:
                raise ChartMismatchError("scalar fields on different charts")
            return other.node
        if isinstance(other, (int, float)):
            return const(float(other))
        return NotImplemented

    def __add__(self, other):
        node = self._coerce(other)
        return NotImplemented if node is NotImplemented else ScalarField(self.chart, add(self.node, node))

    __radd__ = __add__

    def __sub__(self, other):
        node = self._coerce(other)
        return NotImplemented if node is NotImplemented else ScalarField(self.chart, sub(self.node, node))

    def __rsub__(self, other):
        node = self._coerce(other)
        return NotImplemented if node is NotImplemented else ScalarField(self.chart, sub(node, self.node))

    def __mul__(self, other):
        node = self._coerce(other)
        return NotImplemented if node is NotImplemented else ScalarField(self.chart, mul(self.node, node))

    __rmul__ = __mul__

    def __truediv__(self, other):
        node = self._coerce(other)
        return NotImplemented if node is NotImplemented else ScalarField(self.chart, div(self.node, node))

    def __rtruediv__(self, other):
        node = self._coerce(other)
        return NotImplemented if node is NotImplemented else ScalarField(self.chart, div(node, self.node))

    def __neg__(self):
        return ScalarField(self.chart, neg(self.node))

    def __pow__(self, n):
        if not isinstance(n, int):
            raise ArityError("only integer powers are supported")
        return ScalarField(self.chart, powi(self.node, n))

    # -- calculus ------------------------------------------------------------

    def diff(self, i):
        if not 0 <= i < self.chart.dim:
            raise IndexError(f"coordinate index {i} out of range for dim {self.chart.dim}")
        return ScalarField(self.chart, self.node.diff(i))

    def __call__(self, p, cache=None):
        coords = self.chart.reduce_point(p)
        return _ev(self.node, coords, {} if cache is None else cache)

    @property
    def is_zero(self):
        return _is_const(self.node, 0.0)

    def __repr__(self):
        return f"ScalarField({self.node!r})"


def constant(chart, v):
    return ScalarField(chart, const(float(v)))


def coordinate(chart, name_or_index):
    i = name_or_index if isinstance(name_or_index, int) else chart.index(name_or_index)
    if not 0 <= i < chart.dim:
        raise IndexError(f"coordinate index {i} out of range")
    return ScalarField(chart, Coord(i))


def sin_of(f):
    return ScalarField(f.chart, sin(f.node))


def cos_of(f):
    return ScalarField(f.chart, cos(f.node))


def exp_of(f):
    return ScalarField(f.chart, exp(f.node))


def differentiate(f, i):
    """Exact partial derivative; supports repeated application."""
    return f.diff(i)


def evaluate(f, p):
    """Double-precision value of f at p (periodic coordinates reduced mod 2*pi)."""
    return f(p)


class PointEvaluator:
    """Evaluates many fields at one point, sharing the subtree cache."""

    __slots__ = ("coords", "cache")

    def __init__(self, chart, p):
        self.coords = chart.reduce_point(p)
        self.cache = {}

    def __call__(self, f):
        return _ev(f.node, self.coords, self.cache)


def fix_coordinate(f, i, value):
    """Substitute coordinate i by a constant, producing a field on the chart
    with that coordinate removed.  Used to specialize deformation families."""
    chart = f.chart
    new_chart = Chart(
        chart.names[:i] + chart.names[i + 1 :],
        chart.periodic[:i] + chart.periodic[i + 1 :],
    )
    memo = {}

    def walk(node):
        key = id(node)
        if key in memo:
            return memo[key]
        if isinstance(node, Const):
            out = node
        elif isinstance(node, Coord):
            if node.index == i:
                out = const(float(value))
            else:
                out = Coord(node.index - 1 if node.index > i else node.index)
        elif isinstance(node, Add):
            out = add(walk(node.a), walk(node.b))
        elif isinstance(node, Sub):
            out = sub(walk(node.a), walk(node.b))
        elif isinstance(node, Mul):
            out = mul(walk(node.a), walk(node.b))
        elif isinstance(node, Div):
            out = div(walk(node.a), walk(node.b))
        elif isinstance(node, Neg):
            out = neg(walk(node.a))
        elif isinstance(node, Pow):
            out = powi(walk(node.a), node.n)
        elif isinstance(node, Sin):
            out = sin(walk(node.a))
        elif isinstance(node, Cos):
            out = cos(walk(node.a))
        elif isinstance(node, Exp):
            out = exp(walk(node.a))
        else:  # pragma: no cover
            raise TypeError(f"unknown node {node!r}")
        memo[key] = out
        return out

    return ScalarField(new_chart, walk(f.node))


# --------------------------------------------------------------------------
# Expression parser: precedence ^  >  unary-  >  * /  >  + -
# --------------------------------------------------------------------------

_FUNCTIONS = {"sin": sin, "cos": cos, "exp": exp}
_CONSTANTS = {"pi": math.pi}


class _Tokenizer:
    def __init__(self, text):
        self.text = text
        self.pos = 0
        self.tokens = []
        self._scan()
        self.cursor = 0

    def _scan(self):
        text, n = self.text, len(self.text)
        i = 0
        while i < n:
            c = text[i]
            if c.isspace():
                i += 1
                continue
            if c.isdigit() or (c == "." and i + 1 < n and text[i + 1].isdigit()):
                j = i
                seen_dot = False
                while j < n and (text[j].isdigit() or (text[j] == "." and not seen_dot)):
                    seen_dot = seen_dot or text[j] == "."
                    j += 1
                # exponent part like 1e-3
                if j < n and text[j] in "eE":
                    k = j + 1
                    if k < n and text[k] in "+-":
                        k += 1
                    if k < n and text[k].isdigit():
                        while k < n and text[k].isdigit():
                            k += 1
                        j = k
                self.tokens.append(("num", text[i:j], i))
                i = j
                continue
            if c.isalpha() or c == "_":
                j = i
                while j < n and (text[j].isalnum() or text[j] == "_"):
                    j += 1
                self.tokens.append(("name", text[i:j], i))
                i = j
                continue
            if c in "+-*/^()," :
                self.tokens.append((c, c, i))
                i += 1
                continue
            raise ExprSyntaxError(f"unexpected character {c!r}", i)
        self.tokens.append(("end", "", n))

    def peek(self):
        return self.tokens[self.cursor]

    def next(self):
        tok = self.tokens[self.cursor]
        self.cursor += 1
        return tok


class _Parser:
    def __init__(self, text, chart):
        self.toks = _Tokenizer(text)
        self.chart = chart

    def parse(self):
        node = self.expr()
        kind, _, pos = self.toks.peek()
        if kind != "end":
            raise ExprSyntaxError(f"unexpected token {self.toks.peek()[1]!r}", pos)
        return node

    def expr(self):
        node = self.term()
        while True:
            kind, _, _ = self.toks.peek()
            if kind == "+":
                self.toks.next()
                node = add(node, self.term())
            elif kind == "-":
                self.toks.next()
                node = sub(node, self.term())
            else:
                return node

    def term(self):
        node = self.unary()
        while True:
            kind, _, _ = self.toks.peek()
            if kind == "*":
                self.toks.next()
                node = mul(node, self.unary())
            elif kind == "/":
                self.toks.next()
                node = div(node, self.unary())
            else:
                return node

    def unary(self):
        kind, _, _ = self.toks.peek()
        if kind == "-":
            self.toks.next()
            return neg(self.unary())
        if kind == "+":
            self.toks.next()
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        kind, _, pos = self.toks.peek()
        if kind != "^":
            return base
        self.toks.next()
        sign = 1
        kind, val, pos = self.toks.next()
        if kind == "-":
            sign = -1
            kind, val, pos = self.toks.next()
        if kind != "num" or any(ch in val for ch in ".eE"):
            raise ExprSyntaxError("exponent must be an integer literal", pos)
        return powi(base, sign * int(val))

    def atom(self):
        kind, val, pos = self.toks.next()
        if kind == "num":
            return const(float(val))
        if kind == "(":
            node = self.expr()
            kind, _, pos = self.toks.next()
            if kind != ")":
                raise ExprSyntaxError("expected ')'", pos)
            return node
        if kind == "name":
            if self.toks.peek()[0] == "(":
                fn = _FUNCTIONS.get(val)
                if fn is None:
                    raise UnknownIdentifierError(f"unknown function {val!r}")
                self.toks.next()
                args = [self.expr()]
                while self.toks.peek()[0] == ",":
                    self.toks.next()
                    args.append(self.expr())
                kind, _, pos = self.toks.next()
                if kind != ")":
                    raise ExprSyntaxError("expected ')'", pos)
                if len(args) != 1:
                    raise ArityError(f"{val} takes 1 argument, got {len(args)}")
                return fn(args[0])
            if val in self.chart.names:
                return Coord(self.chart.index(val))
            if val in _CONSTANTS:
                return const(_CONSTANTS[val])
            raise UnknownIdentifierError(f"unknown identifier {val!r} on chart {self.chart.names}")
        raise ExprSyntaxError(f"unexpected token {val!r}", pos)


def parse_expr(text, chart):
    """Parse infix expression text into a ScalarField on the chart."""
    return ScalarField(chart, _Parser(text, chart).parse())
