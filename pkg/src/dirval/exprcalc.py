"""Arithmetic expressions in parameter variables x1..xn and decision variables y1..ym.

Grammar::

    expr   := term (('+'|'-') term)*
    term   := factor (('*'|'/') factor)*
    factor := base ('^' uint)?
    base   := number | ident | '(' expr ')' | func '(' expr ')' | '-' base
    ident  := ('x'|'y') uint
    func   := 'sin' | 'cos' | 'exp' | 'log' | 'sqrt'

Note that ``-x1^2`` parses as ``(-x1)^2`` because unary minus lives in ``base``.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

FUNCTIONS = ("sin", "cos", "exp", "log", "sqrt")
BINARY = ("add", "sub", "mul", "div")
_SYMBOL = {"add": "+", "sub": "-", "mul": "*", "div": "/"}


class ExpressionError(ValueError):
    """Base class for all expression failures."""


class ParseError(ExpressionError):
    def __init__(self, message: str, position: int, expected: Sequence[str] = ()):
        self.position = position
        self.expected = tuple(expected)
        detail = f" (expected one of: {', '.join(self.expected)})" if self.expected else ""
        super().__init__(f"{message} at position {position}{detail}")


class EvaluationError(ExpressionError):
    def __init__(self, message: str, subexpression: "Expr"):
        self.subexpression = subexpression
        super().__init__(f"{message} in '{to_string(subexpression)}'")


@dataclass(frozen=True)
class Expr:
    """Immutable AST node.

    ``data`` holds the float for ``const``, a ``(cls, index)`` pair for ``var``,
    the exponent for ``pow`` and the function name for ``call``.
    """

    kind: str
    args: tuple["Expr", ...] = ()
    data: object = None

    def __str__(self) -> str:
        return to_string(self)

    @property
    def is_constant(self) -> bool:
        return self.kind == "const"

    def variables(self) -> set[tuple[str, int]]:
        if self.kind == "var":
            return {self.data}
        out: set[tuple[str, int]] = set()
        for a in self.args:
            out |= a.variables()
        return out


def const(value: float) -> Expr:
    return Expr("const", (), float(value))


def var(cls: str, index: int) -> Expr:
    return Expr("var", (), (cls, int(index)))


ZERO = const(0.0)
ONE = const(1.0)


# ---------------------------------------------------------------- parsing

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^()]))"
)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN_RE.match(text, pos)
        if m is None or m.end() == pos:
            bad = len(text[pos:]) - len(text[pos:].lstrip()) + pos
            raise ParseError(f"unexpected character {text[bad]!r}", bad)
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), start))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str, n: int, m: int):
        self.tokens = _tokenize(text)
        self.i = 0
        self.n = n
        self.m = m

    @property
    def tok(self):
        return self.tokens[self.i]

    def _advance(self):
        t = self.tokens[self.i]
        self.i += 1
        return t

    def _expect_op(self, op: str):
        kind, val, pos = self.tok
        if kind != "op" or val != op:
            shown = val if kind != "end" else "end of input"
            raise ParseError(f"syntax error at token {shown!r}", pos, [op])
        self._advance()

    def parse(self) -> Expr:
        e = self.expr()
        kind, val, pos = self.tok
        if kind != "end":
            raise ParseError(f"syntax error at token {val!r}", pos, ["+", "-", "*", "/", "^", "end"])
        return e

    def expr(self) -> Expr:
        left = self.term()
        while self.tok[0] == "op" and self.tok[1] in "+-":
            op = self._advance()[1]
            right = self.term()
            left = Expr("add" if op == "+" else "sub", (left, right))
        return left

    def term(self) -> Expr:
        left = self.factor()
        while self.tok[0] == "op" and self.tok[1] in "*/":
            op = self._advance()[1]
            right = self.factor()
            left = Expr("mul" if op == "*" else "div", (left, right))
        return left

    def factor(self) -> Expr:
        b = self.base()
        if self.tok[0] == "op" and self.tok[1] == "^":
            self._advance()
            kind, val, pos = self.tok
            if kind != "num" or not val.isdigit():
                raise ParseError("exponent must be a non-negative integer literal", pos, ["uint"])
            self._advance()
            return Expr("pow", (b,), int(val))
        return b

    def base(self) -> Expr:
        kind, val, pos = self.tok
        expected = ["number", "x<i>", "y<j>", "(", "-", *FUNCTIONS]
        if kind == "num":
            self._advance()
            return const(float(val))
        if kind == "op" and val == "(":
            self._advance()
            e = self.expr()
            self._expect_op(")")
            return e
        if kind == "op" and val == "-":
            self._advance()
            return Expr("neg", (self.base(),))
        if kind == "name":
            self._advance()
            if val in FUNCTIONS:
                self._expect_op("(")
                arg = self.expr()
                self._expect_op(")")
                return Expr("call", (arg,), val)
            m = re.fullmatch(r"([xy])(\d+)", val)
            if m is None:
                raise ParseError(f"unknown identifier {val!r}", pos)
            cls, idx = m.group(1), int(m.group(2))
            limit = self.n if cls == "x" else self.m
            if not 1 <= idx <= limit:
                raise ParseError(f"index out of range: {val} (declared {cls}1..{cls}{limit})", pos)
            return var(cls, idx)
        shown = val if kind != "end" else "end of input"
        raise ParseError(f"syntax error at token {shown!r}", pos, expected)


def parse(text: str, n: int, m: int) -> Expr:
    """Parse ``text`` into an AST over x1..xn, y1..ym."""
    if not text or not text.strip():
        raise ParseError("empty expression", 0)
    return _Parser(text, n, m).parse()


# ---------------------------------------------------------------- printing

def _fmt_const(v: float) -> str:
    if v < 0:
        return f"({_fmt_const(-v)})".replace("(", "(-", 1)
    if v.is_integer() and v < 1e15:
        return str(int(v))
    return repr(v)


def _atomic(e: Expr) -> bool:
    # negative constants print with their own parentheses
    return e.kind in ("var", "call", "const")


def to_string(e: Expr) -> str:
    """Render ``e`` so that ``parse(to_string(e))`` rebuilds the same tree."""
    k = e.kind
    if k == "const":
        return _fmt_const(e.data)
    if k == "var":
        return f"{e.data[0]}{e.data[1]}"
    if k == "call":
        return f"{e.data}({to_string(e.args[0])})"
    if k == "neg":
        a = e.args[0]
        inner = to_string(a)
        return f"-{inner}" if _atomic(a) else f"-({inner})"
    if k == "pow":
        a = e.args[0]
        inner = to_string(a)
        return f"{inner}^{e.data}" if _atomic(a) else f"({inner})^{e.data}"
    left, right = e.args
    ls, rs = to_string(left), to_string(right)
    # grammar is left-associative: only the right operand needs parens at equal level
    lvl = _level(e)
    if _level(left) < lvl:
        ls = f"({ls})"
    if _level(right) <= lvl:
        rs = f"({rs})"
    return f"{ls} {_SYMBOL[k]} {rs}"


def _level(e: Expr) -> int:
    if e.kind in ("add", "sub"):
        return 1
    if e.kind in ("mul", "div"):
        return 2
    return 3


# ---------------------------------------------------------------- evaluation

def _lookup(e: Expr, x, y):
    cls, idx = e.data
    src = x if cls == "x" else y
    return src[idx - 1]


def evaluate(e: Expr, x: Sequence[float], y: Sequence[float]) -> float:
    """Evaluate at a single point, raising ``EvaluationError`` on domain violations."""
    k = e.kind
    if k == "const":
        return e.data
    if k == "var":
        return float(_lookup(e, x, y))
    if k == "neg":
        return -evaluate(e.args[0], x, y)
    if k == "pow":
        return evaluate(e.args[0], x, y) ** e.data
    if k == "call":
        a = evaluate(e.args[0], x, y)
        fn = e.data
        if fn == "log" and a <= 0.0:
            raise EvaluationError(f"log of non-positive value {a}", e)
        if fn == "sqrt" and a < 0.0:
            raise EvaluationError(f"sqrt of negative value {a}", e)
        try:
            return getattr(math, fn)(a)
        except OverflowError:
            return math.inf
    a = evaluate(e.args[0], x, y)
    b = evaluate(e.args[1], x, y)
    if k == "add":
        return a + b
    if k == "sub":
        return a - b
    if k == "mul":
        return a * b
    if b == 0.0:
        raise EvaluationError("division by zero", e)
    return a / b


_NP_FN = {"sin": np.sin, "cos": np.cos, "exp": np.exp, "log": np.log, "sqrt": np.sqrt}


def compile_expr(e: Expr) -> Callable[[np.ndarray, np.ndarray], np.ndarray]:
    """Return ``g(X, Y)`` evaluating ``e`` row-wise on arrays of shape (N, n), (N, m).

    Domain violations yield NaN instead of raising, so grids can mask them.
    """
    k = e.kind
    if k == "const":
        c = e.data
        return lambda X, Y: np.full(X.shape[0], c)
    if k == "var":
        cls, idx = e.data
        j = idx - 1
        if cls == "x":
            return lambda X, Y: X[:, j].astype(float)
        return lambda X, Y: Y[:, j].astype(float)
    subs = [compile_expr(a) for a in e.args]
    if k == "neg":
        a = subs[0]
        return lambda X, Y: -a(X, Y)
    if k == "pow":
        a, p = subs[0], e.data
        if p == 0:
            # nan ** 0 is 1 in numpy; keep domain failures visible
            return lambda X, Y: np.where(np.isnan(a(X, Y)), np.nan, 1.0)
        return lambda X, Y: a(X, Y) ** p
    if k == "call":
        a, fn = subs[0], _NP_FN[e.data]

        def call(X, Y):
            with np.errstate(all="ignore"):
                v = a(X, Y)
                if e.data == "log":
                    v = np.where(v > 0, v, np.nan)
                return fn(v)
        return call
    a, b = subs
    if k == "add":
        return lambda X, Y: a(X, Y) + b(X, Y)
    if k == "sub":
        return lambda X, Y: a(X, Y) - b(X, Y)
    if k == "mul":
        return lambda X, Y: a(X, Y) * b(X, Y)

    def div(X, Y):
        den = b(X, Y)
        with np.errstate(all="ignore"):
            return np.where(den != 0.0, a(X, Y) / np.where(den != 0.0, den, 1.0), np.nan)
    return div


# ---------------------------------------------------------------- differentiation

def _neg(a: Expr) -> Expr:
    if a.kind == "const":
        return const(-a.data)
    return Expr("neg", (a,))


def _add(a: Expr, b: Expr) -> Expr:
    if a.kind == "const" and b.kind == "const":
        return const(a.data + b.data)
    if a == ZERO:
        return b
    if b == ZERO:
        return a
    return Expr("add", (a, b))


def _sub(a: Expr, b: Expr) -> Expr:
    if a.kind == "const" and b.kind == "const":
        return const(a.data - b.data)
    if b == ZERO:
        return a
    if a == ZERO:
        return _neg(b)
    return Expr("sub", (a, b))


def _mul(a: Expr, b: Expr) -> Expr:
    if a.kind == "const" and b.kind == "const":
        return const(a.data * b.data)
    if a == ZERO or b == ZERO:
        return ZERO
    if a == ONE:
        return b
    if b == ONE:
        return a
    return Expr("mul", (a, b))


def _div(a: Expr, b: Expr) -> Expr:
    if a.kind == "const" and b.kind == "const" and b.data != 0.0:
        return const(a.data / b.data)
    if b == ONE:
        return a
    if a == ZERO:
        return ZERO
    return Expr("div", (a, b))


def _pow(a: Expr, p: int) -> Expr:
    if p == 0:
        return ONE
    if p == 1:
        return a
    if a.kind == "const":
        return const(a.data ** p)
    return Expr("pow", (a,), p)


def _call(fn: str, a: Expr) -> Expr:
    return Expr("call", (a,), fn)


def differentiate(e: Expr, wrt: tuple[str, int]) -> Expr:
    """Symbolic partial derivative with respect to the variable ``wrt`` (e.g. ``("y", 1)``)."""
    k = e.kind
    if k == "const":
        return ZERO
    if k == "var":
        return ONE if e.data == tuple(wrt) else ZERO
    if k == "neg":
        return _neg(differentiate(e.args[0], wrt))
    if k == "add":
        return _add(differentiate(e.args[0], wrt), differentiate(e.args[1], wrt))
    if k == "sub":
        return _sub(differentiate(e.args[0], wrt), differentiate(e.args[1], wrt))
    if k == "mul":
        a, b = e.args
        return _add(_mul(differentiate(a, wrt), b), _mul(a, differentiate(b, wrt)))
    if k == "div":
        a, b = e.args
        num = _sub(_mul(differentiate(a, wrt), b), _mul(a, differentiate(b, wrt)))
        return _div(num, _pow(b, 2))
    if k == "pow":
        a, p = e.args[0], e.data
        if p == 0:
            return ZERO
        return _mul(_mul(const(p), _pow(a, p - 1)), differentiate(a, wrt))
    a = e.args[0]
    da = differentiate(a, wrt)
    if da == ZERO:
        return ZERO
    fn = e.data
    if fn == "sin":
        return _mul(da, _call("cos", a))
    if fn == "cos":
        return _neg(_mul(da, _call("sin", a)))
    if fn == "exp":
        return _mul(da, e)
    if fn == "log":
        return _div(da, a)
    return _div(da, _mul(const(2.0), e))  # sqrt


def gradient(e: Expr, n: int, m: int) -> tuple[list[Expr], list[Expr]]:
    """Symbolic gradients (d/dx, d/dy)."""
    gx = [differentiate(e, ("x", i + 1)) for i in range(n)]
    gy = [differentiate(e, ("y", j + 1)) for j in range(m)]
    return gx, gy


def gradient_check(e: Expr, x: Sequence[float], y: Sequence[float], h: float = 1e-5) -> float:
    """Max |symbolic partial - central difference| over all declared variables."""
    if h <= 0:
        raise ValueError("step h must be positive")
    x = [float(v) for v in x]
    y = [float(v) for v in y]
    worst = 0.0
    for cls, point in (("x", x), ("y", y)):
        for i in range(len(point)):
            d = evaluate(differentiate(e, (cls, i + 1)), x, y)
            plus, minus = list(point), list(point)
            plus[i] += h
            minus[i] -= h
            if cls == "x":
                fp, fm = evaluate(e, plus, y), evaluate(e, minus, y)
            else:
                fp, fm = evaluate(e, x, plus), evaluate(e, x, minus)
            worst = max(worst, abs(d - (fp - fm) / (2 * h)))
    return worst
