"""Scalar expressions for vector-field components.

A tiny Pratt parser, an interpreter, symbolic partial derivatives and a compiler
to vectorised numpy callables. Grammar::

    expr  := expr ('+'|'-') expr | expr ('*'|'/') expr | '-' expr | expr '^' expr
           | number | name | func '(' args ')' | '(' expr ')'

Precedence (tightest first): ``^`` (right assoc), unary minus, ``* /``, ``+ -``.
Names are state variables ``x1..xn``, controls ``u1..ud`` and the constant ``pi``.
Functions: sin, cos, exp, sqrt, abs, sign, bump(s, a, b), bump(s, r) == bump(s, -r, r),
and dbump(s, a, b, k), the k-th derivative of bump (produced by :func:`diff`).
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Mapping, Sequence

import numpy as np
from numpy.polynomial import Polynomial


class ExprError(ValueError):
    """Evaluation or construction error."""


class ExprSyntaxError(ExprError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at offset {offset}")
        self.message = message
        self.offset = offset


# ---------------------------------------------------------------- AST


class Expr:
    __slots__ = ()

    def __str__(self) -> str:
        return to_str(self)


@dataclass(frozen=True, repr=False)
class Const(Expr):
    value: float

    def __repr__(self):
        return f"Const({self.value!r})"


@dataclass(frozen=True, repr=False)
class Var(Expr):
    name: str

    def __repr__(self):
        return self.name


@dataclass(frozen=True, repr=False)
class Unary(Expr):
    op: str
    arg: Expr

    def __repr__(self):
        return f"{self.op.capitalize()}({self.arg!r})"


@dataclass(frozen=True, repr=False)
class Binary(Expr):
    op: str
    left: Expr
    right: Expr

    def __repr__(self):
        return f"{self.op.capitalize()}({self.left!r}, {self.right!r})"


@dataclass(frozen=True, repr=False)
class Bump(Expr):
    s: Expr
    a: Expr
    b: Expr
    order: int = 0

    def __repr__(self):
        tail = f", order={self.order}" if self.order else ""
        a, b = _const_value(self.a), _const_value(self.b)
        bounds = f"{b!r}" if a == -b else f"{a!r}, {b!r}"
        return f"Bump({self.s!r}, {bounds}{tail})"


UNARY_FUNCS = ("sin", "cos", "exp", "sqrt", "abs", "sign")
BINARY_SYMBOLS = {"add": "+", "sub": "-", "mul": "*", "div": "/", "pow": "^"}
_VAR_RE = re.compile(r"[xu][1-9][0-9]*\Z")


def variables(e: Expr) -> set[str]:
    if isinstance(e, Var):
        return {e.name}
    if isinstance(e, Unary):
        return variables(e.arg)
    if isinstance(e, Binary):
        return variables(e.left) | variables(e.right)
    if isinstance(e, Bump):
        return variables(e.s) | variables(e.a) | variables(e.b)
    return set()


# ---------------------------------------------------------------- parser

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^(),]))"
)


def _tokenize(source: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    src = source.rstrip()
    while pos < len(src):
        m = _TOKEN_RE.match(src, pos)
        if m is None:
            off = pos + len(src[pos:]) - len(src[pos:].lstrip())
            raise ExprSyntaxError(f"unexpected character {src[off]!r}", off)
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), start))
        pos = m.end()
    tokens.append(("end", "", len(source)))
    return tokens


# binding powers
_INFIX = {"+": (10, 11, "add"), "-": (10, 11, "sub"), "*": (20, 21, "mul"), "/": (20, 21, "div"), "^": (40, 39, "pow")}
_PREFIX_BP = 30


class _Parser:
    def __init__(self, source: str):
        self.tokens = _tokenize(source)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def next(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value: str):
        kind, text, off = self.next()
        if text != value or kind == "end":
            found = "end of input" if kind == "end" else repr(text)
            raise ExprSyntaxError(f"expected {value!r}, found {found}", off)

    def parse(self) -> Expr:
        e = self.expr(0)
        kind, text, off = self.peek()
        if kind != "end":
            raise ExprSyntaxError(f"expected operator or end of input, found {text!r}", off)
        return e

    def expr(self, min_bp: int) -> Expr:
        lhs = self.prefix()
        while True:
            kind, text, off = self.peek()
            if kind != "op" or text not in _INFIX:
                return lhs
            lbp, rbp, name = _INFIX[text]
            if lbp < min_bp:
                return lhs
            self.next()
            rhs_off = self.peek()[2]
            rhs = self.expr(rbp)
            if name == "pow" and variables(rhs):
                raise ExprSyntaxError("pow exponent must be constant", rhs_off)
            lhs = Binary(name, lhs, rhs)

    def prefix(self) -> Expr:
        kind, text, off = self.next()
        if kind == "num":
            return Const(float(text))
        if kind == "op" and text in "-+":
            arg = self.expr(_PREFIX_BP)
            if text == "+":
                return arg
            # a negative literal is a constant, so printed ASTs reparse identically
            if isinstance(arg, Const) and self.tokens[self.i - 1][0] == "num" and self.tokens[self.i - 2][1] == "-":
                return Const(-arg.value)
            return Unary("neg", arg)
        if kind == "op" and text == "(":
            e = self.expr(0)
            self.expect(")")
            return e
        if kind == "name":
            if self.peek()[1] == "(" and self.peek()[0] == "op":
                return self.call(text, off)
            if text == "pi":
                return Const(math.pi)
            if _VAR_RE.match(text):
                return Var(text)
            if text in UNARY_FUNCS or text in ("bump", "dbump"):
                raise ExprSyntaxError(f"expected '(' after function {text!r}", off + len(text))
            raise ExprSyntaxError(f"unknown identifier {text!r}", off)
        found = "end of input" if kind == "end" else repr(text)
        raise ExprSyntaxError(f"expected expression, found {found}", off)

    def call(self, name: str, off: int) -> Expr:
        self.expect("(")
        args: list[tuple[Expr, int]] = []
        if self.peek()[1] != ")":
            while True:
                aoff = self.peek()[2]
                args.append((self.expr(0), aoff))
                if self.peek()[1] == ",":
                    self.next()
                    continue
                break
        self.expect(")")
        n = len(args)
        if name in UNARY_FUNCS:
            if n != 1:
                raise ExprSyntaxError(f"{name} expects 1 argument, got {n}", off)
            return Unary(name, args[0][0])
        if name == "bump":
            if n not in (2, 3):
                raise ExprSyntaxError(f"bump expects 2 or 3 arguments, got {n}", off)
            for a, aoff in args[1:]:
                if variables(a):
                    raise ExprSyntaxError("bump support bounds must be constant", aoff)
            if n == 2:
                r = args[1][0]
                return Bump(args[0][0], neg(r), r)
            return Bump(args[0][0], args[1][0], args[2][0])
        if name == "dbump":
            if n != 4:
                raise ExprSyntaxError(f"dbump expects 4 arguments, got {n}", off)
            for a, aoff in args[1:]:
                if variables(a):
                    raise ExprSyntaxError("dbump bounds and order must be constant", aoff)
            k = _const_value(args[3][0])
            if k != int(k) or k < 0:
                raise ExprSyntaxError("dbump order must be a nonnegative integer", args[3][1])
            return Bump(args[0][0], args[1][0], args[2][0], int(k))
        raise ExprSyntaxError(f"unknown function {name!r}", off)


def parse(source: str) -> Expr:
    return _Parser(source).parse()


# ---------------------------------------------------------------- printing


def to_str(e: Expr) -> str:
    if isinstance(e, Const):
        v = e.value
        return f"({v!r})" if v < 0 or (v == 0 and math.copysign(1, v) < 0) else repr(v)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Unary):
        if e.op == "neg":
            if isinstance(e.arg, Const):
                # keep Neg(Const) apart from a negative literal
                return f"(-({to_str(e.arg)}))"
            return f"(-{to_str(e.arg)})"
        return f"{e.op}({to_str(e.arg)})"
    if isinstance(e, Binary):
        return f"({to_str(e.left)} {BINARY_SYMBOLS[e.op]} {to_str(e.right)})"
    if isinstance(e, Bump):
        if e.order == 0:
            return f"bump({to_str(e.s)}, {to_str(e.a)}, {to_str(e.b)})"
        return f"dbump({to_str(e.s)}, {to_str(e.a)}, {to_str(e.b)}, {e.order})"
    raise TypeError(type(e))


# ---------------------------------------------------------------- bump and its derivatives


@lru_cache(maxsize=None)
def _bump_numerators(order: int) -> tuple[tuple[tuple[int, Polynomial], ...], ...]:
    """Numerator polynomials for derivatives of exp(-c / D(z)), D(z) = z (1 - z).

    The k-th z-derivative is exp(-c/D) * sum_j c^j P_kj(z) / D^(2k), with
    P_{k+1} = P_k' D^2 - 2k P_k D D' + c P_k D' (the last term raises the power of c).
    """
    D = Polynomial([0.0, 1.0, -1.0])
    dD = D.deriv()
    levels: list[dict[int, Polynomial]] = [{0: Polynomial([1.0])}]
    for k in range(order):
        nxt: dict[int, Polynomial] = {}
        for j, P in levels[-1].items():
            nxt[j] = nxt.get(j, Polynomial([0.0])) + P.deriv() * D * D - 2 * k * P * D * dD
            nxt[j + 1] = nxt.get(j + 1, Polynomial([0.0])) + P * dD
        levels.append(nxt)
    return tuple(tuple(sorted(lv.items())) for lv in levels)


def bump_value(s, a: float, b: float, order: int = 0):
    """k-th derivative of exp(-1/((s-a)(b-s))) on (a, b), zero elsewhere; vectorised in s."""
    s = np.asarray(s, dtype=float)
    width = b - a
    if not width > 0:
        return np.zeros_like(s) if s.ndim else 0.0
    z = (s - a) / width
    inside = (z > 0) & (z < 1)
    zi = np.where(inside, z, 0.5)
    D = zi * (1 - zi)
    c = 1.0 / (width * width)
    with np.errstate(over="ignore", under="ignore", invalid="ignore", divide="ignore"):
        f = np.exp(-c / D)
        if order:
            acc = np.zeros_like(zi)
            for j, P in _bump_numerators(order)[order]:
                acc = acc + (c**j) * P(zi)
            f = f * acc / (D ** (2 * order)) / width**order
            inside = inside & np.isfinite(f)
        out = np.where(inside, f, 0.0)
    return out if out.ndim else float(out)


# ---------------------------------------------------------------- smart constructors


def _is(e: Expr, v: float) -> bool:
    return isinstance(e, Const) and e.value == v


def const(v: float) -> Const:
    return Const(float(v))


def neg(a: Expr) -> Expr:
    if isinstance(a, Const):
        return Const(-a.value)
    if isinstance(a, Unary) and a.op == "neg":
        return a.arg
    return Unary("neg", a)


def add(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value + b.value)
    if _is(a, 0):
        return b
    if _is(b, 0):
        return a
    return Binary("add", a, b)


def sub(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value - b.value)
    if _is(b, 0):
        return a
    if _is(a, 0):
        return neg(b)
    return Binary("sub", a, b)


def mul(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value * b.value)
    if _is(a, 0) or _is(b, 0):
        return Const(0.0)
    if _is(a, 1):
        return b
    if _is(b, 1):
        return a
    if _is(a, -1):
        return neg(b)
    if _is(b, -1):
        return neg(a)
    return Binary("mul", a, b)


def div(a: Expr, b: Expr) -> Expr:
    if _is(a, 0):
        return Const(0.0)
    if _is(b, 1):
        return a
    if isinstance(a, Const) and isinstance(b, Const) and b.value != 0:
        return Const(a.value / b.value)
    return Binary("div", a, b)


def power(a: Expr, c: Expr) -> Expr:
    if _is(c, 1):
        return a
    if _is(c, 0):
        return Const(1.0)
    if isinstance(a, Const) and isinstance(c, Const):
        try:
            return Const(float(a.value**c.value))
        except (ZeroDivisionError, OverflowError):
            pass
    return Binary("pow", a, c)


def func(name: str, a: Expr) -> Expr:
    if isinstance(a, Const):
        try:
            return Const(_scalar_unary(name, a.value))
        except ExprError:
            pass
    return Unary(name, a)


def total(terms: Sequence[Expr]) -> Expr:
    out: Expr = Const(0.0)
    for t in terms:
        out = add(out, t)
    return out


def substitute(e: Expr, env: Mapping[str, Expr | float]) -> Expr:
    """Replace variables by expressions or numbers, simplifying on the way up."""
    if isinstance(e, Var):
        if e.name in env:
            v = env[e.name]
            return v if isinstance(v, Expr) else Const(float(v))
        return e
    if isinstance(e, Const):
        return e
    if isinstance(e, Unary):
        a = substitute(e.arg, env)
        return neg(a) if e.op == "neg" else func(e.op, a)
    if isinstance(e, Binary):
        l, r = substitute(e.left, env), substitute(e.right, env)
        return _BUILD[e.op](l, r)
    if isinstance(e, Bump):
        return Bump(substitute(e.s, env), e.a, e.b, e.order)
    raise TypeError(type(e))


_BUILD = {"add": add, "sub": sub, "mul": mul, "div": div, "pow": power}


# ---------------------------------------------------------------- evaluation


def _scalar_unary(op: str, x: float) -> float:
    if op == "neg":
        return -x
    if op == "sin":
        return math.sin(x)
    if op == "cos":
        return math.cos(x)
    if op == "exp":
        try:
            return math.exp(x)
        except OverflowError:
            return math.inf
    if op == "sqrt":
        return math.sqrt(x) if x >= 0 else math.nan
    if op == "abs":
        return abs(x)
    if op == "sign":
        return float(np.sign(x))
    raise ExprError(f"unknown function {op!r}")


def _const_value(e: Expr) -> float:
    return evaluate(e, {})


def evaluate(e: Expr, env: Mapping[str, float]) -> float:
    """Evaluate at a point. Division by zero raises instead of producing infinity."""
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Var):
        try:
            return float(env[e.name])
        except KeyError:
            raise ExprError(f"unbound variable {e.name!r}") from None
    if isinstance(e, Unary):
        return _scalar_unary(e.op, evaluate(e.arg, env))
    if isinstance(e, Binary):
        l = evaluate(e.left, env)
        r = evaluate(e.right, env)
        if e.op == "add":
            return l + r
        if e.op == "sub":
            return l - r
        if e.op == "mul":
            return l * r
        if e.op == "div":
            if r == 0:
                raise ExprError("division by zero")
            return l / r
        if l == 0 and r < 0:
            raise ExprError("division by zero")
        with np.errstate(all="ignore"):
            return float(np.power(l, r))
    if isinstance(e, Bump):
        return float(bump_value(evaluate(e.s, env), evaluate(e.a, env), evaluate(e.b, env), e.order))
    raise TypeError(type(e))


# ---------------------------------------------------------------- differentiation


def diff(e: Expr, var: str) -> Expr:
    if isinstance(e, Const):
        return Const(0.0)
    if isinstance(e, Var):
        return Const(1.0 if e.name == var else 0.0)
    if isinstance(e, Unary):
        a = e.arg
        da = diff(a, var)
        if _is(da, 0):
            return Const(0.0)
        op = e.op
        if op == "neg":
            return neg(da)
        if op == "sin":
            return mul(func("cos", a), da)
        if op == "cos":
            return neg(mul(func("sin", a), da))
        if op == "exp":
            return mul(e, da)
        if op == "sqrt":
            return div(da, mul(Const(2.0), e))
        if op == "abs":
            return mul(func("sign", a), da)
        if op == "sign":
            return Const(0.0)
        raise ExprError(f"unknown function {op!r}")
    if isinstance(e, Binary):
        l, r = e.left, e.right
        dl, dr = diff(l, var), diff(r, var)
        if e.op == "add":
            return add(dl, dr)
        if e.op == "sub":
            return sub(dl, dr)
        if e.op == "mul":
            return add(mul(dl, r), mul(l, dr))
        if e.op == "div":
            return div(sub(mul(dl, r), mul(l, dr)), power(r, Const(2.0)))
        # constant exponent
        return mul(mul(r, power(l, sub(r, Const(1.0)))), dl)
    if isinstance(e, Bump):
        ds = diff(e.s, var)
        if _is(ds, 0):
            return Const(0.0)
        return mul(Bump(e.s, e.a, e.b, e.order + 1), ds)
    raise TypeError(type(e))


# ---------------------------------------------------------------- compilation


def _emit(e: Expr, names: Mapping[str, str]) -> str:
    if isinstance(e, Const):
        return repr(e.value) if np.isfinite(e.value) else f"float({str(e.value)!r})"
    if isinstance(e, Var):
        try:
            return names[e.name]
        except KeyError:
            raise ExprError(f"unbound variable {e.name!r}") from None
    if isinstance(e, Unary):
        a = _emit(e.arg, names)
        if e.op == "neg":
            return f"(-{a})"
        return f"_np.{e.op}({a})"
    if isinstance(e, Binary):
        l, r = _emit(e.left, names), _emit(e.right, names)
        if e.op == "pow":
            return f"_np.power({l}, {r})"
        return f"({l} {BINARY_SYMBOLS[e.op]} {r})"
    if isinstance(e, Bump):
        return f"_bump({_emit(e.s, names)}, {_const_value(e.a)!r}, {_const_value(e.b)!r}, {e.order})"
    raise TypeError(type(e))


def compile_exprs(exprs: Sequence[Expr], varnames: Sequence[str]) -> Callable[[np.ndarray], np.ndarray]:
    """Vectorised evaluator: X of shape (m, len(varnames)) -> array (m, len(exprs)).

    Follows IEEE semantics (no division-by-zero error); callers check finiteness.
    """
    names = {v: f"X[:, {i}]" for i, v in enumerate(varnames)}
    lines = "".join(f"        out[:, {i}] = {_emit(e, names)}\n" for i, e in enumerate(exprs))
    src = (
        "def _f(X):\n"
        "    X = _np.asarray(X, dtype=float)\n"
        f"    out = _np.empty((X.shape[0], {len(exprs)}))\n"
        "    with _np.errstate(all='ignore'):\n"
        f"{lines}"
        "    return out\n"
    )
    ns = {"_np": np, "_bump": bump_value}
    exec(compile(src, "<orbitctl-expr>", "exec"), ns)
    return ns["_f"]
