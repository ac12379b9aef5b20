"""Lagrangian expressions over the flat coordinates x0 .. x{8n-1}.

Text grammar (highest precedence first)::

    ^            integer exponents only, right associative
    unary - +
    * /
    + -

Atoms are decimal literals, ``pi``, variables ``x<k>``, parenthesised
expressions and the functions ``sin``, ``cos`` and ``exp``.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np

from .errors import EvaluationError, ParseError
from .structures import NBLOCKS


class Expr:
    """Base class of all expression nodes. Nodes are immutable and compare structurally."""

    precedence = 5

    def __add__(self, other):
        return Add(self, as_expr(other))

    def __radd__(self, other):
        return Add(as_expr(other), self)

    def __sub__(self, other):
        return Sub(self, as_expr(other))

    def __rsub__(self, other):
        return Sub(as_expr(other), self)

    def __mul__(self, other):
        return Mul(self, as_expr(other))

    def __rmul__(self, other):
        return Mul(as_expr(other), self)

    def __truediv__(self, other):
        return Div(self, as_expr(other))

    def __rtruediv__(self, other):
        return Div(as_expr(other), self)

    def __neg__(self):
        return Neg(self)

    def __pow__(self, k):
        return Pow(self, k)

    def __str__(self):
        return to_text(self)


@dataclass(frozen=True, eq=True, repr=True)
class Const(Expr):
    value: float

    def __post_init__(self):
        object.__setattr__(self, "value", float(self.value))


@dataclass(frozen=True)
class Var(Expr):
    index: int

    def __post_init__(self):
        if self.index < 0:
            raise ValueError("variable index must be non-negative")


@dataclass(frozen=True)
class Add(Expr):
    left: Expr
    right: Expr
    precedence = 1


@dataclass(frozen=True)
class Sub(Expr):
    left: Expr
    right: Expr
    precedence = 1


@dataclass(frozen=True)
class Mul(Expr):
    left: Expr
    right: Expr
    precedence = 2


@dataclass(frozen=True)
class Div(Expr):
    left: Expr
    right: Expr
    precedence = 2


@dataclass(frozen=True)
class Neg(Expr):
    operand: Expr
    precedence = 3


@dataclass(frozen=True)
class Pow(Expr):
    base: Expr
    exponent: int
    precedence = 4

    def __post_init__(self):
        if isinstance(self.exponent, float) and self.exponent.is_integer():
            object.__setattr__(self, "exponent", int(self.exponent))
        if isinstance(self.exponent, bool) or not isinstance(self.exponent, int):
            raise ValueError(f"exponent must be an integer, got {self.exponent!r}")


@dataclass(frozen=True)
class Sin(Expr):
    arg: Expr


@dataclass(frozen=True)
class Cos(Expr):
    arg: Expr


@dataclass(frozen=True)
class Exp(Expr):
    arg: Expr


BINARY = (Add, Sub, Mul, Div)
FUNCTIONS = {"sin": Sin, "cos": Cos, "exp": Exp}
_FUNC_NAMES = {cls: name for name, cls in FUNCTIONS.items()}
_BIN_SYMBOL = {Add: "+", Sub: "-", Mul: "*", Div: "/"}
ZERO = Const(0.0)
ONE = Const(1.0)


def as_expr(value) -> Expr:
    if isinstance(value, Expr):
        return value
    return Const(value)


def variables(e: Expr) -> set[int]:
    if isinstance(e, Var):
        return {e.index}
    out = set()
    for child in children(e):
        out |= variables(child)
    return out


def children(e: Expr) -> tuple[Expr, ...]:
    if isinstance(e, BINARY):
        return (e.left, e.right)
    if isinstance(e, Neg):
        return (e.operand,)
    if isinstance(e, Pow):
        return (e.base,)
    if isinstance(e, (Sin, Cos, Exp)):
        return (e.arg,)
    return ()


# --- simplifying constructors (constant folding and 0/1 identities only) ---

def _is_const(e, value=None):
    return isinstance(e, Const) and (value is None or e.value == value)


def add(a: Expr, b: Expr) -> Expr:
    if _is_const(a) and _is_const(b):
        return Const(a.value + b.value)
    if _is_const(a, 0.0):
        return b
    if _is_const(b, 0.0):
        return a
    return Add(a, b)


def sub(a: Expr, b: Expr) -> Expr:
    if _is_const(a) and _is_const(b):
        return Const(a.value - b.value)
    if _is_const(b, 0.0):
        return a
    if _is_const(a, 0.0):
        return neg(b)
    return Sub(a, b)


def mul(a: Expr, b: Expr) -> Expr:
    if _is_const(a) and _is_const(b):
        return Const(a.value * b.value)
    if _is_const(a, 0.0) or _is_const(b, 0.0):
        return ZERO
    if _is_const(a, 1.0):
        return b
    if _is_const(b, 1.0):
        return a
    if _is_const(a, -1.0):
        return neg(b)
    if _is_const(b, -1.0):
        return neg(a)
    if _is_const(b):
        a, b = b, a
    if _is_const(a) and isinstance(b, Mul) and _is_const(b.left):
        return mul(Const(a.value * b.left.value), b.right)
    return Mul(a, b)


def div(a: Expr, b: Expr) -> Expr:
    if _is_const(a) and _is_const(b) and b.value != 0.0:
        return Const(a.value / b.value)
    if _is_const(b, 1.0):
        return a
    if _is_const(a, 0.0) and not _is_const(b, 0.0):
        return ZERO
    return Div(a, b)


def neg(a: Expr) -> Expr:
    if _is_const(a):
        return Const(-a.value)
    if isinstance(a, Neg):
        return a.operand
    return Neg(a)


def power(base: Expr, k: int) -> Expr:
    if k == 0:
        return ONE
    if k == 1:
        return base
    if _is_const(base) and (base.value != 0.0 or k > 0):
        return Const(base.value ** k)
    return Pow(base, k)


def _fold_func(cls, arg):
    if _is_const(arg):
        return Const(_MATH[cls](arg.value))
    return cls(arg)


def simplify(e: Expr) -> Expr:
    """Rebuild e bottom-up through the folding constructors."""
    if isinstance(e, (Const, Var)):
        return e
    if isinstance(e, BINARY):
        build = {Add: add, Sub: sub, Mul: mul, Div: div}[type(e)]
        return build(simplify(e.left), simplify(e.right))
    if isinstance(e, Neg):
        return neg(simplify(e.operand))
    if isinstance(e, Pow):
        return power(simplify(e.base), e.exponent)
    return _fold_func(type(e), simplify(e.arg))


# --- differentiation ---

def differentiate(e: Expr, a: int) -> Expr:
    """Symbolic partial derivative with respect to x_a.

    The input is constant-folded first; the result uses the same minimal
    folding (constants, 0 and 1 identities), not a canonical form.
    """
    return _diff(simplify(e), a)


def _diff(e: Expr, a: int) -> Expr:
    if isinstance(e, Const):
        return ZERO
    if isinstance(e, Var):
        return ONE if e.index == a else ZERO
    if isinstance(e, Add):
        return add(_diff(e.left, a), _diff(e.right, a))
    if isinstance(e, Sub):
        return sub(_diff(e.left, a), _diff(e.right, a))
    if isinstance(e, Mul):
        return add(mul(_diff(e.left, a), e.right), mul(e.left, _diff(e.right, a)))
    if isinstance(e, Div):
        du = _diff(e.left, a)
        dv = _diff(e.right, a)
        if _is_const(dv, 0.0):
            return div(du, e.right)
        return div(sub(mul(du, e.right), mul(e.left, dv)), power(e.right, 2))
    if isinstance(e, Neg):
        return neg(_diff(e.operand, a))
    if isinstance(e, Pow):
        db = _diff(e.base, a)
        if _is_const(db, 0.0):
            return ZERO
        return mul(mul(Const(e.exponent), power(e.base, e.exponent - 1)), db)
    if isinstance(e, Sin):
        return mul(_fold_func(Cos, e.arg), _diff(e.arg, a))
    if isinstance(e, Cos):
        return neg(mul(_fold_func(Sin, e.arg), _diff(e.arg, a)))
    if isinstance(e, Exp):
        return mul(e, _diff(e.arg, a))
    raise TypeError(f"not an expression node: {e!r}")


# --- evaluation ---

_MATH = {Sin: math.sin, Cos: math.cos, Exp: math.exp}


def evaluate(e: Expr, x) -> float:
    """Evaluate e at the point x in IEEE double precision.

    Raises EvaluationError on division by zero, overflow, or any non-finite
    intermediate value.
    """
    try:
        return _eval(e, x)
    except (ZeroDivisionError, OverflowError) as err:
        raise EvaluationError(f"cannot evaluate {to_text(e)!r}: {err}") from err


def _checked(value):
    if not math.isfinite(value):
        raise EvaluationError(f"non-finite intermediate value {value}")
    return value


def _eval(e, x):
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Var):
        return _checked(float(x[e.index]))
    if isinstance(e, Add):
        return _checked(_eval(e.left, x) + _eval(e.right, x))
    if isinstance(e, Sub):
        return _checked(_eval(e.left, x) - _eval(e.right, x))
    if isinstance(e, Mul):
        return _checked(_eval(e.left, x) * _eval(e.right, x))
    if isinstance(e, Div):
        return _checked(_eval(e.left, x) / _eval(e.right, x))
    if isinstance(e, Neg):
        return -_eval(e.operand, x)
    if isinstance(e, Pow):
        return _checked(_eval(e.base, x) ** e.exponent)
    return _checked(_MATH[type(e)](_eval(e.arg, x)))


# --- printing ---

def _format_const(value: float) -> str:
    if value.is_integer() and abs(value) < 1e15:
        text = str(int(value))
    else:
        text = repr(value)
    return f"({text})" if value < 0 or text.startswith("-") else text


def _render(e: Expr, var: Callable[[int], str], pow_op: str) -> str:
    def wrap(child, needs):
        text = _render(child, var, pow_op)
        return f"({text})" if needs else text

    if isinstance(e, Const):
        return _format_const(e.value)
    if isinstance(e, Var):
        return var(e.index)
    if isinstance(e, BINARY):
        p = e.precedence
        left = wrap(e.left, e.left.precedence < p)
        right = wrap(e.right, e.right.precedence <= p)
        return f"{left} {_BIN_SYMBOL[type(e)]} {right}"
    if isinstance(e, Neg):
        return "-" + wrap(e.operand, e.operand.precedence < Neg.precedence)
    if isinstance(e, Pow):
        base = wrap(e.base, e.base.precedence <= Pow.precedence)
        k = str(e.exponent) if e.exponent >= 0 else f"({e.exponent})"
        return f"{base}{pow_op}{k}"
    return f"{_FUNC_NAMES[type(e)]}({_render(e.arg, var, pow_op)})"


def to_text(e: Expr) -> str:
    """Render e in the input grammar; parse(to_text(e)) rebuilds the same tree."""
    return _render(e, lambda i: f"x{i}", "^")


# --- parsing ---

_TOKEN = re.compile(
    r"(?P<number>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^()])"
)
_SPACE = re.compile(r"\s*")
_VAR_NAME = re.compile(r"x(0|[1-9][0-9]*)")


def _tokenize(text):
    tokens = []
    pos = _SPACE.match(text).end()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", pos)
        tokens.append((m.lastgroup, m.group(), pos))
        pos = _SPACE.match(text, m.end()).end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text, dim):
        self.tokens = _tokenize(text)
        self.i = 0
        self.dim = dim

    @property
    def tok(self):
        return self.tokens[self.i]

    def take(self, value=None):
        kind, text, pos = self.tok
        if value is not None and text != value:
            found = "end of input" if kind == "end" else repr(text)
            raise ParseError(f"expected {value!r}, found {found}", pos)
        self.i += 1
        return self.tok

    def at(self, *values):
        kind, text, _ = self.tok
        return kind == "op" and text in values

    def parse(self):
        e = self.expression()
        kind, text, pos = self.tok
        if kind != "end":
            raise ParseError(f"unexpected {text!r}", pos)
        return e

    def expression(self):
        e = self.term()
        while self.at("+", "-"):
            op = self.tok[1]
            self.take()
            e = (Add if op == "+" else Sub)(e, self.term())
        return e

    def term(self):
        e = self.unary()
        while self.at("*", "/"):
            op = self.tok[1]
            self.take()
            e = (Mul if op == "*" else Div)(e, self.unary())
        return e

    def unary(self):
        if self.at("-"):
            self.take()
            operand = self.unary()
            return Const(-operand.value) if isinstance(operand, Const) else Neg(operand)
        if self.at("+"):
            self.take()
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        if not self.at("^"):
            return base
        pos = self.tok[2]
        self.take()
        exponent = simplify(self.unary())
        if not isinstance(exponent, Const):
            raise ParseError("exponent must be a constant integer", pos)
        if not exponent.value.is_integer():
            raise ParseError(f"non-integer exponent {exponent.value!r}", pos)
        return Pow(base, int(exponent.value))

    def atom(self):
        kind, text, pos = self.tok
        if kind == "number":
            self.take()
            return Const(float(text))
        if kind == "name":
            self.take()
            if text == "pi":
                return Const(math.pi)
            if text in FUNCTIONS:
                self.take("(")
                arg = self.expression()
                self.take(")")
                return FUNCTIONS[text](arg)
            m = _VAR_NAME.fullmatch(text)
            if m is None:
                raise ParseError(f"unknown name {text!r}", pos)
            index = int(m.group(1))
            if self.dim is not None and index >= self.dim:
                raise ParseError(f"variable {text} out of range: only x0..x{self.dim - 1} exist", pos)
            return Var(index)
        if kind == "op" and text == "(":
            self.take()
            e = self.expression()
            self.take(")")
            return e
        found = "end of input" if kind == "end" else repr(text)
        raise ParseError(f"expected a number, variable, function or '(', found {found}", pos)


def parse(text: str, n: int | None = None) -> Expr:
    """Parse Lagrangian text. With n given, variables must be below 8n."""
    if not text or not text.strip():
        raise ParseError("empty expression", 0)
    dim = None if n is None else NBLOCKS * _check_n(n)
    return _Parser(text, dim).parse()


def _check_n(n) -> int:
    if isinstance(n, bool) or not isinstance(n, (int, np.integer)) or n < 1:
        raise ValueError(f"block size n must be a positive integer, got {n!r}")
    return int(n)


# --- compiled evaluators ---

_COMPILE_ENV = {"_sin": math.sin, "_cos": math.cos, "_exp": math.exp}


def _python_source(e: Expr) -> str:
    text = _render(e, lambda i: f"x[{i}]", "**")
    for name in FUNCTIONS:
        text = re.sub(rf"\b{name}\(", f"_{name}(", text)
    return text


def compile_exprs(exprs, shape=None) -> Callable[[np.ndarray], np.ndarray]:
    """Compile a flat sequence of expressions into one array-valued function.

    The result raises EvaluationError under the same conditions as evaluate().
    """
    exprs = list(exprs)
    body = ", ".join(_python_source(e) for e in exprs)
    code = compile(f"def _f(x):\n    return [{body}]\n", "<lagrangian>", "exec")
    namespace = dict(_COMPILE_ENV)
    exec(code, namespace)
    raw = namespace["_f"]
    shape = (len(exprs),) if shape is None else shape

    def fn(x):
        try:
            out = np.array(raw(np.asarray(x, dtype=float).tolist()), dtype=float)
        except (ZeroDivisionError, OverflowError) as err:
            raise EvaluationError(f"evaluation failed: {err}") from err
        if not np.all(np.isfinite(out)):
            raise EvaluationError("non-finite value in compiled evaluation")
        return out.reshape(shape)

    return fn


class Lagrangian:
    """A Lagrangian on R^{8n} with its symbolic gradient and Hessian.

    Derivatives are built and compiled once at construction; ``value``,
    ``grad`` and ``hess`` are the fast numeric evaluators used by dynamics.
    """

    def __init__(self, expr: Expr, n: int):
        self.n = _check_n(n)
        self.dim = NBLOCKS * self.n
        bad = sorted(i for i in variables(expr) if i >= self.dim)
        if bad:
            raise ValueError(f"variable x{bad[0]} out of range for n={self.n} (dimension {self.dim})")
        self.expr = expr
        self.gradient = tuple(differentiate(expr, a) for a in range(self.dim))
        self.hessian = tuple(
            tuple(differentiate(self.gradient[a], b) for b in range(self.dim)) for a in range(self.dim)
        )
        self._value = compile_exprs([expr], shape=())
        self._grad = compile_exprs(self.gradient)
        self._hess = compile_exprs([h for row in self.hessian for h in row], shape=(self.dim, self.dim))

    @classmethod
    def from_text(cls, text: str, n: int) -> Lagrangian:
        return cls(parse(text, n), n)

    def _point(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise ValueError(f"state must have length {self.dim}, got shape {x.shape}")
        return x

    def value(self, x) -> float:
        return float(self._value(self._point(x)))

    def grad(self, x) -> np.ndarray:
        return self._grad(self._point(x))

    def hess(self, x) -> np.ndarray:
        return self._hess(self._point(x))

    def __repr__(self):
        return f"Lagrangian(n={self.n}, {to_text(self.expr)!r})"


TEMPLATES = {
    "isotropic": {"required": ("n",), "defaults": {"m": 1.0, "omega": 1.0}},
    "free": {"required": ("n", "g"), "defaults": {"m": 1.0, "omega": 1.0}},
}


def builtin_lagrangian(name: str, params: Mapping | None = None, **kwargs) -> Lagrangian:
    """Build a template Lagrangian.

    ``isotropic``: L = (m ω²/2) Σ_a x_a² over all 8n coordinates.
    ``free``: the isotropic form minus the linear potential m·g·x0.
    """
    if name not in TEMPLATES:
        raise ValueError(f"unknown Lagrangian template {name!r}; choose from {sorted(TEMPLATES)}")
    tmpl = TEMPLATES[name]
    merged = dict(params or {})
    merged.update(kwargs)
    allowed = set(tmpl["required"]) | set(tmpl["defaults"])
    unknown = sorted(set(merged) - allowed)
    if unknown:
        raise ValueError(f"unknown parameter(s) for {name!r}: {', '.join(unknown)}")
    missing = [p for p in tmpl["required"] if p not in merged]
    if missing:
        raise ValueError(f"missing parameter(s) for {name!r}: {', '.join(missing)}")
    values = {**tmpl["defaults"], **merged}
    n = _check_n(values["n"])
    for key in allowed - {"n"}:
        if key in values:
            v = values[key]
            if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
                raise ValueError(f"parameter {key!r} must be a finite number, got {v!r}")

    stiffness = float(values["m"]) * float(values["omega"]) ** 2
    squares = Pow(Var(0), 2)
    for a in range(1, NBLOCKS * n):
        squares = Add(squares, Pow(Var(a), 2))
    expr = mul(Const(stiffness / 2.0), squares)
    if name == "free":
        expr = sub(expr, mul(Const(float(values["m"]) * float(values["g"])), Var(0)))
    return Lagrangian(expr, n)
