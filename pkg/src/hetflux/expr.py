"""Closed-form expression trees with exact differentiation.

Expressions are built from constants, the variables ``x`` and ``u``, sums,
products, negation, powers, ``exp``, ``abs`` and ``sign``. They can be
differentiated symbolically, printed back in the input grammar, and compiled
into numpy-vectorised callables.

Grammar accepted by :func:`parse`::

    expr   := term (('+' | '-') term)*
    term   := unary ('*' unary)*
    unary  := '-' unary | power
    power  := atom ('^' exponent)?
    exponent := '-'? NUMBER
    atom   := NUMBER | 'x' | 'u' | 'exp' '(' expr ')' | 'abs' '(' expr ')'
            | '(' expr ')'

Exponents must be integers unless the base is ``abs(...)``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

VARIABLES = ("x", "u")


class ExprError(ValueError):
    """Raised for malformed expressions."""


class Expr:
    """Base class of expression nodes. Nodes are immutable and hashable."""

    def diff(self, var: str) -> "Expr":
        raise NotImplementedError

    def source(self) -> str:
        """Python/numpy source for this expression."""
        raise NotImplementedError

    def free_vars(self) -> frozenset:
        raise NotImplementedError

    def is_smooth(self) -> bool:
        """False if the tree contains ``abs``/``sign`` or non-integer powers."""
        return all(c.is_smooth() for c in self.children())

    def children(self) -> tuple:
        return ()

    def compile(self, args: Sequence[str] = VARIABLES) -> Callable:
        return compile_expr(self, args)

    def __call__(self, **env):
        fn = self.compile(tuple(sorted(env)))
        return fn(*[env[k] for k in sorted(env)])

    def __add__(self, other):
        return add(self, as_expr(other))

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, neg(as_expr(other)))

    def __rsub__(self, other):
        return add(as_expr(other), neg(self))

    def __mul__(self, other):
        return mul(self, as_expr(other))

    __rmul__ = __mul__

    def __neg__(self):
        return neg(self)

    def __pow__(self, n):
        return power(self, n)


@dataclass(frozen=True)
class Const(Expr):
    value: float

    def diff(self, var):
        return ZERO

    def source(self):
        return repr(float(self.value))

    def free_vars(self):
        return frozenset()

    def __str__(self):
        v = float(self.value)
        return str(int(v)) if v.is_integer() and abs(v) < 1e15 else repr(v)


@dataclass(frozen=True)
class Var(Expr):
    name: str

    def diff(self, var):
        return ONE if var == self.name else ZERO

    def source(self):
        return self.name

    def free_vars(self):
        return frozenset({self.name})

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class Add(Expr):
    terms: tuple

    def children(self):
        return self.terms

    def diff(self, var):
        return add(*[t.diff(var) for t in self.terms])

    def source(self):
        return "(" + " + ".join(t.source() for t in self.terms) + ")"

    def free_vars(self):
        return frozenset().union(*[t.free_vars() for t in self.terms])

    def __str__(self):
        out = str(self.terms[0])
        for t in self.terms[1:]:
            if isinstance(t, Neg):
                out += " - " + _wrap(t.arg, Add)
            else:
                out += " + " + str(t)
        return out


@dataclass(frozen=True)
class Mul(Expr):
    factors: tuple

    def children(self):
        return self.factors

    def diff(self, var):
        terms = []
        for i, f in enumerate(self.factors):
            df = f.diff(var)
            if df == ZERO:
                continue
            rest = self.factors[:i] + (df,) + self.factors[i + 1:]
            terms.append(mul(*rest))
        return add(*terms)

    def source(self):
        return "(" + " * ".join(f.source() for f in self.factors) + ")"

    def free_vars(self):
        return frozenset().union(*[f.free_vars() for f in self.factors])

    def __str__(self):
        return "*".join(_wrap(f, (Add, Neg)) for f in self.factors)


@dataclass(frozen=True)
class Neg(Expr):
    arg: Expr

    def children(self):
        return (self.arg,)

    def diff(self, var):
        return neg(self.arg.diff(var))

    def source(self):
        return "(-" + self.arg.source() + ")"

    def free_vars(self):
        return self.arg.free_vars()

    def __str__(self):
        return "-" + _wrap(self.arg, (Add, Neg))


@dataclass(frozen=True)
class Pow(Expr):
    base: Expr
    exponent: float

    def children(self):
        return (self.base,)

    def is_smooth(self):
        ok = float(self.exponent).is_integer() and self.exponent >= 0
        return ok and self.base.is_smooth()

    def diff(self, var):
        db = self.base.diff(var)
        if db == ZERO:
            return ZERO
        n = self.exponent
        return mul(Const(n), power(self.base, n - 1), db)

    def source(self):
        n = self.exponent
        ns = str(int(n)) if float(n).is_integer() else repr(float(n))
        return "(" + self.base.source() + " ** " + ns + ")"

    def free_vars(self):
        return self.base.free_vars()

    def __str__(self):
        n = self.exponent
        ns = str(int(n)) if float(n).is_integer() else repr(float(n))
        return _wrap(self.base, (Add, Mul, Neg, Pow)) + "^" + ns


@dataclass(frozen=True)
class Exp(Expr):
    arg: Expr

    def children(self):
        return (self.arg,)

    def diff(self, var):
        return mul(self, self.arg.diff(var))

    def source(self):
        return "np.exp(" + self.arg.source() + ")"

    def free_vars(self):
        return self.arg.free_vars()

    def __str__(self):
        return "exp(" + str(self.arg) + ")"


@dataclass(frozen=True)
class Abs(Expr):
    arg: Expr

    def children(self):
        return (self.arg,)

    def is_smooth(self):
        return False

    def diff(self, var):
        return mul(Sign(self.arg), self.arg.diff(var))

    def source(self):
        return "np.abs(" + self.arg.source() + ")"

    def free_vars(self):
        return self.arg.free_vars()

    def __str__(self):
        return "abs(" + str(self.arg) + ")"


@dataclass(frozen=True)
class Sign(Expr):
    arg: Expr

    def children(self):
        return (self.arg,)

    def is_smooth(self):
        return False

    def diff(self, var):
        # zero away from the kink, which is all a closed-form flux needs
        return ZERO

    def source(self):
        return "np.sign(" + self.arg.source() + ")"

    def free_vars(self):
        return self.arg.free_vars()

    def __str__(self):
        return "sign(" + str(self.arg) + ")"


ZERO = Const(0.0)
ONE = Const(1.0)
X = Var("x")
U = Var("u")


def _wrap(e: Expr, kinds) -> str:
    s = str(e)
    if isinstance(e, kinds) or (isinstance(e, Const) and e.value < 0):
        return "(" + s + ")"
    return s


def as_expr(v) -> Expr:
    if isinstance(v, Expr):
        return v
    if isinstance(v, str):
        return parse(v)
    if isinstance(v, (int, float, np.floating, np.integer)):
        return Const(float(v))
    raise ExprError(f"cannot convert {v!r} to an expression")


# -- smart constructors (light simplification) --------------------------------

def add(*terms: Expr) -> Expr:
    flat = []
    c = 0.0
    for t in terms:
        if isinstance(t, Add):
            items = t.terms
        else:
            items = (t,)
        for i in items:
            if isinstance(i, Const):
                c += i.value
            else:
                flat.append(i)
    if c != 0.0 or not flat:
        flat.append(Const(c))
    if len(flat) == 1:
        return flat[0]
    return Add(tuple(flat))


def mul(*factors: Expr) -> Expr:
    flat = []
    c = 1.0
    for f in factors:
        items = f.factors if isinstance(f, Mul) else (f,)
        for i in items:
            if isinstance(i, Const):
                c *= i.value
            elif isinstance(i, Neg):
                c = -c
                flat.append(i.arg)
            else:
                flat.append(i)
    if c == 0.0:
        return ZERO
    if not flat:
        return Const(c)
    if c == -1.0:
        return neg(flat[0] if len(flat) == 1 else Mul(tuple(flat)))
    if c != 1.0:
        flat.insert(0, Const(c))
    if len(flat) == 1:
        return flat[0]
    return Mul(tuple(flat))


def neg(e: Expr) -> Expr:
    if isinstance(e, Const):
        return Const(-e.value)
    if isinstance(e, Neg):
        return e.arg
    return Neg(e)


def power(base: Expr, n) -> Expr:
    n = float(n)
    if n == 0.0:
        return ONE
    if n == 1.0:
        return base
    if isinstance(base, Const):
        return Const(base.value ** n)
    if isinstance(base, Pow) and float(base.exponent).is_integer() and n.is_integer():
        return power(base.base, base.exponent * n)
    return Pow(base, n)


def exp(e) -> Expr:
    e = as_expr(e)
    if isinstance(e, Const):
        return Const(math.exp(e.value))
    return Exp(e)


def absolute(e) -> Expr:
    return Abs(as_expr(e))


# -- compilation ----------------------------------------------------------------

def compile_expr(e: Expr, args: Sequence[str] = VARIABLES) -> Callable:
    """Return a numpy-vectorised function of ``args`` evaluating ``e``.

    The result always broadcasts against the arguments, including for
    expressions that do not depend on every argument.
    """
    missing = e.free_vars() - set(args)
    if missing:
        raise ExprError(f"expression uses undeclared variables {sorted(missing)}")
    body = e.source()
    pad = " + ".join(f"0.0 * {a}" for a in args)
    src = f"lambda {', '.join(args)}: {body}" + (f" + ({pad})" if pad else "")
    fn = eval(src, {"np": np})  # noqa: S307 - source is generated from a closed grammar

    def wrapped(*vals):
        with np.errstate(all="ignore"):
            return fn(*vals)

    wrapped.source = src
    wrapped.raw = fn
    return wrapped


# -- parsing --------------------------------------------------------------------

_TOKEN = re.compile(r"\s*(?:(\d+\.\d*(?:[eE][-+]?\d+)?|\.\d+(?:[eE][-+]?\d+)?|\d+(?:[eE][-+]?\d+)?)|([A-Za-z_]\w*)|(.))")


def _tokenize(text: str) -> list:
    pos = 0
    out = []
    text = text.strip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            break
        num, ident, op = m.groups()
        if num is not None:
            out.append(("num", float(num), m.start(1)))
        elif ident is not None:
            out.append(("id", ident, m.start(2)))
        elif op is not None:
            if op.strip():
                out.append(("op", op, m.start(3)))
        pos = m.end()
    out.append(("end", None, len(text)))
    return out


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.toks[self.i]

    def take(self):
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def expect(self, op):
        tok = self.take()
        if tok[0] != "op" or tok[1] != op:
            self.fail(f"expected {op!r}", tok)

    def fail(self, msg, tok):
        raise ExprError(f"{msg} at column {tok[2]} in {self.text!r}")

    def parse(self) -> Expr:
        e = self.expr()
        tok = self.peek()
        if tok[0] != "end":
            self.fail("unexpected token", tok)
        return e

    def expr(self):
        terms = [self.term()]
        while self.peek()[0] == "op" and self.peek()[1] in "+-":
            op = self.take()[1]
            t = self.term()
            terms.append(t if op == "+" else neg(t))
        return add(*terms)

    def term(self):
        factors = [self.unary()]
        while self.peek()[0] == "op" and self.peek()[1] == "*":
            self.take()
            factors.append(self.unary())
        return mul(*factors)

    def unary(self):
        if self.peek()[0] == "op" and self.peek()[1] == "-":
            self.take()
            return neg(self.unary())
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            sign = 1.0
            if self.peek()[0] == "op" and self.peek()[1] == "-":
                self.take()
                sign = -1.0
            tok = self.take()
            if tok[0] != "num":
                self.fail("exponent must be a numeric literal", tok)
            n = sign * tok[1]
            if not float(n).is_integer() and not isinstance(base, Abs):
                self.fail("non-integer exponents require an abs(...) base", tok)
            return power(base, n)
        return base

    def atom(self):
        tok = self.take()
        kind, val, _ = tok
        if kind == "num":
            return Const(val)
        if kind == "id":
            if val in VARIABLES:
                return Var(val)
            if val in ("exp", "abs"):
                self.expect("(")
                inner = self.expr()
                self.expect(")")
                return exp(inner) if val == "exp" else absolute(inner)
            self.fail(f"unknown identifier {val!r}", tok)
        if kind == "op" and val == "(":
            inner = self.expr()
            self.expect(")")
            return inner
        self.fail("unexpected token", tok)


def parse(text: str) -> Expr:
    """Parse ``text`` in the documented grammar."""
    if not isinstance(text, str):
        raise ExprError(f"expected a string, got {type(text).__name__}")
    return _Parser(text).parse()
