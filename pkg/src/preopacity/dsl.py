"""Small expression language for dynamics and output maps, plus the
closed-form comparison-function families used in the stability bounds.

Grammar (usual precedence, left-associative binaries)::

    expr  := term (('+' | '-') term)*
    term  := unary (('*' | '/') unary)*
    unary := '-' unary | atom
    atom  := NUMBER | 'pi' | x<i> | u<j> | func '(' expr (',' expr)* ')' | '(' expr ')'

with ``func`` one of abs, cos, sin, exp, sqrt (one argument) and min, max
(two arguments).  Variables are 1-based: ``x1 .. xn``, ``u1 .. um``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Sequence, Union


class ExpressionError(ValueError):
    def __init__(self, message: str, position: int | None = None):
        self.position = position
        if position is not None:
            message = f"{message} at offset {position}"
        super().__init__(message)


class EvaluationError(ArithmeticError):
    pass


# -- AST ------------------------------------------------------------------------

@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Pi:
    pass


@dataclass(frozen=True)
class Var:
    kind: str  # "x" or "u"
    index: int  # 1-based


@dataclass(frozen=True)
class Neg:
    arg: "Expression"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expression"
    right: "Expression"


@dataclass(frozen=True)
class Call:
    func: str
    args: tuple


Expression = Union[Num, Pi, Var, Neg, BinOp, Call]

UNARY_FUNCS = {
    "abs": abs,
    "cos": math.cos,
    "sin": math.sin,
    "exp": math.exp,
    "sqrt": math.sqrt,
}
BINARY_FUNCS = {"min": min, "max": max}

# -- parser ----------------------------------------------------------------------

_TOKEN = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/(),])
    """,
    re.VERBOSE,
)
_VAR = re.compile(r"([xu])([1-9][0-9]*)$")


def _tokenize(text: str):
    pos = 0
    tokens = []
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise ExpressionError(f"unexpected character {text[pos]!r}", pos)
        kind = m.lastgroup
        if kind != "ws":
            tokens.append((kind, m.group(), pos))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text, n, m):
        self.tokens = _tokenize(text)
        self.i = 0
        self.n, self.m = n, m

    @property
    def tok(self):
        return self.tokens[self.i]

    def advance(self):
        t = self.tokens[self.i]
        self.i += 1
        return t

    def expect(self, value):
        kind, text, pos = self.tok
        if text != value or kind == "end":
            what = "end of input" if kind == "end" else repr(text)
            raise ExpressionError(f"expected {value!r}, found {what}", pos)
        self.advance()

    def parse(self):
        e = self.expr()
        kind, text, pos = self.tok
        if kind != "end":
            raise ExpressionError(f"unexpected {text!r}", pos)
        return e

    def expr(self):
        left = self.term()
        while self.tok[1] in ("+", "-") and self.tok[0] == "op":
            op = self.advance()[1]
            left = BinOp(op, left, self.term())
        return left

    def term(self):
        left = self.unary()
        while self.tok[1] in ("*", "/") and self.tok[0] == "op":
            op = self.advance()[1]
            left = BinOp(op, left, self.unary())
        return left

    def unary(self):
        if self.tok == ("op", "-", self.tok[2]):
            self.advance()
            return Neg(self.unary())
        return self.atom()

    def atom(self):
        kind, text, pos = self.tok
        if kind == "num":
            self.advance()
            return Num(float(text))
        if kind == "op" and text == "(":
            self.advance()
            e = self.expr()
            self.expect(")")
            return e
        if kind == "name":
            self.advance()
            if text == "pi":
                return Pi()
            var = _VAR.match(text)
            if var:
                letter, idx = var.group(1), int(var.group(2))
                limit = self.n if letter == "x" else self.m
                if idx > limit:
                    raise ExpressionError(
                        f"variable {text} out of range ({letter}1..{letter}{limit})", pos
                    )
                return Var(letter, idx)
            if text in UNARY_FUNCS or text in BINARY_FUNCS:
                return self.call(text, pos)
            raise ExpressionError(f"undefined identifier {text!r}", pos)
        what = "end of input" if kind == "end" else repr(text)
        raise ExpressionError(f"unexpected {what}", pos)

    def call(self, name, pos):
        self.expect("(")
        args = [self.expr()]
        while self.tok[:2] == ("op", ","):
            self.advance()
            args.append(self.expr())
        self.expect(")")
        arity = 1 if name in UNARY_FUNCS else 2
        if len(args) != arity:
            raise ExpressionError(
                f"{name} takes {arity} argument{'s' if arity > 1 else ''}, got {len(args)}", pos
            )
        return Call(name, tuple(args))


def parse_expression(text: str, n: int, m: int = 0) -> Expression:
    """Parse ``text`` over state dimension ``n`` and input dimension ``m``."""
    return _Parser(text, n, m).parse()


# -- printing ----------------------------------------------------------------------

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}
_UNARY_PREC = 3
_ATOM_PREC = 4


def _prec(e) -> int:
    if isinstance(e, BinOp):
        return _PREC[e.op]
    if isinstance(e, Neg):
        return _UNARY_PREC
    return _ATOM_PREC


def to_string(e: Expression) -> str:
    """Render with the minimum parentheses that reparse to the same tree."""
    if isinstance(e, Num):
        return repr(e.value)
    if isinstance(e, Pi):
        return "pi"
    if isinstance(e, Var):
        return f"{e.kind}{e.index}"
    if isinstance(e, Neg):
        inner = to_string(e.arg)
        return f"-({inner})" if _prec(e.arg) < _UNARY_PREC else f"-{inner}"
    if isinstance(e, Call):
        return f"{e.func}({', '.join(to_string(a) for a in e.args)})"
    p = _PREC[e.op]
    left = to_string(e.left)
    right = to_string(e.right)
    if _prec(e.left) < p:
        left = f"({left})"
    if _prec(e.right) <= p:
        right = f"({right})"
    return f"{left} {e.op} {right}"


# -- evaluation ---------------------------------------------------------------------

def evaluate(e: Expression, x: Sequence[float] = (), u: Sequence[float] = ()) -> float:
    """Evaluate in double precision; domain errors raise ``EvaluationError``."""
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Pi):
        return math.pi
    if isinstance(e, Var):
        vec = x if e.kind == "x" else u
        if e.index > len(vec):
            raise EvaluationError(f"{e.kind}{e.index} not supplied (got {len(vec)} values)")
        return float(vec[e.index - 1])
    if isinstance(e, Neg):
        return -evaluate(e.arg, x, u)
    if isinstance(e, Call):
        args = [evaluate(a, x, u) for a in e.args]
        if e.func == "sqrt" and args[0] < 0:
            raise EvaluationError(f"sqrt of negative value {args[0]}")
        if e.func in BINARY_FUNCS:
            return BINARY_FUNCS[e.func](*args)
        try:
            return UNARY_FUNCS[e.func](args[0])
        except OverflowError as exc:
            raise EvaluationError(f"{e.func} overflow at {args[0]}") from exc
    a = evaluate(e.left, x, u)
    b = evaluate(e.right, x, u)
    if e.op == "+":
        return a + b
    if e.op == "-":
        return a - b
    if e.op == "*":
        return a * b
    if b == 0:
        raise EvaluationError("division by zero")
    return a / b


def constant(text) -> float:
    """A number, or a closed expression such as ``"0.1*pi"``."""
    if isinstance(text, (int, float)) and not isinstance(text, bool):
        return float(text)
    if isinstance(text, str):
        return evaluate(parse_expression(text, 0, 0))
    raise ExpressionError(f"expected a number or constant expression, got {text!r}")


# -- comparison functions -----------------------------------------------------------

LINEAR = "linear"
POWER = "power"
KL_EXP_LINEAR = "kl-exp-linear"

_PARAMS = {LINEAR: {"c"}, POWER: {"c", "p"}, KL_EXP_LINEAR: {"c", "lam"}}


@dataclass(frozen=True)
class ComparisonFunction:
    """``linear``: c*r, ``power``: c*r**p, ``kl-exp-linear``: c*lam**k*r."""

    kind: str
    c: float
    p: float = 1.0
    lam: float = 0.0

    def __post_init__(self):
        if self.kind not in _PARAMS:
            raise ValueError(f"unknown comparison-function kind {self.kind!r}")
        if not self.c > 0:
            raise ValueError("coefficient c must be positive")
        if self.kind == POWER and not self.p > 0:
            raise ValueError("exponent p must be positive")
        if self.kind == KL_EXP_LINEAR and not 0 < self.lam < 1:
            raise ValueError("decay rate lam must lie in (0, 1)")

    @property
    def is_class_kinf(self) -> bool:
        return self.kind in (LINEAR, POWER)

    def __call__(self, r: float, k: int | None = None) -> float:
        if r < 0:
            raise ValueError("comparison functions are defined on r >= 0")
        if self.kind == LINEAR:
            return self.c * r
        if self.kind == POWER:
            return self.c * r**self.p
        if k is None:
            raise ValueError("a KL function needs a time argument k")
        return self.c * self.lam**k * r

    @classmethod
    def from_dict(cls, data) -> "ComparisonFunction":
        if not isinstance(data, dict) or set(data) != {"kind", "params"}:
            raise ValueError("comparison function must be {kind, params}")
        kind = data["kind"]
        params = data["params"]
        expected = _PARAMS.get(kind)
        if expected is None:
            raise ValueError(f"unknown comparison-function kind {kind!r}")
        if not isinstance(params, dict) or set(params) != expected:
            raise ValueError(f"{kind} takes parameters {sorted(expected)}")
        return cls(kind, **{key: constant(v) for key, v in params.items()})

    def to_dict(self) -> dict:
        params = {"c": self.c}
        if self.kind == POWER:
            params["p"] = self.p
        if self.kind == KL_EXP_LINEAR:
            params["lam"] = self.lam
        return {"kind": self.kind, "params": params}


def alpha_inverse(fn: ComparisonFunction, eps: float) -> float:
    """Exact inverse of a linear or power function at ``eps``."""
    if not eps > 0:
        raise ValueError("alpha_inverse needs eps > 0")
    if fn.kind == LINEAR:
        return eps / fn.c
    if fn.kind == POWER:
        return (eps / fn.c) ** (1.0 / fn.p)
    raise ValueError(f"{fn.kind} functions are not invertible in closed form")


def eval_beta(fn: ComparisonFunction, r: float, k: int) -> float:
    if fn.kind != KL_EXP_LINEAR:
        raise ValueError(f"beta must be a KL function, got {fn.kind}")
    if k < 0:
        raise ValueError("k must be non-negative")
    return fn(r, k)


def eval_gamma(fn: ComparisonFunction, r: float) -> float:
    if not fn.is_class_kinf:
        raise ValueError(f"gamma must be class K-infinity, got {fn.kind}")
    return fn(r)
