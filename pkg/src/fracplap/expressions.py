"""Arithmetic expressions for exponent fields and data functions.

Grammar (EBNF)::

    expr   := term (("+"|"-") term)*
    term   := factor (("*"|"/") factor)*
    factor := unary ("^" factor)?
    unary  := "-" unary | atom
    atom   := number | ident | ident "(" expr ("," expr)* ")" | "(" expr ")"

``^`` is right-associative.  Note that per this grammar the base of a power
is a *unary*, so ``-2^2`` parses as ``(-2)^2``.

Evaluation is strict: division by zero, square roots of negatives and
ill-defined powers raise :class:`~fracplap.errors.DomainError` instead of
propagating non-finite values.  Evaluation accepts scalars or numpy arrays
for every variable and broadcasts elementwise.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .errors import DomainError, ExpressionSyntaxError, UnknownVariableError

__all__ = [
    "Expression",
    "parse_expression",
    "evaluate",
    "variables_for_role",
    "FUNCTIONS",
]

#: function name -> (min arity, max arity or None for unbounded)
FUNCTIONS = {
    "sin": (1, 1),
    "cos": (1, 1),
    "exp": (1, 1),
    "abs": (1, 1),
    "sqrt": (1, 1),
    "min": (2, None),
    "max": (2, None),
}

_ROLE_VARS = {
    (1, "pointwise"): ("x",),
    (1, "pairwise"): ("x", "y"),
    (2, "pointwise"): ("x1", "x2"),
    (2, "pairwise"): ("x1", "x2", "y1", "y2"),
}

_CONSTANTS = {"pi": math.pi}


def variables_for_role(dimension: int, role: str) -> tuple[str, ...]:
    """Allowed variable names for a dimension/role combination."""
    try:
        return _ROLE_VARS[(dimension, role)]
    except KeyError:
        raise ValueError(f"no variable set for dimension={dimension!r}, role={role!r}")


# --------------------------------------------------------------------------
# AST nodes
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Const:
    name: str


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    operand: object


@dataclass(frozen=True)
class BinOp:
    op: str
    left: object
    right: object


@dataclass(frozen=True)
class Call:
    func: str
    args: tuple


def _free_vars(node) -> frozenset:
    if isinstance(node, Var):
        return frozenset((node.name,))
    if isinstance(node, Neg):
        return _free_vars(node.operand)
    if isinstance(node, BinOp):
        return _free_vars(node.left) | _free_vars(node.right)
    if isinstance(node, Call):
        out = frozenset()
        for a in node.args:
            out |= _free_vars(a)
        return out
    return frozenset()


def _substitute(node, mapping):
    if isinstance(node, Var):
        return mapping.get(node.name, node)
    if isinstance(node, Neg):
        return Neg(_substitute(node.operand, mapping))
    if isinstance(node, BinOp):
        return BinOp(node.op, _substitute(node.left, mapping), _substitute(node.right, mapping))
    if isinstance(node, Call):
        return Call(node.func, tuple(_substitute(a, mapping) for a in node.args))
    return node


# --------------------------------------------------------------------------
# Evaluation
# --------------------------------------------------------------------------

def _eval(node, env):
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Const):
        return _CONSTANTS[node.name]
    if isinstance(node, Var):
        return env[node.name]
    if isinstance(node, Neg):
        return -_eval(node.operand, env)
    if isinstance(node, BinOp):
        a = _eval(node.left, env)
        b = _eval(node.right, env)
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            return a * b
        if node.op == "/":
            if np.any(b == 0):
                raise DomainError("division by zero")
            return a / b
        # power
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        if np.any((a == 0) & (b < 0)):
            raise DomainError("zero raised to a negative power")
        neg_base = a < 0
        if np.any(neg_base & (b != np.floor(b))):
            raise DomainError("negative base raised to a non-integer power")
        with np.errstate(invalid="ignore", over="ignore"):
            out = np.power(a, b)
        if out.ndim == 0:
            return float(out)
        return out
    if isinstance(node, Call):
        args = [_eval(a, env) for a in node.args]
        name = node.func
        if name == "sqrt":
            if np.any(np.asarray(args[0]) < 0):
                raise DomainError("square root of a negative number")
            return np.sqrt(args[0])
        if name == "abs":
            return np.abs(args[0])
        if name == "sin":
            return np.sin(args[0])
        if name == "cos":
            return np.cos(args[0])
        if name == "exp":
            with np.errstate(over="ignore"):
                return np.exp(args[0])
        if name == "min":
            out = args[0]
            for a in args[1:]:
                out = np.minimum(out, a)
            return out
        if name == "max":
            out = args[0]
            for a in args[1:]:
                out = np.maximum(out, a)
            return out
    raise TypeError(f"unexpected AST node {node!r}")


# --------------------------------------------------------------------------
# Printing (minimal parentheses, reparses to the identical tree)
# --------------------------------------------------------------------------

def _fmt_number(x: float) -> str:
    # repr round-trips doubles exactly; strip a plain trailing ".0" for looks
    s = repr(float(x))
    return s


def _is_unary(node) -> bool:
    """Printable as the grammar's `unary` (chain of '-' over an atom)."""
    return isinstance(node, (Num, Const, Var, Call)) or (
        isinstance(node, Neg) and _is_unary(node.operand)
    )


def _print(node) -> str:
    if isinstance(node, Num):
        return _fmt_number(node.value)
    if isinstance(node, Const):
        return node.name
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Call):
        return f"{node.func}({', '.join(_print(a) for a in node.args)})"
    if isinstance(node, Neg):
        inner = node.operand
        s = _print(inner)
        if _is_unary(inner):
            return f"-{s}"
        return f"-({s})"
    if isinstance(node, BinOp):
        a, b = node.left, node.right
        if node.op == "^":
            # base must be a bare unary, exponent a factor
            sa = _print(a)
            if not _is_unary(a):
                sa = f"({sa})"
            sb = _print(b)
            if not (_is_unary(b) or (isinstance(b, BinOp) and b.op == "^")):
                sb = f"({sb})"
            return f"{sa}^{sb}"
        if node.op in "*/":
            sa = _print(a)
            if isinstance(a, BinOp) and a.op in "+-":
                sa = f"({sa})"
            sb = _print(b)
            if isinstance(b, BinOp) and b.op in "+-*/":
                sb = f"({sb})"
            return f"{sa}{node.op}{sb}"
        # + or -
        sa = _print(a)
        sb = _print(b)
        if isinstance(b, BinOp) and b.op in "+-":
            sb = f"({sb})"
        return f"{sa} {node.op} {sb}"
    raise TypeError(f"unexpected AST node {node!r}")


# --------------------------------------------------------------------------
# Tokenizer / parser
# --------------------------------------------------------------------------

_NUMBER_RE = re.compile(r"(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?")
_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z_0-9]*")


class _Tokenizer:
    def __init__(self, source: str):
        self.source = source
        self.pos = 0
        self._skip_ws()

    def _skip_ws(self):
        while self.pos < len(self.source) and self.source[self.pos].isspace():
            self.pos += 1

    def peek(self):
        if self.pos >= len(self.source):
            return ("end", "", self.pos)
        ch = self.source[self.pos]
        if ch.isdigit() or ch == ".":
            m = _NUMBER_RE.match(self.source, self.pos)
            if m is None:
                raise ExpressionSyntaxError("malformed number", self.pos)
            return ("number", m.group(), self.pos)
        if ch.isalpha() or ch == "_":
            m = _IDENT_RE.match(self.source, self.pos)
            return ("ident", m.group(), self.pos)
        if ch in "+-*/^(),":
            return (ch, ch, self.pos)
        raise ExpressionSyntaxError(f"unexpected character {ch!r}", self.pos)

    def advance(self):
        tok = self.peek()
        self.pos += len(tok[1])
        self._skip_ws()
        return tok


class _Parser:
    def __init__(self, source: str, allowed: tuple[str, ...]):
        self.toks = _Tokenizer(source)
        self.allowed = allowed

    def parse(self):
        node = self.expr()
        kind, text, pos = self.toks.peek()
        if kind != "end":
            raise ExpressionSyntaxError(
                f"expected operator or end of input, found {text!r}", pos
            )
        return node

    def expect(self, kind, what):
        tok = self.toks.peek()
        if tok[0] != kind:
            found = tok[1] if tok[0] != "end" else "end of input"
            raise ExpressionSyntaxError(f"expected {what}, found {found!r}", tok[2])
        return self.toks.advance()

    def expr(self):
        node = self.term()
        while self.toks.peek()[0] in "+-":
            op = self.toks.advance()[0]
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.factor()
        while self.toks.peek()[0] in "*/":
            op = self.toks.advance()[0]
            node = BinOp(op, node, self.factor())
        return node

    def factor(self):
        node = self.unary()
        if self.toks.peek()[0] == "^":
            self.toks.advance()
            node = BinOp("^", node, self.factor())
        return node

    def unary(self):
        if self.toks.peek()[0] == "-":
            self.toks.advance()
            return Neg(self.unary())
        return self.atom()

    def atom(self):
        kind, text, pos = self.toks.peek()
        if kind == "number":
            self.toks.advance()
            return Num(float(text))
        if kind == "(":
            self.toks.advance()
            node = self.expr()
            self.expect(")", "')'")
            return node
        if kind == "ident":
            self.toks.advance()
            if self.toks.peek()[0] == "(":
                return self.call(text, pos)
            if text in _CONSTANTS:
                return Const(text)
            if text not in self.allowed:
                raise UnknownVariableError(text, self.allowed)
            return Var(text)
        found = text if kind != "end" else "end of input"
        raise ExpressionSyntaxError(f"expected a number, variable or '(', found {found!r}", pos)

    def call(self, name, pos):
        if name not in FUNCTIONS:
            raise ExpressionSyntaxError(
                f"unknown function {name!r}; known functions: {', '.join(sorted(FUNCTIONS))}",
                pos,
            )
        self.expect("(", "'('")
        args = [self.expr()]
        while self.toks.peek()[0] == ",":
            self.toks.advance()
            args.append(self.expr())
        self.expect(")", "')' or ','")
        lo, hi = FUNCTIONS[name]
        if len(args) < lo or (hi is not None and len(args) > hi):
            arity = str(lo) if hi == lo else f"at least {lo}"
            raise ExpressionSyntaxError(
                f"function {name!r} takes {arity} argument(s), got {len(args)}", pos
            )
        return Call(name, tuple(args))


# --------------------------------------------------------------------------
# Public interface
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Expression:
    """Parsed expression bound to a dimension and variable role.

    Immutable; evaluation is pure and safe to share across threads.
    """

    root: object
    dimension: int
    role: str

    @property
    def allowed_variables(self) -> tuple[str, ...]:
        return variables_for_role(self.dimension, self.role)

    @property
    def variables(self) -> frozenset:
        """Variables actually used by the expression."""
        return _free_vars(self.root)

    def evaluate(self, point: Mapping[str, float]) -> float:
        """Evaluate at a point given as a mapping of variable name to value.

        Values may be scalars or numpy arrays (broadcast elementwise).
        Raises DomainError on division by zero, sqrt of a negative or an
        ill-defined power, and KeyError if a used variable is missing.
        """
        missing = self.variables - set(point)
        if missing:
            raise KeyError(f"point does not assign variables: {sorted(missing)}")
        out = _eval(self.root, point)
        if np.ndim(out) == 0:
            return float(out)
        return out

    def to_source(self) -> str:
        """Render back to source; reparsing yields an identical tree."""
        return _print(self.root)

    def substitute(self, mapping: Mapping[str, str], role: str | None = None) -> "Expression":
        """Simultaneously rename variables; optionally switch role."""
        nodes = {old: Var(new) for old, new in mapping.items()}
        new_role = role if role is not None else self.role
        allowed = variables_for_role(self.dimension, new_role)
        root = _substitute(self.root, nodes)
        for name in _free_vars(root):
            if name not in allowed:
                raise UnknownVariableError(name, allowed)
        return Expression(root, self.dimension, new_role)

    def __str__(self) -> str:
        return self.to_source()


def parse_expression(source: str, dimension: int, role: str) -> Expression:
    """Parse ``source`` against the variable set of (dimension, role).

    role is "pairwise" (variables x,y in 1D; x1,x2,y1,y2 in 2D) or
    "pointwise" (x; x1,x2).
    """
    if not source or not source.strip():
        raise ExpressionSyntaxError("empty expression", 0)
    allowed = variables_for_role(dimension, role)
    return Expression(_Parser(source, allowed).parse(), dimension, role)


def evaluate(expr: Expression, point: Mapping[str, float]) -> float:
    """Functional form of :meth:`Expression.evaluate`."""
    return expr.evaluate(point)
