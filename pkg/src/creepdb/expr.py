"""Mathematical expression trees for extracted constitutive formulas.

The grammar is deliberately strict: infix `+ - * / ^`, parentheses,
known function calls, and the derivative notation `d(x)/d(t)` (order k
written `d2(x)/d(t)2`).  Implicit multiplication is rejected so that
extracted strings are unambiguous.

Besides parse/render, this module provides:

* `infer_dimension` - dimensional analysis over a set of symbol bindings,
* `differentiate`   - symbolic derivative w.r.t. a symbol (used for
  analytic fitting Jacobians and ODE sensitivities),
* `compile_program` - flattening into a postfix opcode program executed
  by the numeric kernels.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import (
    DimensionMismatch,
    NonDimensionlessArgument,
    ParseError,
    UnboundSymbol,
)
from .units import DIMENSIONLESS, Dimension

MAX_DEPTH = 64

FUNCTIONS = ("exp", "ln", "log10", "sin", "cos", "sinh", "cosh")


class Expr:
    __slots__ = ()


@dataclass(frozen=True)
class Const(Expr):
    value: float


@dataclass(frozen=True)
class Sym(Expr):
    name: str


@dataclass(frozen=True)
class Add(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Sub(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Mul(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Div(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Pow(Expr):
    base: Expr
    exponent: Expr


@dataclass(frozen=True)
class Neg(Expr):
    child: Expr


@dataclass(frozen=True)
class Func(Expr):
    name: str
    arg: Expr

    def __post_init__(self):
        if self.name not in FUNCTIONS:
            raise ValueError(f"unknown function {self.name!r}")


@dataclass(frozen=True)
class Deriv(Expr):
    target: str
    wrt: str
    order: int


def depth(e: Expr) -> int:
    if isinstance(e, (Const, Sym, Deriv)):
        return 1
    if isinstance(e, (Neg, Func)):
        return 1 + depth(e.child if isinstance(e, Neg) else e.arg)
    if isinstance(e, Pow):
        return 1 + max(depth(e.base), depth(e.exponent))
    return 1 + max(depth(e.left), depth(e.right))


def free_symbols(e: Expr) -> set[str]:
    if isinstance(e, Sym):
        return {e.name}
    if isinstance(e, Const):
        return set()
    if isinstance(e, Deriv):
        return {e.target, e.wrt}
    if isinstance(e, Neg):
        return free_symbols(e.child)
    if isinstance(e, Func):
        return free_symbols(e.arg)
    if isinstance(e, Pow):
        return free_symbols(e.base) | free_symbols(e.exponent)
    return free_symbols(e.left) | free_symbols(e.right)


def contains_derivative(e: Expr) -> bool:
    if isinstance(e, Deriv):
        return True
    if isinstance(e, (Const, Sym)):
        return False
    if isinstance(e, Neg):
        return contains_derivative(e.child)
    if isinstance(e, Func):
        return contains_derivative(e.arg)
    if isinstance(e, Pow):
        return contains_derivative(e.base) or contains_derivative(e.exponent)
    return contains_derivative(e.left) or contains_derivative(e.right)


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------

_OPERATORS = "+-*/^(),"


class _Lexer:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0
        self.tokens: list[tuple[str, str, int]] = []  # (kind, value, pos)
        self._run()

    def _run(self):
        text = self.text
        i = 0
        while i < len(text):
            ch = text[i]
            if ch.isspace():
                i += 1
                continue
            if ch in _OPERATORS:
                self.tokens.append(("op", ch, i))
                i += 1
                continue
            if ch.isdigit() or (ch == "." and i + 1 < len(text) and text[i + 1].isdigit()):
                j = i
                seen_e = False
                while j < len(text):
                    c = text[j]
                    if c.isdigit() or c == ".":
                        j += 1
                    elif c in "eE" and not seen_e and j + 1 < len(text) and (
                        text[j + 1].isdigit() or text[j + 1] in "+-"
                    ):
                        seen_e = True
                        j += 2 if text[j + 1] in "+-" else 1
                    else:
                        break
                token = text[i:j]
                try:
                    float(token)
                except ValueError:
                    raise ParseError(f"bad number {token!r}", i)
                self.tokens.append(("num", token, i))
                i = j
                continue
            if ch.isalpha() or ch == "_":
                j = i
                while j < len(text) and (text[j].isalpha() or text[j].isdigit() or text[j] == "_"):
                    j += 1
                self.tokens.append(("ident", text[i:j], i))
                i = j
                continue
            raise ParseError(f"unexpected character {ch!r}", i)
        self.tokens.append(("eof", "", len(text)))


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _Lexer(text).tokens
        self.idx = 0

    def peek(self):
        return self.tokens[self.idx]

    def next(self):
        tok = self.tokens[self.idx]
        self.idx += 1
        return tok

    def expect_op(self, op: str):
        kind, value, pos = self.next()
        if kind != "op" or value != op:
            raise ParseError(f"expected {op!r}", pos)

    def parse(self) -> Expr:
        e = self.parse_sum()
        kind, value, pos = self.peek()
        if kind != "eof":
            raise ParseError(f"unexpected {value!r}", pos)
        self._check_depth(e)
        return e

    @staticmethod
    def _check_depth(e: Expr):
        if depth(e) > MAX_DEPTH:
            raise ParseError(f"expression deeper than {MAX_DEPTH}", 0)

    # unary minus binds looser than * and / (mathematical convention:
    # -Q/(R*T) means -(Q/(R*T))), but a minus directly inside a product
    # ("a * -b") negates just that factor
    def parse_sum(self) -> Expr:
        e = self.parse_unary()
        while True:
            kind, value, _ = self.peek()
            if kind == "op" and value in "+-":
                self.next()
                rhs = self.parse_unary()
                e = Add(e, rhs) if value == "+" else Sub(e, rhs)
            else:
                return e

    def parse_unary(self) -> Expr:
        kind, value, _ = self.peek()
        if kind == "op" and value == "-":
            self.next()
            return Neg(self.parse_unary())
        if kind == "op" and value == "+":
            self.next()
            return self.parse_unary()
        return self.parse_product()

    def parse_product(self) -> Expr:
        e = self.parse_factor()
        while True:
            kind, value, _ = self.peek()
            if kind == "op" and value in "*/":
                self.next()
                rhs = self.parse_factor()
                e = Mul(e, rhs) if value == "*" else Div(e, rhs)
            else:
                return e

    def parse_factor(self) -> Expr:
        kind, value, _ = self.peek()
        if kind == "op" and value == "-":
            self.next()
            return Neg(self.parse_factor())
        return self.parse_power()

    def parse_power(self) -> Expr:
        base = self.parse_primary()
        kind, value, _ = self.peek()
        if kind == "op" and value == "^":
            self.next()
            return Pow(base, self.parse_exponent())
        return base

    def parse_exponent(self) -> Expr:
        kind, value, _ = self.peek()
        if kind == "op" and value == "-":
            self.next()
            return Neg(self.parse_exponent())
        return self.parse_power()

    def parse_primary(self) -> Expr:
        kind, value, pos = self.next()
        if kind == "num":
            e = Const(float(value))
        elif kind == "op" and value == "(":
            e = self.parse_sum()
            self.expect_op(")")
        elif kind == "ident":
            nkind, nvalue, _ = self.peek()
            if nkind == "op" and nvalue == "(":
                e = self._parse_call(value, pos)
            else:
                e = Sym(value)
        else:
            raise ParseError(f"unexpected {value!r}" if value else "unexpected end of input", pos)
        # implicit multiplication ("2 x", "x (y)") is a parse error
        nkind, nvalue, npos = self.peek()
        if nkind in ("num", "ident") or (nkind == "op" and nvalue == "("):
            raise ParseError("missing operator (implicit multiplication not allowed)", npos)
        return e

    def _parse_call(self, name: str, pos: int) -> Expr:
        order = self._derivative_order(name)
        if order is not None:
            return self._parse_derivative(order, pos)
        if name not in FUNCTIONS:
            raise ParseError(f"unknown function {name!r}", pos)
        self.expect_op("(")
        arg = self.parse_sum()
        self.expect_op(")")
        return Func(name, arg)

    @staticmethod
    def _derivative_order(name: str):
        if name == "d":
            return 1
        if name.startswith("d") and name[1:].isdigit():
            return int(name[1:])
        return None

    def _parse_derivative(self, order: int, pos: int) -> Expr:
        self.expect_op("(")
        kind, target, tpos = self.next()
        if kind != "ident":
            raise ParseError("derivative target must be a symbol", tpos)
        self.expect_op(")")
        self.expect_op("/")
        kind, dd, dpos = self.next()
        if kind != "ident" or self._derivative_order(dd) != 1:
            raise ParseError("expected d(...) denominator", dpos)
        self.expect_op("(")
        kind, wrt, wpos = self.next()
        if kind != "ident":
            raise ParseError("derivative variable must be a symbol", wpos)
        self.expect_op(")")
        if order > 1:
            kind, value, opos = self.next()
            if kind != "num" or int(float(value)) != order:
                raise ParseError(f"derivative order suffix must be {order}", opos)
        if order < 1:
            raise ParseError("derivative order must be >= 1", pos)
        return Deriv(target, wrt, order)


def parse_expression(text: str) -> Expr:
    """Parse an expression string; raises ParseError with a position."""
    return _Parser(text).parse()


# ---------------------------------------------------------------------------
# rendering
# ---------------------------------------------------------------------------

_PREC = {"sum": 1, "neg": 2, "prod": 3, "pow": 4, "atom": 5}


def _render(e: Expr) -> tuple[str, int]:
    if isinstance(e, Const):
        v = e.value
        text = repr(int(v)) if float(v).is_integer() and abs(v) < 1e15 else repr(v)
        if text.startswith("-"):
            return text, _PREC["neg"]
        return text, _PREC["atom"]
    if isinstance(e, Sym):
        return e.name, _PREC["atom"]
    if isinstance(e, Deriv):
        if e.order == 1:
            return f"d({e.target})/d({e.wrt})", _PREC["prod"]
        return f"d{e.order}({e.target})/d({e.wrt}){e.order}", _PREC["prod"]
    if isinstance(e, Func):
        arg, _ = _render(e.arg)
        return f"{e.name}({arg})", _PREC["atom"]
    if isinstance(e, Neg):
        inner, prec = _render(e.child)
        if prec < _PREC["neg"]:
            inner = f"({inner})"
        return f"-{inner}", _PREC["neg"]
    if isinstance(e, Pow):
        base, bprec = _render(e.base)
        expo, eprec = _render(e.exponent)
        if bprec < _PREC["atom"]:
            base = f"({base})"
        if eprec < _PREC["pow"]:
            expo = f"({expo})"
        return f"{base}^{expo}", _PREC["pow"]
    if isinstance(e, (Add, Sub)):
        left, lprec = _render(e.left)
        right, rprec = _render(e.right)
        if lprec < _PREC["sum"]:
            left = f"({left})"
        if rprec <= _PREC["sum"]:
            right = f"({right})"
        op = "+" if isinstance(e, Add) else "-"
        return f"{left} {op} {right}", _PREC["sum"]
    if isinstance(e, (Mul, Div)):
        left, lprec = _render(e.left)
        right, rprec = _render(e.right)
        if lprec < _PREC["prod"]:
            left = f"({left})"
        if rprec <= _PREC["prod"]:
            right = f"({right})"
        op = "*" if isinstance(e, Mul) else "/"
        return f"{left}{op}{right}", _PREC["prod"]
    raise TypeError(f"unknown node {e!r}")


def render(e: Expr) -> str:
    return _render(e)[0]


# ---------------------------------------------------------------------------
# dimensional analysis
# ---------------------------------------------------------------------------


def infer_dimension(e: Expr, bindings: dict) -> Dimension:
    """Dimension of `e` given bindings (mapping name -> object with
    `.dimension` and optional numeric `.value`).

    Rules: Add/Sub children must match; function arguments and symbolic
    Pow exponents must be dimensionless; a constant rational exponent
    scales the base dimension; a dimensionless symbol exponent with a
    known bound value does too; Deriv(x, t, k) has dim(x)/dim(t)^k.
    """
    if isinstance(e, Const):
        return DIMENSIONLESS
    if isinstance(e, Sym):
        if e.name not in bindings:
            raise UnboundSymbol(e.name)
        return bindings[e.name].dimension
    if isinstance(e, Neg):
        return infer_dimension(e.child, bindings)
    if isinstance(e, Func):
        arg_dim = infer_dimension(e.arg, bindings)
        if not arg_dim.is_dimensionless:
            raise NonDimensionlessArgument(
                f"{e.name}() argument has dimension {arg_dim}", render(e)
            )
        return DIMENSIONLESS
    if isinstance(e, Deriv):
        for name in (e.target, e.wrt):
            if name not in bindings:
                raise UnboundSymbol(name)
        return bindings[e.target].dimension / bindings[e.wrt].dimension ** e.order
    if isinstance(e, Add) or isinstance(e, Sub):
        left = infer_dimension(e.left, bindings)
        right = infer_dimension(e.right, bindings)
        if left != right:
            op = "+" if isinstance(e, Add) else "-"
            raise DimensionMismatch(
                f"`{op}` joins {left} with {right}", render(e)
            )
        return left
    if isinstance(e, Mul):
        return infer_dimension(e.left, bindings) * infer_dimension(e.right, bindings)
    if isinstance(e, Div):
        return infer_dimension(e.left, bindings) / infer_dimension(e.right, bindings)
    if isinstance(e, Pow):
        base_dim = infer_dimension(e.base, bindings)
        expo = e.exponent
        neg = False
        while isinstance(expo, Neg):
            neg = not neg
            expo = expo.child
        if isinstance(expo, Const):
            k = Fraction(expo.value).limit_denominator(1000)
            if abs(float(k) - expo.value) > 1e-12:
                raise DimensionMismatch(
                    f"exponent {expo.value} is not a small rational", render(e)
                )
        elif isinstance(expo, Sym):
            expo_dim = infer_dimension(expo, bindings)
            if not expo_dim.is_dimensionless:
                raise NonDimensionlessArgument(
                    f"exponent {expo.name} has dimension {expo_dim}", render(e)
                )
            value = getattr(bindings[expo.name], "value", None)
            if value is None:
                if base_dim.is_dimensionless:
                    return DIMENSIONLESS
                raise DimensionMismatch(
                    f"symbolic exponent {expo.name} has no bound value and base is not dimensionless",
                    render(e),
                )
            k = Fraction(value).limit_denominator(1000)
        else:
            expo_dim = infer_dimension(expo, bindings)
            if not expo_dim.is_dimensionless:
                raise NonDimensionlessArgument(
                    "exponent subexpression is not dimensionless", render(e)
                )
            if base_dim.is_dimensionless:
                return DIMENSIONLESS
            raise DimensionMismatch(
                "non-constant exponent over a dimensional base", render(e)
            )
        if neg:
            k = -k
        return base_dim**k


# ---------------------------------------------------------------------------
# symbolic differentiation (for fitting Jacobians / ODE sensitivities)
# ---------------------------------------------------------------------------


def _add(a: Expr, b: Expr) -> Expr:
    if a == Const(0.0):
        return b
    if b == Const(0.0):
        return a
    return Add(a, b)


def _sub(a: Expr, b: Expr) -> Expr:
    if b == Const(0.0):
        return a
    if a == Const(0.0):
        return Neg(b)
    return Sub(a, b)


def _mul(a: Expr, b: Expr) -> Expr:
    if a == Const(0.0) or b == Const(0.0):
        return Const(0.0)
    if a == Const(1.0):
        return b
    if b == Const(1.0):
        return a
    return Mul(a, b)


def _div(a: Expr, b: Expr) -> Expr:
    if a == Const(0.0):
        return Const(0.0)
    if b == Const(1.0):
        return a
    return Div(a, b)


def differentiate(e: Expr, wrt: str) -> Expr:
    """Symbolic d(e)/d(wrt).  Deriv nodes are opaque and unsupported."""
    if isinstance(e, Const):
        return Const(0.0)
    if isinstance(e, Sym):
        return Const(1.0) if e.name == wrt else Const(0.0)
    if isinstance(e, Deriv):
        raise ValueError("cannot differentiate a derivative placeholder")
    if isinstance(e, Neg):
        inner = differentiate(e.child, wrt)
        return Const(0.0) if inner == Const(0.0) else Neg(inner)
    if isinstance(e, Add):
        return _add(differentiate(e.left, wrt), differentiate(e.right, wrt))
    if isinstance(e, Sub):
        return _sub(differentiate(e.left, wrt), differentiate(e.right, wrt))
    if isinstance(e, Mul):
        return _add(
            _mul(differentiate(e.left, wrt), e.right),
            _mul(e.left, differentiate(e.right, wrt)),
        )
    if isinstance(e, Div):
        num = _sub(
            _mul(differentiate(e.left, wrt), e.right),
            _mul(e.left, differentiate(e.right, wrt)),
        )
        return _div(num, Pow(e.right, Const(2.0)))
    if isinstance(e, Pow):
        db = differentiate(e.base, wrt)
        de = differentiate(e.exponent, wrt)
        if de == Const(0.0):
            if isinstance(e.exponent, Const):
                k = e.exponent.value
                return _mul(_mul(Const(k), Pow(e.base, Const(k - 1.0))), db)
            scaled = _mul(e.exponent, Pow(e.base, Sub(e.exponent, Const(1.0))))
            return _mul(scaled, db)
        # general case: b^e * (de*ln(b) + e*db/b)
        return _mul(
            e,
            _add(_mul(de, Func("ln", e.base)), _mul(e.exponent, _div(db, e.base))),
        )
    if isinstance(e, Func):
        da = differentiate(e.arg, wrt)
        if da == Const(0.0):
            return Const(0.0)
        outer = {
            "exp": lambda a: Func("exp", a),
            "ln": lambda a: _div(Const(1.0), a),
            "log10": lambda a: _div(Const(1.0 / float(np.log(10.0))), a),
            "sin": lambda a: Func("cos", a),
            "cos": lambda a: Neg(Func("sin", a)),
            "sinh": lambda a: Func("cosh", a),
            "cosh": lambda a: Func("sinh", a),
        }[e.name](e.arg)
        return _mul(outer, da)
    raise TypeError(f"unknown node {e!r}")


# ---------------------------------------------------------------------------
# compilation to kernel programs
# ---------------------------------------------------------------------------

OP_CONST = 0
OP_VAR = 1
OP_ADD = 2
OP_SUB = 3
OP_MUL = 4
OP_DIV = 5
OP_POW = 6
OP_NEG = 7
_FUNC_BASE = 8
_FUNC_OPS = {name: _FUNC_BASE + i for i, name in enumerate(FUNCTIONS)}


@dataclass(frozen=True)
class Program:
    """Postfix stack program over a variable slot vector."""

    ops: np.ndarray  # int32
    args: np.ndarray  # int32
    consts: np.ndarray  # float64
    stack_need: int
    var_order: tuple[str, ...]


def compile_program(e: Expr, var_order: list[str] | tuple[str, ...]) -> Program:
    slots = {name: i for i, name in enumerate(var_order)}
    ops: list[int] = []
    args: list[int] = []
    consts: list[float] = []

    def emit(node: Expr) -> int:
        if isinstance(node, Const):
            ops.append(OP_CONST)
            args.append(len(consts))
            consts.append(float(node.value))
            return 1
        if isinstance(node, Sym):
            if node.name not in slots:
                raise UnboundSymbol(node.name)
            ops.append(OP_VAR)
            args.append(slots[node.name])
            return 1
        if isinstance(node, Deriv):
            raise ValueError("derivative placeholder is not evaluatable")
        if isinstance(node, Neg):
            d = emit(node.child)
            ops.append(OP_NEG)
            args.append(0)
            return d
        if isinstance(node, Func):
            d = emit(node.arg)
            ops.append(_FUNC_OPS[node.name])
            args.append(0)
            return d
        if isinstance(node, Pow):
            d1 = emit(node.base)
            d2 = emit(node.exponent)
            ops.append(OP_POW)
            args.append(0)
            return max(d1, d2 + 1)
        opcode = {Add: OP_ADD, Sub: OP_SUB, Mul: OP_MUL, Div: OP_DIV}[type(node)]
        d1 = emit(node.left)
        d2 = emit(node.right)
        ops.append(opcode)
        args.append(0)
        return max(d1, d2 + 1)

    need = emit(e)
    return Program(
        ops=np.asarray(ops, dtype=np.int32),
        args=np.asarray(args, dtype=np.int32),
        consts=np.asarray(consts, dtype=np.float64),
        stack_need=need,
        var_order=tuple(var_order),
    )
