"""Scalar expression language used by problem files.

Parse text into an immutable AST, print it back, evaluate it on a single
binding or on whole numpy batches, and differentiate it symbolically.
The grammar is documented in ``docs/grammar.md``.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, NamedTuple, Optional, Sequence, Union

import numpy as np


class ExprError(ValueError):
    pass


class ExprSyntaxError(ExprError):
    def __init__(self, message: str, text: str, pos: int):
        super().__init__(f"{message} at position {pos}: {text!r}")
        self.text = text
        self.pos = pos


class UnknownVariable(ExprError):
    pass


class UnboundVariable(ExprError):
    pass


class DomainError(ArithmeticError):
    """Evaluation left the real domain (log of a non-positive number, 0^-1, overflow, ...)."""


# --------------------------------------------------------------------------- AST


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
class BinOp:
    op: str  # one of + - * / ^
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Neg:
    operand: "Expr"


@dataclass(frozen=True)
class Call:
    fn: str
    args: tuple


@dataclass(frozen=True)
class Cmp:
    op: str  # one of < <= > >= ==
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class If:
    cond: Cmp
    then: "Expr"
    orelse: "Expr"


Expr = Union[Num, Const, Var, BinOp, Neg, Call, If]

CONSTANTS = {"pi": math.pi, "e": math.e}
UNARY_FUNCS = ("ln", "exp", "abs", "floor", "sqrt")
VARIADIC_FUNCS = ("min", "max")
RELOPS = ("<", "<=", ">", ">=", "==")

# --------------------------------------------------------------------------- lexer

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>\*\*|<=|>=|==|≤|≥|[-+*/^(),<>])
    """,
    re.VERBOSE,
)


class _Tok(NamedTuple):
    kind: str
    text: str
    pos: int


def _tokenize(text: str) -> list:
    toks = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ExprSyntaxError(f"unexpected character {text[pos]!r}", text, pos)
        kind = m.lastgroup
        if kind != "ws":
            tok = m.group()
            if tok == "**":
                tok = "^"
            elif tok == "≤":
                tok = "<="
            elif tok == "≥":
                tok = ">="
            toks.append(_Tok(kind, tok, pos))
        pos = m.end()
    toks.append(_Tok("end", "", len(text)))
    return toks


# --------------------------------------------------------------------------- parser


class _Parser:
    def __init__(self, text: str, variables: Optional[Iterable[str]]):
        self.text = text
        self.toks = _tokenize(text)
        self.i = 0
        self.variables = None if variables is None else frozenset(variables)

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def error(self, message: str, tok: Optional[_Tok] = None):
        tok = tok or self.tok
        raise ExprSyntaxError(message, self.text, tok.pos)

    def accept(self, text: str) -> bool:
        if self.tok.kind == "op" and self.tok.text == text:
            self.i += 1
            return True
        return False

    def expect(self, text: str):
        if not self.accept(text):
            found = self.tok.text or "end of input"
            self.error(f"expected {text!r}, found {found!r}")

    def parse(self) -> Expr:
        if self.tok.kind == "end":
            self.error("empty expression")
        node = self.additive()
        if self.tok.kind != "end":
            self.error(f"unexpected {self.tok.text!r}")
        return node

    def additive(self) -> Expr:
        node = self.term()
        while self.tok.kind == "op" and self.tok.text in "+-":
            op = self.tok.text
            self.i += 1
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Expr:
        node = self.unary()
        while self.tok.kind == "op" and self.tok.text in ("*", "/"):
            op = self.tok.text
            self.i += 1
            node = BinOp(op, node, self.unary())
        return node

    def unary(self) -> Expr:
        if self.accept("-"):
            return Neg(self.unary())
        if self.accept("+"):
            return self.unary()
        return self.power()

    def power(self) -> Expr:
        base = self.primary()
        if self.accept("^"):
            return BinOp("^", base, self.unary())
        return base

    def primary(self) -> Expr:
        tok = self.tok
        if tok.kind == "num":
            self.i += 1
            value = float(tok.text)
            if not math.isfinite(value):
                self.error("numeric literal overflows", tok)
            return Num(value)
        if tok.kind == "name":
            self.i += 1
            name = tok.text
            if self.tok.kind == "op" and self.tok.text == "(":
                return self.call(name, tok)
            if name in CONSTANTS:
                return Const(name)
            if name in UNARY_FUNCS or name in VARIADIC_FUNCS or name == "if":
                self.error(f"function {name!r} needs arguments", tok)
            if self.variables is not None and name not in self.variables:
                raise UnknownVariable(
                    f"unknown identifier {name!r} at position {tok.pos} "
                    f"(declared: {', '.join(sorted(self.variables)) or 'none'})"
                )
            return Var(name)
        if self.accept("("):
            node = self.additive()
            self.expect(")")
            return node
        found = tok.text or "end of input"
        self.error(f"unexpected {found!r}")

    def call(self, name: str, name_tok: _Tok) -> Expr:
        self.expect("(")
        if name == "if":
            cond = self.condition()
            self.expect(",")
            then = self.additive()
            self.expect(",")
            orelse = self.additive()
            self.expect(")")
            return If(cond, then, orelse)
        args = [self.additive()]
        while self.accept(","):
            args.append(self.additive())
        self.expect(")")
        if name in UNARY_FUNCS:
            if len(args) != 1:
                self.error(f"{name} takes exactly one argument", name_tok)
        elif name in VARIADIC_FUNCS:
            if len(args) < 2:
                self.error(f"{name} takes at least two arguments", name_tok)
        else:
            self.error(f"unknown function {name!r}", name_tok)
        return Call(name, tuple(args))

    def condition(self) -> Cmp:
        left = self.additive()
        tok = self.tok
        if tok.kind == "op" and tok.text in RELOPS:
            self.i += 1
            return Cmp(tok.text, left, self.additive())
        self.error("expected a comparison (<, <=, >, >=, ==)")


def parse(text: str, variables: Optional[Iterable[str]] = None) -> Expr:
    """Parse ``text``; when ``variables`` is given, any other identifier is rejected."""
    if not isinstance(text, str) or not text.strip():
        raise ExprSyntaxError("empty expression", str(text), 0)
    return _Parser(text, variables).parse()


# --------------------------------------------------------------------------- printer

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "^": 4}
_UNARY_PREC = 3
_ATOM_PREC = 5


def _prec(node: Expr) -> int:
    if isinstance(node, BinOp):
        return _PREC[node.op]
    if isinstance(node, Neg):
        return _UNARY_PREC
    if isinstance(node, Num) and (node.value < 0 or math.copysign(1.0, node.value) < 0):
        return _UNARY_PREC
    return _ATOM_PREC


def _num_text(v: float) -> str:
    if v == int(v) and abs(v) < 1e15:
        return str(int(v)) if not (v == 0 and math.copysign(1.0, v) < 0) else "-0"
    return repr(v)


def to_text(node: Expr) -> str:
    if isinstance(node, Num):
        return _num_text(node.value)
    if isinstance(node, (Const, Var)):
        return node.name
    if isinstance(node, Neg):
        inner = to_text(node.operand)
        if _prec(node.operand) < _UNARY_PREC:
            inner = f"({inner})"
        return f"-{inner}"
    if isinstance(node, BinOp):
        p = _PREC[node.op]
        left, right = to_text(node.left), to_text(node.right)
        if node.op == "^":
            if _prec(node.left) <= p:
                left = f"({left})"
            if _prec(node.right) < _UNARY_PREC:
                right = f"({right})"
            return f"{left}^{right}"
        if _prec(node.left) < p:
            left = f"({left})"
        if _prec(node.right) <= p:
            right = f"({right})"
        return f"{left} {node.op} {right}"
    if isinstance(node, Call):
        return f"{node.fn}({', '.join(to_text(a) for a in node.args)})"
    if isinstance(node, If):
        c = node.cond
        return f"if({to_text(c.left)} {c.op} {to_text(c.right)}, {to_text(node.then)}, {to_text(node.orelse)})"
    raise TypeError(f"not an expression node: {node!r}")


# --------------------------------------------------------------------------- structure


def free_vars(node: Union[Expr, Cmp]) -> frozenset:
    if isinstance(node, Var):
        return frozenset([node.name])
    if isinstance(node, (Num, Const)):
        return frozenset()
    if isinstance(node, Neg):
        return free_vars(node.operand)
    if isinstance(node, (BinOp, Cmp)):
        return free_vars(node.left) | free_vars(node.right)
    if isinstance(node, Call):
        return frozenset().union(*(free_vars(a) for a in node.args))
    if isinstance(node, If):
        return free_vars(node.cond) | free_vars(node.then) | free_vars(node.orelse)
    raise TypeError(f"not an expression node: {node!r}")


def substitute(node, mapping: Mapping[str, Expr]):
    """Replace variables by expressions (simultaneously)."""
    if isinstance(node, Var):
        return mapping.get(node.name, node)
    if isinstance(node, (Num, Const)):
        return node
    if isinstance(node, Neg):
        return Neg(substitute(node.operand, mapping))
    if isinstance(node, BinOp):
        return BinOp(node.op, substitute(node.left, mapping), substitute(node.right, mapping))
    if isinstance(node, Cmp):
        return Cmp(node.op, substitute(node.left, mapping), substitute(node.right, mapping))
    if isinstance(node, Call):
        return Call(node.fn, tuple(substitute(a, mapping) for a in node.args))
    if isinstance(node, If):
        return If(substitute(node.cond, mapping), substitute(node.then, mapping), substitute(node.orelse, mapping))
    raise TypeError(f"not an expression node: {node!r}")


# --------------------------------------------------------------------------- scalar evaluation


def _checked(x: float) -> float:
    if not math.isfinite(x):
        raise DomainError(f"non-finite intermediate value {x}")
    return x


def _pow(a: float, b: float) -> float:
    if a < 0 and b != int(b):
        raise DomainError(f"negative base {a} with non-integer exponent {b}")
    if a == 0 and b < 0:
        raise DomainError("zero raised to a negative power")
    try:
        return math.pow(a, b)
    except (OverflowError, ValueError) as exc:
        raise DomainError(f"{a}^{b}: {exc}") from None


def _ln(x: float) -> float:
    if x <= 0:
        raise DomainError(f"ln of non-positive argument {x}")
    return math.log(x)


def _sqrt(x: float) -> float:
    if x < 0:
        raise DomainError(f"sqrt of negative argument {x}")
    return math.sqrt(x)


def _exp(x: float) -> float:
    try:
        return math.exp(x)
    except OverflowError:
        raise DomainError(f"exp({x}) overflows") from None


_SCALAR_FUNCS = {
    "ln": _ln,
    "exp": _exp,
    "abs": abs,
    "floor": lambda x: float(math.floor(x)),
    "sqrt": _sqrt,
}

_COMPARE = {
    "<": lambda a, b: a < b,
    "<=": lambda a, b: a <= b,
    ">": lambda a, b: a > b,
    ">=": lambda a, b: a >= b,
    "==": lambda a, b: a == b,
}


def evaluate(node: Expr, binding: Mapping[str, float]) -> float:
    """IEEE double evaluation. Any non-finite intermediate raises DomainError."""
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Const):
        return CONSTANTS[node.name]
    if isinstance(node, Var):
        try:
            return float(binding[node.name])
        except KeyError:
            raise UnboundVariable(f"no value bound for {node.name!r}") from None
    if isinstance(node, Neg):
        return -evaluate(node.operand, binding)
    if isinstance(node, BinOp):
        a = evaluate(node.left, binding)
        b = evaluate(node.right, binding)
        if node.op == "+":
            return _checked(a + b)
        if node.op == "-":
            return _checked(a - b)
        if node.op == "*":
            return _checked(a * b)
        if node.op == "/":
            if b == 0:
                raise DomainError("division by zero")
            return _checked(a / b)
        return _checked(_pow(a, b))
    if isinstance(node, Call):
        args = [evaluate(a, binding) for a in node.args]
        if node.fn == "min":
            return min(args)
        if node.fn == "max":
            return max(args)
        return _checked(_SCALAR_FUNCS[node.fn](args[0]))
    if isinstance(node, If):
        c = node.cond
        taken = _COMPARE[c.op](evaluate(c.left, binding), evaluate(c.right, binding))
        return evaluate(node.then if taken else node.orelse, binding)
    raise TypeError(f"not an expression node: {node!r}")


# --------------------------------------------------------------------------- batch evaluation
#
# A compiled batch function maps {name: 1-d array} to (values, bad) where
# ``bad`` flags entries whose scalar evaluation would raise DomainError.
# Untaken if-branches never contribute to ``bad``.

BatchFn = Callable[[Mapping[str, np.ndarray]], tuple]

_NP_FUNCS = {"ln": np.log, "exp": np.exp, "abs": np.abs, "floor": np.floor, "sqrt": np.sqrt}
_NP_COMPARE = {"<": np.less, "<=": np.less_equal, ">": np.greater, ">=": np.greater_equal, "==": np.equal}


def _merge(*masks):
    out = None
    for m in masks:
        if m is None or m is False:
            continue
        out = m if out is None else (out | m)
    return out


def _nonfinite(x):
    if isinstance(x, np.ndarray):
        bad = ~np.isfinite(x)
        return bad if bad.any() else None
    return None if math.isfinite(x) else True


def _compile(node) -> BatchFn:
    if isinstance(node, Num):
        v = node.value
        return lambda env: (v, None)
    if isinstance(node, Const):
        v = CONSTANTS[node.name]
        return lambda env: (v, None)
    if isinstance(node, Var):
        name = node.name

        def var(env):
            try:
                return env[name], None
            except KeyError:
                raise UnboundVariable(f"no value bound for {name!r}") from None

        return var
    if isinstance(node, Neg):
        f = _compile(node.operand)

        def neg(env):
            v, b = f(env)
            return -v, b

        return neg
    if isinstance(node, BinOp):
        fl, fr = _compile(node.left), _compile(node.right)
        op = node.op
        npop = {"+": np.add, "-": np.subtract, "*": np.multiply, "/": np.true_divide, "^": np.power}[op]

        def binop(env):
            a, ba = fl(env)
            b, bb = fr(env)
            if op == "^":
                r = npop(np.asarray(a, dtype=float), b)
            else:
                r = npop(a, b)
            return r, _merge(ba, bb, _nonfinite(r))

        return binop
    if isinstance(node, Call):
        fs = [_compile(a) for a in node.args]
        fn = node.fn
        if fn in VARIADIC_FUNCS:
            red = np.minimum if fn == "min" else np.maximum

            def variadic(env):
                vals, bads = zip(*(f(env) for f in fs))
                r = vals[0]
                for v in vals[1:]:
                    r = red(r, v)
                return r, _merge(*bads)

            return variadic
        npf = _NP_FUNCS[fn]
        f0 = fs[0]

        def unary(env):
            v, b = f0(env)
            r = npf(v)
            if fn == "ln":
                extra = np.asarray(v) <= 0
                extra = extra if extra.any() else None
            else:
                extra = None
            return r, _merge(b, extra, _nonfinite(r))

        return unary
    if isinstance(node, If):
        cl, cr = _compile(node.cond.left), _compile(node.cond.right)
        cmp = _NP_COMPARE[node.cond.op]
        ft, fe = _compile(node.then), _compile(node.orelse)

        def branch(env):
            a, ba = cl(env)
            b, bb = cr(env)
            c = cmp(a, b)
            t, bt = ft(env)
            e, be = fe(env)
            r = np.where(c, t, e)
            sel = None
            if bt is not None or be is not None:
                bt_ = False if bt is None else bt
                be_ = False if be is None else be
                sel = np.where(c, bt_, be_)
            return r, _merge(ba, bb, sel)

        return branch
    raise TypeError(f"not an expression node: {node!r}")


def compile_batch(node: Expr) -> Callable[[Mapping[str, np.ndarray], int], tuple]:
    """Compile ``node`` into ``fn(env, size) -> (values, bad)`` with arrays of length ``size``."""
    inner = _compile(node)

    def run(env, size):
        with np.errstate(all="ignore"):
            vals, bad = inner(env)
        vals = np.broadcast_to(np.asarray(vals, dtype=float), (size,)).copy()
        if bad is None:
            bad = np.zeros(size, dtype=bool)
        else:
            bad = np.broadcast_to(np.asarray(bad, dtype=bool), (size,)).copy()
        vals[bad] = np.nan
        return vals, bad

    return run


# --------------------------------------------------------------------------- differentiation

ZERO, ONE = Num(0.0), Num(1.0)


def _is_num(node, value=None) -> bool:
    return isinstance(node, Num) and (value is None or node.value == value)


def mk_add(a, b):
    if _is_num(a, 0):
        return b
    if _is_num(b, 0):
        return a
    if _is_num(a) and _is_num(b):
        return Num(a.value + b.value)
    return BinOp("+", a, b)


def mk_sub(a, b):
    if _is_num(b, 0):
        return a
    if _is_num(a, 0):
        return mk_neg(b)
    if _is_num(a) and _is_num(b):
        return Num(a.value - b.value)
    return BinOp("-", a, b)


def mk_mul(a, b):
    if _is_num(a, 0) or _is_num(b, 0):
        return ZERO
    if _is_num(a, 1):
        return b
    if _is_num(b, 1):
        return a
    if _is_num(a) and _is_num(b):
        return Num(a.value * b.value)
    return BinOp("*", a, b)


def mk_div(a, b):
    if _is_num(a, 0):
        return ZERO
    if _is_num(b, 1):
        return a
    return BinOp("/", a, b)


def mk_neg(a):
    if _is_num(a):
        return Num(-a.value) if a.value != 0 else ZERO
    if isinstance(a, Neg):
        return a.operand
    return Neg(a)


def mk_pow(a, b):
    if _is_num(b, 1):
        return a
    if _is_num(b, 0):
        return ONE
    return BinOp("^", a, b)


class Derivative(NamedTuple):
    expr: Expr
    smooth: bool  # False when an abs/floor/min/max/if depending on the variable was crossed


def diff(node: Expr, var: str) -> Derivative:
    """Symbolic forward derivative of ``node`` with respect to ``var``."""
    flags = []
    d = _diff(node, var, flags)
    return Derivative(d, not flags)


def _diff(node, var, flags):
    if var not in free_vars(node):
        return ZERO
    if isinstance(node, Var):
        return ONE
    if isinstance(node, Neg):
        return mk_neg(_diff(node.operand, var, flags))
    if isinstance(node, BinOp):
        a, b = node.left, node.right
        if node.op in "+-":
            da, db = _diff(a, var, flags), _diff(b, var, flags)
            return mk_add(da, db) if node.op == "+" else mk_sub(da, db)
        dep_a, dep_b = var in free_vars(a), var in free_vars(b)
        if node.op == "*":
            if not dep_a:
                return mk_mul(a, _diff(b, var, flags))
            if not dep_b:
                return mk_mul(_diff(a, var, flags), b)
            return mk_add(mk_mul(_diff(a, var, flags), b), mk_mul(a, _diff(b, var, flags)))
        if node.op == "/":
            if not dep_b:
                return mk_div(_diff(a, var, flags), b)
            num = mk_sub(mk_mul(_diff(a, var, flags), b), mk_mul(a, _diff(b, var, flags)))
            return mk_div(num, mk_pow(b, Num(2.0)))
        # power
        if not dep_b:
            exponent = Num(b.value - 1) if _is_num(b) else mk_sub(b, ONE)
            return mk_mul(mk_mul(b, mk_pow(a, exponent)), _diff(a, var, flags))
        if not dep_a:
            return mk_mul(mk_mul(node, Call("ln", (a,))), _diff(b, var, flags))
        inner = mk_add(
            mk_mul(_diff(b, var, flags), Call("ln", (a,))),
            mk_div(mk_mul(b, _diff(a, var, flags)), a),
        )
        return mk_mul(node, inner)
    if isinstance(node, Call):
        fn, args = node.fn, node.args
        if fn in VARIADIC_FUNCS:
            flags.append(fn)
            rel = "<=" if fn == "min" else ">="
            first, rest = args[0], args[1:]
            other = rest[0] if len(rest) == 1 else Call(fn, rest)
            return If(Cmp(rel, first, other), _diff(first, var, flags), _diff(other, var, flags))
        u = args[0]
        du = _diff(u, var, flags)
        if fn == "ln":
            return mk_div(du, u)
        if fn == "exp":
            return mk_mul(node, du)
        if fn == "sqrt":
            return mk_div(du, mk_mul(Num(2.0), node))
        if fn == "abs":
            flags.append(fn)
            return If(Cmp(">=", u, ZERO), du, mk_neg(du))
        if fn == "floor":
            flags.append(fn)
            return ZERO
    if isinstance(node, If):
        flags.append("if")
        return If(node.cond, _diff(node.then, var, flags), _diff(node.orelse, var, flags))
    raise TypeError(f"not an expression node: {node!r}")


class Kink(NamedTuple):
    kind: str  # "zero": kink where expr == 0; "integer": kink where expr is an integer
    expr: Expr


def kinks(node, variables: Optional[Iterable[str]] = None) -> list:
    """Locations where ``node`` may fail to be differentiable.

    Only nonsmooth constructs whose arguments depend on one of ``variables``
    (all free variables when None) are reported.
    """
    watch = None if variables is None else frozenset(variables)
    out = []

    def dep(e):
        fv = free_vars(e)
        return bool(fv) if watch is None else bool(fv & watch)

    def walk(e):
        if isinstance(e, Neg):
            walk(e.operand)
        elif isinstance(e, (BinOp, Cmp)):
            walk(e.left)
            walk(e.right)
        elif isinstance(e, Call):
            for a in e.args:
                walk(a)
            if e.fn == "abs" and dep(e.args[0]):
                out.append(Kink("zero", e.args[0]))
            elif e.fn == "floor" and dep(e.args[0]):
                out.append(Kink("integer", e.args[0]))
            elif e.fn in VARIADIC_FUNCS:
                for i, a in enumerate(e.args):
                    for b in e.args[i + 1:]:
                        diffexpr = BinOp("-", a, b)
                        if dep(diffexpr):
                            out.append(Kink("zero", diffexpr))
        elif isinstance(e, If):
            walk(e.cond)
            walk(e.then)
            walk(e.orelse)
            gap = BinOp("-", e.cond.left, e.cond.right)
            if dep(gap):
                out.append(Kink("zero", gap))

    walk(node)
    return out


def kink_distance_batch(kink_list: Sequence[Kink], env: Mapping[str, np.ndarray], size: int) -> np.ndarray:
    """Smallest distance (in kink-argument units) to any listed kink, per batch entry."""
    dist = np.full(size, np.inf)
    for k in kink_list:
        vals, bad = compile_batch(k.expr)(env, size)
        if k.kind == "integer":
            d = np.abs(vals - np.round(vals))
        else:
            d = np.abs(vals)
        d[bad] = np.inf
        dist = np.minimum(dist, d)
    return dist


def kink_distance(kink_list: Sequence[Kink], binding: Mapping[str, float]) -> float:
    dist = math.inf
    for k in kink_list:
        try:
            v = evaluate(k.expr, binding)
        except DomainError:
            continue
        d = abs(v - round(v)) if k.kind == "integer" else abs(v)
        dist = min(dist, d)
    return dist


def const_value(text: str) -> float:
    """Evaluate a variable-free expression such as ``"ln(2)"``; ``inf``/``-inf`` are accepted."""
    t = text.strip() if isinstance(text, str) else text
    if isinstance(t, (int, float)):
        return float(t)
    if t in ("inf", "+inf", "infinity"):
        return math.inf
    if t in ("-inf", "-infinity"):
        return -math.inf
    return evaluate(parse(t, variables=()), {})
