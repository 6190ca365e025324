"""Small infix expression language used by manifold and distribution files.

Expressions are parsed into an immutable AST, which can be printed back,
differentiated symbolically and compiled into a numpy-vectorised callable.

Supported: numbers, ``+ - * /``, ``^`` with integer exponents, ``sin``,
``cos``, ``exp``, ``sqrt``, the constant ``pi`` and coordinate names
``x, y, z`` or ``x1 .. xn``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import ParseError

__all__ = [
    "Expr", "Num", "Var", "Neg", "BinOp", "Pow", "Call",
    "Token", "tokenize", "Parser", "parse_expr", "to_source",
    "differentiate", "is_polynomial", "compile_expr", "compile_exprs",
    "variable_index", "codegen",
]

FUNCTIONS = {"sin": np.sin, "cos": np.cos, "exp": np.exp, "sqrt": np.sqrt}
CONSTANTS = {"pi": math.pi}
_LETTER_VARS = {"x": 0, "y": 1, "z": 2}


class Expr:
    """Base class of AST nodes."""

    def __str__(self):
        return to_source(self)


@dataclass(frozen=True)
class Num(Expr):
    value: float


@dataclass(frozen=True)
class Var(Expr):
    index: int
    name: str


@dataclass(frozen=True)
class Neg(Expr):
    arg: Expr


@dataclass(frozen=True)
class BinOp(Expr):
    op: str
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Pow(Expr):
    base: Expr
    exponent: int


@dataclass(frozen=True)
class Call(Expr):
    fn: str
    arg: Expr


def variable_index(name):
    """Coordinate index for a variable name, or None if it is not one."""
    if name in _LETTER_VARS:
        return _LETTER_VARS[name]
    m = re.fullmatch(r"x([1-9][0-9]*)", name)
    if m:
        return int(m.group(1)) - 1
    return None


# ---------------------------------------------------------------------------
# tokenizer

@dataclass(frozen=True)
class Token:
    kind: str    # num, name, op, eof
    text: str
    line: int
    col: int


_TOKEN_RE = re.compile(r"""
    (?P<ws>[ \t\r]+)
  | (?P<comment>\#[^\n]*)
  | (?P<nl>\n)
  | (?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^()\[\],;=:])
""", re.VERBOSE)


def tokenize(text, keep_newlines=False):
    """Split text into tokens, tracking 1-based line and column numbers."""
    tokens = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        col = pos - line_start + 1
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup
        if kind == "nl":
            if keep_newlines:
                tokens.append(Token("nl", "\n", line, col))
            line += 1
            line_start = m.end()
        elif kind not in ("ws", "comment"):
            tokens.append(Token(kind, m.group(), line, col))
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens


# ---------------------------------------------------------------------------
# parser

class Parser:
    """Recursive-descent parser over a token list.

    The expression grammar is the usual one; unary minus binds looser than
    ``^`` so ``-x^2`` is ``-(x^2)``.
    """

    def __init__(self, tokens: Sequence[Token]):
        self.tokens = list(tokens)
        self.pos = 0

    @property
    def current(self) -> Token:
        return self.tokens[self.pos]

    def advance(self) -> Token:
        tok = self.tokens[self.pos]
        if tok.kind != "eof":
            self.pos += 1
        return tok

    def at(self, text):
        tok = self.current
        return tok.kind in ("op", "name") and tok.text == text

    def expect(self, text) -> Token:
        tok = self.current
        if not self.at(text):
            found = tok.text or "end of input"
            raise ParseError(f"expected {text!r}, found {found!r}", tok.line, tok.col)
        return self.advance()

    def error(self, msg, tok=None):
        tok = tok or self.current
        return ParseError(msg, tok.line, tok.col)

    def expr(self) -> Expr:
        node = self.term()
        while self.at("+") or self.at("-"):
            op = self.advance().text
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Expr:
        node = self.unary()
        while self.at("*") or self.at("/"):
            op = self.advance().text
            node = BinOp(op, node, self.unary())
        return node

    def unary(self) -> Expr:
        if self.at("-"):
            self.advance()
            return Neg(self.unary())
        if self.at("+"):
            self.advance()
            return self.unary()
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.at("^"):
            self.advance()
            tok = self.current
            sign = 1
            while self.at("-") or self.at("+"):
                if self.advance().text == "-":
                    sign = -sign
                tok = self.current
            if tok.kind != "num":
                raise self.error("exponent must be an integer literal", tok)
            value = float(tok.text)
            if not value.is_integer():
                raise self.error("exponent must be an integer literal", tok)
            self.advance()
            return Pow(base, sign * int(value))
        return base

    def atom(self) -> Expr:
        tok = self.current
        if tok.kind == "num":
            self.advance()
            return Num(float(tok.text))
        if tok.kind == "name":
            self.advance()
            if tok.text in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Call(tok.text, arg)
            if tok.text in CONSTANTS:
                return Num(CONSTANTS[tok.text])
            idx = variable_index(tok.text)
            if idx is None:
                raise self.error(f"unknown name {tok.text!r}", tok)
            return Var(idx, tok.text)
        if self.at("("):
            self.advance()
            node = self.expr()
            self.expect(")")
            return node
        found = tok.text or "end of input"
        raise self.error(f"unexpected {found!r} in expression", tok)


def parse_expr(text) -> Expr:
    """Parse a single expression string."""
    p = Parser(tokenize(text))
    node = p.expr()
    if p.current.kind != "eof":
        raise p.error(f"unexpected {p.current.text!r} after expression")
    return node


# ---------------------------------------------------------------------------
# printing

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}


def to_source(e: Expr) -> str:
    """Print an expression so that parsing it back yields the same AST."""
    if isinstance(e, Num):
        return repr(float(e.value))
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Neg):
        return f"(-{to_source(e.arg)})"
    if isinstance(e, BinOp):
        return f"({to_source(e.left)} {e.op} {to_source(e.right)})"
    if isinstance(e, Pow):
        return f"({to_source(e.base)})^{e.exponent}"
    if isinstance(e, Call):
        return f"{e.fn}({to_source(e.arg)})"
    raise TypeError(f"not an expression node: {e!r}")


# ---------------------------------------------------------------------------
# symbolic differentiation

def _is_num(e, value=None):
    return isinstance(e, Num) and (value is None or e.value == value)


def _add(a, b):
    if _is_num(a, 0.0):
        return b
    if _is_num(b, 0.0):
        return a
    if _is_num(a) and _is_num(b):
        return Num(a.value + b.value)
    return BinOp("+", a, b)


def _sub(a, b):
    if _is_num(b, 0.0):
        return a
    if _is_num(a, 0.0):
        return _neg(b)
    if _is_num(a) and _is_num(b):
        return Num(a.value - b.value)
    return BinOp("-", a, b)


def _mul(a, b):
    if _is_num(a, 0.0) or _is_num(b, 0.0):
        return Num(0.0)
    if _is_num(a, 1.0):
        return b
    if _is_num(b, 1.0):
        return a
    if _is_num(a) and _is_num(b):
        return Num(a.value * b.value)
    return BinOp("*", a, b)


def _div(a, b):
    if _is_num(a, 0.0):
        return Num(0.0)
    if _is_num(b, 1.0):
        return a
    return BinOp("/", a, b)


def _neg(a):
    if _is_num(a):
        return Num(-a.value)
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def _pow(a, k):
    if k == 0:
        return Num(1.0)
    if k == 1:
        return a
    return Pow(a, k)


def differentiate(e: Expr, index: int) -> Expr:
    """Exact partial derivative with respect to coordinate ``index``."""
    d = lambda s: differentiate(s, index)  # noqa: E731
    if isinstance(e, Num):
        return Num(0.0)
    if isinstance(e, Var):
        return Num(1.0 if e.index == index else 0.0)
    if isinstance(e, Neg):
        return _neg(d(e.arg))
    if isinstance(e, BinOp):
        a, b = e.left, e.right
        if e.op == "+":
            return _add(d(a), d(b))
        if e.op == "-":
            return _sub(d(a), d(b))
        if e.op == "*":
            return _add(_mul(d(a), b), _mul(a, d(b)))
        if e.op == "/":
            num = _sub(_mul(d(a), b), _mul(a, d(b)))
            return _div(num, _pow(b, 2))
    if isinstance(e, Pow):
        return _mul(_mul(Num(float(e.exponent)), _pow(e.base, e.exponent - 1)), d(e.base))
    if isinstance(e, Call):
        inner = d(e.arg)
        if e.fn == "sin":
            outer = Call("cos", e.arg)
        elif e.fn == "cos":
            outer = _neg(Call("sin", e.arg))
        elif e.fn == "exp":
            outer = e
        elif e.fn == "sqrt":
            outer = _div(Num(0.5), e)
        else:  # pragma: no cover - parser rejects unknown functions
            raise ValueError(e.fn)
        return _mul(outer, inner)
    raise TypeError(f"not an expression node: {e!r}")


def is_polynomial(e: Expr) -> bool:
    if isinstance(e, (Num, Var)):
        return True
    if isinstance(e, Neg):
        return is_polynomial(e.arg)
    if isinstance(e, BinOp):
        if e.op == "/":
            return is_polynomial(e.left) and _is_constant(e.right)
        return is_polynomial(e.left) and is_polynomial(e.right)
    if isinstance(e, Pow):
        return e.exponent >= 0 and is_polynomial(e.base)
    if isinstance(e, Call):
        return _is_constant(e.arg)
    return False


def _is_constant(e):
    if isinstance(e, Num):
        return True
    if isinstance(e, Var):
        return False
    if isinstance(e, Neg):
        return _is_constant(e.arg)
    if isinstance(e, BinOp):
        return _is_constant(e.left) and _is_constant(e.right)
    if isinstance(e, Pow):
        return _is_constant(e.base)
    if isinstance(e, Call):
        return _is_constant(e.arg)
    return False


def max_variable(e: Expr) -> int:
    """Largest coordinate index used, -1 if none."""
    if isinstance(e, Var):
        return e.index
    if isinstance(e, Num):
        return -1
    if isinstance(e, (Neg, Call)):
        return max_variable(e.arg)
    if isinstance(e, BinOp):
        return max(max_variable(e.left), max_variable(e.right))
    if isinstance(e, Pow):
        return max_variable(e.base)
    return -1


# ---------------------------------------------------------------------------
# compilation

def _py(e: Expr) -> str:
    if isinstance(e, Num):
        return repr(float(e.value))
    if isinstance(e, Var):
        return f"X[..., {e.index}]"
    if isinstance(e, Neg):
        return f"(-{_py(e.arg)})"
    if isinstance(e, BinOp):
        return f"({_py(e.left)} {e.op} {_py(e.right)})"
    if isinstance(e, Pow):
        if e.exponent < 0:
            return f"(1.0 / ({_py(e.base)}) ** {-e.exponent})"
        return f"(({_py(e.base)}) ** {e.exponent})"
    if isinstance(e, Call):
        return f"_{e.fn}({_py(e.arg)})"
    raise TypeError(f"not an expression node: {e!r}")


_NAMESPACE = {f"_{k}": v for k, v in FUNCTIONS.items()}


def _emit(e, memo, counts, temps, lines, count_only):
    """Emit numpy source for ``e``; repeated subtrees become temporaries."""
    if isinstance(e, Num):
        return repr(float(e.value))
    if isinstance(e, Var):
        return f"x{e.index}"
    cached = memo.get(id(e))
    if cached is not None and not count_only:
        return cached
    args = (_emit(a, memo, counts, temps, lines, count_only) for a in _children(e))
    if isinstance(e, Neg):
        code = f"(-{next(args)})"
    elif isinstance(e, BinOp):
        code = f"({next(args)} {e.op} {next(args)})"
    elif isinstance(e, Pow):
        base = next(args)
        code = (f"(1.0 / {base} ** {-e.exponent})" if e.exponent < 0
                else f"({base} ** {e.exponent})")
    elif isinstance(e, Call):
        code = f"_{e.fn}({next(args)})"
    else:
        raise TypeError(f"not an expression node: {e!r}")
    if count_only:
        counts[code] = counts.get(code, 0) + 1
        return code
    if counts.get(code, 0) > 1:
        name = temps.get(code)
        if name is None:
            name = f"t{len(temps)}"
            temps[code] = name
            lines.append(f"    {name} = {code}")
        code = name
    memo[id(e)] = code
    return code


def _children(e):
    if isinstance(e, (Neg, Call)):
        return (e.arg,)
    if isinstance(e, BinOp):
        return (e.left, e.right)
    if isinstance(e, Pow):
        return (e.base,)
    return ()


def codegen(exprs, var_template):
    """Source lines and output expressions for ``exprs`` with shared temporaries.

    Coordinate ``i`` is bound to ``x{i}`` via ``var_template.format(i)``;
    lines are indented by four spaces.
    """
    counts = {}
    for e in exprs:
        _emit(e, {}, counts, {}, [], True)
    nvars = max([max_variable(e) for e in exprs] + [-1]) + 1
    lines = [f"    x{i} = {var_template.format(i)}" for i in range(nvars)]
    memo, temps = {}, {}
    outs = [_emit(e, memo, counts, temps, lines, False) for e in exprs]
    return lines, outs


NAMESPACE = _NAMESPACE


def compile_exprs(exprs: Sequence[Expr]) -> Callable[[np.ndarray], np.ndarray]:
    """Compile expressions into ``f(X) -> array(X.shape[:-1] + (len(exprs),))``.

    Subexpressions shared between (or repeated within) the expressions are
    evaluated once.
    """
    exprs = list(exprs)
    lines, outs = codegen(exprs, "X[..., {}]")
    src = "def _f(X):\n" + "\n".join(lines) + ("\n" if lines else "")
    src += f"    return ({', '.join(outs)},)\n"
    namespace = dict(_NAMESPACE)
    exec(compile(src, "<gtf-expr>", "exec"), namespace)  # noqa: S102 - source is generated from a parsed AST
    raw = namespace["_f"]
    m = len(exprs)

    def f(X):
        X = np.asarray(X, dtype=float)
        shape = X.shape[:-1]
        out = np.empty(shape + (m,))
        for i, val in enumerate(raw(X)):
            out[..., i] = val
        return out

    f.source = src
    return f


def compile_expr(e: Expr) -> Callable[[np.ndarray], np.ndarray]:
    """Compile one expression into ``f(X) -> array(X.shape[:-1])``."""
    f = compile_exprs([e])
    return lambda X: f(X)[..., 0]
