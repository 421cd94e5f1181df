"""Holomorphic self-map DSL: parser, vectorized evaluator and printer.

Grammar::

    map    := expr ("," expr)*
    expr   := term (("+" | "-") term)*
    term   := factor (("*" | "/") factor)*
    factor := base ("^" INT)?
    base   := "z" INT | NUMBER | NUMBER "i" | "(" expr ")" | "-" base

There is no conjugation or modulus, so every parsed map is holomorphic
wherever its denominators do not vanish.  Unary minus binds tighter than
``^`` (``-z1^2`` is ``(-z1)^2``), exactly as the grammar reads.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import MapParseError

# ---------------------------------------------------------------------------
# expression trees
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Var:
    index: int  # 1-based


@dataclass(frozen=True)
class Const:
    value: complex


@dataclass(frozen=True)
class Neg:
    arg: "Node"


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * /
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Pow:
    base: "Node"
    exponent: int


Node = Union[Var, Const, Neg, BinOp, Pow]

_BINARY = {
    "+": np.add,
    "-": np.subtract,
    "*": np.multiply,
    "/": np.divide,
}


def evaluate_node(node: Node, z: np.ndarray):
    """Evaluate on an ``(n, d)`` point array; constants stay scalars."""
    if isinstance(node, Var):
        return z[:, node.index - 1]
    if isinstance(node, Const):
        return node.value
    if isinstance(node, Neg):
        return -evaluate_node(node.arg, z)
    if isinstance(node, Pow):
        return evaluate_node(node.base, z) ** node.exponent
    return _BINARY[node.op](evaluate_node(node.left, z), evaluate_node(node.right, z))


def _fmt_real(x: float) -> str:
    return repr(float(x))


def _fmt_const(c: complex) -> str:
    if c.imag == 0:
        s = _fmt_real(c.real)
        return f"({s})" if s.startswith("-") else s
    im = f"{_fmt_real(abs(c.imag))}i"
    if c.real == 0:
        return im if c.imag > 0 else f"(-{im})"
    sign = "-" if math.copysign(1.0, c.imag) < 0 else "+"
    return f"({_fmt_real(c.real)}{sign}{im})"


def format_node(node: Node) -> str:
    """Fully parenthesized text that parses back to an equal-valued tree."""
    if isinstance(node, Var):
        return f"z{node.index}"
    if isinstance(node, Const):
        return _fmt_const(node.value)
    if isinstance(node, Neg):
        inner = format_node(node.arg)
        # "-(x)^n" would parse as "(-x)^n"
        return f"(-({inner}))" if isinstance(node.arg, Pow) else f"(-{inner})"
    if isinstance(node, Pow):
        return f"({format_node(node.base)})^{node.exponent}"
    return f"({format_node(node.left)} {node.op} {format_node(node.right)})"


@dataclass(frozen=True)
class HoloMap:
    """A map z -> (phi_1(z), ..., phi_k(z)) given by expression trees."""

    arity: int
    components: tuple

    def __post_init__(self):
        if self.arity < 1:
            raise ValueError("arity must be positive")
        if len(self.components) != self.arity:
            raise ValueError(
                f"map has {len(self.components)} components but the domain has dimension {self.arity}")

    def __call__(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        single = z.ndim == 1
        pts = z.reshape(-1, self.arity)
        n = pts.shape[0]
        out = np.empty((n, self.arity), dtype=complex)
        with np.errstate(all="ignore"):
            for j, comp in enumerate(self.components):
                out[:, j] = np.broadcast_to(evaluate_node(comp, pts), (n,))
        return out[0] if single else out

    def __str__(self) -> str:
        return ", ".join(format_node(c) for c in self.components)

    @classmethod
    def identity(cls, arity: int) -> "HoloMap":
        return cls(arity, tuple(Var(j + 1) for j in range(arity)))


# ---------------------------------------------------------------------------
# tokenizer and parser
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)(?P<imag>i)?
  | (?P<var>z(?P<vidx>\d+))
  | (?P<op>[-+*/^(),])
""", re.VERBOSE)


@dataclass(frozen=True)
class _Tok:
    kind: str  # "num", "var", "op", "end"
    text: str
    pos: int
    value: object = None


def _tokenize(text: str) -> list:
    toks, pos = [], 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise MapParseError(f"unexpected character {text[pos]!r}", text, pos,
                                "number, variable, operator or parenthesis")
        if m.group("num"):
            x = float(m.group("num"))
            if not math.isfinite(x):
                raise MapParseError("numeric literal overflows", text, pos, "finite number")
            val = complex(0.0, x) if m.group("imag") else complex(x, 0.0)
            toks.append(_Tok("num", m.group(0), pos, val))
        elif m.group("var"):
            toks.append(_Tok("var", m.group(0), pos, int(m.group("vidx"))))
        elif m.group("op"):
            toks.append(_Tok("op", m.group(0), pos))
        pos = m.end()
    toks.append(_Tok("end", "", len(text)))
    return toks


class _Parser:
    def __init__(self, text: str, arity: int):
        self.text = text
        self.arity = arity
        self.toks = _tokenize(text)
        self.i = 0

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def error(self, expected: str, message: str | None = None):
        t = self.tok
        found = "end of input" if t.kind == "end" else repr(t.text)
        raise MapParseError(message or f"expected {expected}, found {found}",
                            self.text, t.pos, expected)

    def accept(self, op: str) -> bool:
        if self.tok.kind == "op" and self.tok.text == op:
            self.i += 1
            return True
        return False

    def parse_map(self) -> list:
        comps = [self.expr()]
        while self.accept(","):
            comps.append(self.expr())
        if self.tok.kind != "end":
            self.error("',' or end of input")
        return comps

    def expr(self) -> Node:
        node = self.term()
        while self.tok.kind == "op" and self.tok.text in "+-":
            op = self.tok.text
            self.i += 1
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Node:
        node = self.factor()
        while self.tok.kind == "op" and self.tok.text in "*/":
            op = self.tok.text
            self.i += 1
            node = BinOp(op, node, self.factor())
        return node

    def factor(self) -> Node:
        node = self.base()
        if self.accept("^"):
            t = self.tok
            if t.kind != "num" or not t.text.isdigit():
                self.error("non-negative integer exponent")
            self.i += 1
            node = Pow(node, int(t.text))
        return node

    def base(self) -> Node:
        t = self.tok
        if t.kind == "var":
            if not 1 <= t.value <= self.arity:
                raise MapParseError(
                    f"unknown variable {t.text}; the domain has variables z1..z{self.arity}",
                    self.text, t.pos, f"z1..z{self.arity}")
            self.i += 1
            return Var(t.value)
        if t.kind == "num":
            self.i += 1
            return Const(t.value)
        if self.accept("("):
            node = self.expr()
            if not self.accept(")"):
                self.error("')'")
            return node
        if self.accept("-"):
            return Neg(self.base())
        self.error("variable, number, '(' or '-'")


def parse_map(text: str, arity: int) -> HoloMap:
    """Parse a comma-separated list of component expressions in z1..z<arity>."""
    if arity < 1:
        raise ValueError("arity must be positive")
    p = _Parser(text, arity)
    comps = p.parse_map()
    if len(comps) != arity:
        raise MapParseError(
            f"map has {len(comps)} component(s) but the domain has dimension {arity}",
            text, len(text), f"{arity} comma-separated components")
    return HoloMap(arity, tuple(comps))
