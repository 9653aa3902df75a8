"""Scalar expressions in the real parameter ``g``.

Grammar (whitespace is insignificant)::

    expr    := term (("+" | "-") term)*
    term    := unary (("*" | "/") unary)*
    unary   := "-" unary | "+" unary | power
    power   := atom ("^" unary)?
    atom    := NUMBER | "g" | "i" | FUNC "(" expr ")" | "(" expr ")"
    FUNC    := "sqrt" | "exp"
    NUMBER  := digits ["." digits] [("e" | "E") ["+" | "-"] digits]

``^`` binds tighter than unary minus (``-2^2 == -4``) and is right
associative (``2^3^2 == 512``); the other binary operators associate left.
"""

import cmath
import re
from dataclasses import dataclass
from fractions import Fraction

from .exceptions import EvaluationError, ExprSyntaxError

__all__ = ["BinOp", "Call", "Imag", "Neg", "Num", "ParamExpr", "Var", "evaluate", "parse"]


def _principal_sqrt(z):
    # -0.0 imaginary parts would select the lower side of the branch cut
    return cmath.sqrt(complex(z.real, z.imag + 0.0))


FUNCTIONS = {"sqrt": _principal_sqrt, "exp": cmath.exp}


@dataclass(frozen=True)
class Num:
    text: str

    @property
    def value(self):
        return Fraction(self.text)


@dataclass(frozen=True)
class Var:
    pass


@dataclass(frozen=True)
class Imag:
    pass


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
    name: str
    arg: object


_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_]\w*)|(?P<op>[-+*/^()]))"
)


def _tokenize(text):
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            bad = pos + len(text[pos:]) - len(text[pos:].lstrip())
            raise ExprSyntaxError(f"unexpected character {text[bad]!r}", text, bad)
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), start))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text):
        self.text = text
        self.tokens = _tokenize(text)
        self.k = 0

    def peek(self):
        return self.tokens[self.k]

    def advance(self):
        tok = self.tokens[self.k]
        self.k += 1
        return tok

    def fail(self, msg, tok=None):
        tok = tok or self.peek()
        raise ExprSyntaxError(msg, self.text, tok[2])

    def expect(self, value):
        tok = self.peek()
        if tok[1] != value or tok[0] == "num":
            self.fail(f"expected {value!r}, found {tok[1] or 'end of input'!r}")
        return self.advance()

    def parse(self):
        if self.peek()[0] == "end":
            self.fail("empty expression")
        node = self.expr()
        if self.peek()[0] != "end":
            self.fail(f"unexpected {self.peek()[1]!r}")
        return node

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.advance()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.advance()[1]
            node = BinOp(op, node, self.unary())
        return node

    def unary(self):
        tok = self.peek()
        if tok[0] == "op" and tok[1] == "-":
            self.advance()
            return Neg(self.unary())
        if tok[0] == "op" and tok[1] == "+":
            self.advance()
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.advance()
            return BinOp("^", base, self.unary())
        return base

    def atom(self):
        tok = self.advance()
        kind, text, _ = tok
        if kind == "num":
            return Num(text)
        if kind == "name":
            if text == "g":
                return Var()
            if text == "i":
                return Imag()
            if text in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Call(text, arg)
            self.fail(f"unknown identifier {text!r} (allowed: g, i, sqrt, exp)", tok)
        if kind == "op" and text == "(":
            node = self.expr()
            self.expect(")")
            return node
        self.fail(f"unexpected {text or 'end of input'!r}", tok)


def to_text(node):
    """Fully parenthesized text form; parsing it gives back an equal tree."""
    if isinstance(node, Num):
        return node.text
    if isinstance(node, Var):
        return "g"
    if isinstance(node, Imag):
        return "i"
    if isinstance(node, Neg):
        return f"-{_wrap(node.operand)}"
    if isinstance(node, Call):
        return f"{node.name}({to_text(node.arg)})"
    if isinstance(node, BinOp):
        return f"{_wrap(node.left)}{node.op}{_wrap(node.right)}"
    raise TypeError(f"not an expression node: {node!r}")


def _wrap(node):
    s = to_text(node)
    return s if isinstance(node, (Num, Var, Imag, Call)) else f"({s})"


def _eval(node, g):
    if isinstance(node, Num):
        return complex(float(node.value))
    if isinstance(node, Var):
        return complex(g)
    if isinstance(node, Imag):
        return 1j
    if isinstance(node, Neg):
        return -_eval(node.operand, g)
    if isinstance(node, Call):
        try:
            return FUNCTIONS[node.name](_eval(node.arg, g))
        except OverflowError as exc:
            raise EvaluationError(f"overflow in {to_text(node)} at g={g!r}") from exc
    left, right = _eval(node.left, g), _eval(node.right, g)
    try:
        if node.op == "+":
            return left + right
        if node.op == "-":
            return left - right
        if node.op == "*":
            return left * right
        if node.op == "/":
            return left / right
        return left**right
    except ZeroDivisionError as exc:
        raise EvaluationError(f"division by zero in {to_text(node)} at g={g!r}") from exc
    except OverflowError as exc:
        raise EvaluationError(f"overflow in {to_text(node)} at g={g!r}") from exc


class ParamExpr:
    """A parsed expression; call it with a real ``g`` to get a complex value."""

    __slots__ = ("tree", "source")

    def __init__(self, tree, source=None):
        self.tree = tree
        self.source = source if source is not None else to_text(tree)

    def eval(self, g):
        g = float(g)
        if not cmath.isfinite(g):
            raise EvaluationError(f"g must be finite, got {g!r}")
        value = _eval(self.tree, g)
        if not cmath.isfinite(value):
            raise EvaluationError(f"{self.source!r} is not finite at g={g!r}")
        return value

    __call__ = eval

    def __str__(self):
        return to_text(self.tree)

    def __repr__(self):
        return f"ParamExpr({self.source!r})"

    def __eq__(self, other):
        return isinstance(other, ParamExpr) and self.tree == other.tree

    def __hash__(self):
        return hash(self.tree)

    @property
    def is_constant(self):
        return "g" not in _names(self.tree)


def _names(node):
    if isinstance(node, Var):
        return {"g"}
    if isinstance(node, Neg):
        return _names(node.operand)
    if isinstance(node, Call):
        return _names(node.arg)
    if isinstance(node, BinOp):
        return _names(node.left) | _names(node.right)
    return set()


def parse(text):
    """Parse ``text`` into a :class:`ParamExpr`.

    Raises
    ------
    ExprSyntaxError
        On malformed input or an identifier other than ``g``, ``i``,
        ``sqrt`` and ``exp``; ``position`` is the offending character index.
    """
    if isinstance(text, ParamExpr):
        return text
    if isinstance(text, (int, float)) and not isinstance(text, bool):
        text = repr(text)
        if text.startswith("-"):
            return ParamExpr(Neg(_Parser(text[1:]).parse()), text)
    if not isinstance(text, str):
        raise TypeError(f"expected an expression string, got {type(text).__name__}")
    return ParamExpr(_Parser(text).parse(), text)


def evaluate(e, g):
    """Evaluate an expression (string or :class:`ParamExpr`) at ``g``."""
    return parse(e).eval(g)
