"""Tiny arithmetic expression language for drift components.

Grammar (EBNF):

    expr   := term (('+' | '-') term)*
    term   := factor (('*' | '/') factor)*
    factor := NUMBER | IDENT | '-' factor | FUNC '(' expr ')' | '(' expr ')'
    IDENT  := ('x' | 'y') DIGITS          # 1-based coordinate index
    FUNC   := 'sin' | 'cos' | 'tanh' | 'exp'

Numbers are decimals with an optional exponent.  The grammar is kept small on
purpose: every production is Lipschitz-auditable, which is what the model
validation layer relies on.

Evaluation is numpy-vectorized: coordinates are read off the last axis of the
``x`` and ``y`` arrays and every node evaluates with numpy semantics, so one
compiled expression serves scalars, single states ``(n,)`` and whole path
batches ``(..., n)`` alike.
"""

from __future__ import annotations

import re

import numpy as np


class DriftExprError(ValueError):
    """Base class for expression-language failures."""


class DriftSyntaxError(DriftExprError):
    """Malformed source text; carries the 0-based ``position`` of the fault."""

    def __init__(self, message, position):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class DriftNameError(DriftExprError):
    """Identifier that is neither a coordinate nor a known function."""


class DriftArityError(DriftExprError):
    """Coordinate index outside 1..n."""


_FUNCS = {"sin": np.sin, "cos": np.cos, "tanh": np.tanh, "exp": np.exp}

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/()])
    """,
    re.VERBOSE,
)

_IDENT_RE = re.compile(r"^([xy])(\d+)$")


def _tokenize(source):
    tokens = []
    pos = 0
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        if m is None:
            raise DriftSyntaxError(f"unexpected character {source[pos]!r}", pos)
        if m.lastgroup != "ws":
            tokens.append((m.lastgroup, m.group(), pos))
        pos = m.end()
    tokens.append(("end", "", len(source)))
    return tokens


class _Parser:
    """Recursive-descent parser producing a tuple AST.

    Nodes: ('num', v) | ('var', 'x'|'y', index) | ('neg', a)
         | ('bin', op, a, b) | ('call', name, a)
    """

    def __init__(self, source):
        self.source = source
        self.tokens = _tokenize(source)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def advance(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect_op(self, op):
        kind, text, pos = self.peek()
        if kind != "op" or text != op:
            raise DriftSyntaxError(f"expected {op!r}", pos)
        self.advance()

    def parse(self):
        node = self.expr()
        kind, text, pos = self.peek()
        if kind != "end":
            raise DriftSyntaxError(f"trailing input {text!r}", pos)
        return node

    def expr(self):
        node = self.term()
        while True:
            kind, text, _ = self.peek()
            if kind == "op" and text in "+-":
                self.advance()
                node = ("bin", text, node, self.term())
            else:
                return node

    def term(self):
        node = self.factor()
        while True:
            kind, text, _ = self.peek()
            if kind == "op" and text in "*/":
                self.advance()
                node = ("bin", text, node, self.factor())
            else:
                return node

    def factor(self):
        kind, text, pos = self.advance()
        if kind == "num":
            return ("num", float(text))
        if kind == "op" and text == "-":
            return ("neg", self.factor())
        if kind == "op" and text == "(":
            node = self.expr()
            self.expect_op(")")
            return node
        if kind == "name":
            ident = _IDENT_RE.match(text)
            if ident:
                return ("var", ident.group(1), int(ident.group(2)))
            if text in _FUNCS:
                self.expect_op("(")
                node = self.expr()
                self.expect_op(")")
                return ("call", text, node)
            raise DriftNameError(f"unknown identifier {text!r} (at position {pos})")
        raise DriftSyntaxError(f"unexpected token {text!r}" if text else "unexpected end of input", pos)


def parse_expression(source):
    """Parse one component expression into an AST."""
    return _Parser(source).parse()


def check_arity(ast, n):
    """Ensure every coordinate index in ``ast`` lies in 1..n."""
    kind = ast[0]
    if kind == "var":
        idx = ast[2]
        if not 1 <= idx <= n:
            raise DriftArityError(
                f"coordinate {ast[1]}{idx} out of range for dimension n={n}"
            )
    elif kind == "neg":
        check_arity(ast[1], n)
    elif kind == "bin":
        check_arity(ast[2], n)
        check_arity(ast[3], n)
    elif kind == "call":
        check_arity(ast[2], n)


def references_y(ast):
    kind = ast[0]
    if kind == "var":
        return ast[1] == "y"
    if kind == "neg":
        return references_y(ast[1])
    if kind == "bin":
        return references_y(ast[2]) or references_y(ast[3])
    if kind == "call":
        return references_y(ast[2])
    return False


def eval_ast(ast, x, y):
    """Evaluate a node against coordinate arrays ``x``, ``y`` of shape (..., n)."""
    kind = ast[0]
    if kind == "num":
        return ast[1]
    if kind == "var":
        base = x if ast[1] == "x" else y
        return base[..., ast[2] - 1]
    if kind == "neg":
        return -eval_ast(ast[1], x, y)
    if kind == "bin":
        a = eval_ast(ast[2], x, y)
        b = eval_ast(ast[3], x, y)
        op = ast[1]
        with np.errstate(divide="ignore", invalid="ignore"):
            if op == "+":
                return a + b
            if op == "-":
                return a - b
            if op == "*":
                return a * b
            return np.divide(a, b)
    return _FUNCS[ast[1]](eval_ast(ast[2], x, y))


def compile_components(sources, n):
    """Parse component expressions and return a vectorized (x, y) -> (..., n) map.

    Raises DriftSyntaxError / DriftNameError / DriftArityError on bad input.
    """
    asts = []
    for src in sources:
        ast = parse_expression(src)
        check_arity(ast, n)
        asts.append(ast)
    if len(asts) != n:
        raise DriftArityError(f"{len(asts)} component expressions for dimension n={n}")
    depends_y = any(references_y(a) for a in asts)

    def evaluate(x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        shape = x[..., 0].shape
        cols = [np.broadcast_to(np.asarray(eval_ast(a, x, y), dtype=float), shape) for a in asts]
        return np.stack(cols, axis=-1)

    return evaluate, depends_y
