"""Expression trees over {+, -, *, protected /} and the inputs x1..x8.

Random trees drawn here feed both the semantic engine (initial population,
mutation perturbations) and the standard tree-GP baseline. Constant leaves
and sigmoid wrapper nodes never occur in randomly generated trees; they
exist so lineage expansion can spell out crossover/mutation arithmetic as
a literal expression.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from random import Random

import numpy as np

FUNCTIONS = ("add", "sub", "mul", "div")
N_VARS = 8
DIV_EPS = 1e-6  # |denominator| below this makes protected division return 1.0

_OP_SYMBOL = {"add": "+", "sub": "-", "mul": "*", "div": "/p"}
_SYMBOL_OP = {v: k for k, v in _OP_SYMBOL.items()}


class ParseError(ValueError):
    """Unparseable expression text."""


@dataclass(frozen=True, slots=True)
class ExprTree:
    """Immutable expression node.

    kind is one of 'add', 'sub', 'mul', 'div' (binary), 'var' (leaf,
    1-based index), 'const' (leaf, value) or 'sigmoid' (unary).
    """

    kind: str
    index: int = 0
    value: float = 0.0
    children: tuple["ExprTree", ...] = ()

    def __post_init__(self):
        if self.kind in FUNCTIONS:
            if len(self.children) != 2:
                raise ValueError(f"{self.kind} node needs 2 children")
        elif self.kind == "sigmoid":
            if len(self.children) != 1:
                raise ValueError("sigmoid node needs exactly 1 child")
        elif self.kind == "var":
            if self.children:
                raise ValueError("variable leaves have no children")
            if not 1 <= self.index <= N_VARS:
                raise ValueError(f"variable index must be in 1..{N_VARS}, got {self.index}")
        elif self.kind == "const":
            if self.children:
                raise ValueError("constant leaves have no children")
            if not math.isfinite(self.value):
                raise ValueError(f"constant must be finite, got {self.value!r}")
        else:
            raise ValueError(f"unknown node kind {self.kind!r}")


def variable(i: int) -> ExprTree:
    return ExprTree("var", index=i)


def constant(v: float) -> ExprTree:
    return ExprTree("const", value=float(v))


def binop(op: str, left: ExprTree, right: ExprTree) -> ExprTree:
    return ExprTree(op, children=(left, right))


def sigmoid_node(child: ExprTree) -> ExprTree:
    return ExprTree("sigmoid", children=(child,))


def sigmoid(v: np.ndarray) -> np.ndarray:
    """Numerically stable logistic map 1 / (1 + e^(-v)); output in [0, 1]."""
    v = np.asarray(v, dtype=float)
    out = np.empty_like(v)
    pos = v >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-v[pos]))
    ev = np.exp(v[~pos])
    out[~pos] = ev / (1.0 + ev)
    return out


def eval_tree(t: ExprTree, x) -> float:
    """Evaluate one tree on a single 8-feature row."""
    if t.kind == "var":
        return float(x[t.index - 1])
    if t.kind == "const":
        return t.value
    if t.kind == "sigmoid":
        v = eval_tree(t.children[0], x)
        if v >= 0:
            return 1.0 / (1.0 + math.exp(-v))
        ev = math.exp(v)
        return ev / (1.0 + ev)
    a = eval_tree(t.children[0], x)
    b = eval_tree(t.children[1], x)
    if t.kind == "add":
        return a + b
    if t.kind == "sub":
        return a - b
    if t.kind == "mul":
        return a * b
    return a / b if abs(b) >= DIV_EPS else 1.0


def eval_matrix(t: ExprTree, X: np.ndarray) -> np.ndarray:
    """Evaluate one tree on every row of an (n, 8) feature matrix."""
    if t.kind == "var":
        return X[:, t.index - 1]
    if t.kind == "const":
        return np.full(X.shape[0], t.value)
    if t.kind == "sigmoid":
        return sigmoid(eval_matrix(t.children[0], X))
    a = eval_matrix(t.children[0], X)
    b = eval_matrix(t.children[1], X)
    if t.kind == "add":
        return a + b
    if t.kind == "sub":
        return a - b
    if t.kind == "mul":
        return a * b
    out = np.ones_like(b)
    ok = np.abs(b) >= DIV_EPS
    np.divide(a, b, out=out, where=ok)
    return out


@dataclass(frozen=True)
class GenMethod:
    """Tree generation recipe: 'full' or 'grow' up to max_depth levels."""

    method: str
    max_depth: int

    def __post_init__(self):
        if self.method not in ("full", "grow"):
            raise ValueError(f"method must be 'full' or 'grow', got {self.method!r}")
        if self.max_depth < 1:
            raise ValueError(f"max_depth must be >= 1, got {self.max_depth}")


def random_tree(
    rng: Random, gen: GenMethod, force_root_function: bool = False
) -> ExprTree:
    """Draw a random tree; a leaf counts as depth 1.

    Draws happen in preorder. 'full' branches at every node above the last
    level, so all leaves sit at exactly max_depth. 'grow' picks uniformly
    over the 12 primitives (4 functions, 8 variables) at every node, root
    included, so shapes vary and a tree may be a single leaf. With
    force_root_function a grow tree keeps a function at the root whenever
    max_depth allows — a single-leaf perturbation tree squashes to a
    near-constant, which would make a mutation step a pure offset.
    """

    def leaf() -> ExprTree:
        return variable(rng.randrange(N_VARS) + 1)

    def branch(depth_left: int) -> ExprTree:
        op = FUNCTIONS[rng.randrange(len(FUNCTIONS))]
        return binop(op, build(depth_left - 1), build(depth_left - 1))

    def build(depth_left: int) -> ExprTree:
        if depth_left == 1:
            return leaf()
        if gen.method == "full":
            return branch(depth_left)
        pick = rng.randrange(len(FUNCTIONS) + N_VARS)
        if pick < len(FUNCTIONS):
            return binop(FUNCTIONS[pick], build(depth_left - 1), build(depth_left - 1))
        return variable(pick - len(FUNCTIONS) + 1)

    if gen.max_depth == 1:
        return leaf()
    if gen.method == "full" or force_root_function:
        return branch(gen.max_depth)
    return build(gen.max_depth)


def ramped_half_and_half(
    rng: Random, count: int, min_depth: int = 2, max_depth: int = 6
) -> list[ExprTree]:
    """Generate `count` trees cycling depths min..max, half full, half grow."""
    schedule = [
        GenMethod(method, depth)
        for depth in range(min_depth, max_depth + 1)
        for method in ("full", "grow")
    ]
    return [random_tree(rng, schedule[i % len(schedule)]) for i in range(count)]


def tree_size(t: ExprTree) -> int:
    """Total node count."""
    return 1 + sum(tree_size(c) for c in t.children)


def tree_depth(t: ExprTree) -> int:
    """Longest root-to-leaf path, counted in nodes (a leaf has depth 1)."""
    if not t.children:
        return 1
    return 1 + max(tree_depth(c) for c in t.children)


def to_infix(t: ExprTree) -> str:
    """Fully parenthesized infix text; '/p' marks protected division."""
    if t.kind == "var":
        return f"x{t.index}"
    if t.kind == "const":
        return repr(t.value)
    if t.kind == "sigmoid":
        return f"sigmoid({to_infix(t.children[0])})"
    left, right = t.children
    return f"({to_infix(left)} {_OP_SYMBOL[t.kind]} {to_infix(right)})"


_TOKEN_RE = re.compile(
    r"\(|\)|\+|/p|\*|-|sigmoid|x\d+|(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?"
)


def _tokenize(text: str) -> list[str]:
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos].isspace():
            pos += 1
            continue
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r} at position {pos}")
        tokens.append(m.group())
        pos = m.end()
    return tokens


_NUMBER_RE = re.compile(r"(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?$")


def parse_infix(text: str) -> ExprTree:
    """Parse the to_infix format back into a tree; inverse of to_infix."""
    tokens = _tokenize(text)
    pos = 0

    def peek() -> str | None:
        return tokens[pos] if pos < len(tokens) else None

    def take(expected: str | None = None) -> str:
        nonlocal pos
        if pos >= len(tokens):
            raise ParseError("unexpected end of expression")
        tok = tokens[pos]
        if expected is not None and tok != expected:
            raise ParseError(f"expected {expected!r}, got {tok!r}")
        pos += 1
        return tok

    def operand() -> ExprTree:
        tok = take()
        if tok == "(":
            left = operand()
            op = take()
            if op not in _SYMBOL_OP:
                raise ParseError(f"expected an operator, got {op!r}")
            right = operand()
            take(")")
            return binop(_SYMBOL_OP[op], left, right)
        if tok == "sigmoid":
            take("(")
            inner = operand()
            take(")")
            return sigmoid_node(inner)
        if tok.startswith("x") and tok != "x":
            try:
                return variable(int(tok[1:]))
            except ValueError as exc:
                raise ParseError(str(exc)) from None
        if tok == "-" and peek() is not None and _NUMBER_RE.match(peek()):
            return constant(-float(take()))
        if _NUMBER_RE.match(tok):
            return constant(float(tok))
        raise ParseError(f"unexpected token {tok!r}")

    tree = operand()
    if pos != len(tokens):
        raise ParseError(f"trailing input starting at {tokens[pos]!r}")
    return tree
