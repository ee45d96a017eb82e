"""Propositional formulas: syntax tree, parser, renderer, and evaluation.

Grammar (lowest precedence first, ``->`` right-associative, ``&``/``|``
left-associative, ``~`` binds tightest)::

    formula  :=  or_expr ('->' formula)?
    or_expr  :=  and_expr ('|' and_expr)*
    and_expr :=  unary ('&' unary)*
    unary    :=  '~' unary | ident | 'true' | 'false' | '(' formula ')'

Identifiers match ``[a-zA-Z_][a-zA-Z0-9_']*``; ``true`` and ``false`` are
reserved constants and never atoms. ``render`` emits minimal parentheses and
``parse_formula(render(f))`` reconstructs ``f`` exactly.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

IDENT_RE = re.compile(r"[a-zA-Z_][a-zA-Z0-9_']*")
RESERVED = ("true", "false")


class ParseError(ValueError):
    """Malformed input; ``position`` is the 1-based offset of the failure."""

    def __init__(self, message: str, position: int, expected: str = ""):
        detail = f"{message} at position {position}"
        if expected:
            detail += f" (expected {expected})"
        super().__init__(detail)
        self.position = position
        self.expected = expected


@dataclass(frozen=True, slots=True)
class Formula:
    """Base class; concrete nodes are Atom, Const, Not, And, Or, Implies."""


@dataclass(frozen=True, slots=True)
class Atom(Formula):
    name: str

    def __post_init__(self):
        if not IDENT_RE.fullmatch(self.name) or self.name in RESERVED:
            raise ValueError(f"invalid atom name: {self.name!r}")


@dataclass(frozen=True, slots=True)
class Const(Formula):
    value: bool


@dataclass(frozen=True, slots=True)
class Not(Formula):
    operand: Formula


@dataclass(frozen=True, slots=True)
class And(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True, slots=True)
class Or(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True, slots=True)
class Implies(Formula):
    left: Formula
    right: Formula


TRUE = Const(True)
FALSE = Const(False)


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<ident>[a-zA-Z_][a-zA-Z0-9_']*)|(?P<imp>->)|(?P<op>[~&|()]))"
)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    """Returns (kind, text, 1-based position) triples, ending with an EOF token."""
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            stripped = text[pos:].lstrip()
            if not stripped:
                break
            at = len(text) - len(stripped) + 1
            raise ParseError(f"unexpected character {stripped[0]!r}", at)
        if m.group("ident"):
            word = m.group("ident")
            kind = word if word in RESERVED else "ident"
            tokens.append((kind, word, m.start("ident") + 1))
        elif m.group("imp"):
            tokens.append(("->", "->", m.start("imp") + 1))
        else:
            op = m.group("op")
            tokens.append((op, op, m.start("op") + 1))
        pos = m.end()
    tokens.append(("eof", "", len(text) + 1))
    return tokens


class _Parser:
    def __init__(self, tokens: list[tuple[str, str, int]]):
        self.tokens = tokens
        self.i = 0

    def peek(self) -> tuple[str, str, int]:
        return self.tokens[self.i]

    def advance(self) -> tuple[str, str, int]:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, kind: str) -> tuple[str, str, int]:
        tok = self.peek()
        if tok[0] != kind:
            got = tok[1] or "end of input"
            raise ParseError(f"unexpected {got!r}", tok[2], expected=repr(kind))
        return self.advance()

    def formula(self) -> Formula:
        left = self.or_expr()
        if self.peek()[0] == "->":
            self.advance()
            return Implies(left, self.formula())
        return left

    def or_expr(self) -> Formula:
        node = self.and_expr()
        while self.peek()[0] == "|":
            self.advance()
            node = Or(node, self.and_expr())
        return node

    def and_expr(self) -> Formula:
        node = self.unary()
        while self.peek()[0] == "&":
            self.advance()
            node = And(node, self.unary())
        return node

    def unary(self) -> Formula:
        kind, text, pos = self.peek()
        if kind == "~":
            self.advance()
            return Not(self.unary())
        if kind == "ident":
            self.advance()
            return Atom(text)
        if kind == "true":
            self.advance()
            return TRUE
        if kind == "false":
            self.advance()
            return FALSE
        if kind == "(":
            self.advance()
            inner = self.formula()
            self.expect(")")
            return inner
        got = text or "end of input"
        raise ParseError(f"unexpected {got!r}", pos, expected="a formula")


def parse_formula(text: str) -> Formula:
    parser = _Parser(_tokenize(text))
    node = parser.formula()
    kind, tok, pos = parser.peek()
    if kind != "eof":
        raise ParseError(f"trailing input {tok!r}", pos, expected="end of input")
    return node


# ---------------------------------------------------------------------------
# Rendering and inspection
# ---------------------------------------------------------------------------

# Precedence levels used for minimal parenthesisation.
_PREC_IMP, _PREC_OR, _PREC_AND, _PREC_UNARY = 1, 2, 3, 4


def _prec(f: Formula) -> int:
    if isinstance(f, Implies):
        return _PREC_IMP
    if isinstance(f, Or):
        return _PREC_OR
    if isinstance(f, And):
        return _PREC_AND
    return _PREC_UNARY


def _render_at(f: Formula, min_prec: int) -> str:
    text = _render(f)
    if _prec(f) < min_prec:
        return f"({text})"
    return text


def _render(f: Formula) -> str:
    if isinstance(f, Atom):
        return f.name
    if isinstance(f, Const):
        return "true" if f.value else "false"
    if isinstance(f, Not):
        return "~" + _render_at(f.operand, _PREC_UNARY)
    if isinstance(f, And):
        return f"{_render_at(f.left, _PREC_AND)} & {_render_at(f.right, _PREC_AND + 1)}"
    if isinstance(f, Or):
        return f"{_render_at(f.left, _PREC_OR)} | {_render_at(f.right, _PREC_OR + 1)}"
    if isinstance(f, Implies):
        return f"{_render_at(f.left, _PREC_IMP + 1)} -> {_render_at(f.right, _PREC_IMP)}"
    raise TypeError(f"not a formula: {f!r}")


def render(f: Formula) -> str:
    """Minimal-parenthesis text form; reparses to a structurally equal tree."""
    return _render(f)


def atoms(f: Formula) -> frozenset[str]:
    if isinstance(f, Atom):
        return frozenset((f.name,))
    if isinstance(f, Const):
        return frozenset()
    if isinstance(f, Not):
        return atoms(f.operand)
    return atoms(f.left) | atoms(f.right)  # type: ignore[union-attr]


def evaluate(f: Formula, assignment: dict[str, bool]) -> bool:
    """Truth value under a total assignment of the formula's atoms."""
    if isinstance(f, Atom):
        return assignment[f.name]
    if isinstance(f, Const):
        return f.value
    if isinstance(f, Not):
        return not evaluate(f.operand, assignment)
    if isinstance(f, And):
        return evaluate(f.left, assignment) and evaluate(f.right, assignment)
    if isinstance(f, Or):
        return evaluate(f.left, assignment) or evaluate(f.right, assignment)
    if isinstance(f, Implies):
        return (not evaluate(f.left, assignment)) or evaluate(f.right, assignment)
    raise TypeError(f"not a formula: {f!r}")


def fold_constants(f: Formula) -> Formula:
    """Boolean-constant simplification, bottom-up to fixpoint.

    Rewrites (both operand orders for the commutative connectives):
    A&true->A, A&false->false, A|true->true, A|false->A, ~true->false,
    ~false->true, true->A -> A, A->true -> true, false->A -> true.
    """
    if isinstance(f, (Atom, Const)):
        return f
    if isinstance(f, Not):
        inner = fold_constants(f.operand)
        if inner == TRUE:
            return FALSE
        if inner == FALSE:
            return TRUE
        return Not(inner)
    left = fold_constants(f.left)  # type: ignore[union-attr]
    right = fold_constants(f.right)  # type: ignore[union-attr]
    if isinstance(f, And):
        if left == FALSE or right == FALSE:
            return FALSE
        if left == TRUE:
            return right
        if right == TRUE:
            return left
        return And(left, right)
    if isinstance(f, Or):
        if left == TRUE or right == TRUE:
            return TRUE
        if left == FALSE:
            return right
        if right == FALSE:
            return left
        return Or(left, right)
    if isinstance(f, Implies):
        if left == FALSE or right == TRUE:
            return TRUE
        if left == TRUE:
            return right
        return Implies(left, right)
    raise TypeError(f"not a formula: {f!r}")
