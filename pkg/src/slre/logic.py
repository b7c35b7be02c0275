"""Propositional formulas: AST, text parser, truth-table semantics and model enumeration.

Grammar (lowest to highest precedence)::

    formula := implies
    implies := or ("=>" implies)?        # right associative
    or      := and ("|" and)*
    and     := unary ("&" unary)*
    unary   := "!" unary | atom
    atom    := IDENT | "true" | "false" | "(" formula ")"
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping, Union

__all__ = [
    "Var", "Not", "And", "Or", "Implies", "Const", "TRUE", "FALSE", "Formula",
    "FormulaSyntaxError", "MissingVariableError", "ModelCapExceeded",
    "parse_formula", "evaluate", "enumerate_models", "variables",
    "to_prefix", "from_prefix", "exactly_one", "eliminate_implications",
    "to_nnf", "conj", "disj",
]


@dataclass(frozen=True)
class Var:
    name: str

    def __post_init__(self):
        if not self.name:
            raise ValueError("variable name must be non-empty")


@dataclass(frozen=True)
class Not:
    child: "Formula"


@dataclass(frozen=True)
class And:
    children: tuple

    def __post_init__(self):
        if len(self.children) < 1:
            raise ValueError("And needs at least one child")


@dataclass(frozen=True)
class Or:
    children: tuple

    def __post_init__(self):
        if len(self.children) < 1:
            raise ValueError("Or needs at least one child")


@dataclass(frozen=True)
class Implies:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Const:
    value: bool


TRUE = Const(True)
FALSE = Const(False)

Formula = Union[Var, Not, And, Or, Implies, Const]


class FormulaSyntaxError(ValueError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at position {position}")
        self.position = position


class MissingVariableError(KeyError):
    pass


class ModelCapExceeded(ValueError):
    pass


def conj(*children: Formula) -> Formula:
    """And over ``children``; a single child is returned unchanged, none gives TRUE."""
    if not children:
        return TRUE
    if len(children) == 1:
        return children[0]
    return And(tuple(children))


def disj(*children: Formula) -> Formula:
    if not children:
        return FALSE
    if len(children) == 1:
        return children[0]
    return Or(tuple(children))


def exactly_one(names: Iterable[str]) -> Formula:
    """At-least-one clause conjoined with pairwise at-most-one clauses."""
    vs = [Var(n) for n in names]
    if not vs:
        return FALSE
    clauses = [disj(*vs)]
    for a, b in itertools.combinations(vs, 2):
        clauses.append(Or((Not(a), Not(b))))
    return conj(*clauses)


# -- variables / evaluation ------------------------------------------------

def variables(f: Formula) -> frozenset:
    out: set = set()
    stack = [f]
    while stack:
        g = stack.pop()
        if isinstance(g, Var):
            out.add(g.name)
        elif isinstance(g, Not):
            stack.append(g.child)
        elif isinstance(g, (And, Or)):
            stack.extend(g.children)
        elif isinstance(g, Implies):
            stack.append(g.left)
            stack.append(g.right)
    return frozenset(out)


def evaluate(f: Formula, assignment: Mapping[str, bool]) -> bool:
    if isinstance(f, Var):
        try:
            return bool(assignment[f.name])
        except KeyError:
            raise MissingVariableError(f.name) from None
    if isinstance(f, Const):
        return f.value
    if isinstance(f, Not):
        return not evaluate(f.child, assignment)
    if isinstance(f, And):
        return all(evaluate(c, assignment) for c in f.children)
    if isinstance(f, Or):
        return any(evaluate(c, assignment) for c in f.children)
    if isinstance(f, Implies):
        return (not evaluate(f.left, assignment)) or evaluate(f.right, assignment)
    raise TypeError(f"not a formula: {f!r}")


def enumerate_models(f: Formula, over: Iterable[str] | None = None,
                     cap: int = 24) -> list[dict[str, bool]]:
    """All satisfying assignments of ``f`` over ``vars(f) | over``.

    Variables are sorted by name; assignments come out in lexicographic order
    with False before True, first variable most significant.
    """
    names = sorted(variables(f) | set(over or ()))
    if len(names) > cap:
        raise ModelCapExceeded(f"{len(names)} variables exceeds cap {cap}")
    models = []
    for values in itertools.product((False, True), repeat=len(names)):
        a = dict(zip(names, values))
        if evaluate(f, a):
            models.append(a)
    return models


# -- rewrites --------------------------------------------------------------

def eliminate_implications(f: Formula) -> Formula:
    if isinstance(f, (Var, Const)):
        return f
    if isinstance(f, Not):
        return Not(eliminate_implications(f.child))
    if isinstance(f, And):
        return And(tuple(eliminate_implications(c) for c in f.children))
    if isinstance(f, Or):
        return Or(tuple(eliminate_implications(c) for c in f.children))
    if isinstance(f, Implies):
        return Or((Not(eliminate_implications(f.left)), eliminate_implications(f.right)))
    raise TypeError(f"not a formula: {f!r}")


def to_nnf(f: Formula, negate: bool = False) -> Formula:
    """Negation normal form via De Morgan; implications are eliminated on the way."""
    if isinstance(f, Var):
        return Not(f) if negate else f
    if isinstance(f, Const):
        return Const(f.value != negate)
    if isinstance(f, Not):
        return to_nnf(f.child, not negate)
    if isinstance(f, Implies):
        return to_nnf(Or((Not(f.left), f.right)), negate)
    if isinstance(f, And):
        kids = tuple(to_nnf(c, negate) for c in f.children)
        return Or(kids) if negate else And(kids)
    if isinstance(f, Or):
        kids = tuple(to_nnf(c, negate) for c in f.children)
        return And(kids) if negate else Or(kids)
    raise TypeError(f"not a formula: {f!r}")


# -- text parser -----------------------------------------------------------

_TOKEN = re.compile(r"\s*(?:(=>)|([|&!()])|([A-Za-z_][A-Za-z0-9_]*))")


def _tokenize(text: str) -> list[tuple[str, int]]:
    tokens = []
    pos = 0
    while True:
        while pos < len(text) and text[pos].isspace():
            pos += 1
        if pos >= len(text):
            break
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise FormulaSyntaxError(f"unexpected character {text[pos]!r}", pos)
        start = m.start(m.lastindex)
        tokens.append((m.group(m.lastindex), start))
        pos = m.end()
    tokens.append(("", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self) -> str:
        return self.tokens[self.i][0]

    def take(self) -> tuple[str, int]:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, tok: str) -> None:
        got, pos = self.take()
        if got != tok:
            raise FormulaSyntaxError(f"expected {tok!r}, got {got or 'end of input'!r}", pos)

    def formula(self) -> Formula:
        left = self.disjunction()
        if self.peek() == "=>":
            self.take()
            return Implies(left, self.formula())
        return left

    def disjunction(self) -> Formula:
        kids = [self.conjunction()]
        while self.peek() == "|":
            self.take()
            kids.append(self.conjunction())
        return kids[0] if len(kids) == 1 else Or(tuple(kids))

    def conjunction(self) -> Formula:
        kids = [self.unary()]
        while self.peek() == "&":
            self.take()
            kids.append(self.unary())
        return kids[0] if len(kids) == 1 else And(tuple(kids))

    def unary(self) -> Formula:
        if self.peek() == "!":
            self.take()
            return Not(self.unary())
        return self.atom()

    def atom(self) -> Formula:
        tok, pos = self.take()
        if tok == "(":
            f = self.formula()
            self.expect(")")
            return f
        if tok == "true":
            return TRUE
        if tok == "false":
            return FALSE
        if tok and (tok[0].isalpha() or tok[0] == "_"):
            return Var(tok)
        raise FormulaSyntaxError(f"unexpected {tok or 'end of input'!r}", pos)


def parse_formula(text: str) -> Formula:
    p = _Parser(text)
    f = p.formula()
    tok, pos = p.take()
    if tok:
        raise FormulaSyntaxError(f"trailing input {tok!r}", pos)
    return f


# -- canonical prefix notation ---------------------------------------------

def to_prefix(f: Formula) -> str:
    """``(and a (or b (not c)))`` style rendering used by fixtures."""
    if isinstance(f, Var):
        return f.name
    if isinstance(f, Const):
        return "true" if f.value else "false"
    if isinstance(f, Not):
        return f"(not {to_prefix(f.child)})"
    if isinstance(f, And):
        return "(and " + " ".join(to_prefix(c) for c in f.children) + ")"
    if isinstance(f, Or):
        return "(or " + " ".join(to_prefix(c) for c in f.children) + ")"
    if isinstance(f, Implies):
        return f"(=> {to_prefix(f.left)} {to_prefix(f.right)})"
    raise TypeError(f"not a formula: {f!r}")


_PREFIX_TOKEN = re.compile(r"\(|\)|[^\s()]+")


def from_prefix(text: str) -> Formula:
    tokens = _PREFIX_TOKEN.findall(text)
    it: Iterator[str] = iter(tokens)

    def read(tok: str) -> Formula:
        if tok == "(":
            op = next(it)
            args = []
            for t in it:
                if t == ")":
                    break
                args.append(read(t))
            else:
                raise ValueError("unbalanced parentheses")
            if op == "not" and len(args) == 1:
                return Not(args[0])
            if op == "and":
                return And(tuple(args))
            if op == "or":
                return Or(tuple(args))
            if op == "=>" and len(args) == 2:
                return Implies(args[0], args[1])
            raise ValueError(f"bad operator {op!r} with {len(args)} args")
        if tok == ")":
            raise ValueError("unexpected ')'")
        if tok == "true":
            return TRUE
        if tok == "false":
            return FALSE
        return Var(tok)

    try:
        f = read(next(it))
    except StopIteration:
        raise ValueError("empty or truncated prefix formula") from None
    if next(it, None) is not None:
        raise ValueError("trailing tokens in prefix formula")
    return f
