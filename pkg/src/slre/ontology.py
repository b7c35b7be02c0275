"""Entity/relation schemas and their lowering to a propositional constraint.

Schema DSL::

    # comment
    entities Person, Location;
    relations Kill(Person, Person), LivesIn(Person, Location), Other;
    none Other;

A relation may be listed several times with different argument pairs.  A bare
relation name declares a relation with no permitted argument pair.  ``none X;``
marks ``X`` as the no-relation class, which is compatible with every pair.
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Optional

from slre.logic import Formula, Implies, Not, Var, conj, disj, exactly_one

__all__ = [
    "Ontology", "OntologyError", "OntologySyntaxError",
    "parse_ontology", "render", "lower_to_constraint", "relation_clauses",
    "induce_ontology", "relation_var", "subject_var", "object_var",
]


class OntologyError(ValueError):
    pass


class OntologySyntaxError(OntologyError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{message} (line {line}, column {column})")
        self.line = line
        self.column = column


def relation_var(name: str) -> str:
    return f"R_{name}"


def subject_var(name: str) -> str:
    return f"S_{name}"


def object_var(name: str) -> str:
    return f"O_{name}"


@dataclass(frozen=True)
class Ontology:
    entity_types: tuple
    relation_types: tuple
    permitted: frozenset = field(default_factory=frozenset)
    none_relation: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "entity_types", tuple(self.entity_types))
        object.__setattr__(self, "relation_types", tuple(self.relation_types))
        object.__setattr__(self, "permitted", frozenset(self.permitted))
        for kind, names in (("entity", self.entity_types), ("relation", self.relation_types)):
            dup = [n for n, c in Counter(names).items() if c > 1]
            if dup:
                raise OntologyError(f"duplicate {kind} name(s): {', '.join(dup)}")
        ents, rels = set(self.entity_types), set(self.relation_types)
        for rel, s, o in self.permitted:
            if rel not in rels:
                raise OntologyError(f"undeclared relation {rel!r}")
            for t in (s, o):
                if t not in ents:
                    raise OntologyError(f"undeclared entity type {t!r} in {rel}")
        if self.none_relation is not None:
            if self.none_relation not in rels:
                raise OntologyError(f"none relation {self.none_relation!r} is not declared")
            missing = [(s, o) for s in self.entity_types for o in self.entity_types
                       if (self.none_relation, s, o) not in self.permitted]
            if missing:
                raise OntologyError(f"none relation must permit every type pair, missing {missing[0]}")

    @property
    def n_entities(self) -> int:
        return len(self.entity_types)

    @property
    def n_relations(self) -> int:
        return len(self.relation_types)

    def pairs(self, relation: str) -> list[tuple[str, str]]:
        """Permitted (subject, object) pairs of ``relation`` in type-list order."""
        return [(s, o) for s in self.entity_types for o in self.entity_types
                if (relation, s, o) in self.permitted]

    def variables(self) -> list[str]:
        """Boolean indicator names: relations first, then subject types, then object types."""
        return ([relation_var(r) for r in self.relation_types]
                + [subject_var(e) for e in self.entity_types]
                + [object_var(e) for e in self.entity_types])

    def is_permitted(self, subject: str, relation: str, obj: str) -> bool:
        return (relation, subject, obj) in self.permitted


# -- DSL -------------------------------------------------------------------

_LEX = re.compile(r"(?P<ws>[ \t\r\n]+)|(?P<comment>#[^\n]*)|(?P<name>[A-Za-z_][A-Za-z0-9_]*)"
                  r"|(?P<punct>[,;()])")


def _lex(text: str) -> list[tuple[str, str, int, int]]:
    tokens = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _LEX.match(text, pos)
        if not m:
            raise OntologySyntaxError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        if kind in ("name", "punct"):
            tokens.append((kind, m.group(), line, pos - line_start + 1))
        for i, ch in enumerate(m.group()):
            if ch == "\n":
                line += 1
                line_start = pos + i + 1
        pos = m.end()
    tokens.append(("eof", "", line, pos - line_start + 1))
    return tokens


class _DslParser:
    def __init__(self, text: str):
        self.tokens = _lex(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def error(self, message: str, tok) -> OntologySyntaxError:
        return OntologySyntaxError(message, tok[2], tok[3])

    def expect(self, value: str):
        tok = self.take()
        if tok[1] != value or tok[0] == "eof":
            raise self.error(f"expected {value!r}, got {tok[1] or 'end of input'!r}", tok)
        return tok

    def name(self):
        tok = self.take()
        if tok[0] != "name":
            raise self.error(f"expected a name, got {tok[1] or 'end of input'!r}", tok)
        return tok

    def parse(self) -> Ontology:
        self.expect("entities")
        entities = [self.name()]
        while self.peek()[1] == ",":
            self.take()
            entities.append(self.name())
        self.expect(";")

        self.expect("relations")
        decls = []
        if self.peek()[1] != ";":
            decls.append(self.relation())
            while self.peek()[1] == ",":
                self.take()
                decls.append(self.relation())
        self.expect(";")

        none_tok = None
        if self.peek()[1] == "none":
            self.take()
            none_tok = self.name()
            self.expect(";")
        tail = self.peek()
        if tail[0] != "eof":
            raise self.error(f"unexpected {tail[1]!r}", tail)

        seen = set()
        ent_names = []
        for tok in entities:
            if tok[1] in seen:
                raise self.error(f"duplicate entity type {tok[1]!r}", tok)
            seen.add(tok[1])
            ent_names.append(tok[1])

        relations: list[str] = []
        permitted = set()
        for rel_tok, args in decls:
            rel = rel_tok[1]
            if rel not in relations:
                relations.append(rel)
            elif args is None:
                raise self.error(f"duplicate relation {rel!r}", rel_tok)
            if args is None:
                continue
            for tok in args:
                if tok[1] not in seen:
                    raise self.error(f"undeclared entity type {tok[1]!r}", tok)
            triple = (rel, args[0][1], args[1][1])
            if triple in permitted:
                raise self.error(f"duplicate declaration {rel}({triple[1]},{triple[2]})", rel_tok)
            permitted.add(triple)

        none_rel = None
        if none_tok is not None:
            none_rel = none_tok[1]
            if none_rel not in relations:
                relations.append(none_rel)
            permitted |= {(none_rel, s, o) for s in ent_names for o in ent_names}
        return Ontology(tuple(ent_names), tuple(relations), frozenset(permitted), none_rel)

    def relation(self):
        rel = self.name()
        if self.peek()[1] != "(":
            return rel, None
        self.take()
        s = self.name()
        self.expect(",")
        o = self.name()
        self.expect(")")
        return rel, (s, o)


def parse_ontology(text: str) -> Ontology:
    return _DslParser(text).parse()


def render(o: Ontology) -> str:
    """Inverse of :func:`parse_ontology` up to whitespace and comments."""
    decls = []
    for rel in o.relation_types:
        pairs = [] if rel == o.none_relation else o.pairs(rel)
        if not pairs:
            decls.append(rel)
        decls.extend(f"{rel}({s}, {t})" for s, t in pairs)
    lines = [f"entities {', '.join(o.entity_types)};",
             "relations " + ", ".join(decls) + ";" if decls else "relations;"]
    if o.none_relation is not None:
        lines.append(f"none {o.none_relation};")
    return "\n".join(lines) + "\n"


# -- lowering --------------------------------------------------------------

def relation_clauses(o: Ontology) -> Formula:
    """Conjunction of ``R_m => OR_(s,o) (S_s & O_o)`` over relations, without exactly-one groups."""
    clauses = []
    for rel in o.relation_types:
        pairs = o.pairs(rel)
        r = Var(relation_var(rel))
        if not pairs:
            clauses.append(Not(r))
        else:
            clauses.append(Implies(r, disj(*(conj(Var(subject_var(s)), Var(object_var(t)))
                                             for s, t in pairs))))
    return conj(*clauses)


def lower_to_constraint(o: Ontology, exactly_one_groups: bool = True) -> Formula:
    """Boolean constraint whose models are the permitted (subject, relation, object) states.

    With ``exactly_one_groups`` the relation, subject-type and object-type
    indicator families are each constrained to exactly one true variable, so
    models correspond one-to-one to permitted triples.
    """
    body = relation_clauses(o)
    if not exactly_one_groups:
        return body
    groups = [exactly_one(relation_var(r) for r in o.relation_types),
              exactly_one(subject_var(e) for e in o.entity_types),
              exactly_one(object_var(e) for e in o.entity_types)]
    return conj(body, *groups)


def induce_ontology(triples: Iterable[tuple[str, str, str]], threshold: int = 1,
                    entity_types: Optional[Iterable[str]] = None,
                    relation_types: Optional[Iterable[str]] = None,
                    none_relation: Optional[str] = None) -> Ontology:
    """Permit every (subject, relation, object) triple observed at least ``threshold`` times.

    Type vocabularies default to the names seen in ``triples`` in order of
    first appearance.
    """
    if threshold < 1:
        raise ValueError("threshold must be >= 1")
    triples = [tuple(t) for t in triples]
    counts = Counter(triples)

    def ordered(found: Iterable[str]) -> list[str]:
        return list(dict.fromkeys(found))

    ents = list(entity_types) if entity_types is not None else ordered(
        x for s, _, o in triples for x in (s, o))
    rels = list(relation_types) if relation_types is not None else ordered(r for _, r, _ in triples)
    if none_relation is not None and none_relation not in rels:
        rels.append(none_relation)
    permitted = {(r, s, o) for (s, r, o), c in counts.items() if c >= threshold}
    if none_relation is not None:
        permitted |= {(none_relation, s, o) for s in ents for o in ents}
    return Ontology(tuple(ents), tuple(rels), frozenset(permitted), none_relation)
