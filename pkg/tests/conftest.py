import itertools

import numpy as np
import pytest
from hypothesis import strategies as st

from slre.logic import FALSE, TRUE, And, Const, Implies, Not, Or, Var, eliminate_implications, to_nnf
from slre.ontology import Ontology, parse_ontology
from slre.statespace import StateDistribution

TOY_SCHEMA = "entities Person, Location; relations Kill(Person,Person), LivesIn(Person,Location);"

FIXTURE_4x5 = """
entities Person, Organization, Location, Facility;
relations Kill(Person, Person), Kill(Organization, Person),
          LivesIn(Person, Location),
          WorksFor(Person, Organization), WorksFor(Person, Facility),
          LocatedIn(Organization, Location), LocatedIn(Facility, Location),
          Owns(Organization, Facility);
"""


@pytest.fixture
def toy() -> Ontology:
    return parse_ontology(TOY_SCHEMA)


@pytest.fixture
def oswald(toy) -> StateDistribution:
    # subject (Per, Loc), relation (Kill, LivesIn), object (Per, Loc)
    return StateDistribution.for_ontology(toy, [0.3, 0.7], [0.6, 0.4], [0.1, 0.9])


# -- independent oracles ---------------------------------------------------------

def truth(f, a) -> bool:
    """Truth-table semantics written independently of slre.logic.evaluate."""
    kind = type(f).__name__
    if kind == "Var":
        return a[f.name]
    if kind == "Const":
        return f.value
    if kind == "Not":
        return not truth(f.child, a)
    if kind == "And":
        return all(truth(c, a) for c in f.children)
    if kind == "Or":
        return any(truth(c, a) for c in f.children)
    return (not truth(f.left, a)) or truth(f.right, a)


def brute_wmc(f, names, pos, neg) -> float:
    """Sum over all assignments of the product of literal weights, for satisfying ones."""
    total = 0.0
    for bits in itertools.product((False, True), repeat=len(names)):
        a = dict(zip(names, bits))
        if truth(f, a):
            w = 1.0
            for i, b in enumerate(bits):
                w *= pos[i] if b else neg[i]
            total += w
    return total


# -- random structures -------------------------------------------------------------

def random_formula(rng: np.random.Generator, names, depth: int = 4):
    if depth == 0 or rng.random() < 0.25:
        if rng.random() < 0.05:
            return Const(bool(rng.integers(2)))
        return Var(str(rng.choice(names)))
    k = rng.integers(5)
    if k == 0:
        return Not(random_formula(rng, names, depth - 1))
    if k == 1:
        return Implies(random_formula(rng, names, depth - 1), random_formula(rng, names, depth - 1))
    kids = tuple(random_formula(rng, names, depth - 1) for _ in range(rng.integers(1, 4)))
    return And(kids) if k == 2 else Or(kids)


def random_ontology(rng: np.random.Generator, max_e: int = 4, max_r: int = 4, none: bool = False) -> Ontology:
    ents = [f"E{i}" for i in range(rng.integers(1, max_e + 1))]
    rels = [f"R{i}" for i in range(rng.integers(1, max_r + 1))]
    permitted = {(r, s, o) for r in rels for s in ents for o in ents if rng.random() < 0.3}
    if none or not permitted:
        rels.append("None_")
        permitted |= {("None_", s, o) for s in ents for o in ents}
        return Ontology(ents, rels, permitted, "None_")
    return Ontology(ents, rels, permitted)


def random_distribution(rng: np.random.Generator, o: Ontology, zeros: bool = False) -> StateDistribution:
    def vec(n):
        v = rng.dirichlet(np.ones(n))
        if zeros and n > 1 and rng.random() < 0.3:
            v[rng.integers(n)] = 0.0
            v = v / v.sum()
        return v
    return StateDistribution.for_ontology(o, vec(o.n_entities), vec(o.n_relations), vec(o.n_entities))


NAMES = [f"x{i}" for i in range(6)]


def formulas(names=NAMES, max_leaves: int = 12):
    leaves = st.one_of(st.sampled_from(names).map(Var), st.booleans().map(Const))
    return st.recursive(
        leaves,
        lambda kids: st.one_of(
            kids.map(Not),
            st.lists(kids, min_size=1, max_size=3).map(lambda c: And(tuple(c))),
            st.lists(kids, min_size=1, max_size=3).map(lambda c: Or(tuple(c))),
            st.tuples(kids, kids).map(lambda p: Implies(*p)),
        ),
        max_leaves=max_leaves,
    )


# -- logically equivalent rewritings ------------------------------------------------

def _map(f, fn):
    """Bottom-up rebuild applying ``fn`` to every node."""
    if isinstance(f, Not):
        f = Not(_map(f.child, fn))
    elif isinstance(f, And):
        f = And(tuple(_map(c, fn) for c in f.children))
    elif isinstance(f, Or):
        f = Or(tuple(_map(c, fn) for c in f.children))
    elif isinstance(f, Implies):
        f = Implies(_map(f.left, fn), _map(f.right, fn))
    return fn(f)


def _mirror(f):
    if isinstance(f, (And, Or)):
        return type(f)(tuple(reversed(f.children)))
    return f


def _rotate(f):
    if isinstance(f, (And, Or)) and len(f.children) > 1:
        return type(f)(f.children[1:] + f.children[:1])
    return f


def _nest_left(f):
    if isinstance(f, (And, Or)) and len(f.children) > 2:
        acc = f.children[0]
        for c in f.children[1:]:
            acc = type(f)((acc, c))
        return acc
    return f


def _nest_right(f):
    if isinstance(f, (And, Or)) and len(f.children) > 2:
        acc = f.children[-1]
        for c in reversed(f.children[:-1]):
            acc = type(f)((c, acc))
        return acc
    return f


def _impl_to_or(f):
    return Or((Not(f.left), f.right)) if isinstance(f, Implies) else f


def _contrapositive(f):
    return Implies(Not(f.right), Not(f.left)) if isinstance(f, Implies) else f


def _impl_as_nand(f):
    return Not(And((f.left, Not(f.right)))) if isinstance(f, Implies) else f


def _or_de_morgan(f):
    return Not(And(tuple(Not(c) for c in f.children))) if isinstance(f, Or) else f


def _and_de_morgan(f):
    return Not(Or(tuple(Not(c) for c in f.children))) if isinstance(f, And) else f


def _double_neg_vars(f):
    return Not(Not(f)) if isinstance(f, Var) else f


def _dup_children(f):
    if isinstance(f, (And, Or)):
        return type(f)(f.children + f.children[:1])
    return f


def _atmost_as_impl(f):
    # (!a | !b) -> (a => !b)
    if (isinstance(f, Or) and len(f.children) == 2
            and all(isinstance(c, Not) and isinstance(c.child, Var) for c in f.children)):
        return Implies(f.children[0].child, f.children[1])
    return f


def equivalent_rewritings(f, order):
    """At least twenty (formula, variable order) pairs logically equivalent to ``f``."""
    forms = [
        f,
        eliminate_implications(f),
        to_nnf(f),
        Not(to_nnf(f, negate=True)),
        Not(Not(f)),
        _map(f, _mirror),
        _map(f, _rotate),
        _map(f, _nest_left),
        _map(f, _nest_right),
        _map(f, _impl_to_or),
        _map(f, _contrapositive),
        _map(f, _impl_as_nand),
        _map(f, _or_de_morgan),
        _map(f, _and_de_morgan),
        _map(f, _double_neg_vars),
        _map(f, _dup_children),
        _map(f, _atmost_as_impl),
        And((f, TRUE)),
        Or((f, FALSE)),
        And((f, f)),
        to_nnf(_map(_map(f, _contrapositive), _mirror)),
        _map(_map(f, _nest_right), _or_de_morgan),
    ]
    pairs = [(g, list(order)) for g in forms]
    pairs.append((f, list(reversed(order))))
    pairs.append((_map(f, _mirror), sorted(order)))
    return pairs


# -- end-to-end objective ------------------------------------------------------------

def random_instance(rng, o, f=5, g=4, gold=True):
    from slre.model import Instance
    from slre.statespace import State
    state = None
    if gold:
        state = State(int(rng.integers(o.n_entities)), int(rng.integers(o.n_relations)),
                      int(rng.integers(o.n_entities)))
    return Instance(rng.standard_normal(f), rng.standard_normal(f), rng.standard_normal(g), state)


def composite_objective(params, instance, circuit, o, weight):
    """CE on the three heads plus ``weight`` times the semantic loss, and its parameter gradient."""
    from slre.losses import cross_entropy, semantic_loss
    from slre.model import backward, forward
    d = forward(params, instance)
    value, upstream = 0.0, []
    for probs, gold in zip((d.subject_probs, d.relation_probs, d.object_probs), instance.gold):
        ce = cross_entropy(probs, gold)
        value += ce.value
        upstream.append(ce.grad[0])
    if weight:
        sl = semantic_loss(circuit, d, o)
        value += weight * sl.value
        upstream = [u + weight * g for u, g in zip(upstream, sl.grad)]
    return value, backward(params, instance, tuple(upstream))
