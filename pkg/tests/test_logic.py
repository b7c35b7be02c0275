import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import NAMES, formulas, random_formula, truth
from slre.logic import (
    FALSE, TRUE, And, FormulaSyntaxError, Implies, MissingVariableError, ModelCapExceeded, Not, Or,
    Var, eliminate_implications, enumerate_models, evaluate, exactly_one, from_prefix,
    parse_formula, to_nnf, to_prefix, variables,
)
from slre.ontology import lower_to_constraint


def model_set(f, over):
    return {tuple(sorted(m.items())) for m in enumerate_models(f, over=over)}


class TestParse:
    def test_toy_rule(self):
        assert parse_formula("Kill => PerS & PerO") == Implies(Var("Kill"), And((Var("PerS"), Var("PerO"))))

    def test_tautology_shape(self):
        assert parse_formula("!a | a") == Or((Not(Var("a")), Var("a")))

    def test_implication_is_right_associative(self):
        assert parse_formula("a => b => c") == parse_formula("a => (b => c)")
        assert parse_formula("a => b => c") == Implies(Var("a"), Implies(Var("b"), Var("c")))

    def test_precedence(self):
        f = parse_formula("!a & b | c => d")
        assert f == Implies(Or((And((Not(Var("a")), Var("b"))), Var("c"))), Var("d"))

    def test_constants_and_whitespace(self):
        assert parse_formula("  true&\n(false)") == And((TRUE, FALSE))

    @pytest.mark.parametrize("text,pos", [("a &", 3), ("(a | b", 6), ("a $ b", 2), ("a b", 2), ("", 0)])
    def test_syntax_errors_carry_position(self, text, pos):
        with pytest.raises(FormulaSyntaxError) as err:
            parse_formula(text)
        assert err.value.position == pos


class TestEvaluate:
    def test_toy_valid_state(self, toy):
        alpha = lower_to_constraint(toy)
        a = {"R_Kill": True, "R_LivesIn": False, "S_Person": True, "S_Location": False,
             "O_Person": True, "O_Location": False}
        assert evaluate(alpha, a)

    def test_contradiction(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            f = random_formula(rng, NAMES)
            for bits in itertools.product((False, True), repeat=len(NAMES)):
                assert not evaluate(And((f, Not(f))), dict(zip(NAMES, bits)))

    def test_matches_independent_truth_table(self):
        names = [f"v{i}" for i in range(8)]
        rng = np.random.default_rng(2)
        for _ in range(10):
            f = random_formula(rng, names, depth=6)
            for bits in itertools.product((False, True), repeat=8):
                a = dict(zip(names, bits))
                assert evaluate(f, a) == truth(f, a)

    def test_missing_variable(self):
        with pytest.raises(MissingVariableError):
            evaluate(parse_formula("a & b"), {"a": True})


class TestEnumerate:
    def test_toy_has_two_models(self, toy):
        assert len(enumerate_models(lower_to_constraint(toy))) == 2

    def test_constants(self):
        assert enumerate_models(FALSE) == []
        assert len(enumerate_models(TRUE, over=["a"])) == 2

    @pytest.mark.parametrize("n", range(1, 7))
    def test_exactly_one_count(self, n):
        assert len(enumerate_models(exactly_one(f"v{i}" for i in range(n)))) == n

    def test_order_is_lexicographic_false_first(self):
        models = enumerate_models(parse_formula("b | a"))
        assert [(m["a"], m["b"]) for m in models] == [(False, True), (True, False), (True, True)]

    def test_cap(self):
        f = And(tuple(Var(f"v{i}") for i in range(5)))
        with pytest.raises(ModelCapExceeded):
            enumerate_models(f, cap=4)


@settings(max_examples=150, deadline=None)
@given(formulas())
def test_evaluate_agrees_with_enumeration(f):
    members = model_set(f, NAMES)
    for bits in itertools.product((False, True), repeat=len(NAMES)):
        a = dict(zip(NAMES, bits))
        assert (tuple(sorted(a.items())) in members) == evaluate(f, a)


@settings(max_examples=150, deadline=None)
@given(formulas())
def test_rewrites_preserve_models(f):
    models = model_set(f, NAMES)
    assert model_set(eliminate_implications(f), NAMES) == models
    assert model_set(to_nnf(f), NAMES) == models
    assert model_set(Not(to_nnf(f, negate=True)), NAMES) == models


def test_nnf_has_negations_only_on_variables():
    def ok(g):
        if isinstance(g, Not):
            return isinstance(g.child, Var)
        if isinstance(g, Implies):
            return False
        return all(ok(c) for c in getattr(g, "children", ()))

    rng = np.random.default_rng(3)
    for _ in range(50):
        assert ok(to_nnf(random_formula(rng, NAMES)))


@settings(max_examples=150, deadline=None)
@given(formulas())
def test_prefix_round_trip(f):
    assert from_prefix(to_prefix(f)) == f


def test_prefix_fixture_format():
    assert to_prefix(parse_formula("a & (b | !c)")) == "(and a (or b (not c)))"
    assert to_prefix(parse_formula("a => b")) == "(=> a b)"


@given(st.sets(st.sampled_from(NAMES), min_size=1))
def test_variables(names):
    f = Or(tuple(Var(n) for n in sorted(names)))
    assert variables(Not(f)) == frozenset(names)
