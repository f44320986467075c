import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from libs.bisim import refinement_levels
from libs.corpus import random_s5
from libs.errors import FormulaSyntaxError, UnboundVariable, UnknownAgent, UnknownProp
from libs.formula import (
    And,
    Bot,
    Box,
    Diamond,
    Exists,
    FormulaTable,
    Not,
    Or,
    Prop,
    Rel,
    Top,
    characteristic_formula,
    conjunction,
    disjunction,
    fo_eval,
    format_formula,
    free_vars,
    modal_depth,
    model_check,
    parse,
    quantifier_rank,
    random_formula,
    satisfaction,
    standard_translation,
)
from libs.kripke import ck_expand

AGENTS = ("a", "b")


def test_parse_precedence():
    f = parse("~p0 & p1 | [a,b]p0", AGENTS)
    assert f == Or((And((Not(Prop(0)), Prop(1))), Box(0b11, Prop(0))))


def test_parse_implication_and_diamond():
    assert parse("p0 -> <b>T", AGENTS) == Or((Not(Prop(0)), Diamond(0b10, Top())))


def test_parentheses_are_kept_as_nesting():
    assert parse("(p0 & p1) & F", AGENTS) == And((And((Prop(0), Prop(1))), Bot()))
    assert parse("p0 & p1 & F", AGENTS) == And((Prop(0), Prop(1), Bot()))


def test_parse_named_props():
    assert parse("p1", AGENTS, prop_names=("p0", "p1")) == Prop(1)
    with pytest.raises(UnknownProp):
        parse("p7", AGENTS, prop_names=("p0",))


def test_parse_errors():
    with pytest.raises(FormulaSyntaxError):
        parse("p0 &", AGENTS)
    with pytest.raises(UnknownAgent):
        parse("[c]p0", AGENTS)


def test_format_round_trip_examples():
    for text in ("[a,b](p0 | ~p0)", "<a>(p0 & [b]F)", "~~p1", "[]p0"):
        f = parse(text, AGENTS)
        assert parse(format_formula(f, AGENTS), AGENTS) == f


def test_conjunction_disjunction_units():
    assert conjunction([]) == Top()
    assert disjunction([]) == Bot()
    assert conjunction([Prop(0)]) == Prop(0)


def test_table_interns_equal_nodes():
    table = FormulaTable()
    a = table.make(Box, 1, Prop(0))
    b = table.make(Box, 1, Prop(0))
    assert a is b
    assert len(table) == 1


def test_modal_depth():
    assert modal_depth(parse("[a]<b>p0 & [a,b]p0", AGENTS)) == 2
    assert modal_depth(parse("~p0", AGENTS)) == 0


def test_common_knowledge_on_chain(chain3):
    ck = ck_expand(chain3)
    assert list(satisfaction(ck, parse("[a]p0", AGENTS))) == [False, False, False]
    assert list(satisfaction(ck, parse("<a>p0", AGENTS))) == [True, True, False]
    assert list(satisfaction(ck, parse("<a,b>p0", AGENTS))) == [True, True, True]
    assert model_check(ck, 2, parse("[a,b](p0 | ~p0)", AGENTS))
    with pytest.raises(UnknownProp):
        satisfaction(ck, Prop(3))


def test_standard_translation_shape():
    phi = standard_translation(parse("<a>[b]p0", AGENTS))
    assert quantifier_rank(phi) == 2
    assert free_vars(phi) == {0}
    assert isinstance(phi, Exists)


def test_fo_eval_unbound(chain3):
    with pytest.raises(UnboundVariable):
        fo_eval(ck_expand(chain3), {0: 0}, Rel(1, 0, 1))


@pytest.mark.property_based
@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10_000), n=st.integers(1, 5))
def test_translation_agrees_with_satisfaction(seed, n):
    rng = np.random.default_rng(seed)
    ck = ck_expand(random_s5(rng, n, 2, 2))
    f = random_formula(rng, 2, 2, depth=2)
    phi = standard_translation(f)
    truth = satisfaction(ck, f)
    assert quantifier_rank(phi) == modal_depth(f)
    assert [fo_eval(ck, {0: w}, phi) for w in range(n)] == list(truth)


@pytest.mark.property_based
@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10_000), n=st.integers(1, 6), ell=st.integers(0, 2))
def test_characteristic_formula_defines_type(seed, n, ell):
    ck = ck_expand(random_s5(np.random.default_rng(seed), n, 2))
    levels = refinement_levels(ck, ell)
    for w in range(n):
        chi = characteristic_formula(ck, w, ell)
        assert modal_depth(chi) <= ell
        expected = levels[ell] == levels[ell][w]
        assert list(satisfaction(ck, chi)) == list(expected)
