import random

import pytest
from hypothesis import given, settings, strategies as st

from elkh.formula import (
    BOTTOM, TOP, And, Know, KnowHow, Not, ParseError, Prop, complement, depth, enumerate_formulas,
    parse, pretty, random_formula, size, sub_plus, subformulas,
)

p, q, r = Prop("p"), Prop("q"), Prop("r")


# -- parse ------------------------------------------------------------------

def test_parse_conjunction():
    assert parse("(p & ~q)") == And(p, Not(q))


def test_parse_know_how():
    assert parse("Kh[i] p") == KnowHow("i", p)


def test_parse_implication_desugars():
    assert parse("(p -> q)") == Not(And(p, Not(q)))


def test_parse_disjunction_and_true():
    assert parse("(p | q)") == Not(And(Not(p), Not(q)))
    assert parse("true") == Not(BOTTOM) == TOP
    assert parse("false") == BOTTOM


def test_parse_keeps_double_negation():
    assert parse("~~p") == Not(Not(p))


def test_unary_binds_tighter():
    assert parse("(K[i] p & q)") == And(Know("i", p), q)
    assert parse("~K[j] Kh[i] p") == Not(Know("j", KnowHow("i", p)))


def test_whitespace_is_insignificant():
    assert parse("  ( p&\n\t~ q )  ") == And(p, Not(q))
    assert parse("K[ agent_1 ] x9") == Know("agent_1", Prop("x9"))


@pytest.mark.parametrize("text, offset", [
    ("", 1),
    ("(p & q", 7),
    ("p q", 3),
    ("(p q)", 4),
    ("K[i p", 5),
    ("~", 2),
    ("(p & q))", 8),
])
def test_parse_error_offsets(text, offset):
    with pytest.raises(ParseError) as info:
        parse(text)
    assert info.value.offset == offset


def test_parse_error_offset_counts_utf8_bytes():
    with pytest.raises(ParseError) as info:
        parse("(p & é)")
    # "(p & " is 5 bytes, the offending character starts at byte 6
    assert info.value.offset == 6


def test_parse_error_expected_set():
    with pytest.raises(ParseError) as info:
        parse("(p q)")
    assert set(info.value.expected) == {"&", "|", "->"}


def test_unknown_escape():
    with pytest.raises(ParseError, match="unknown escape"):
        parse("(p & \\q)")


def test_empty_input():
    with pytest.raises(ParseError, match="empty"):
        parse("   ")


def test_binary_needs_parentheses():
    with pytest.raises(ParseError):
        parse("p & q")


# -- pretty -----------------------------------------------------------------

def test_pretty_examples():
    assert pretty(And(p, q)) == "(p & q)"
    assert pretty(Not(Know("i", p))) == "~K[i] p"
    assert pretty(BOTTOM) == "false"
    assert pretty(KnowHow("j", Not(r))) == "Kh[j] ~r"


def test_round_trip_on_random_corpus():
    rng = random.Random(11)
    for _ in range(10_000):
        phi = random_formula(rng, 14, ("i", "j", "k"), ("p", "q", "r"))
        assert parse(pretty(phi)) == phi


# -- complement -------------------------------------------------------------

def test_complement_examples():
    assert complement(Not(p)) == p
    assert complement(p) == Not(p)
    assert complement(Know("i", p)) == Not(Know("i", p))
    assert complement(Not(Not(p))) == Not(p)


# -- sub_plus ---------------------------------------------------------------

def test_sub_plus_know_how():
    c = sub_plus(KnowHow("i", p))
    assert set(c) == {KnowHow("i", p), Not(KnowHow("i", p)), p, Not(p),
                      Know("i", p), Not(Know("i", p))}
    assert c.m == 6


def test_sub_plus_atom():
    c = sub_plus(p)
    assert set(c) == {p, Not(p)} and c.m == 2


def test_sub_plus_contradiction():
    phi = And(p, Not(p))
    c = sub_plus(phi)
    assert set(c) == {phi, Not(phi), p, Not(p), Not(Not(p))}
    assert c.m == 5


def test_sub_plus_canonical_order_is_deterministic():
    phi = parse("(Kh[j] (q & p) & ~K[i] r)")
    a = sub_plus(phi).formulas
    b = sub_plus(parse(pretty(phi))).formulas
    assert a == b
    assert list(a) == sorted(a)


formulas = st.builds(lambda seed, n: random_formula(random.Random(seed), n, ("i", "j"), ("p", "q")),
                     st.integers(0, 2**32), st.integers(1, 12))


@settings(max_examples=300, deadline=None)
@given(formulas)
def test_sub_plus_contains_subformulas_and_know_pairs(phi):
    c = set(sub_plus(phi))
    for g in subformulas(phi):
        assert g in c and Not(g) in c
        if isinstance(g, KnowHow):
            assert Know(g.agent, g.sub) in c and Not(Know(g.agent, g.sub)) in c


@settings(max_examples=300, deadline=None)
@given(formulas)
def test_sub_plus_size_bound(phi):
    assert sub_plus(phi).m <= 4 * size(phi)


def test_sub_plus_is_minimal_on_corpus():
    # everything in the closure is a subformula, a negated subformula, or a K pair of a Kh subformula
    for phi in enumerate_formulas(4, ("i",), ("p",)):
        subs = subformulas(phi)
        allowed = set(subs) | {Not(g) for g in subs}
        for g in subs:
            if isinstance(g, KnowHow):
                allowed |= {Know(g.agent, g.sub), Not(Know(g.agent, g.sub))}
        assert set(sub_plus(phi)) == allowed


def test_sub_plus_idempotent_on_corpus():
    # re-closing the base part of the closure (members that are not negations added by
    # the closure itself) reproduces the closure exactly
    rng = random.Random(5)
    for _ in range(300):
        phi = random_formula(rng, 10, ("i", "j"), ("p", "q"))
        once = set(sub_plus(phi))
        subs = subformulas(phi)
        base = [f for f in once if f in subs or (isinstance(f, Know) and KnowHow(f.agent, f.sub) in subs)]
        assert set(sub_plus(base)) == once
        assert set(sub_plus([phi, *base])) == once


# -- depth ------------------------------------------------------------------

def test_depth_examples():
    assert depth(p) == 0
    assert depth(KnowHow("i", p)) == 2
    assert depth(Know("i", KnowHow("j", p))) == 3
    assert depth(And(Know("i", p), KnowHow("j", q))) == 2
    assert depth(Not(Know("i", p))) == 1
    assert depth(BOTTOM) == 0


@settings(max_examples=300, deadline=None)
@given(formulas)
def test_depth_invariant_under_complement(phi):
    assert depth(complement(phi)) == depth(phi)


# -- generators -------------------------------------------------------------

def test_enumeration_sizes():
    one = enumerate_formulas(1, ("i", "j"), ("p",))
    assert one == [BOTTOM, p]
    assert len(enumerate_formulas(5, ("i", "j"), ("p",))) == 2242
    assert len(enumerate_formulas(5, ("i", "j"), ("p",), with_bottom=False)) == 949
    assert all(size(f) <= 5 for f in enumerate_formulas(5, ("i", "j"), ("p",)))


def test_enumeration_has_no_duplicates():
    fs = enumerate_formulas(5, ("i", "j"), ("p",))
    assert len(set(fs)) == len(fs)


def test_random_formula_respects_size_and_vocabulary():
    rng = random.Random(3)
    for _ in range(2000):
        phi = random_formula(rng, 9, ("i",), ("p", "q"))
        assert size(phi) <= 9
        assert {g.name for g in subformulas(phi) if isinstance(g, Prop)} <= {"p", "q"}
