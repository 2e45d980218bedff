import random

import pytest

from elkh.engine import (
    AND, EPSILON, OR, Action, ActionSymbol, AgentStep, BudgetExceeded, LabelSet, Stats,
    assert_bounds, blatantly_inconsistent, decide, expansion_step, saturation_step,
    sigma_successor, to_dot,
)
from elkh.formula import BOTTOM, And, Know, KnowHow, Not, Prop, parse, random_formula, sub_plus

p, q, r = Prop("p"), Prop("q"), Prop("r")
Ki, Kj = (lambda f: Know("i", f)), (lambda f: Know("j", f))
Khi, Khj = (lambda f: KnowHow("i", f)), (lambda f: KnowHow("j", f))


# -- blatant inconsistency ----------------------------------------------------

def test_blatantly_inconsistent():
    assert blatantly_inconsistent({p, Not(p)})
    assert blatantly_inconsistent({BOTTOM})
    assert not blatantly_inconsistent({p, Not(q), Ki(p)})
    assert not blatantly_inconsistent(set())
    assert blatantly_inconsistent({Ki(p), Not(Ki(p))})


# -- saturation ---------------------------------------------------------------

def added(parent, children):
    return [set(c.formulas) - set(parent) for c, _ in children]


def test_saturation_negated_conjunction_three_children():
    label = LabelSet.of({Not(And(p, q))})
    kids = saturation_step(label)
    assert added(label.formulas, kids) == [{Not(p), Not(q)}, {Not(p), q}, {p, Not(q)}]
    assert all(edge == EPSILON for _, edge in kids)
    assert all(Not(And(p, q)) in c.checked for c, _ in kids)


def test_saturation_know():
    label = LabelSet.of({Ki(p)})
    assert added(label.formulas, saturation_step(label)) == [{p}]


def test_saturation_know_how_two_children():
    label = LabelSet.of({Khi(p)})
    assert added(label.formulas, saturation_step(label)) == [{Not(Ki(p))}, {Ki(p)}]


def test_saturation_remaining_cases():
    assert added({Not(Not(p))}, saturation_step(LabelSet.of({Not(Not(p))}))) == [{p}]
    assert added({And(p, q)}, saturation_step(LabelSet.of({And(p, q)}))) == [{p, q}]
    assert added({Not(Ki(p))}, saturation_step(LabelSet.of({Not(Ki(p))}))) == [{Not(p)}, {p}]
    assert added({Not(Khi(p))}, saturation_step(LabelSet.of({Not(Khi(p))}))) == [{Not(Ki(p))}]


def test_saturation_skips_satisfied_formulas():
    # (b) has nothing to add, so the conjunction is marked checked and ~K_i r is processed next
    label = LabelSet.of({And(p, q), p, q, Not(Ki(r))})
    kids = saturation_step(label)
    assert added(label.formulas, kids) == [{Not(r)}, {r}]
    assert And(p, q) in kids[0][0].checked


def test_saturation_none_when_saturated():
    assert saturation_step(LabelSet.of({p, Not(q)})) is None
    done = LabelSet.of({Ki(p), p}, {Ki(p)})
    assert saturation_step(done) is None


def test_checked_marks_are_kept():
    label = LabelSet.of({Ki(p), Not(Not(q))}, {Ki(p)})
    kids = saturation_step(label)
    assert all(label.checked <= c.checked for c, _ in kids)


def test_labelset_rejects_foreign_checked():
    with pytest.raises(ValueError):
        LabelSet.of({p}, {q})


def test_restrict():
    label = LabelSet.of({Ki(p), Not(Ki(q)), Khi(r), Not(Khi(p)), Kj(p), p})
    parts = label.restrict("i")
    assert parts == {"K": {Ki(p)}, "notK": {Not(Ki(q))}, "Kh": {Khi(r)}, "notKh": {Not(Khi(p))}}


# -- sigma --------------------------------------------------------------------

def test_sigma_examples():
    assert sigma_successor({Not(Ki(p)), Ki(q), Khj(r)}, Not(Ki(p))) == {Not(p), Not(Ki(p)), Ki(q)}
    assert sigma_successor({Not(Ki(p))}, Not(Ki(p))) == {Not(p), Not(Ki(p))}
    assert sigma_successor({Not(Ki(p)), Not(Khi(q))}, Not(Ki(p))) == {Not(p), Not(Ki(p)), Not(Khi(q))}


def test_sigma_requires_member():
    with pytest.raises(ValueError):
        sigma_successor({Ki(p)}, Not(Ki(q)))
    with pytest.raises(ValueError):
        sigma_successor({Ki(p)}, Ki(p))


# -- expansion ----------------------------------------------------------------

def test_expansion_agent_step():
    out = expansion_step([({Not(Ki(p)), Ki(q)}, None)])
    assert out == [({Not(p), Not(Ki(p)), Ki(q)}, AgentStep("i"), None)]


def test_expansion_action_only_j():
    out = expansion_step([({Khi(p), Not(Ki(p))}, None)])
    assert ({Ki(p)}, Action(ActionSymbol("i", p)), None) in out
    actions = [o for o in out if isinstance(o[1], Action)]
    assert len(actions) == 1


def test_expansion_action_j_and_k():
    out = expansion_step([({Not(Khi(q)), Khi(p), Not(Ki(p))}, None)])
    actions = [(set(l), e, b) for l, e, b in out if isinstance(e, Action)]
    assert actions == [({Ki(p)}, Action(ActionSymbol("i", p)), None),
                       ({Ki(p), Not(Khi(q))}, Action(ActionSymbol("i", p)), None)]


def test_expansion_order_is_i_then_j_then_k():
    out = expansion_step([({Not(Khi(q)), Khi(p), Not(Ki(p)), Not(Ki(q))}, None)])
    kinds = ["i" if isinstance(e, AgentStep) else ("k" if len(l) == 2 else "j") for l, e, _ in out]
    assert kinds == ["i", "i", "j", "k"]


def test_expansion_loop_check_through_epsilon_and_agent_edges():
    sigma = {Not(p), Not(Ki(p))}
    path = [({Not(Ki(p))}, None), (sigma, AgentStep("i")), (sigma | {Not(p)}, EPSILON)]
    assert expansion_step(path) == []


def test_expansion_loop_check_stops_at_other_edges():
    sigma = {Not(p), Not(Ki(p))}
    path = [(sigma, None), ({Not(Ki(p)), Ki(q)}, Action(ActionSymbol("i", q)))]
    assert expansion_step(path) == [({Not(p), Not(Ki(p)), Ki(q)}, AgentStep("i"), None)]
    # the Σ of the last node equals the root's label, but the connecting edge is an action
    path = [(sigma, None), ({Not(Ki(p))}, Action(ActionSymbol("i", q)))]
    assert expansion_step(path) == [(sigma, AgentStep("i"), None)]


def test_expansion_loop_check_is_per_agent():
    sigma = {Not(p), Not(Ki(p))}
    path = [(sigma, None), ({Not(Ki(p))}, AgentStep("j"))]
    assert expansion_step(path) == [(sigma, AgentStep("i"), None)]


def test_expansion_blocking_nearest_ancestor():
    k_label = {Ki(p), Not(Khi(q))}
    sat = {Khi(p), Not(Ki(p)), Not(Khi(q))}
    path = [(k_label, None), (sat, EPSILON), (k_label, Action(ActionSymbol("i", p))), (sat, EPSILON)]
    out = expansion_step(path)
    blocked = [o for o in out if o[2] is not None]
    assert blocked == [(k_label, Action(ActionSymbol("i", p)), 2)]


# -- decide -------------------------------------------------------------------

@pytest.mark.parametrize("text, closed", [
    ("(p & ~p)", True),
    ("(K[i] p & ~Kh[i] p)", True),
    ("(Kh[i] p & ~p)", False),
    ("p", False),
    ("false", True),
    ("true", False),
    ("Kh[i] false", True),
    ("~Kh[i] true", True),
    ("(~K[i] p & K[i] p)", True),
    ("(Kh[i] p & ~K[i] Kh[i] p)", True),
    ("(~Kh[i] p & ~K[i] ~Kh[i] p)", True),
    ("(K[i] p & ~K[j] p)", False),
    ("(K[i] p & ~p)", True),
    ("~(Kh[i] p -> K[i] p)", False),
])
def test_decide_examples(text, closed):
    v = decide(parse(text))
    assert v.closed is closed
    assert v.open is (not closed)
    assert (v.subtree is None) is closed
    assert assert_bounds(v.stats)


def test_decide_literal_order_same_verdicts():
    rng = random.Random(8)
    for _ in range(300):
        phi = random_formula(rng, 7, ("i", "j"), ("p", "q"))
        assert decide(phi).closed == decide(phi, know_first=False).closed


def test_literal_order_keeps_rule_child_order():
    v = decide(KnowHow("i", p), know_first=False)
    assert Not(Ki(p)) in v.subtree.children[0].label
    v = decide(KnowHow("i", p))
    assert Ki(p) in v.subtree.children[0].label


def test_budget():
    with pytest.raises(BudgetExceeded) as info:
        decide(parse("(Kh[i] p & ~p)"), budget=2)
    assert info.value.stats.nodes == 3
    assert decide(parse("(Kh[i] p & ~p)"), budget=None).open


def _subtree_invariants(v):
    closure = set(sub_plus(v.phi0))
    nodes = list(v.subtree.walk())
    assert [n.index for n in nodes] == list(range(len(nodes)))
    for n in nodes:
        assert n.label.formulas <= closure
        assert not blatantly_inconsistent(n.label.formulas)
        if n.blocked_by is not None:
            assert isinstance(n.incoming, Action) and not n.children
            assert n.blocked_by.label.formulas == n.label.formulas
        if n.kind == OR:
            assert len(n.children) == 1 and n.children[0].incoming == EPSILON
            assert n.label.formulas <= n.children[0].label.formulas
            assert n.label.checked <= n.children[0].label.checked
        if n.kind == AND:
            assert n.children
            for c in n.children:
                if isinstance(c.incoming, AgentStep):
                    neg = [f for f in n.label.formulas
                           if isinstance(f, Not) and isinstance(f.sub, Know) and f.sub.agent == c.incoming.agent]
                    assert any(sigma_successor(n.label.formulas, f) == c.label.formulas for f in neg)
                else:
                    sym = c.incoming.symbol
                    k = Know(sym.agent, sym.goal)
                    assert k in c.label.formulas and len(c.label.formulas) in (1, 2)
                    assert KnowHow(sym.agent, sym.goal) in n.label.formulas and Not(k) in n.label.formulas


def test_open_subtree_invariants_on_corpus():
    rng = random.Random(21)
    for _ in range(300):
        phi = random_formula(rng, 9, ("i", "j"), ("p", "q"))
        v = decide(phi)
        assert assert_bounds(v.stats)
        if v.open:
            _subtree_invariants(v)
            assert v.subtree.label.formulas >= {phi}


def test_saturated_leaves_are_closed_under_sub_plus():
    rng = random.Random(4)
    for _ in range(200):
        phi = random_formula(rng, 8, ("i", "j"), ("p", "q"))
        v = decide(phi)
        if v.closed:
            continue
        for n in v.subtree.walk():
            if n.kind != OR and n.blocked_by is None:
                label = n.label.formulas
                for f in label:
                    for g in sub_plus(f):
                        assert g in label or Not(g) in label or (isinstance(g, Not) and g.sub in label)


def test_decide_is_deterministic():
    rng = random.Random(9)
    for _ in range(50):
        phi = random_formula(rng, 9, ("i", "j"), ("p", "q"))
        a, b = decide(phi), decide(phi)
        assert a.closed == b.closed and a.stats.as_dict() == b.stats.as_dict()
        if a.open:
            assert ([(n.index, n.label, n.kind, n.incoming) for n in a.subtree.walk()]
                    == [(n.index, n.label, n.kind, n.incoming) for n in b.subtree.walk()])


# -- bounds -------------------------------------------------------------------

def test_bounds_examples():
    v = decide(p)
    assert v.stats.m == 2 and v.stats.max_depth <= 64
    v = decide(KnowHow("i", p))
    assert v.stats.m == 6 and v.stats.max_children <= 6 + 36 + 216
    assert v.stats.peak_path <= 6 ** 6 + 1


def test_assert_bounds_detects_overflow():
    assert assert_bounds(Stats(m=2, max_depth=64, max_children=14, peak_path=65))
    assert not assert_bounds(Stats(m=2, max_depth=65))
    assert not assert_bounds(Stats(m=2, max_children=15))
    assert not assert_bounds(Stats(m=2, peak_path=66))


# -- DOT ----------------------------------------------------------------------

def test_dot_full_trace():
    v = decide(parse("(Kh[i] p & ~p)"), record=True)
    dot = to_dot(v)
    assert dot.startswith("digraph tableau {")
    assert 'label="a[Kh_i p]"' in dot
    assert "shape=box" in dot and "shape=diamond" in dot
    assert len(v.trace) == v.stats.nodes


def test_dot_open_only_with_blocking():
    v = decide(parse("~Kh[i] ~(Kh[i] Kh[i] p & Kh[i] q)"), know_first=False)
    assert v.open
    dot = to_dot(v, open_only=True)
    blocked = [n for n in v.subtree.walk() if n.blocked_by is not None]
    assert blocked
    assert "style=dashed" in dot


def test_dot_closed_open_only_refused():
    with pytest.raises(ValueError):
        to_dot(decide(parse("(p & ~p)")), open_only=True)
