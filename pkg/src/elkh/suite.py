"""Cross-validation of the tableau against extraction and the brute-force oracle."""
from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from .engine import DEFAULT_BUDGET, Stats, assert_bounds, decide, paused_gc
from .extract import (
    designated_satisfies, equivalence_share_violations, extract,
    neg_kh_inheritance_violations, truth_lemma_check,
)
from .formula import And, Formula, Know, KnowHow, Not, Prop, pretty, random_formula
from .kripke import Model, dump_model, evaluate, kh_classes
from .oracle import bounded_model_search, strategy_enumerate


@dataclass
class CaseReport:
    formula: Formula
    closed: bool
    m: int
    nodes: int
    max_depth: int
    bounds_ok: bool
    oracle_found: Optional[bool] = None
    problems: list = field(default_factory=list)
    stats: Optional[Stats] = None
    model_json: Optional[str] = None     # the countermodel file, when requested

    @property
    def ok(self) -> bool:
        return not self.problems

    def line(self) -> str:
        verdict = "UNSAT" if self.closed else "SAT"
        oracle = {None: "-", True: "found", False: "none"}[self.oracle_found]
        status = "ok" if self.ok else "FAIL " + "; ".join(self.problems)
        return (f"{verdict:5} m={self.m} nodes={self.nodes} depth={self.max_depth} "
                f"oracle={oracle} {status} :: {pretty(self.formula)}")


def check_formula(phi: Formula, max_worlds: Optional[int] = 3, max_actions: int = 1,
                  budget: Optional[int] = DEFAULT_BUDGET, keep_model: bool = False) -> CaseReport:
    """Decide ``phi`` and run every agreement check that applies.

    A: an open verdict yields a countermodel satisfying ``phi`` and the
    label/truth correspondence.  B/C: a model found by the oracle implies an
    open verdict (equivalently, closed implies no model).
    ``max_worlds=None`` skips the oracle.  ``keep_model`` stores the
    countermodel as JSON text in the report.
    """
    with paused_gc():
        return _check(phi, max_worlds, max_actions, budget, keep_model)


def _check(phi, max_worlds, max_actions, budget, keep_model) -> CaseReport:
    v = decide(phi, budget=budget)
    rep = CaseReport(phi, v.closed, v.stats.m, v.stats.nodes, v.stats.max_depth,
                     assert_bounds(v.stats), stats=v.stats)
    if not rep.bounds_ok:
        rep.problems.append("complexity bound exceeded")
    if v.open:
        induced = extract(v)
        if keep_model:
            rep.model_json = dump_model(induced.model, induced.designated)
        if not designated_satisfies(induced, phi):
            rep.problems.append("A: countermodel does not satisfy the formula")
        bad = truth_lemma_check(induced, phi)
        if bad:
            rep.problems.append(f"A: {len(bad)} truth-lemma violations, first {bad[0]}")
        if equivalence_share_violations(induced):
            rep.problems.append("A: class members disagree on modal formulas")
        if neg_kh_inheritance_violations(induced):
            rep.problems.append("A: ~Kh not inherited along actions")
    if max_worlds is not None:
        found = bounded_model_search(phi, max_worlds, max_actions)
        rep.oracle_found = found.found
        if found.found and not evaluate(found.model, found.world, phi):
            rep.problems.append("oracle returned a model that does not satisfy the formula")
        if found.found and v.closed:
            rep.problems.append("B/C: oracle found a model but the tableau closed")
    return rep


def random_corpus(seed: int, count: int, max_size: int, agents: Sequence[str] = ("i", "j"),
                  props: Sequence[str] = ("p", "q")) -> list:
    rng = random.Random(seed)
    return [random_formula(rng, max_size, agents, props) for _ in range(count)]


def run(formulas: Iterable[Formula], **kwargs) -> list:
    return [check_formula(phi, **kwargs) for phi in formulas]


def random_model(rng: random.Random, max_worlds: int, agents: Sequence[str] = ("i", "j"),
                 max_actions: int = 2, props: Sequence[str] = ("p", "q"),
                 edge_prob: float = 0.35) -> Model:
    """A random model with 1..max_worlds worlds and 0..max_actions actions per agent."""
    n = rng.randint(1, max_worlds)
    worlds = tuple(f"w{k + 1}" for k in range(n))
    partitions, actions, relations = {}, {}, {}
    for agent in agents:
        blocks: list = []
        for w in worlds:
            k = rng.randint(0, len(blocks))
            if k == len(blocks):
                blocks.append([w])
            else:
                blocks[k].append(w)
        partitions[agent] = [frozenset(b) for b in blocks]
        names = tuple(f"{agent}_a{m + 1}" for m in range(rng.randint(0, max_actions)))
        actions[agent] = names
        for a in names:
            relations[a] = frozenset((s, t) for s in worlds for t in worlds if rng.random() < edge_prob)
    valuation = {p: frozenset(w for w in worlds if rng.random() < 0.5) for p in props}
    return Model(worlds, partitions, actions, relations, valuation)


def kh_mismatches(model: Model, agent: str, goal: Iterable[str]) -> list:
    """Classes where the fixpoint and exhaustive strategy enumeration disagree."""
    goal = frozenset(goal)
    fix = kh_classes(model, agent, goal)
    return [cls for cls in model.classes(agent)
            if (cls in fix) != strategy_enumerate(model, agent, cls, goal)[0]]


def implies(a: Formula, b: Formula) -> Formula:
    return Not(And(a, Not(b)))


def validity_schemata(phi: Formula, agent: str = "i") -> list:
    """The five basic validities relating K and Kh, instantiated at ``phi``."""
    K = lambda f: Know(agent, f)  # noqa: E731
    Kh = lambda f: KnowHow(agent, f)  # noqa: E731
    return [
        implies(K(phi), Kh(phi)),
        implies(Kh(phi), K(Kh(phi))),
        implies(Not(Kh(phi)), K(Not(Kh(phi)))),
        implies(Kh(phi), Kh(K(phi))),
        implies(Kh(Kh(phi)), Kh(phi)),
    ]


def schema_instances(agent: str = "i", other: str = "j") -> list:
    """15 formulas: each schema at p, K_other q and Kh_other q."""
    q = Prop("q")
    return [f for phi in (Prop("p"), Know(other, q), KnowHow(other, q))
            for f in validity_schemata(phi, agent)]
