"""Countermodels induced by open complete subtrees.

Worlds are the maximal epsilon-paths of the subtree that do not end in a
blocked node.  Agent edges generate the indistinguishability partitions,
action edges the transition relations; an action edge into a blocked node
is redirected to the world containing its blocker.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional

from .engine import Action, AgentStep, Epsilon, TableauNode, Verdict
from .formula import Formula, Know, KnowHow, Not, Prop, agents_of, complement, pretty, sub_plus
from .kripke import Model, evaluate, truth_set

__all__ = [
    "MalformedSubtree", "PathWorld", "InducedModel", "Violation",
    "maximal_epsilon_paths", "build_model", "extract", "truth_lemma_check",
    "equivalence_share_violations", "neg_kh_inheritance_violations", "designated_satisfies",
]


class MalformedSubtree(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class PathWorld:
    """A maximal epsilon-path; its label is the label of its last node."""

    nodes: tuple

    @property
    def start(self) -> TableauNode:
        return self.nodes[0]

    @property
    def end(self) -> TableauNode:
        return self.nodes[-1]

    @property
    def label(self) -> frozenset:
        return self.end.label.formulas

    @property
    def blocked(self) -> bool:
        return self.end.blocked_by is not None

    @property
    def id(self) -> str:
        return f"w{self.end.index}"

    def __len__(self):
        return len(self.nodes)


def maximal_epsilon_paths(subtree: TableauNode) -> tuple:
    """Split the subtree into maximal epsilon-paths.

    Returns ``(worlds, blocked)``: unblocked paths in preorder of their first
    node, and the singleton paths of blocked nodes.
    """
    worlds, blocked = [], []
    starts = [subtree]
    while starts:
        node = starts.pop()
        chain = [node]
        while True:
            kids = chain[-1].children
            if not kids:
                break
            first = kids[0].incoming
            if isinstance(first, Epsilon) and len(kids) == 1:
                chain.append(kids[0])
                continue
            for c in kids:
                if c.incoming is None:
                    raise MalformedSubtree(f"node {chain[-1].index} has a child without an edge label")
                if isinstance(c.incoming, Epsilon):
                    raise MalformedSubtree(f"node {chain[-1].index} mixes epsilon and modal children")
            starts.extend(reversed(kids))
            break
        path = PathWorld(tuple(chain))
        if path.blocked:
            if len(chain) != 1:
                raise MalformedSubtree(f"blocked node {path.end.index} is not a singleton path")
            blocked.append(path)
        else:
            worlds.append(path)
    worlds.sort(key=lambda p: p.start.index)
    return worlds, blocked


@dataclass
class InducedModel:
    model: Model
    designated: str
    worlds: dict                   # world id -> PathWorld
    world_of: dict = field(repr=False, default_factory=dict)   # node index -> world id

    def label(self, world: str) -> frozenset:
        return self.worlds[world].label


class _UnionFind:
    def __init__(self, items):
        self.parent = {x: x for x in items}

    def find(self, x):
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[rb] = ra


def build_model(subtree: TableauNode, agents: Iterable[str] = ()) -> InducedModel:
    """The model induced by an open complete subtree.

    ``agents`` adds agents that should appear in the model even if no agent
    edge mentions them (their partition is then discrete).
    """
    worlds, blocked = maximal_epsilon_paths(subtree)
    by_id = {w.id: w for w in worlds}
    world_of = {n.index: w.id for w in worlds for n in w.nodes}
    ids = [w.id for w in worlds]

    agent_names = set(agents)
    action_syms = set()
    agent_edges = []
    action_edges = []
    for w in worlds:
        for n in w.nodes:
            for c in n.children:
                if isinstance(c.incoming, AgentStep):
                    if c.blocked_by is not None:
                        raise MalformedSubtree(f"agent edge into blocked node {c.index}")
                    agent_names.add(c.incoming.agent)
                    agent_edges.append((c.incoming.agent, world_of[n.index], world_of[c.index]))
                elif isinstance(c.incoming, Action):
                    sym = c.incoming.symbol
                    agent_names.add(sym.agent)
                    action_syms.add(sym)
                    target = c.blocked_by if c.blocked_by is not None else c
                    if target.index not in world_of:
                        raise MalformedSubtree(f"blocker of node {c.index} is outside the subtree")
                    action_edges.append((sym, world_of[n.index], world_of[target.index]))

    partitions = {}
    for agent in sorted(agent_names):
        uf = _UnionFind(ids)
        for a, s, t in agent_edges:
            if a == agent:
                uf.union(s, t)
        blocks: dict = {}
        for w in ids:
            blocks.setdefault(uf.find(w), []).append(w)
        partitions[agent] = [frozenset(b) for b in blocks.values()]

    actions = {agent: [] for agent in partitions}
    for sym in sorted(action_syms):
        actions[sym.agent].append(str(sym))
    relations = {str(sym): set() for sym in action_syms}
    for sym, s, t in action_edges:
        relations[str(sym)].add((s, t))

    valuation: dict = {}
    for w in worlds:
        for f in w.label:
            if isinstance(f, Prop):
                valuation.setdefault(f.name, set()).add(w.id)

    model = Model(
        tuple(ids),
        partitions,
        {a: tuple(v) for a, v in actions.items()},
        {a: frozenset(v) for a, v in relations.items()},
        {p: frozenset(v) for p, v in valuation.items()},
    )
    return InducedModel(model, world_of[subtree.index], by_id, world_of)


def extract(verdict: Verdict) -> InducedModel:
    """Countermodel for an open verdict (includes every agent of the input formula)."""
    if verdict.closed or verdict.subtree is None:
        raise MalformedSubtree("verdict is closed; there is no countermodel")
    return build_model(verdict.subtree, agents_of(verdict.phi0))


@dataclass(frozen=True)
class Violation:
    world: str
    formula: Formula
    problem: str

    def __str__(self):
        return f"{self.world}: {pretty(self.formula)}: {self.problem}"


def truth_lemma_check(induced: InducedModel, phi0: Optional[Formula] = None) -> list:
    """Label formulas must be true at their world; closure formulas missing from a label false.

    The closure of a world is ``sub_plus`` of its label, intersected with
    ``sub_plus(phi0)`` when ``phi0`` is given.  A missing closure formula must
    have its complement in the label.
    """
    model = induced.model
    memo: dict = {}
    scope = sub_plus(phi0) if phi0 is not None else None
    todo: dict = {}             # label -> formulas to confirm, formulas to refute
    out = []
    for wid, pw in induced.worlds.items():
        label = pw.label
        plan = todo.get(label)
        if plan is None:
            present = [(f, truth_set(model, f, memo)) for f in sorted(label)]
            missing = [(f, truth_set(model, f, memo), complement(f) in label)
                       for f in sub_plus(label) if f not in label and (scope is None or f in scope)]
            plan = todo[label] = (present, missing)
        present, missing = plan
        for f, truth in present:
            if scope is not None and f not in scope:
                out.append(Violation(wid, f, "outside the closure of the input"))
            if wid not in truth:
                out.append(Violation(wid, f, "in label but false"))
        for f, truth, refuted in missing:
            if not refuted:
                out.append(Violation(wid, f, "label not closed: neither formula nor complement"))
            elif wid in truth:
                out.append(Violation(wid, f, "complement in label but formula true"))
    return out


def _restriction(label: frozenset, agent: str) -> frozenset:
    out = set()
    for f in label:
        g = f.sub if isinstance(f, Not) else f
        if isinstance(g, (Know, KnowHow)) and g.agent == agent:
            out.add(f)
    return frozenset(out)


def equivalence_share_violations(induced: InducedModel) -> list:
    """Worlds of one class must agree on the agent's K, ~K, Kh and ~Kh formulas."""
    out = []
    model = induced.model
    for agent in model.agents:
        parts: dict = {}
        for cls in model.classes(agent):
            ws = model.sort_worlds(cls)
            restricted = []
            for w in ws:
                label = induced.label(w)
                r = parts.get(label)
                if r is None:
                    r = parts[label] = _restriction(label, agent)
                restricted.append(r)
            for w, r in zip(ws[1:], restricted[1:]):
                if r != restricted[0]:
                    out.append((agent, ws[0], w))
    return out


def neg_kh_inheritance_violations(induced: InducedModel) -> list:
    """Every action step out of a world with ``~Kh_i chi`` can reach a world keeping it."""
    out = []
    model = induced.model
    for wid, pw in induced.worlds.items():
        for f in pw.label:
            if not (isinstance(f, Not) and isinstance(f.sub, KnowHow)):
                continue
            agent = f.sub.agent
            for a in model.agent_actions(agent):
                succ = model.successors(a, wid)
                if succ and not any(f in induced.label(t) for t in succ):
                    out.append((wid, f, a))
    return out


def designated_satisfies(induced: InducedModel, phi0: Formula) -> bool:
    return evaluate(induced.model, induced.designated, phi0)
