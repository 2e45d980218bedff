"""Finite models with per-agent partitions and actions, and their satisfaction relation.

Equivalence classes are represented by the ``frozenset`` of their worlds and
ordered by their least world (in the model's world order).
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Optional, Union

from .formula import Bottom, Formula, Know, KnowHow, Not, And, Prop, pretty

__all__ = [
    "ModelError", "Model", "Strategy", "Ends", "Diverges", "DIVERGES",
    "class_of", "uniformly_executable", "class_successors", "ece", "evaluate",
    "truth_set", "kh_classes", "kh_witness", "load_model", "model_from_dict",
    "model_to_dict", "dump_model", "model_to_dot",
]

World = str
Class = frozenset


class ModelError(ValueError):
    """Malformed model or bad reference into one.  ``path`` locates the offending field."""

    def __init__(self, message: str, path: str = ""):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


@dataclass(frozen=True, eq=False)
class Model:
    """Worlds, a partition and an action set per agent, action relations, valuation."""

    worlds: tuple
    partitions: Mapping[str, tuple]
    actions: Mapping[str, tuple]
    relations: Mapping[str, frozenset]
    valuation: Mapping[str, frozenset]
    _order: dict = field(init=False, repr=False)
    _class_of: dict = field(init=False, repr=False)
    _owner: dict = field(init=False, repr=False)
    _succ: dict = field(init=False, repr=False)

    def __post_init__(self):
        order = {w: k for k, w in enumerate(self.worlds)}
        if len(order) != len(self.worlds) or not self.worlds:
            raise ModelError("worlds must be non-empty and distinct", "worlds")
        object.__setattr__(self, "_order", order)
        sorted_parts = {}
        class_of = {}
        for agent, blocks in self.partitions.items():
            seen = {}
            fixed = []
            for b, block in enumerate(blocks):
                block = frozenset(block)
                if not block:
                    raise ModelError("empty block", f"agents.{agent}.partition[{b}]")
                for w in block:
                    if w not in order:
                        raise ModelError(f"unknown world {w!r}", f"agents.{agent}.partition[{b}]")
                    if w in seen:
                        raise ModelError(f"world {w!r} in two blocks", f"agents.{agent}.partition[{b}]")
                    seen[w] = block
                fixed.append(block)
            missing = [w for w in self.worlds if w not in seen]
            if missing:
                raise ModelError(f"worlds {missing} not covered", f"agents.{agent}.partition")
            fixed.sort(key=self._class_key)
            sorted_parts[agent] = tuple(fixed)
            class_of[agent] = seen
        object.__setattr__(self, "partitions", sorted_parts)
        object.__setattr__(self, "_class_of", class_of)
        owner = {}
        for agent, acts in self.actions.items():
            if agent not in self.partitions:
                raise ModelError(f"agent {agent!r} has actions but no partition", f"agents.{agent}")
            for a in acts:
                if a in owner:
                    raise ModelError(f"action {a!r} owned by {owner[a]!r} and {agent!r}", f"agents.{agent}.actions")
                owner[a] = agent
        object.__setattr__(self, "_owner", owner)
        succ = {}
        for a, pairs in self.relations.items():
            if a not in owner:
                raise ModelError(f"relation for undeclared action {a!r}", f"relations.{a}")
            out: dict = {}
            for k, (s, t) in enumerate(pairs):
                for w in (s, t):
                    if w not in order:
                        raise ModelError(f"unknown world {w!r}", f"relations.{a}[{k}]")
                out.setdefault(s, set()).add(t)
            succ[a] = {s: frozenset(ts) for s, ts in out.items()}
        object.__setattr__(self, "_succ", succ)
        for p, ws in self.valuation.items():
            for w in ws:
                if w not in order:
                    raise ModelError(f"unknown world {w!r}", f"valuation.{p}")

    # -- structure ----------------------------------------------------------

    def _class_key(self, block) -> int:
        return min(self._order[w] for w in block)

    @property
    def agents(self) -> tuple:
        return tuple(self.partitions)

    def classes(self, agent: str) -> tuple:
        try:
            return self.partitions[agent]
        except KeyError:
            raise ModelError(f"unknown agent {agent!r}") from None

    def class_of(self, agent: str, world: World) -> Class:
        if world not in self._order:
            raise ModelError(f"unknown world {world!r}")
        return self._class_of[self._agent(agent)][world]

    def _agent(self, agent: str) -> str:
        if agent not in self.partitions:
            raise ModelError(f"unknown agent {agent!r}")
        return agent

    def agent_actions(self, agent: str) -> tuple:
        return tuple(self.actions.get(self._agent(agent), ()))

    def owner(self, action: str) -> str:
        try:
            return self._owner[action]
        except KeyError:
            raise ModelError(f"unknown action {action!r}") from None

    def successors(self, action: str, world: World) -> frozenset:
        self.owner(action)
        return self._succ.get(action, {}).get(world, frozenset())

    def sort_classes(self, classes: Iterable[Class]) -> list:
        return sorted(classes, key=self._class_key)

    def sort_worlds(self, worlds: Iterable[World]) -> list:
        return sorted(worlds, key=self._order.__getitem__)

    def _check_class(self, agent: str, cls: Class) -> Class:
        cls = frozenset(cls)
        if not cls or self.class_of(agent, next(iter(cls))) != cls:
            raise ModelError(f"not an equivalence class of {agent!r}: {sorted(cls)}")
        return cls

    def _check_action(self, agent: str, action: str) -> None:
        if self.owner(action) != agent:
            raise ModelError(f"action {action!r} does not belong to agent {agent!r}")


# ---------------------------------------------------------------------------
# Classes, actions, strategies


def class_of(model: Model, agent: str, world: World) -> Class:
    return model.class_of(agent, world)


def uniformly_executable(model: Model, agent: str, cls: Class, action: str) -> bool:
    """Every world of the class has an outgoing ``action`` edge."""
    cls = model._check_class(agent, cls)
    model._check_action(agent, action)
    return all(model.successors(action, w) for w in cls)


def class_successors(model: Model, agent: str, cls: Class, action: str) -> frozenset:
    """Classes ``[t]`` reachable from some world of ``cls`` by one ``action`` edge."""
    cls = model._check_class(agent, cls)
    model._check_action(agent, action)
    return frozenset(model.class_of(agent, t) for w in cls for t in model.successors(action, w))


@dataclass(frozen=True)
class Strategy:
    """Partial map from one agent's classes to that agent's actions."""

    agent: str
    assignment: Mapping[frozenset, str] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "assignment",
                           {frozenset(k): v for k, v in dict(self.assignment).items()})

    @property
    def domain(self) -> frozenset:
        return frozenset(self.assignment)

    def validate(self, model: Model) -> None:
        for cls, a in self.assignment.items():
            if not uniformly_executable(model, self.agent, cls, a):
                raise ModelError(f"action {a!r} is not uniformly executable on {sorted(cls)}")


@dataclass(frozen=True)
class Ends:
    classes: frozenset


@dataclass(frozen=True)
class _Diverges:
    pass


DIVERGES = _Diverges()
Diverges = _Diverges
ExecutionOutcome = Union[Ends, _Diverges]


def ece(model: Model, agent: str, strategy: Strategy, start: Class) -> ExecutionOutcome:
    """End classes of all complete executions of ``strategy`` from ``start``.

    ``DIVERGES`` when some complete execution is infinite, i.e. a cycle
    inside the strategy's domain is reachable.
    """
    if strategy.agent != agent:
        raise ModelError(f"strategy is for {strategy.agent!r}, not {agent!r}")
    start = model._check_class(agent, start)
    sigma = strategy.assignment
    step = {}
    ends = set()
    # iterative DFS with grey/black colouring for cycle detection
    colour = {start: 1}
    stack = [(start, None)]
    while stack:
        cls, it = stack[-1]
        if it is None:
            if cls not in sigma:
                ends.add(cls)
                colour[cls] = 2
                stack.pop()
                continue
            nxt = step.get(cls)
            if nxt is None:
                nxt = step[cls] = model.sort_classes(class_successors(model, agent, cls, sigma[cls]))
            it = iter(nxt)
            stack[-1] = (cls, it)
        for succ in it:
            c = colour.get(succ, 0)
            if c == 1:
                return DIVERGES
            if c == 0:
                colour[succ] = 1
                stack.append((succ, None))
                break
        else:
            colour[cls] = 2
            stack.pop()
    return Ends(frozenset(ends))


# ---------------------------------------------------------------------------
# Satisfaction


def kh_classes(model: Model, agent: str, goal: Iterable[World]) -> frozenset:
    """Classes from which ``agent`` has a strategy forcing arrival in classes inside ``goal``.

    Least fixpoint: start from the classes already inside the goal and add a
    class whenever some uniformly executable action leads only to classes
    already won.
    """
    return frozenset(_kh_ranks(model, agent, frozenset(goal)))


def _kh_ranks(model: Model, agent: str, goal: frozenset) -> dict:
    classes = model.classes(agent)
    acts = model.agent_actions(agent)
    class_of = model._class_of[agent]
    won = {c: (0, None) for c in classes if c <= goal}
    options = {}
    for c in classes:
        if c in won:
            continue
        opts = []
        for a in acts:
            succ_of = model._succ.get(a, {})
            targets = [succ_of.get(w) for w in c]
            if all(targets):
                opts.append((a, frozenset(class_of[t] for ts in targets for t in ts)))
        options[c] = opts
    rank = 0
    changed = True
    while changed:
        changed = False
        rank += 1
        fresh = {}
        for c, opts in options.items():
            if c in won:
                continue
            for a, succ in opts:
                if all(s in won for s in succ):
                    fresh[c] = (rank, a)
                    break
        if fresh:
            won.update(fresh)
            changed = True
    return won


def kh_witness(model: Model, agent: str, goal: Iterable[World]) -> Strategy:
    """A single strategy that wins from every class in :func:`kh_classes`."""
    ranks = _kh_ranks(model, agent, frozenset(goal))
    return Strategy(agent, {c: a for c, (_, a) in ranks.items() if a is not None})


def truth_set(model: Model, phi: Formula, _memo: Optional[dict] = None) -> frozenset:
    """Worlds of ``model`` satisfying ``phi``.  Unknown propositions are false everywhere."""
    memo = {} if _memo is None else _memo
    hit = memo.get(phi)
    if hit is not None:
        return hit
    if isinstance(phi, Bottom):
        out = frozenset()
    elif isinstance(phi, Prop):
        out = frozenset(model.valuation.get(phi.name, ()))
    elif isinstance(phi, Not):
        out = frozenset(model.worlds) - truth_set(model, phi.sub, memo)
    elif isinstance(phi, And):
        out = truth_set(model, phi.left, memo) & truth_set(model, phi.right, memo)
    elif isinstance(phi, Know):
        sub = truth_set(model, phi.sub, memo)
        out = frozenset(w for c in model.classes(phi.agent) if c <= sub for w in c)
    elif isinstance(phi, KnowHow):
        sub = truth_set(model, phi.sub, memo)
        out = frozenset(w for c in kh_classes(model, phi.agent, sub) for w in c)
    else:
        raise TypeError(f"not a formula: {phi!r}")
    memo[phi] = out
    return out


def evaluate(model: Model, world: World, phi: Formula) -> bool:
    """``model, world |= phi``."""
    if world not in model._order:
        raise ModelError(f"unknown world {world!r}")
    return world in truth_set(model, phi)


# ---------------------------------------------------------------------------
# JSON


def _expect(value, kind, path):
    if not isinstance(value, kind):
        name = kind.__name__ if isinstance(kind, type) else "/".join(k.__name__ for k in kind)
        raise ModelError(f"expected {name}, got {type(value).__name__}", path)
    return value


def model_from_dict(data: Mapping) -> tuple:
    """Validate a decoded JSON model.  Returns ``(model, designated world or None)``."""
    _expect(data, dict, "$")
    worlds = _expect(data.get("worlds"), list, "worlds")
    for k, w in enumerate(worlds):
        _expect(w, str, f"worlds[{k}]")
    if len(set(worlds)) != len(worlds):
        raise ModelError("duplicate world ids", "worlds")
    agents = _expect(data.get("agents", {}), dict, "agents")
    partitions, actions = {}, {}
    for agent, spec in agents.items():
        _expect(spec, dict, f"agents.{agent}")
        part = _expect(spec.get("partition"), list, f"agents.{agent}.partition")
        blocks = []
        for b, block in enumerate(part):
            _expect(block, list, f"agents.{agent}.partition[{b}]")
            for k, w in enumerate(block):
                _expect(w, str, f"agents.{agent}.partition[{b}][{k}]")
            if len(set(block)) != len(block):
                raise ModelError("duplicate world in block", f"agents.{agent}.partition[{b}]")
            blocks.append(block)
        partitions[agent] = blocks
        acts = _expect(spec.get("actions", []), list, f"agents.{agent}.actions")
        for k, a in enumerate(acts):
            _expect(a, str, f"agents.{agent}.actions[{k}]")
        if len(set(acts)) != len(acts):
            raise ModelError("duplicate action", f"agents.{agent}.actions")
        actions[agent] = tuple(acts)
    relations = {}
    for a, pairs in _expect(data.get("relations", {}), dict, "relations").items():
        _expect(pairs, list, f"relations.{a}")
        out = []
        for k, pair in enumerate(pairs):
            _expect(pair, list, f"relations.{a}[{k}]")
            if len(pair) != 2 or not all(isinstance(w, str) for w in pair):
                raise ModelError("expected a [source, target] pair of world ids", f"relations.{a}[{k}]")
            out.append(tuple(pair))
        relations[a] = frozenset(out)
    valuation = {}
    for p, ws in _expect(data.get("valuation", {}), dict, "valuation").items():
        _expect(ws, list, f"valuation.{p}")
        for k, w in enumerate(ws):
            _expect(w, str, f"valuation.{p}[{k}]")
        valuation[p] = frozenset(ws)
    model = Model(tuple(worlds), partitions, actions, relations, valuation)
    designated = data.get("designated")
    if designated is not None:
        _expect(designated, str, "designated")
        if designated not in model._order:
            raise ModelError(f"unknown world {designated!r}", "designated")
    return model, designated


def load_model(source: Union[str, Path]) -> tuple:
    with open(source, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ModelError(f"invalid JSON: {exc}") from None
    return model_from_dict(data)


def model_to_dict(model: Model, designated: Optional[World] = None) -> dict:
    agents = {}
    for agent in model.agents:
        agents[agent] = {
            "partition": [model.sort_worlds(c) for c in model.partitions[agent]],
            "actions": list(model.actions.get(agent, ())),
        }
    order = model._order
    relations = {a: sorted(map(list, model.relations.get(a, ())), key=lambda p: (order[p[0]], order[p[1]]))
                 for agent in model.agents for a in model.actions.get(agent, ())}
    out = {
        "worlds": list(model.worlds),
        "agents": agents,
        "relations": relations,
        "valuation": {p: model.sort_worlds(ws) for p, ws in sorted(model.valuation.items())},
    }
    if designated is not None:
        out["designated"] = designated
    return out


def dump_model(model: Model, designated: Optional[World] = None) -> str:
    return json.dumps(model_to_dict(model, designated), indent=2, ensure_ascii=False) + "\n"


def model_to_dot(model: Model, designated: Optional[World] = None) -> str:
    """Worlds as nodes, indistinguishability as dashed undirected edges, actions as arrows."""
    def q(s):
        return '"' + str(s).replace("\\", "\\\\").replace('"', '\\"') + '"'

    lines = ["digraph model {"]
    for w in model.worlds:
        props = sorted(p for p, ws in model.valuation.items() if w in ws)
        shape = "doublecircle" if w == designated else "circle"
        lines.append(f"  {q(w)} [shape={shape}, label={q(w + chr(10) + ','.join(props))}];")
    for agent in model.agents:
        for cls in model.partitions[agent]:
            ws = model.sort_worlds(cls)
            for a, b in zip(ws, ws[1:]):
                lines.append(f"  {q(a)} -> {q(b)} [dir=none, style=dashed, label={q(agent)}];")
    for a in sorted(model.relations):
        for s, t in sorted(model.relations[a], key=lambda p: (model._order[p[0]], model._order[p[1]])):
            lines.append(f"  {q(s)} -> {q(t)} [label={q(a)}];")
    lines.append("}")
    return "\n".join(lines) + "\n"
