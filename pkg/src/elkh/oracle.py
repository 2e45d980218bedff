"""Brute-force ground truth, kept independent of the tableau.

``strategy_enumerate`` decides Kh by trying every strategy.
``bounded_model_search`` looks for a small model of a formula by
enumerating every model up to a size bound; failure proves nothing.

The model search abstracts an action to what the Kh clause can observe:
for every class, either "not uniformly executable" or the non-empty set of
successor classes.  Every such abstraction is realised by a concrete
relation, so the abstraction loses no models.  Formulas are evaluated on a
whole grid of models at once with numpy, using per-configuration lookup
tables for K and Kh that are filled by :func:`strategy_enumerate`.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Optional

import numpy as np

from .formula import And, Bottom, Formula, Know, KnowHow, Not, Prop, agents_of, props_of, subformulas
from .kripke import Model, Strategy, class_successors

__all__ = ["OracleRefused", "strategy_enumerate", "bounded_model_search", "SearchResult",
           "set_partitions"]

MAX_CLASSES = 12
MAX_GRID = 5_000_000
MAX_CONFIGS = 50_000


class OracleRefused(ValueError):
    """The requested enumeration is beyond the oracle's size guard."""


def strategy_enumerate(model: Model, agent: str, start: frozenset, goal: Iterable[str]):
    """Try every partial class-to-action map.

    Returns ``(True, witness)`` for the first strategy (in enumeration order)
    whose complete executions from ``start`` are all finite and end in
    classes inside ``goal``; otherwise ``(False, None)``.
    """
    goal = frozenset(goal)
    classes = model.classes(agent)
    if len(classes) > MAX_CLASSES:
        raise OracleRefused(f"{len(classes)} classes exceed the limit of {MAX_CLASSES}")
    start = frozenset(start)
    if start not in classes:
        raise OracleRefused(f"{sorted(start)} is not a class of {agent!r}")
    acts = model.agent_actions(agent)
    choices = []
    for c in classes:
        opts = [(None, None)]
        for a in acts:
            if all(model.successors(a, w) for w in c):
                opts.append((a, class_successors(model, agent, c, a)))
        choices.append(opts)
    index = {c: k for k, c in enumerate(classes)}
    inside = [c <= goal for c in classes]
    for combo in itertools.product(*choices):
        if _wins(combo, index, inside, start):
            return True, Strategy(agent, {c: a for c, (a, _) in zip(classes, combo) if a is not None})
    return False, None


def _wins(combo, index, inside, start) -> bool:
    # every execution from start must be finite and stop in a goal class
    state = {}
    stack = [(start, False)]
    while stack:
        c, leaving = stack.pop()
        k = index[c]
        if leaving:
            state[k] = 2
            continue
        s = state.get(k, 0)
        if s == 2:
            continue
        if s == 1:
            return False        # cycle: infinite execution
        action, succ = combo[k]
        if action is None:
            if not inside[k]:
                return False
            state[k] = 2
            continue
        state[k] = 1
        stack.append((c, True))
        for t in succ:
            st = state.get(index[t], 0)
            if st == 1:
                return False
            if st == 0:
                stack.append((t, False))
    return True


# ---------------------------------------------------------------------------
# Model search


def set_partitions(n: int, canonical: bool = False) -> list:
    """All partitions of ``range(n)`` as tuples of tuples.

    With ``canonical`` only one representative per permutation class is
    kept: contiguous blocks of non-increasing size.
    """
    if canonical:
        out = []

        def parts(rest, cap):
            if rest == 0:
                yield ()
                return
            for k in range(min(rest, cap), 0, -1):
                for tail in parts(rest - k, k):
                    yield (k,) + tail

        for sizes in parts(n, n):
            blocks, pos = [], 0
            for k in sizes:
                blocks.append(tuple(range(pos, pos + k)))
                pos += k
            out.append(tuple(blocks))
        return out
    out = []

    def grow(i, blocks):
        if i == n:
            out.append(tuple(tuple(b) for b in blocks))
            return
        for b in blocks:
            b.append(i)
            grow(i + 1, blocks)
            b.pop()
        blocks.append([i])
        grow(i + 1, blocks)
        blocks.pop()

    grow(0, [])
    return out


@dataclass(frozen=True)
class _Config:
    partition: tuple            # tuple of tuples of world indices
    options: tuple              # per block: tuple of successor-block tuples, one per action


def _configs(n: int, actions: int, canonical: bool) -> list:
    out = []
    for part in set_partitions(n, canonical):
        if actions == 0:
            out.append(_Config(part, tuple(() for _ in part)))
            continue
        c = len(part)
        nonempty = [s for r in range(1, c + 1) for s in itertools.combinations(range(c), r)]
        per_block = [combo for r in range(actions + 1) for combo in itertools.combinations(nonempty, r)]
        count = len(per_block) ** c
        if len(out) + count > MAX_CONFIGS:
            raise OracleRefused(f"more than {MAX_CONFIGS} agent configurations for {n} worlds")
        for opts in itertools.product(per_block, repeat=c):
            out.append(_Config(part, opts))
    return out


def _world_names(n: int) -> tuple:
    return tuple(f"w{k + 1}" for k in range(n))


def _realize(cfg: _Config, agent: str, n: int, actions: int):
    """Partition, action names and relations of a concrete realisation."""
    names = _world_names(n)
    part = [frozenset(names[w] for w in block) for block in cfg.partition]
    acts = tuple(f"{agent}_a{m + 1}" for m in range(actions))
    rel = {a: set() for a in acts}
    for b, block in enumerate(cfg.partition):
        for m, succ in enumerate(cfg.options[b]):
            for w in block:
                for s in succ:
                    rel[acts[m]].add((names[w], names[cfg.partition[s][0]]))
    return part, acts, {a: frozenset(v) for a, v in rel.items()}


@lru_cache(maxsize=64)
def _tables(n: int, actions: int, canonical: bool, with_kh: bool):
    """Configs of one agent plus K and Kh lookup tables indexed ``[config, goal mask]``."""
    cfgs = _configs(n, actions if with_kh else 0, canonical)
    masks = 1 << n
    dtype = np.uint8 if n <= 8 else np.uint16
    k_tab = np.zeros((len(cfgs), masks), dtype=dtype)
    kh_tab = np.zeros((len(cfgs), masks), dtype=dtype) if with_kh else None
    names = _world_names(n)
    for idx, cfg in enumerate(cfgs):
        bmask = [sum(1 << w for w in block) for block in cfg.partition]
        for x in range(masks):
            k_tab[idx, x] = sum(b for b in bmask if b & x == b)
        if not with_kh:
            continue
        part, acts, rel = _realize(cfg, "i", n, actions)
        model = Model(names, {"i": part}, {"i": acts}, rel, {})
        classes = model.classes("i")
        for x in range(masks):
            goal = [names[w] for w in range(n) if x >> w & 1]
            won = 0
            for cls in classes:
                if strategy_enumerate(model, "i", cls, goal)[0]:
                    won |= sum(1 << names.index(w) for w in cls)
            kh_tab[idx, x] = won
    return cfgs, k_tab, kh_tab


@dataclass(frozen=True)
class SearchResult:
    """Outcome of a bounded search.  ``found=False`` only means "not within these bounds"."""

    found: bool
    model: Optional[Model] = None
    world: Optional[str] = None
    max_worlds: int = 0
    max_actions: int = 0

    def __bool__(self):
        return self.found


def bounded_model_search(phi: Formula, max_worlds: int = 3, max_actions: int = 1) -> SearchResult:
    """Look for a model of ``phi`` with at most ``max_worlds`` worlds.

    Only agents and propositions occurring in ``phi`` are modelled, and only
    agents with a Kh subformula get actions (at most ``max_actions`` each).
    Models are tried by increasing size; the first hit is returned.
    """
    if max_worlds < 1 or max_actions < 1:
        raise OracleRefused("bounds must be at least 1")
    if max_worlds > 4:
        raise OracleRefused("at most 4 worlds are supported")
    agents = sorted(agents_of(phi))
    props = sorted(props_of(phi))
    kh_agents = {f.agent for f in subformulas(phi) if isinstance(f, KnowHow)}
    for n in range(1, max_worlds + 1):
        tabs = []
        for pos, agent in enumerate(agents):
            tabs.append(_tables(n, max_actions, pos == 0, agent in kh_agents))
        shape = tuple(len(t[0]) for t in tabs)
        if int(np.prod(shape, dtype=np.int64)) > MAX_GRID:
            raise OracleRefused(f"model grid of {shape} exceeds {MAX_GRID}")
        axes = {}
        for pos, agent in enumerate(agents):
            sh = [1] * len(agents)
            sh[pos] = shape[pos]
            axes[agent] = (np.arange(shape[pos]).reshape(sh), tabs[pos][1], tabs[pos][2])
        full = (1 << n) - 1
        for vals in itertools.product(range(1 << n), repeat=len(props)):
            val = dict(zip(props, vals))
            res = np.broadcast_to(_grid_eval(phi, val, axes, full, {}), shape or ())
            hits = np.flatnonzero(res)
            if hits.size:
                flat = int(hits[0])
                at = np.unravel_index(flat, shape) if shape else ()
                mask = int(res.reshape(-1)[flat]) if shape else int(res)
                world = (mask & -mask).bit_length() - 1
                model = _build(n, agents, kh_agents, max_actions, tabs, at, val)
                return SearchResult(True, model, _world_names(n)[world], max_worlds, max_actions)
    return SearchResult(False, None, None, max_worlds, max_actions)


def _grid_eval(phi, val, axes, full, memo):
    hit = memo.get(phi)
    if hit is not None:
        return hit
    if isinstance(phi, Bottom):
        out = np.uint8(0)
    elif isinstance(phi, Prop):
        out = np.uint8(val.get(phi.name, 0))
    elif isinstance(phi, Not):
        out = np.bitwise_xor(_grid_eval(phi.sub, val, axes, full, memo), np.uint8(full))
    elif isinstance(phi, And):
        out = np.bitwise_and(_grid_eval(phi.left, val, axes, full, memo),
                             _grid_eval(phi.right, val, axes, full, memo))
    elif isinstance(phi, Know):
        idx, k_tab, _ = axes[phi.agent]
        out = k_tab[idx, _grid_eval(phi.sub, val, axes, full, memo)]
    elif isinstance(phi, KnowHow):
        idx, _, kh_tab = axes[phi.agent]
        out = kh_tab[idx, _grid_eval(phi.sub, val, axes, full, memo)]
    else:
        raise TypeError(f"not a formula: {phi!r}")
    memo[phi] = out
    return out


def _build(n, agents, kh_agents, max_actions, tabs, at, val) -> Model:
    names = _world_names(n)
    partitions, actions, relations = {}, {}, {}
    for pos, agent in enumerate(agents):
        cfg = tabs[pos][0][int(at[pos])]
        k = max_actions if agent in kh_agents else 0
        part, acts, rel = _realize(cfg, agent, n, k)
        partitions[agent] = part
        actions[agent] = acts
        relations.update(rel)
    valuation = {p: frozenset(names[w] for w in range(n) if m >> w & 1) for p, m in val.items()}
    return Model(names, partitions, actions, relations, valuation)
