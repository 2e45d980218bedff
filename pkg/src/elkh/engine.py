"""And-or tableau for satisfiability, explored depth first.

Node labels are subsets of the closure ``sub_plus(phi0)``.  Internally a label
is an ``int`` bitmask over the closure's canonical order, which makes
"first unchecked formula", label equality for loop checks, and the
agent restrictions single integer operations.

A node in the saturation phase is an *or* node (one child per disjunct),
a fully saturated node is an *and* node (one child per modal demand).
Closedness is evaluated bottom up during the search:

    closed(n) = inconsistent(L(n))
              or (n is or  and every child closed)
              or (n is and and some child closed)

Blocked leaves and saturated nodes without modal demands are open.
"""
from __future__ import annotations

import contextlib
import gc
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence, Union

from .formula import (
    BOTTOM, And, ClosureSet, Formula, Know, KnowHow, Not, pretty, sub_plus,
)

DEFAULT_BUDGET = 10_000_000

OR, AND, LEAF = "or", "and", "leaf"


class BudgetExceeded(RuntimeError):
    """The configured node budget ran out before the search finished."""


# ---------------------------------------------------------------------------
# Edge labels


@dataclass(frozen=True)
class Epsilon:
    def __str__(self):
        return "ε"


@dataclass(frozen=True)
class AgentStep:
    agent: str

    def __str__(self):
        return self.agent


@dataclass(frozen=True, order=True)
class ActionSymbol:
    """The action ``a_{Kh_i goal}``; one per (agent, goal) pair."""

    agent: str
    goal: Formula

    def __str__(self):
        return f"a[Kh_{self.agent} {pretty(self.goal)}]"


@dataclass(frozen=True)
class Action:
    symbol: ActionSymbol

    def __str__(self):
        return str(self.symbol)


EPSILON = Epsilon()
EdgeLabel = Union[Epsilon, AgentStep, Action]


@dataclass(frozen=True)
class LabelSet:
    """A node label: its formulas and the subset already marked checked."""

    formulas: frozenset
    checked: frozenset = frozenset()

    def __post_init__(self):
        if not self.checked <= self.formulas:
            raise ValueError("checked formulas must belong to the label")

    @classmethod
    def of(cls, formulas: Iterable[Formula], checked: Iterable[Formula] = ()) -> "LabelSet":
        return cls(frozenset(formulas), frozenset(checked))

    def __contains__(self, phi):
        return phi in self.formulas

    def __iter__(self):
        return iter(sorted(self.formulas))

    def __len__(self):
        return len(self.formulas)

    @property
    def unchecked(self) -> frozenset:
        return self.formulas - self.checked

    def restrict(self, agent: str) -> dict:
        """The K_i, ~K_i, Kh_i and ~Kh_i parts of the label."""
        out = {"K": set(), "notK": set(), "Kh": set(), "notKh": set()}
        for f in self.formulas:
            neg = isinstance(f, Not)
            g = f.sub if neg else f
            if isinstance(g, Know) and g.agent == agent:
                out["notK" if neg else "K"].add(f)
            elif isinstance(g, KnowHow) and g.agent == agent:
                out["notKh" if neg else "Kh"].add(f)
        return {k: frozenset(v) for k, v in out.items()}


def blatantly_inconsistent(gamma: Iterable[Formula]) -> bool:
    """True iff ``gamma`` holds bottom or some formula together with its negation."""
    s = set(gamma)
    return BOTTOM in s or any(Not(f) in s for f in s)


# ---------------------------------------------------------------------------
# Rule kernel


class RuleTable:
    """Precomputed rule applications for every formula of a closure set."""

    def __init__(self, closure: ClosureSet):
        self.closure = closure
        fs = closure.formulas
        self.m = len(fs)
        bit = {f: 1 << k for k, f in enumerate(fs)}
        self.bit = bit
        self.bottom = bit.get(BOTTOM, 0)
        self.neg_pairs = [(bit[f], bit[Not(f)]) for f in fs if Not(f) in bit]
        self._shadow = []
        for base in range(0, len(fs), 8):
            tab = [0] * 256
            for byte in range(1, 256):
                low = byte & -byte
                f = fs[base + low.bit_length() - 1] if base + low.bit_length() - 1 < len(fs) else None
                hit = bit[f.sub] if isinstance(f, Not) else 0
                tab[byte] = tab[byte ^ low] | hit
            self._shadow.append(tab)
        self.rules: list = []
        self.modal_mask: dict[str, int] = {}
        self.neg_k: list = []       # (bit ~K_i psi, agent, bit ~psi)
        self.kh: list = []          # (bit Kh_i psi, bit ~K_i psi, bit K_i psi, agent, psi)
        self.neg_kh: dict[str, list] = {}
        self._sat_memo: dict[int, bool] = {}
        self._decoded: dict[int, frozenset] = {}

        for f in fs:
            self.rules.append(self._rule(f, bit))
            neg = isinstance(f, Not)
            g = f.sub if neg else f
            if isinstance(g, (Know, KnowHow)):
                self.modal_mask[g.agent] = self.modal_mask.get(g.agent, 0) | bit[f]
            if neg and isinstance(g, Know):
                self.neg_k.append((bit[f], g.agent, bit[Not(g.sub)]))
            elif neg and isinstance(g, KnowHow):
                self.neg_kh.setdefault(g.agent, []).append(bit[f])
            elif isinstance(f, KnowHow):
                k = Know(f.agent, f.sub)
                self.kh.append((bit[f], bit[Not(k)], bit[k], f.agent, f.sub))

    @staticmethod
    def _rule(f: Formula, bit: dict):
        if isinstance(f, And):
            return ("b", bit[f.left] | bit[f.right])
        if isinstance(f, Know):
            return ("d", bit[f.sub])
        if isinstance(f, KnowHow):
            k = Know(f.agent, f.sub)
            return ("f", (bit[Not(k)], bit[k]))
        if isinstance(f, Not):
            g = f.sub
            if isinstance(g, Not):
                return ("a", bit[g.sub])
            if isinstance(g, And):
                p1, p2 = bit[g.left], bit[g.right]
                n1, n2 = bit[Not(g.left)], bit[Not(g.right)]
                return ("c", (n1 | n2, n1 | p2, p1 | n2))
            if isinstance(g, Know):
                return ("e", (bit[Not(g.sub)], bit[g.sub]))
            if isinstance(g, KnowHow):
                return ("g", bit[Not(Know(g.agent, g.sub))])
        return None

    # -- label helpers ------------------------------------------------------

    def inconsistent(self, label: int) -> bool:
        if label & self.bottom:
            return True
        # bits of the formulas negated somewhere in the label, one byte at a time
        shadow = 0
        rest = label
        for tab in self._shadow:
            if not rest:
                break
            shadow |= tab[rest & 0xFF]
            rest >>= 8
        return bool(label & shadow)

    def encode(self, formulas: Iterable[Formula]) -> int:
        out = 0
        for f in formulas:
            out |= self.bit[f]
        return out

    def decode(self, label: int) -> frozenset:
        hit = self._decoded.get(label)
        if hit is not None:
            return hit
        fs = self.closure.formulas
        out = []
        rest = label
        while rest:
            low = rest & -rest
            out.append(fs[low.bit_length() - 1])
            rest ^= low
        hit = self._decoded[label] = frozenset(out)
        return hit

    # -- phase 1 ------------------------------------------------------------

    def saturate(self, label: int, checked: int):
        """Apply the first applicable saturation rule.

        Returns ``(checked, case, children)`` where ``checked`` includes the
        formulas marked at the node itself because no rule applied to them,
        and ``children`` is a list of ``(label, checked)`` pairs.  ``case`` is
        ``None`` when the label is fully saturated.
        """
        unchecked = label & ~checked
        while unchecked:
            low = unchecked & -unchecked
            rule = self.rules[low.bit_length() - 1]
            if rule is not None:
                case, arg = rule
                done = checked | low
                if case == "a" or case == "d" or case == "g":
                    if not label & arg:
                        return checked, case, [(label | arg, done)]
                elif case == "b":
                    if label & arg != arg:
                        return checked, case, [(label | arg, done)]
                elif case == "c":
                    if all(label & s != s for s in arg):
                        return checked, case, [(label | s, done) for s in arg]
                else:  # e, f
                    first, second = arg
                    if not label & (first | second):
                        return checked, case, [(label | first, done), (label | second, done)]
            checked |= low
            unchecked ^= low
        return checked, None, []

    def saturation_closes(self, label: int) -> bool:
        """True iff every branch of the saturation phase from ``label`` is inconsistent."""
        hit = self._sat_memo.get(label)
        if hit is not None:
            return hit
        out = True
        stack = [(label, 0)]
        while stack:
            lab, chk = stack.pop()
            if self.inconsistent(lab):
                continue
            chk, case, kids = self.saturate(lab, chk)
            if case is None:
                out = False
                break
            stack.extend(kids)
        self._sat_memo[label] = out
        return out

    # -- phase 2 ------------------------------------------------------------

    def sigma(self, label: int, agent: str, neg_body: int) -> int:
        return neg_body | (label & self.modal_mask.get(agent, 0))

    def expand(self, label: int, path: Sequence) -> list:
        """Successors of a saturated node.

        ``path`` lists ``(label, incoming edge)`` from the root down to the
        node being expanded (inclusive).  Returns ``(label, edge, blocker)``
        triples where ``blocker`` is an index into ``path`` or ``None``.
        """
        out = []
        last = len(path) - 1
        for nk_bit, agent, neg_body in self.neg_k:
            if not label & nk_bit:
                continue
            sig = self.sigma(label, agent, neg_body)
            if not self._i_ancestor_has(path, last, agent, sig):
                out.append((sig, AgentStep(agent), None))
        pairs = [t for t in self.kh if label & t[0] and label & t[1]]
        for _, _, k_bit, agent, psi in pairs:
            out.append((k_bit, Action(ActionSymbol(agent, psi)), None))
        for _, _, k_bit, agent, psi in pairs:
            for nkh_bit in self.neg_kh.get(agent, ()):
                if label & nkh_bit:
                    child = k_bit | nkh_bit
                    out.append((child, Action(ActionSymbol(agent, psi)), _nearest_equal(path, last, child)))
        return out

    @staticmethod
    def _i_ancestor_has(path: Sequence, pos: int, agent: str, target: int) -> bool:
        while True:
            lab, edge = path[pos]
            if lab == target:
                return True
            if pos == 0:
                return False
            if not (edge == EPSILON or (isinstance(edge, AgentStep) and edge.agent == agent)):
                return False
            pos -= 1


def _nearest_equal(path: Sequence, pos: int, target: int) -> Optional[int]:
    while pos >= 0:
        if path[pos][0] == target:
            return pos
        pos -= 1
    return None


# ---------------------------------------------------------------------------
# Formula-level rule steps


def _table_for(formulas: Iterable[Formula]) -> RuleTable:
    return RuleTable(sub_plus(list(formulas)))


def saturation_step(label: LabelSet) -> Optional[list]:
    """Children of one saturation step, or ``None`` if the label is saturated.

    Formulas to which no rule applies are marked checked on the way, which
    shows up in the children's checked sets.
    """
    table = _table_for(label.formulas)
    _, case, kids = table.saturate(table.encode(label.formulas), table.encode(label.checked))
    if case is None:
        return None
    return [(LabelSet(table.decode(l), table.decode(c)), EPSILON) for l, c in kids]


def sigma_successor(label: Iterable[Formula], neg_k: Formula) -> frozenset:
    """``{~psi}`` plus the label's K_i, ~K_i, Kh_i and ~Kh_i formulas, for ``neg_k = ~K_i psi``."""
    if not (isinstance(neg_k, Not) and isinstance(neg_k.sub, Know)):
        raise ValueError(f"expected a formula ~K_i psi, got {pretty(neg_k)}")
    label = frozenset(label)
    if neg_k not in label:
        raise ValueError(f"{pretty(neg_k)} is not in the label")
    table = _table_for(label)
    body = neg_k.sub
    return table.decode(table.sigma(table.encode(label), body.agent, table.bit[Not(body.sub)]))


def expansion_step(path: Sequence) -> list:
    """Successors of the last node of ``path``.

    ``path`` is a sequence of ``(formulas, incoming edge)`` pairs from the
    root to the node; the root's edge is ``None``.  Returns
    ``(formulas, edge, blocker index or None)`` triples.
    """
    labels = [frozenset(lab.formulas if isinstance(lab, LabelSet) else lab) for lab, _ in path]
    table = _table_for(f for lab in labels for f in lab)
    coded = [(table.encode(lab), edge) for lab, (_, edge) in zip(labels, path)]
    return [(table.decode(l), e, b) for l, e, b in table.expand(coded[-1][0], coded)]


# ---------------------------------------------------------------------------
# Search


@dataclass
class TableauNode:
    """A node of an open complete subtree."""

    index: int
    label: LabelSet
    kind: str
    incoming: Optional[EdgeLabel]
    depth: int
    children: list = field(default_factory=list)
    blocked_by: Optional["TableauNode"] = None

    def walk(self):
        stack = [self]
        while stack:
            n = stack.pop()
            yield n
            stack.extend(reversed(n.children))

    def __repr__(self):
        return f"TableauNode({self.index}, {self.kind}, {sorted(map(pretty, self.label.formulas))})"


@dataclass
class Stats:
    m: int
    nodes: int = 0
    max_depth: int = 0
    max_children: int = 0
    peak_path: int = 0

    def as_dict(self) -> dict:
        return {"m": self.m, "nodes": self.nodes, "max_depth": self.max_depth,
                "max_children": self.max_children, "peak_path": self.peak_path,
                "bounds_ok": assert_bounds(self)}


@dataclass
class TraceNode:
    id: int
    parent: Optional[int]
    label: frozenset
    edge: Optional[EdgeLabel]
    kind: str = LEAF
    blocked_by: Optional[int] = None
    closed: Optional[bool] = None


@dataclass
class Verdict:
    phi0: Formula
    closed: bool
    closure: ClosureSet
    stats: Stats
    subtree: Optional[TableauNode] = None
    trace: Optional[list] = None

    @property
    def open(self) -> bool:
        return not self.closed


def assert_bounds(stats: Stats) -> bool:
    """Height within m**6, branching within m + m**2 + m**3, path within m**6 + 1."""
    m = stats.m
    return (stats.max_depth <= m ** 6
            and stats.max_children <= m + m ** 2 + m ** 3
            and stats.peak_path <= m ** 6 + 1)


class _Frame:
    __slots__ = ("id", "label", "checked", "edge", "depth", "kind", "specs", "idx",
                 "kept", "pos")

    def __init__(self, id, label, checked, edge, depth, pos):
        self.id = id
        self.label = label
        self.checked = checked
        self.edge = edge
        self.depth = depth
        self.pos = pos
        self.kind = LEAF
        self.specs = ()
        self.idx = 0
        self.kept = []


def _and_order(table: RuleTable, specs: list) -> list:
    """Exploration order for the children of an and node.

    An and node closes as soon as one child closes, and each child's verdict
    depends only on its ancestors, so the order changes neither the verdict
    nor the open subtree (children are put back in rule order).  Tried
    first: children whose saturation phase alone closes, then action
    children (small labels, refuted quickly when a goal is unreachable),
    then agent steps.
    """
    tagged = [(l, 0, e, b, k) for k, (l, e, b) in enumerate(specs)]
    if len(tagged) < 2:
        return tagged

    def key(t):
        label, _, edge, blocker, pos = t
        quick = blocker is None and table.saturation_closes(label)
        return (not quick, isinstance(edge, AgentStep), pos)

    return sorted(tagged, key=key)


def decide(phi0: Formula, budget: Optional[int] = DEFAULT_BUDGET, record: bool = False,
           know_first: bool = True) -> Verdict:
    """Decide satisfiability of ``phi0``.

    Returns a closed verdict, or an open one carrying an open complete
    subtree.  ``record`` keeps every explored node for DOT export.
    ``budget=None`` disables the node limit.

    ``know_first`` explores the ``K_i psi`` child of a ``Kh_i psi`` split
    before the ``~K_i psi`` child.  The verdict is the same either way; the
    open subtree returned is the first open one in exploration order, and
    trying ``K_i psi`` first avoids generating witness worlds that the
    other order unfolds into very large trees.  ``know_first=False`` keeps
    the rule's own child order.
    """
    with paused_gc():
        return _search(phi0, budget, record, know_first)


@contextlib.contextmanager
def paused_gc():
    """Suspend cyclic GC; large searches allocate millions of objects that are never garbage."""
    enabled = gc.isenabled()
    gc.disable()
    try:
        yield
    finally:
        if enabled:
            gc.enable()


def _search(phi0, budget, record, know_first) -> Verdict:
    closure = sub_plus(phi0)
    table = RuleTable(closure)
    stats = Stats(m=closure.m)
    trace = [] if record else None
    limit = math.inf if budget is None else budget
    stack: list[_Frame] = []
    path: list = []             # (label, edge) per stack frame, for the loop checks
    # raw open node: (id, label, checked, kind, edge, blocker_id, depth, children, pos)

    def create(label, checked, edge, blocker, depth, parent, pos):
        """Returns a finished result (``False`` or a raw open node) or ``None`` when pushed."""
        nid = stats.nodes
        stats.nodes += 1
        if stats.nodes > limit:
            exc = BudgetExceeded(f"node budget {budget} exceeded")
            exc.stats, exc.trace = stats, trace
            raise exc
        stats.max_depth = max(stats.max_depth, depth)
        stats.peak_path = max(stats.peak_path, len(stack) + 1)
        blocker_id = stack[blocker].id if blocker is not None else None
        if record:
            trace.append(TraceNode(nid, parent, table.decode(label), edge, blocked_by=blocker_id))
        if table.inconsistent(label):
            if record:
                trace[nid].closed = True
            return False
        if blocker is not None:
            if record:
                trace[nid].closed = False
            return (nid, label, checked, LEAF, edge, blocker_id, depth, [], pos)
        frame = _Frame(nid, label, checked, edge, depth, pos)
        checked, case, kids = table.saturate(label, checked)
        frame.checked = checked
        if case is not None:
            frame.kind = OR
            if case == "f" and know_first:
                kids = kids[::-1]
            frame.specs = [(l, c, EPSILON, None, k) for k, (l, c) in enumerate(kids)]
        else:
            path.append((label, edge))
            specs = table.expand(label, path)
            path.pop()
            if not specs:
                if record:
                    trace[nid].closed = False
                return (nid, label, checked, LEAF, edge, None, depth, [], pos)
            frame.kind = AND
            frame.specs = _and_order(table, specs)
        stats.max_children = max(stats.max_children, len(frame.specs))
        if record:
            trace[nid].kind = frame.kind
        stack.append(frame)
        path.append((label, edge))
        return None

    def finish(frame, is_open):
        if record:
            trace[frame.id].closed = not is_open
        if not is_open:
            return False
        kept = sorted(frame.kept, key=lambda raw: raw[8]) if frame.kind == AND else frame.kept
        return (frame.id, frame.label, frame.checked, frame.kind, frame.edge, None,
                frame.depth, kept, frame.pos)

    result = create(table.bit[phi0], 0, None, None, 0, None, 0)
    while stack:
        top = stack[-1]
        label, checked, edge, blocker, pos = top.specs[top.idx]
        top.idx += 1
        child = create(label, checked, edge, blocker, top.depth + 1, top.id, pos)
        if child is None:
            continue
        # propagate finished results upward as far as they go
        while True:
            top = stack[-1]
            done = None
            if top.kind == OR:
                if child is not False:
                    top.kept = [child]
                    done = True
                elif top.idx == len(top.specs):
                    done = False
            else:
                if child is False:
                    done = False
                else:
                    top.kept.append(child)
                    if top.idx == len(top.specs):
                        done = True
            if done is None:
                break
            stack.pop()
            path.pop()
            child = finish(top, done)
            if not stack:
                result = child
                break

    verdict = Verdict(phi0, result is False, closure, stats, trace=trace)
    if result is not False:
        verdict.subtree = _materialize(result, table)
    return verdict


def _materialize(raw, table: RuleTable) -> TableauNode:
    """Turn the raw open subtree into TableauNodes numbered in preorder."""
    by_id: dict[int, TableauNode] = {}
    pending_blocks = []
    counter = 0
    root = None
    stack = [(raw, None)]
    while stack:
        (nid, label, checked, kind, edge, blocker_id, depth, kids, _), parent = stack.pop()
        node = TableauNode(counter, LabelSet(table.decode(label), table.decode(checked & label)),
                           kind, edge, depth)
        counter += 1
        by_id[nid] = node
        if blocker_id is not None:
            pending_blocks.append((node, blocker_id))
        if parent is None:
            root = node
        else:
            parent.children.append(node)
        stack.extend((k, node) for k in reversed(kids))
    for node, bid in pending_blocks:
        node.blocked_by = by_id[bid]
    return root


# ---------------------------------------------------------------------------
# DOT export


def _dot_label(formulas: Iterable[Formula]) -> str:
    text = ", ".join(pretty(f) for f in sorted(formulas))
    return "{" + text.replace("\\", "\\\\").replace('"', '\\"') + "}"


def _dot_edge(edge) -> str:
    return str(edge).replace('"', '\\"')


_SHAPES = {AND: "box", OR: "diamond", LEAF: "ellipse"}


def to_dot(verdict: Verdict, open_only: bool = False) -> str:
    """DOT rendering of the explored tree (needs ``record=True``) or of the open subtree."""
    lines = ["digraph tableau {", "  node [fontname=monospace];"]
    if open_only or verdict.trace is None:
        if verdict.subtree is None:
            raise ValueError("no open subtree to render")
        for n in verdict.subtree.walk():
            lines.append(f'  n{n.index} [shape={_SHAPES[n.kind]}, label="{n.index}: {_dot_label(n.label.formulas)}"];')
            for c in n.children:
                lines.append(f'  n{n.index} -> n{c.index} [label="{_dot_edge(c.incoming)}"];')
            if n.blocked_by is not None:
                lines.append(f"  n{n.index} -> n{n.blocked_by.index} [style=dashed, constraint=false];")
    else:
        for t in verdict.trace:
            color = ', color=red' if t.closed else ''
            lines.append(f'  n{t.id} [shape={_SHAPES[t.kind]}{color}, label="{t.id}: {_dot_label(t.label)}"];')
            if t.parent is not None:
                lines.append(f'  n{t.parent} -> n{t.id} [label="{_dot_edge(t.edge)}"];')
            if t.blocked_by is not None:
                lines.append(f"  n{t.id} -> n{t.blocked_by} [style=dashed, constraint=false];")
    lines.append("}")
    return "\n".join(lines) + "\n"
