"""Formula syntax for the epistemic logic of knowing that (K) and knowing how (Kh).

Formulas are immutable trees built from six constructors.  Derived
connectives (``|``, ``->``, ``true``) only exist in the concrete syntax and
are desugared by :func:`parse`.

Concrete syntax::

    phi ::= "false" | "true" | IDENT | "~" phi | "(" phi OP phi ")"
          | "K[" IDENT "]" phi | "Kh[" IDENT "]" phi
    OP  ::= "&" | "|" | "->"
"""
from __future__ import annotations

import random
import re
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Iterator, Sequence, Union

__all__ = [
    "Formula", "Bottom", "Prop", "Not", "And", "Know", "KnowHow", "BOTTOM", "TOP",
    "Or", "Implies", "ParseError", "ClosureSet", "parse", "pretty", "complement",
    "subformulas", "sub_plus", "depth", "size", "agents_of", "props_of",
    "random_formula", "enumerate_formulas",
]

IDENT_RE = re.compile(r"[a-zA-Z][a-zA-Z0-9_]*")
KEYWORDS = frozenset({"false", "true"})

# Canonical constructor ranks.  Negations sort last so that non-branching
# rules tend to fire before the branching ones.
_RANK_BOTTOM, _RANK_PROP, _RANK_AND, _RANK_KNOW, _RANK_KH, _RANK_NOT = range(6)


def _check_ident(name: str, what: str) -> None:
    if not isinstance(name, str) or not IDENT_RE.fullmatch(name):
        raise ValueError(f"invalid {what} identifier: {name!r}")


class _Node:
    """Shared behaviour: cached hash and canonical sort key."""

    __slots__ = ()

    def __lt__(self, other: "Formula") -> bool:
        return self.key < other.key

    def __str__(self) -> str:
        return pretty(self)


@dataclass(frozen=True, eq=True, repr=False)
class Bottom(_Node):
    key: tuple = field(init=False, compare=False, hash=False)

    def __post_init__(self):
        object.__setattr__(self, "key", (_RANK_BOTTOM,))

    def __hash__(self):
        return 17

    def __repr__(self):
        return "Bottom()"


@dataclass(frozen=True, eq=True, repr=False)
class Prop(_Node):
    name: str
    key: tuple = field(init=False, compare=False, hash=False)
    _h: int = field(init=False, compare=False, hash=False)

    def __post_init__(self):
        _check_ident(self.name, "proposition")
        if self.name in KEYWORDS:
            raise ValueError(f"{self.name!r} is reserved")
        object.__setattr__(self, "key", (_RANK_PROP, self.name))
        object.__setattr__(self, "_h", hash(self.key))

    def __hash__(self):
        return self._h

    def __repr__(self):
        return f"Prop({self.name!r})"


@dataclass(frozen=True, eq=True, repr=False)
class Not(_Node):
    sub: "Formula"
    key: tuple = field(init=False, compare=False, hash=False)
    _h: int = field(init=False, compare=False, hash=False)

    def __post_init__(self):
        object.__setattr__(self, "key", (_RANK_NOT, self.sub.key))
        object.__setattr__(self, "_h", hash(self.key))

    def __hash__(self):
        return self._h

    def __repr__(self):
        return f"Not({self.sub!r})"


@dataclass(frozen=True, eq=True, repr=False)
class And(_Node):
    left: "Formula"
    right: "Formula"
    key: tuple = field(init=False, compare=False, hash=False)
    _h: int = field(init=False, compare=False, hash=False)

    def __post_init__(self):
        object.__setattr__(self, "key", (_RANK_AND, self.left.key, self.right.key))
        object.__setattr__(self, "_h", hash(self.key))

    def __hash__(self):
        return self._h

    def __repr__(self):
        return f"And({self.left!r}, {self.right!r})"


@dataclass(frozen=True, eq=True, repr=False)
class Know(_Node):
    agent: str
    sub: "Formula"
    key: tuple = field(init=False, compare=False, hash=False)
    _h: int = field(init=False, compare=False, hash=False)

    def __post_init__(self):
        _check_ident(self.agent, "agent")
        object.__setattr__(self, "key", (_RANK_KNOW, self.agent, self.sub.key))
        object.__setattr__(self, "_h", hash(self.key))

    def __hash__(self):
        return self._h

    def __repr__(self):
        return f"Know({self.agent!r}, {self.sub!r})"


@dataclass(frozen=True, eq=True, repr=False)
class KnowHow(_Node):
    agent: str
    sub: "Formula"
    key: tuple = field(init=False, compare=False, hash=False)
    _h: int = field(init=False, compare=False, hash=False)

    def __post_init__(self):
        _check_ident(self.agent, "agent")
        object.__setattr__(self, "key", (_RANK_KH, self.agent, self.sub.key))
        object.__setattr__(self, "_h", hash(self.key))

    def __hash__(self):
        return self._h

    def __repr__(self):
        return f"KnowHow({self.agent!r}, {self.sub!r})"


Formula = Union[Bottom, Prop, Not, And, Know, KnowHow]

BOTTOM = Bottom()
TOP = Not(BOTTOM)


def Or(a: Formula, b: Formula) -> Formula:
    return Not(And(Not(a), Not(b)))


def Implies(a: Formula, b: Formula) -> Formula:
    return Not(And(a, Not(b)))


# ---------------------------------------------------------------------------
# Concrete syntax


class ParseError(ValueError):
    """Syntax error.  ``offset`` is a 1-based byte offset into the UTF-8 input."""

    def __init__(self, message: str, offset: int, expected: Iterable[str] = ()):
        self.offset = offset
        self.expected = tuple(sorted(set(expected)))
        detail = f" (expected one of: {', '.join(self.expected)})" if self.expected else ""
        super().__init__(f"{message} at byte {offset}{detail}")


_TOKEN_RE = re.compile(r"""
    (?P<ws>\s+)
  | (?P<kh>Kh\[)
  | (?P<k>K\[)
  | (?P<ident>[a-zA-Z][a-zA-Z0-9_]*)
  | (?P<arrow>->)
  | (?P<punct>[~&|()\]])
""", re.VERBOSE)

_PHI_START = ("false", "true", "IDENT", "~", "(", "K[", "Kh[")


class _Parser:

    def __init__(self, text: str):
        self.text = text
        self.tokens = list(self._tokenize(text))
        self.pos = 0

    def _offset(self, char_pos: int) -> int:
        return len(self.text[:char_pos].encode("utf-8")) + 1

    def _tokenize(self, text: str) -> Iterator[tuple[str, str, int]]:
        i = 0
        while i < len(text):
            m = _TOKEN_RE.match(text, i)
            if m is None:
                if text[i] == "\\":
                    raise ParseError(f"unknown escape {text[i:i + 2]!r}", self._offset(i))
                raise ParseError(f"unexpected character {text[i]!r}", self._offset(i), _PHI_START)
            kind = m.lastgroup
            if kind != "ws":
                value = m.group()
                if kind == "ident" and value in KEYWORDS:
                    kind = value
                elif kind in ("punct", "arrow", "k", "kh"):
                    kind = value
                else:
                    kind = "IDENT"
                yield kind, value, i
            i = m.end()

    def _peek(self) -> tuple[str, str, int]:
        if self.pos < len(self.tokens):
            return self.tokens[self.pos]
        return ("EOF", "", len(self.text))

    def _expect(self, *kinds: str) -> tuple[str, str, int]:
        tok = self._peek()
        if tok[0] not in kinds:
            what = "end of input" if tok[0] == "EOF" else repr(tok[1])
            raise ParseError(f"unexpected {what}", self._offset(tok[2]), kinds)
        self.pos += 1
        return tok

    def parse(self) -> Formula:
        if not self.tokens:
            raise ParseError("empty input", 1, _PHI_START)
        phi = self.formula()
        tok = self._peek()
        if tok[0] != "EOF":
            raise ParseError(f"trailing input {tok[1]!r}", self._offset(tok[2]), ("EOF",))
        return phi

    def formula(self) -> Formula:
        kind, value, _ = self._expect(*_PHI_START)
        if kind == "false":
            return BOTTOM
        if kind == "true":
            return TOP
        if kind == "IDENT":
            return Prop(value)
        if kind == "~":
            return Not(self.formula())
        if kind in ("K[", "Kh["):
            agent = self._expect("IDENT")[1]
            self._expect("]")
            sub = self.formula()
            return Know(agent, sub) if kind == "K[" else KnowHow(agent, sub)
        left = self.formula()
        op = self._expect("&", "|", "->")[0]
        right = self.formula()
        self._expect(")")
        if op == "&":
            return And(left, right)
        if op == "|":
            return Or(left, right)
        return Implies(left, right)


def parse(text: str) -> Formula:
    """Parse concrete syntax into a formula, desugaring ``true``, ``|`` and ``->``.

    >>> parse("(p & ~q)")
    And(Prop('p'), Not(Prop('q')))
    """
    return _Parser(text).parse()


def pretty(phi: Formula) -> str:
    """Render ``phi`` in the concrete syntax accepted by :func:`parse`."""
    if isinstance(phi, Bottom):
        return "false"
    if isinstance(phi, Prop):
        return phi.name
    if isinstance(phi, Not):
        return "~" + pretty(phi.sub)
    if isinstance(phi, And):
        return f"({pretty(phi.left)} & {pretty(phi.right)})"
    if isinstance(phi, Know):
        return f"K[{phi.agent}] {pretty(phi.sub)}"
    if isinstance(phi, KnowHow):
        return f"Kh[{phi.agent}] {pretty(phi.sub)}"
    raise TypeError(f"not a formula: {phi!r}")


# ---------------------------------------------------------------------------
# Structural operations


def complement(phi: Formula) -> Formula:
    """Strip one negation if present, otherwise add one."""
    if isinstance(phi, Not):
        return phi.sub
    return Not(phi)


def children(phi: Formula) -> tuple:
    if isinstance(phi, (Bottom, Prop)):
        return ()
    if isinstance(phi, And):
        return (phi.left, phi.right)
    return (phi.sub,)


def subformulas(phi: Formula) -> frozenset:
    out = set()
    stack = [phi]
    while stack:
        f = stack.pop()
        if f not in out:
            out.add(f)
            stack.extend(children(f))
    return frozenset(out)


def size(phi: Formula) -> int:
    """Number of constructor occurrences in the AST."""
    return 1 + sum(size(c) for c in children(phi))


def agents_of(phi: Formula) -> frozenset:
    return frozenset(f.agent for f in subformulas(phi) if isinstance(f, (Know, KnowHow)))


def props_of(phi: Formula) -> frozenset:
    return frozenset(f.name for f in subformulas(phi) if isinstance(f, Prop))


@lru_cache(maxsize=100_000)
def depth(phi: Formula) -> int:
    """Modal nesting depth; a Kh operator counts twice."""
    if isinstance(phi, (Bottom, Prop)):
        return 0
    if isinstance(phi, Not):
        return depth(phi.sub)
    if isinstance(phi, And):
        return max(depth(phi.left), depth(phi.right))
    if isinstance(phi, Know):
        return depth(phi.sub) + 1
    return depth(phi.sub) + 2


@dataclass(frozen=True)
class ClosureSet:
    """A finite formula set in canonical order, with O(1) index lookup."""

    formulas: tuple
    _index: dict = field(init=False, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "_index", {f: k for k, f in enumerate(self.formulas)})

    @classmethod
    def of(cls, formulas: Iterable[Formula]) -> "ClosureSet":
        return cls(tuple(sorted(set(formulas))))

    @property
    def m(self) -> int:
        return len(self.formulas)

    def index(self, phi: Formula) -> int:
        return self._index[phi]

    def __contains__(self, phi) -> bool:
        return phi in self._index

    def __iter__(self):
        return iter(self.formulas)

    def __len__(self):
        return len(self.formulas)

    def union(self, other: Iterable[Formula]) -> "ClosureSet":
        return ClosureSet.of([*self.formulas, *other])


def sub_plus(phi0: Formula | Iterable[Formula]) -> ClosureSet:
    """Subformulas and their negations, plus ``K_i psi`` / ``~K_i psi`` for each ``Kh_i psi``.

    Accepts a single formula or an iterable of formulas (the union of closures).
    """
    seeds = [phi0] if isinstance(phi0, _Node) else list(phi0)
    out = set()
    for seed in seeds:
        for psi in subformulas(seed):
            out.add(psi)
            out.add(Not(psi))
            if isinstance(psi, KnowHow):
                k = Know(psi.agent, psi.sub)
                out.add(k)
                out.add(Not(k))
    return ClosureSet.of(out)


# ---------------------------------------------------------------------------
# Generators


def random_formula(rng: random.Random, max_size: int, agents: Sequence[str],
                   props: Sequence[str], bottom_weight: float = 0.1) -> Formula:
    """Draw a formula whose AST has at most ``max_size`` nodes.

    The target size is uniform on ``1..max_size``; the split at binary nodes
    is uniform too.
    """
    target = rng.randint(1, max_size)

    def build(n: int) -> Formula:
        if n == 1:
            if rng.random() < bottom_weight:
                return BOTTOM
            return Prop(rng.choice(props))
        if n == 2:
            op = rng.randrange(3)
        else:
            op = rng.randrange(4)
        if op == 3:
            k = rng.randint(1, n - 2)
            return And(build(k), build(n - 1 - k))
        sub = build(n - 1)
        if op == 0:
            return Not(sub)
        agent = rng.choice(agents)
        return Know(agent, sub) if op == 1 else KnowHow(agent, sub)

    return build(target)


def enumerate_formulas(max_size: int, agents: Sequence[str], props: Sequence[str],
                       with_bottom: bool = True) -> list:
    """Every formula of AST size ``1..max_size`` over the given vocabulary, smallest first."""
    by_size: list[list] = [[]]
    atoms = ([BOTTOM] if with_bottom else []) + [Prop(p) for p in props]
    by_size.append(atoms)
    for n in range(2, max_size + 1):
        level = []
        for sub in by_size[n - 1]:
            level.append(Not(sub))
            for a in agents:
                level.append(Know(a, sub))
                level.append(KnowHow(a, sub))
        for k in range(1, n - 1):
            for left in by_size[k]:
                for right in by_size[n - 1 - k]:
                    level.append(And(left, right))
        by_size.append(level)
    return [f for level in by_size for f in level]
