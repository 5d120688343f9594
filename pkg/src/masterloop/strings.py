"""Loops, strings and the bookkeeping attached to them.

A loop is a tuple of :class:`Edge` values forming a closed walk.  Loops held in
a :class:`LatticeString` are cyclically reduced: no edge is followed by its
inverse, including the wrap-around from the last edge to the first.  Backtrack
erasure therefore works on the cyclic word, which keeps every rotation of a
stored loop valid and makes canonical rotations well defined.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Optional

import numpy as np

from .lattice import Edge, Lattice, Plaquette, shift

Loop = tuple


class Counts(Mapping):
    """Immutable, hashable plaquette -> natural map; zero entries are not
    stored.  Used both for K (positive plaquettes) and J (oriented)."""

    __slots__ = ("_items", "_d", "_hash")

    def __init__(self, data=None):
        d = {}
        if data:
            for p, v in dict(data).items():
                v = int(v)
                if v < 0:
                    raise ValueError("plaquette counts are nonnegative")
                if v:
                    d[p] = v
        self._items = tuple(sorted(d.items()))
        self._d = d
        self._hash = hash(self._items)

    @classmethod
    def constant(cls, plaquettes, value: int) -> "Counts":
        return cls({p: value for p in plaquettes})

    def __getitem__(self, p):
        return self._d.get(p, 0)

    def get(self, p, default=0):
        return self._d.get(p, default)

    def __contains__(self, p):
        return p in self._d

    def __iter__(self):
        return (p for p, _ in self._items)

    def __len__(self):
        return len(self._items)

    def __hash__(self):
        return self._hash

    def __eq__(self, other):
        if isinstance(other, Counts):
            return self._items == other._items
        if isinstance(other, Mapping):
            return self._items == Counts(other)._items
        return NotImplemented

    def __repr__(self):
        return f"Counts({dict(self._items)!r})"

    @property
    def items_tuple(self) -> tuple:
        return self._items

    def total(self) -> int:
        return sum(self._d.values())

    def support(self) -> frozenset:
        return frozenset(self._d)

    def add(self, p, delta: int) -> "Counts":
        d = dict(self._d)
        d[p] = d.get(p, 0) + delta
        return Counts(d)

    def zeroed(self, plaquettes) -> "Counts":
        drop = set(plaquettes)
        return Counts({p: v for p, v in self._d.items() if p not in drop})


def erase_backtracks(loop) -> Loop:
    """Cyclically reduced form of a closed edge word.  Returns ``()`` for a
    loop equivalent to the null loop."""
    stack: list = []
    for e in loop:
        if stack and stack[-1] == e.inverse():
            stack.pop()
        else:
            stack.append(e)
    i, j = 0, len(stack)
    while j - i >= 2 and stack[i] == stack[j - 1].inverse():
        i += 1
        j -= 1
    return tuple(stack[i:j])


def is_closed(loop) -> bool:
    if not loop:
        return True
    for a, b in zip(loop, loop[1:] + loop[:1]):
        if a.head != b.tail:
            return False
    return True


def has_backtrack(loop) -> bool:
    n = len(loop)
    return any(loop[i] == loop[(i + 1) % n].inverse() for i in range(n)) if n else False


def min_rotation(loop) -> Loop:
    n = len(loop)
    if n == 0:
        return ()
    first = min(loop)
    best = None
    for k in range(n):
        if loop[k] == first:
            rot = loop[k:] + loop[:k]
            if best is None or rot < best:
                best = rot
    return best


@dataclass(frozen=True)
class LatticeString:
    """Sequence of nonempty reduced loops; ``loops == ()`` is the null string
    at ``basepoint``."""

    loops: tuple = ()
    basepoint: Optional[tuple] = None

    @property
    def is_null(self) -> bool:
        return not self.loops

    @property
    def perimeter(self) -> int:
        return sum(len(l) for l in self.loops)

    def __len__(self) -> int:
        return self.perimeter

    def edges(self):
        for l in self.loops:
            yield from l

    def edge_at(self, pos) -> Edge:
        i, k = pos
        return self.loops[i][k]

    def positions(self):
        for i, l in enumerate(self.loops):
            for k in range(len(l)):
                yield (i, k)

    def validate(self, lat: Optional[Lattice] = None) -> None:
        for l in self.loops:
            if len(l) < 4:
                raise ValueError("loop shorter than 4 edges")
            if not is_closed(l):
                raise ValueError("loop is not closed")
            if has_backtrack(l):
                raise ValueError("loop has a backtrack")
            if lat is not None and not all(lat.has_edge(e) for e in l):
                raise ValueError("loop leaves the lattice")

    def key(self) -> tuple:
        return canonical_form(self)


def make_string(loops, basepoint=None) -> LatticeString:
    """Reduce every loop, drop the ones that vanish, and fall back to the null
    string at ``basepoint`` (or the tail of the first input edge)."""
    loops = [tuple(l) for l in loops]
    if basepoint is None:
        for l in loops:
            if l:
                basepoint = l[0].tail
                break
    kept = tuple(r for r in (erase_backtracks(l) for l in loops) if r)
    return LatticeString(kept, None if kept else basepoint)


def null_string(x=None) -> LatticeString:
    return LatticeString((), x)


def canonical_form(s: LatticeString) -> tuple:
    """Key invariant under loop rotation and loop reordering, but not under
    reversal.  The null string maps to ``()`` whatever its basepoint."""
    return tuple(sorted(min_rotation(l) for l in s.loops))


def canonical_string(s: LatticeString) -> LatticeString:
    if s.is_null:
        return LatticeString((), None)
    return LatticeString(canonical_form(s), None)


def key_text(key: tuple) -> str:
    """Stable text encoding of a canonical key, used in CSV output."""
    if not key:
        return "null"
    parts = []
    for l in key:
        parts.append(" ".join(
            "%s:%d%s" % (",".join(map(str, e.base)), e.axis, "+" if e.sign > 0 else "-")
            for e in l))
    return " | ".join(parts)


def splitting_complexity(s: LatticeString) -> Fraction:
    if s.is_null:
        return Fraction(0)
    return Fraction(s.perimeter, 4) - len(s.loops)


def occurrence_count(s: LatticeString, J: Mapping, e: Edge) -> int:
    """Occurrences of the oriented edge ``e`` in (s, J); ``J`` maps oriented
    plaquettes to copy numbers."""
    n = sum(1 for f in s.edges() if f == e)
    for p, m in J.items():
        if m and e in p.edges():
            n += m
    return n


def unoriented_occurrence_count(s: LatticeString, K: Mapping, e: Edge) -> int:
    """Occurrences of ``e`` or its inverse in (s, K); ``K`` maps positive
    plaquettes to counts."""
    e = e.positive()
    n = sum(1 for f in s.edges() if f.positive() == e)
    for p, m in K.items():
        if m and any(f.positive() == e for f in p.edges()):
            n += m
    return n


def edge_flux(s: LatticeString, J: Optional[Mapping] = None) -> dict:
    """Net signed traversal count per positive edge, zero entries dropped."""
    flux: Counter = Counter()
    for e in s.edges():
        flux[e.positive()] += e.sign
    if J:
        for p, m in J.items():
            if m:
                for e in p.edges():
                    flux[e.positive()] += m * e.sign
    return {e: v for e, v in flux.items() if v}


def is_balanced(s: LatticeString, J: Optional[Mapping] = None) -> bool:
    return not edge_flux(s, J)


def edge_totals(s: LatticeString, K: Mapping) -> Counter:
    """n_e(s, K) for every positive edge with a nonzero count."""
    tot: Counter = Counter()
    for e in s.edges():
        tot[e.positive()] += 1
    for p, m in K.items():
        if m:
            for e in p.edges():
                tot[e.positive()] += m
    return tot


def plaquette_string(plaqs) -> LatticeString:
    return make_string([p.edges() for p in plaqs])


def _walk_home(lat: Lattice, x, target, rng) -> list:
    """Shortest lattice path from x to target, axis order shuffled."""
    path = []
    steps = []
    for mu in range(lat.d):
        diff = target[mu] - x[mu]
        steps += [(mu, 1 if diff > 0 else -1)] * abs(diff)
    order = rng.permutation(len(steps)) if steps else []
    for idx in order:
        mu, st = steps[idx]
        e = Edge(x if st > 0 else shift(x, mu, -1), mu, st)
        path.append(e)
        x = shift(x, mu, st)
    return path


def random_loop(lat: Lattice, rng, max_len: int, tries: int = 200) -> Loop:
    """Closed walk of at most ``max_len`` edges: a random excursion followed
    by a shortest path home, reduced.  Empty if nothing nontrivial turns up."""
    for _ in range(tries):
        start = tuple(int(c) for c in rng.integers(-lat.L, lat.L + 1, size=lat.d))
        out_len = int(rng.integers(2, max(3, max_len // 2 + 1)))
        x = start
        path = []
        for _ in range(out_len):
            mu = int(rng.integers(lat.d))
            st = 1 if rng.random() < 0.5 else -1
            y = shift(x, mu, st)
            if not lat.contains(y):
                continue
            path.append(Edge(x if st > 0 else y, mu, st))
            x = y
        path += _walk_home(lat, x, start, rng)
        loop = erase_backtracks(path)
        if loop and len(loop) <= max_len:
            return loop
    return ()


def random_string(lat: Lattice, rng, max_len: int = 12, max_loops: int = 2) -> LatticeString:
    """Random member of the string space built from closed random walks."""
    n = int(rng.integers(1, max_loops + 1))
    loops = []
    for _ in range(n):
        l = random_loop(lat, rng, max_len)
        if l:
            loops.append(l)
    if not loops:
        x = tuple(int(c) for c in rng.integers(-lat.L, lat.L + 1, size=lat.d))
        return null_string(x)
    return make_string(loops)


def as_rng(seed_or_rng) -> np.random.Generator:
    if isinstance(seed_or_rng, np.random.Generator):
        return seed_or_rng
    return np.random.default_rng(seed_or_rng)
