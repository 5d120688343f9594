"""Finite hypercubic lattice [-L, L]^d with oriented edges and plaquettes.

Sites are integer tuples.  An oriented edge is stored as ``(base, axis, sign)``
where ``base`` is the lower endpoint of the underlying unoriented edge; sign +1
walks from ``base`` to ``base + e_axis`` and sign -1 walks back.  A plaquette
is ``(corner, mu, nu, sign)`` with ``mu < nu`` and ``corner`` its least site.
Positive orientation runs +mu, +nu, -mu, -nu from the corner.

Everything here is immutable and hashable, and tuple order doubles as the
canonical ordering used elsewhere for deterministic iteration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property, lru_cache
from itertools import product
from typing import NamedTuple

Site = tuple


class CapacityError(RuntimeError):
    """An enumeration hit its configured cap."""


class Edge(NamedTuple):
    base: Site
    axis: int
    sign: int

    @property
    def tail(self) -> Site:
        return self.base if self.sign > 0 else shift(self.base, self.axis, 1)

    @property
    def head(self) -> Site:
        return shift(self.base, self.axis, 1) if self.sign > 0 else self.base

    @property
    def direction(self) -> int:
        return self.axis

    def inverse(self) -> "Edge":
        return Edge(self.base, self.axis, -self.sign)

    def positive(self) -> "Edge":
        return self if self.sign > 0 else Edge(self.base, self.axis, 1)


class Plaquette(NamedTuple):
    corner: Site
    mu: int
    nu: int
    sign: int = 1

    @property
    def axes(self) -> tuple:
        return (self.mu, self.nu)

    def inverse(self) -> "Plaquette":
        return Plaquette(self.corner, self.mu, self.nu, -self.sign)

    def positive(self) -> "Plaquette":
        return self if self.sign > 0 else Plaquette(self.corner, self.mu, self.nu, 1)

    def edges(self) -> tuple:
        """Boundary loop, starting at the corner."""
        x, mu, nu = self.corner, self.mu, self.nu
        if self.sign > 0:
            return (Edge(x, mu, 1), Edge(shift(x, mu, 1), nu, 1),
                    Edge(shift(x, nu, 1), mu, -1), Edge(x, nu, -1))
        return (Edge(x, nu, 1), Edge(shift(x, nu, 1), mu, 1),
                Edge(shift(x, mu, 1), nu, -1), Edge(x, mu, -1))

    def loop_from(self, e: Edge) -> tuple:
        """Boundary loop rotated so that it starts with ``e``."""
        es = self.edges()
        k = es.index(e)
        return es[k:] + es[:k]


def shift(x: Site, axis: int, step: int) -> Site:
    y = list(x)
    y[axis] += step
    return tuple(y)


@dataclass(frozen=True)
class Lattice:
    L: int
    d: int

    def __post_init__(self):
        if self.d < 2:
            raise ValueError("dimension must be at least 2")
        if self.L < 1:
            raise ValueError("half-side L must be at least 1")

    def contains(self, x: Site) -> bool:
        return all(-self.L <= c <= self.L for c in x)

    @cached_property
    def sites(self) -> tuple:
        r = range(-self.L, self.L + 1)
        return tuple(product(r, repeat=self.d))

    @cached_property
    def edges(self) -> tuple:
        """Positively oriented edges, sorted."""
        out = []
        for x in self.sites:
            for mu in range(self.d):
                if x[mu] < self.L:
                    out.append(Edge(x, mu, 1))
        return tuple(sorted(out))

    @cached_property
    def plaquettes(self) -> tuple:
        """Positively oriented plaquettes, sorted."""
        out = []
        for x in self.sites:
            for mu in range(self.d):
                for nu in range(mu + 1, self.d):
                    if x[mu] < self.L and x[nu] < self.L:
                        out.append(Plaquette(x, mu, nu, 1))
        return tuple(sorted(out))

    @cached_property
    def plaquette_set(self) -> frozenset:
        return frozenset(self.plaquettes)

    @cached_property
    def incidence(self) -> dict:
        """Positive edge -> tuple of (positive plaquette, +-1) with the sign of
        the edge inside that plaquette's positive boundary."""
        inc: dict = {e: [] for e in self.edges}
        for p in self.plaquettes:
            for e in p.edges():
                inc[e.positive()].append((p, e.sign))
        return {e: tuple(v) for e, v in inc.items()}

    @cached_property
    def neighbors(self) -> dict:
        """Positive plaquette -> sorted tuple of plaquettes sharing an edge."""
        nb: dict = {p: set() for p in self.plaquettes}
        for plist in self.incidence.values():
            for p, _ in plist:
                for q, _ in plist:
                    if p != q:
                        nb[p].add(q)
        return {p: tuple(sorted(v)) for p, v in nb.items()}

    def has_edge(self, e: Edge) -> bool:
        return e.positive() in self.incidence


@lru_cache(maxsize=None)
def build_lattice(L: int, d: int) -> Lattice:
    lat = Lattice(L, d)
    assert len(lat.edges) == d * (2 * L + 1) ** (d - 1) * (2 * L)
    assert len(lat.plaquettes) == math.comb(d, 2) * (2 * L) ** 2 * (2 * L + 1) ** (d - 2)
    return lat


def plaquettes_containing(lat: Lattice, e: Edge) -> list:
    """Oriented plaquettes of the lattice whose boundary traverses ``e``."""
    if not lat.has_edge(e):
        raise ValueError(f"edge {e} is not in the lattice")
    out = []
    for p, c in lat.incidence.get(e.positive(), ()):
        out.append(p if c == e.sign else p.inverse())
    return out


def boundary_of_set(lat: Lattice, Q, P) -> frozenset:
    """Plaquettes outside ``P`` sharing an edge with some member of ``Q``."""
    P = frozenset(P)
    if not P.issuperset(Q):
        raise ValueError("Q must be a subset of P")
    out = set()
    for q in Q:
        for r in lat.neighbors[q.positive()]:
            if r not in P:
                out.add(r)
    return frozenset(out - set(Q))


def components(lat: Lattice, S) -> list:
    """Connected components of a plaquette set under edge adjacency, each a
    frozenset; returned in order of their least member."""
    S = set(S)
    seen: set = set()
    comps = []
    for p in sorted(S):
        if p in seen:
            continue
        comp = {p}
        stack = [p]
        seen.add(p)
        while stack:
            q = stack.pop()
            for r in lat.neighbors[q]:
                if r in S and r not in seen:
                    seen.add(r)
                    comp.add(r)
                    stack.append(r)
        comps.append(frozenset(comp))
    return comps


def enumerate_clusters(lat: Lattice, loop, M: int, cap: int = 1_000_000) -> list:
    """All plaquette sets C with |C| <= M such that every connected component
    of C contains an edge of ``loop``.

    Sets are grown one plaquette at a time; every admissible set of size m
    arises from one of size m - 1 by adding a plaquette that touches the loop
    or neighbours the set, so the level-by-level closure is exhaustive.
    """
    loop_edges = {e.positive() for e in loop}
    touching = sorted({p for e in loop_edges for p, _ in lat.incidence.get(e, ())})
    touch_set = set(touching)

    def admissible(C: frozenset) -> bool:
        return all(comp & touch_set for comp in components(lat, C))

    level = {frozenset()}
    found = [frozenset()]
    for _ in range(M):
        nxt = set()
        for C in level:
            cand = set(touching)
            for p in C:
                cand.update(lat.neighbors[p])
            for p in cand - C:
                D = C | {p}
                if D not in nxt and admissible(D):
                    nxt.add(D)
                    if len(found) + len(nxt) > cap:
                        raise CapacityError(f"more than {cap} clusters")
        found.extend(sorted(nxt, key=lambda c: (len(c), sorted(c))))
        level = nxt
    return found


def cluster_count_bound(loop_len: int, d: int, M: int) -> float:
    """Closed-form bound e^{2d|l|} 50^{dM} on the number of clusters."""
    return math.exp(2 * d * loop_len) * 50.0 ** (d * M)


def rectangular_loop(lat: Lattice, corner: Site, axes: tuple, R: int, S: int) -> tuple:
    """Counterclockwise boundary of an R x S rectangle in the (mu, nu) plane."""
    mu, nu = axes
    if not mu < nu:
        raise ValueError("axes must satisfy mu < nu")
    if R < 1 or S < 1:
        raise ValueError("rectangle sides must be positive")
    far = shift(shift(corner, mu, R), nu, S)
    if not (lat.contains(corner) and lat.contains(far)):
        raise ValueError("rectangle does not fit in the lattice")
    edges = []
    x = corner
    for _ in range(R):
        edges.append(Edge(x, mu, 1))
        x = shift(x, mu, 1)
    for _ in range(S):
        edges.append(Edge(x, nu, 1))
        x = shift(x, nu, 1)
    for _ in range(R):
        x = shift(x, mu, -1)
        edges.append(Edge(x, mu, -1))
    for _ in range(S):
        x = shift(x, nu, -1)
        edges.append(Edge(x, nu, -1))
    return tuple(edges)
