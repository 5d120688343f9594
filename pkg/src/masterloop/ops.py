"""String operations appearing in the loop equation at a single edge.

Every operation acts at an edge *position* ``(loop index, offset)`` and
returns :class:`OperationResult` records carrying the result string, the
updated plaquette count, the updated stuck set and the weight with which the
result enters the equation:

    split+  -1        merge+  -1/N^2        deform+  -beta/N
    split-  +1        merge-  +1/N^2        deform-  +beta/N
    revive  (N beta)^|J| / J!

Results are backtrack-free; loops that cancel completely are dropped, and a
result with no loops left is the null string based at the tail of the edge.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import product
from typing import Optional

from .lattice import CapacityError, Lattice, Plaquette, boundary_of_set, components, plaquettes_containing
from .strings import Counts, LatticeString, edge_totals, make_string


@dataclass(frozen=True)
class OperationResult:
    kind: str
    result_string: LatticeString
    result_count: Counts
    result_Q: frozenset = frozenset()
    coefficient: float = 1.0
    plaquettes: tuple = field(default=(), compare=False)


def _rot(loop, k):
    return loop[k:] + loop[:k]


def splittings(s: LatticeString, pos, K: Optional[Counts] = None, Q=frozenset()) -> list:
    """Split the loop at ``pos`` against every other occurrence of the same
    lattice edge in that loop."""
    K = Counts() if K is None else K
    i, k = pos
    l = _rot(s.loops[i], k)
    e = l[0]
    inv = e.inverse()
    out = []
    for j in range(1, len(l)):
        f = l[j]
        if f == e:
            pieces, kind, c = (l[j:], l[:j]), "split+", -1.0
        elif f == inv:
            pieces, kind, c = (l[j + 1:], l[1:j]), "split-", 1.0
        else:
            continue
        new = s.loops[:i] + pieces + s.loops[i + 1:]
        out.append(OperationResult(kind, make_string(new, e.tail), K, frozenset(Q), c))
    return out


def mergers(s: LatticeString, pos, K: Optional[Counts] = None, Q=frozenset(), N: float = 1.0) -> list:
    """Merge the loop at ``pos`` with every occurrence of the edge (or its
    inverse) in a different loop."""
    K = Counts() if K is None else K
    i, k = pos
    li = _rot(s.loops[i], k)
    e = li[0]
    inv = e.inverse()
    w = 1.0 / (N * N)
    out = []
    for j, lj0 in enumerate(s.loops):
        if j == i:
            continue
        for kk, f in enumerate(lj0):
            if f == e:
                merged, kind, c = _rot(lj0, kk) + li, "merge+", -w
            elif f == inv:
                merged, kind, c = _rot(lj0, kk)[1:] + li[1:], "merge-", w
            else:
                continue
            rest = tuple(l for m, l in enumerate(s.loops) if m != i and m != j)
            out.append(OperationResult(kind, make_string((merged,) + rest, e.tail), K,
                                       frozenset(Q), c))
    return out


def deformations(s: LatticeString, pos, K: Counts, lat: Lattice, Q=frozenset(),
                 beta: float = 1.0, N: float = 1.0) -> list:
    """Attach a plaquette loop at ``pos`` (positive) or replace the edge by the
    rest of a plaquette through its inverse (negative).  Only plaquettes with
    K >= 1 are used, and the used plaquette's count drops by one."""
    i, k = pos
    li = _rot(s.loops[i], k)
    e = li[0]
    w = beta / N
    out = []
    for p in plaquettes_containing(lat, e):
        q = p.positive()
        if K.get(q, 0) >= 1:
            new = p.loop_from(e) + li
            loops = s.loops[:i] + (new,) + s.loops[i + 1:]
            out.append(OperationResult("deform+", make_string(loops, e.tail), K.add(q, -1),
                                       frozenset(Q), -w, (p,)))
    for p in plaquettes_containing(lat, e.inverse()):
        q = p.positive()
        if K.get(q, 0) >= 1:
            new = p.loop_from(e.inverse())[1:] + li[1:]
            loops = s.loops[:i] + (new,) + s.loops[i + 1:]
            out.append(OperationResult("deform-", make_string(loops, e.tail), K.add(q, -1),
                                       frozenset(Q), w, (p,)))
    return out


def loop_operations(s: LatticeString, pos, K: Counts, lat: Lattice, Q=frozenset(),
                    beta: float = 1.0, N: float = 1.0) -> list:
    return (splittings(s, pos, K, Q) + mergers(s, pos, K, Q, N)
            + deformations(s, pos, K, lat, Q, beta, N))


def bad_edges(P) -> frozenset:
    return frozenset(e.positive() for p in P for e in p.edges())


def good_edge(s: LatticeString, P, lat: Optional[Lattice] = None):
    """First position whose edge lies in no bad plaquette."""
    covered = bad_edges(P)
    for pos in s.positions():
        if s.edge_at(pos).positive() not in covered:
            return pos
    return None


def stuck_component(s: LatticeString, P, lat: Lattice) -> Optional[frozenset]:
    """Union of the bad components meeting an edge of s, when that union
    covers every edge of s; otherwise None."""
    if s.is_null or not P:
        return None
    s_edges = {e.positive() for e in s.edges()}
    Qt = set()
    for comp in components(lat, P):
        if any(f.positive() in s_edges for p in comp for f in p.edges()):
            Qt |= comp
    if not Qt:
        return None
    covered = bad_edges(Qt)
    if all(e in covered for e in s_edges):
        return frozenset(Qt)
    return None


def revivals(s: LatticeString, K: Counts, Q, P, lat: Lattice, beta: float = 1.0,
             N: float = 1.0, cap: int = 200_000) -> list:
    """All nonzero J on the oriented boundary of the stuck component with
    J(p) + J(p^-1) <= K(p).  Copies of the plaquette loops go in front of s,
    K is zeroed on the boundary and the stuck component joins Q."""
    Qt = stuck_component(s, P, lat)
    if Qt is None:
        return []
    R = sorted(boundary_of_set(lat, Qt, P))
    choices = []
    size = 1
    for q in R:
        kq = K.get(q, 0)
        opts = [(a, b) for a in range(kq + 1) for b in range(kq + 1 - a)]
        choices.append(opts)
        size *= len(opts)
        if size > cap:
            raise CapacityError(f"more than {cap} revivals")
    K_new = K.zeroed(R)
    Q_new = frozenset(Q) | Qt
    out = []
    for combo in product(*choices):
        total = sum(a + b for a, b in combo)
        if total == 0:
            continue
        loops = []
        used = []
        fact = 1
        for q, (a, b) in zip(R, combo):
            for p, m in ((q, a), (q.inverse(), b)):
                if m:
                    loops += [p.edges()] * m
                    used += [p] * m
                    fact *= math.factorial(m)
        coef = (N * beta) ** total / fact
        new = make_string(tuple(loops) + s.loops)
        out.append(OperationResult("revive", new, K_new, Q_new, coef, tuple(used)))
    return out


def operation_bound_ok(s: LatticeString, K: Counts, pos, lat: Lattice, B: int) -> dict:
    """Counts of each operation family at ``pos`` against 2dB, 2dB, 4d."""
    d = lat.d
    ns = len(splittings(s, pos, K))
    nm = len(mergers(s, pos, K))
    nd = len(deformations(s, pos, K, lat))
    return {"split": (ns, ns <= 2 * d * B), "merge": (nm, nm <= 2 * d * B),
            "deform": (nd, nd <= 4 * d)}


@dataclass(frozen=True)
class ModifiedContext:
    """Everything needed to explore the configuration space with bad
    plaquettes: lattice, driving loop, truncation level, bad set, weights."""

    lat: Lattice
    loop: tuple
    B: int
    P: frozenset
    N: float = 1.0
    beta: float = 1.0
    area_cap: int = 64

    @property
    def size_limit(self) -> int:
        from .area import underbar_area
        return underbar_area(make_string([self.loop]), self.lat, self.area_cap)


def deficit_support(K: Counts, lat: Lattice, B: int, P) -> frozenset:
    """supp(B - K) over good plaquettes."""
    return frozenset(p for p in lat.plaquettes if p not in P and K.get(p, 0) != B)


def in_omega(s, K: Counts, Q, ctx: ModifiedContext, limit: Optional[int] = None) -> bool:
    limit = ctx.size_limit if limit is None else limit
    return len(deficit_support(K, ctx.lat, ctx.B, ctx.P) | frozenset(Q)) <= limit


def modified_successors(s: LatticeString, K: Counts, Q, ctx: ModifiedContext) -> list:
    """One-step successors at the designated good edge, or revivals when the
    string is stuck and its stuck component is smaller than its modified
    area."""
    from .area import underbar_area
    if s.is_null:
        return []
    pos = good_edge(s, ctx.P)
    if pos is not None:
        return loop_operations(s, pos, K, ctx.lat, Q, ctx.beta, ctx.N)
    Qt = stuck_component(s, ctx.P, ctx.lat)
    ua = underbar_area(s, ctx.lat, ctx.area_cap)
    if Qt is not None and isinstance(ua, int) and len(Qt) < ua:
        return revivals(s, K, Q, ctx.P, ctx.lat, ctx.beta, ctx.N)
    return []


def has_isolated_good_edge(s: LatticeString, K: Counts, P) -> bool:
    """Some edge outside every bad plaquette with n_e(s, K) = 1, the single
    occurrence being in s itself.  Only then is every expansion term
    unbalanced: K is an upper bound, so a lone K-occurrence can be dropped, and
    a bad plaquette can always supply further copies."""
    covered = bad_edges(P)
    tot = edge_totals(s, K)
    in_s = edge_totals(s, {})
    return any(v == 1 and in_s.get(e, 0) == 1 and e not in covered for e, v in tot.items())


def classify_state(s: LatticeString, K: Counts, Q, ctx: ModifiedContext) -> str:
    """'interior' if some successor stays in the configuration space,
    otherwise 'boundary0' (value provably zero) or 'boundary1'."""
    from .area import underbar_area
    limit = ctx.size_limit
    succ = modified_successors(s, K, Q, ctx)
    if not s.is_null and any(in_omega(r.result_string, r.result_count, r.result_Q, ctx, limit)
                             for r in succ):
        return "interior"
    if s.is_null:
        return "boundary1"
    if has_isolated_good_edge(s, K, ctx.P):
        return "boundary0"
    Qt = stuck_component(s, ctx.P, ctx.lat)
    if Qt is not None and good_edge(s, ctx.P) is None:
        ua = underbar_area(s, ctx.lat, ctx.area_cap)
        if isinstance(ua, int) and len(Qt) < ua and not revivals(s, K, Q, ctx.P, ctx.lat):
            return "boundary0"
    return "boundary1"
