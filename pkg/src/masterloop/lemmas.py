"""Randomised checks of the combinatorial lemmas behind the loop equations.

Every lemma draws its cases from its own counter-based stream, keyed by
(seed, lemma index, case index), so a witness can be replayed from the seed
alone and the report does not depend on the number of worker threads.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional

import numpy as np

from .area import Unbounded, area, balancing_solution, underbar_area
from .lattice import (CapacityError, Lattice, build_lattice, cluster_count_bound, components, enumerate_clusters,
                      plaquettes_containing, rectangular_loop)
from .ops import (deformations, mergers, operation_bound_ok, revivals, splittings,
                  stuck_component)
from .strings import (Counts, LatticeString, edge_totals, is_balanced, key_text, make_string,
                      plaquette_string, random_string, splitting_complexity,
                      unoriented_occurrence_count)

AREA_CAP = 24
MAX_WITNESSES = 5
REVIVAL_SAMPLE = 8


@dataclass
class LemmaResult:
    name: str
    cases: int = 0
    checks: int = 0
    violations: int = 0
    witnesses: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.violations == 0 and self.cases > 0

    def to_dict(self) -> dict:
        return {"name": self.name, "cases": self.cases, "checks": self.checks,
                "violations": self.violations, "passed": self.passed,
                "witnesses": self.witnesses}


@dataclass
class LemmaReport:
    seed: int
    cases: int
    results: dict

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results.values())

    def to_dict(self) -> dict:
        return {"seed": self.seed, "cases": self.cases, "passed": self.passed,
                "lemmas": {k: v.to_dict() for k, v in self.results.items()}}


def case_rng(seed: int, lemma: int, case: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed), spawn_key=(1000 + lemma, case))
    return np.random.Generator(np.random.Philox(ss))


def _counts_text(K) -> list:
    return [[list(p.corner), list(p.axes), p.sign, int(v)] for p, v in sorted(K.items()) if v]


def _string_text(s: LatticeString) -> str:
    return key_text(s.loops) if not s.is_null else "null"


# --- generators -------------------------------------------------------------

def _lattice(rng) -> Lattice:
    d = 2 if rng.random() < 0.6 else 3
    L = int(rng.integers(1, 4)) if d == 2 else int(rng.integers(1, 3))
    return build_lattice(L, d)


def _random_position(s: LatticeString, rng):
    pos = list(s.positions())
    return pos[int(rng.integers(len(pos)))]


def _grow(s: LatticeString, lat: Lattice, rng, steps: int) -> LatticeString:
    """Attach random plaquettes at random positions; this doubles edges and
    so produces loops with repeated edges in both orientations."""
    for _ in range(steps):
        if s.is_null:
            break
        i, k = _random_position(s, rng)
        l = s.loops[i][k:] + s.loops[i][:k]
        e = l[0]
        cand = plaquettes_containing(lat, e) + plaquettes_containing(lat, e.inverse())
        if not cand:
            continue
        p = cand[int(rng.integers(len(cand)))]
        if e in p.edges():
            new = p.loop_from(e) + l
        else:
            new = p.loop_from(e.inverse())[1:] + l[1:]
        t = make_string(s.loops[:i] + (new,) + s.loops[i + 1:])
        if not t.is_null:
            s = t
    return s


def rich_string(lat: Lattice, rng, max_loops: int = 3) -> LatticeString:
    """Random string built from random walks, plaquette loops and grown
    loops, so that repeated edges (needed by splittings and mergers) are
    common."""
    kind = int(rng.integers(3))
    if kind == 0:
        s = random_string(lat, rng, max_len=12, max_loops=max_loops)
    else:
        ps = [lat.plaquettes[int(rng.integers(len(lat.plaquettes)))]
              for _ in range(int(rng.integers(1, max_loops + 1)))]
        ps = [p if rng.random() < 0.5 else p.inverse() for p in ps]
        s = plaquette_string(ps)
    s = _grow(s, lat, rng, int(rng.integers(0, 4)))
    if len(s.loops) >= 2 or rng.random() < 0.5:
        return s
    # add a loop through an edge of s so that mergers exist
    i, k = _random_position(s, rng)
    e = s.loops[i][k]
    cand = plaquettes_containing(lat, e) + plaquettes_containing(lat, e.inverse())
    if cand:
        p = cand[int(rng.integers(len(cand)))]
        s = make_string(s.loops + (p.edges(),))
    return s


def random_counts(lat: Lattice, rng, B: int) -> Counts:
    return Counts({p: int(rng.integers(0, B + 1)) for p in lat.plaquettes})


def stuck_case(rng):
    """(lattice, P, s) with s stuck in bad plaquettes.  Half of the cases are
    annuli: a ring of bad plaquettes around a good one, with s the outer
    boundary of the ring, so that revivals are genuinely needed."""
    if rng.random() < 0.5:
        lat = build_lattice(2, 2) if rng.random() < 0.7 else build_lattice(1, 3)
        if lat.d == 2:
            R = 3
            cx, cy = (int(v) for v in rng.integers(-2, 0, size=2))
            outer = rectangular_loop(lat, (cx, cy), (0, 1), R, R)
            inner = frozenset(p for p in lat.plaquettes
                              if p.corner == (cx + 1, cy + 1))
            square = frozenset(p for p in lat.plaquettes
                               if cx <= p.corner[0] < cx + R and cy <= p.corner[1] < cy + R)
            P = square - inner
            s = make_string([outer])
        else:
            # a 2 x 2 face with one bad plaquette missing from the cover
            face = [p for p in lat.plaquettes if p.axes == (0, 1) and p.corner[2] == 0]
            P = frozenset(face[: int(rng.integers(1, len(face) + 1))])
            s = plaquette_string([p if rng.random() < 0.5 else p.inverse() for p in sorted(P)])
        return lat, P, s
    lat = _lattice(rng)
    ps = list(lat.plaquettes)
    start = ps[int(rng.integers(len(ps)))]
    P = {start}
    for _ in range(int(rng.integers(0, 4))):
        nb = sorted(set().union(*(lat.neighbors[p] for p in P)) - P)
        if nb:
            P.add(nb[int(rng.integers(len(nb)))])
    P = frozenset(P)
    chosen = [p for p in sorted(P) if rng.random() < 0.7] or [start]
    s = plaquette_string([p if rng.random() < 0.5 else p.inverse() for p in chosen])
    if s.is_null:
        s = plaquette_string([start])
    return lat, P, s


# --- individual lemma checks -----------------------------------------------

def _area(s, lat):
    return area(s, lat, AREA_CAP)


def _fail(res: LemmaResult, witness: dict) -> None:
    res.violations += 1
    if len(res.witnesses) < MAX_WITNESSES:
        res.witnesses.append(witness)


def _check_split(rng, iota) -> tuple:
    lat = _lattice(rng)
    for _ in range(50):
        s = rich_string(lat, rng)
        if s.is_null:
            continue
        pos = _random_position(s, rng)
        outs = splittings(s, pos)
        if outs:
            break
    else:
        return 0, []
    bad = []
    i0, a0 = iota(s), _area(s, lat)
    for r in outs:
        s2 = r.result_string
        s2.validate(lat)
        i1 = iota(s2)
        lim = Fraction(3, 2) if r.kind == "split-" else 1
        a1 = _area(s2, lat)
        ok = i1 <= i0 - lim and (a0 == a1 or isinstance(a0, Unbounded) or isinstance(a1, Unbounded))
        if not ok:
            bad.append({"lattice": [lat.L, lat.d], "s": _string_text(s), "pos": list(pos),
                        "kind": r.kind, "result": _string_text(s2), "iota": [str(i0), str(i1)],
                        "area": [str(a0), str(a1)]})
    return len(outs), bad


def _check_merge(rng, iota) -> tuple:
    lat = _lattice(rng)
    for _ in range(50):
        s = rich_string(lat, rng)
        if len(s.loops) < 2:
            continue
        pos = _random_position(s, rng)
        outs = mergers(s, pos)
        if outs:
            break
    else:
        return 0, []
    bad = []
    i0, a0 = iota(s), _area(s, lat)
    for r in outs:
        s2 = r.result_string
        s2.validate(lat)
        i1 = iota(s2)
        cancelled = len(s2.loops) < len(s.loops) - 1
        a1 = _area(s2, lat)
        ok = i1 <= i0 + 1 and (not cancelled or i1 <= i0)
        ok = ok and (a0 == a1 or isinstance(a0, Unbounded) or isinstance(a1, Unbounded))
        if not ok:
            bad.append({"lattice": [lat.L, lat.d], "s": _string_text(s), "pos": list(pos),
                        "kind": r.kind, "result": _string_text(s2), "iota": [str(i0), str(i1)],
                        "area": [str(a0), str(a1)]})
    return len(outs), bad


def _check_deform(rng, iota) -> tuple:
    lat = _lattice(rng)
    B = int(rng.integers(1, 4))
    for _ in range(50):
        s = rich_string(lat, rng)
        if s.is_null:
            continue
        K = random_counts(lat, rng, B)
        pos = _random_position(s, rng)
        outs = deformations(s, pos, K, lat)
        if outs:
            break
    else:
        return 0, []
    bad = []
    i0, a0 = iota(s), _area(s, lat)
    for r in outs:
        s2 = r.result_string
        s2.validate(lat)
        i1 = iota(s2)
        a1 = _area(s2, lat)
        area_ok = isinstance(a0, Unbounded) or isinstance(a1, Unbounded) or a0 <= a1 + 1
        ok = i1 <= i0 + 1 and area_ok and r.result_count.total() == K.total() - 1
        if not ok:
            bad.append({"lattice": [lat.L, lat.d], "s": _string_text(s), "pos": list(pos),
                        "kind": r.kind, "result": _string_text(s2), "iota": [str(i0), str(i1)],
                        "area": [str(a0), str(a1)], "K": _counts_text(K)})
    return len(outs), bad


def _check_revive(rng, iota) -> tuple:
    for _ in range(50):
        lat, P, s = stuck_case(rng)
        B = int(rng.integers(1, 3))
        K = Counts({p: int(rng.integers(1, B + 1)) for p in lat.plaquettes
                    if p not in P and rng.random() < 0.3})
        Qt = stuck_component(s, P, lat)
        if Qt is None:
            continue
        try:
            outs = revivals(s, K, frozenset(), P, lat, cap=5000)
        except CapacityError:
            continue
        if outs:
            break
    else:
        return 0, []
    bad = []
    i0 = iota(s)
    u0 = underbar_area(s, lat, AREA_CAP)
    if len(outs) > REVIVAL_SAMPLE:
        pick = rng.choice(len(outs), size=REVIVAL_SAMPLE, replace=False)
        outs = [outs[int(j)] for j in sorted(pick)]
    for r in outs:
        s2 = r.result_string
        s2.validate(lat)
        i1 = iota(s2)
        u1 = underbar_area(s2, lat, AREA_CAP)
        grow = len(r.result_Q) - 0
        u_ok = (isinstance(u0, Unbounded) or isinstance(u1, Unbounded)
                or u0 <= u1 + 8 * (lat.d - 1) * grow)
        z_ok = all(r.result_count.get(p, 0) == 0 for p in
                   {q.positive() for q in r.plaquettes})
        if not (i1 == i0 and u_ok and z_ok):
            bad.append({"lattice": [lat.L, lat.d], "s": _string_text(s), "kind": r.kind,
                        "P": _counts_text({p: 1 for p in P}), "result": _string_text(s2),
                        "iota": [str(i0), str(i1)], "underbar_area": [str(u0), str(u1)]})
    return len(outs), bad


def _check_op_counts(rng, iota) -> tuple:
    lat = _lattice(rng)
    B = int(rng.integers(1, 4))
    for _ in range(50):
        s = rich_string(lat, rng)
        K = random_counts(lat, rng, B)
        if s.is_null or max(edge_totals(s, K).values()) > 2 * lat.d * B:
            continue
        pos = _random_position(s, rng)
        res = operation_bound_ok(s, K, pos, lat, B)
        if all(ok for _, ok in res.values()):
            return 1, []
        return 1, [{"lattice": [lat.L, lat.d], "B": B, "s": _string_text(s), "pos": list(pos),
                    "counts": {k: v[0] for k, v in res.items()}}]
    return 0, []


def _check_monotone(rng, iota) -> tuple:
    lat = _lattice(rng)
    B = int(rng.integers(1, 4))
    s = rich_string(lat, rng)
    if s.is_null:
        return 0, []
    K = random_counts(lat, rng, B)
    pos = _random_position(s, rng)
    outs = splittings(s, pos, K) + mergers(s, pos, K) + deformations(s, pos, K, lat)
    before = {}
    bad = []
    for r in outs:
        for e in set(f.positive() for f in r.result_string.edges()) | set(
                f.positive() for f in s.edges()):
            if e not in before:
                before[e] = unoriented_occurrence_count(s, K, e)
            after = unoriented_occurrence_count(r.result_string, r.result_count, e)
            if after > before[e]:
                bad.append({"lattice": [lat.L, lat.d], "s": _string_text(s), "pos": list(pos),
                            "kind": r.kind, "edge": [list(e.base), e.axis]})
                break
    return max(1, len(outs)), bad


def _exhaustive_area(lat: Lattice, s: LatticeString, cap: int):
    """Least sum J over all oriented plaquette multisets of size <= cap."""
    oriented = list(lat.plaquettes) + [p.inverse() for p in lat.plaquettes]
    for size in range(cap + 1):
        for combo in itertools.combinations_with_replacement(oriented, size):
            J = {}
            for p in combo:
                J[p] = J.get(p, 0) + 1
            if is_balanced(s, J):
                return size
    return None


def _check_area_oracle(rng, iota) -> tuple:
    lat = build_lattice(1, 2)
    s = random_string(lat, rng, max_len=8, max_loops=2)
    if s.perimeter > 8:
        return 0, []
    ex = _exhaustive_area(lat, s, 4)
    bb = area(s, lat, 4, method="search")
    wn = area(s, lat, 4, method="auto")
    got = None if isinstance(bb, Unbounded) else bb
    got2 = None if isinstance(wn, Unbounded) else wn
    if got == ex and got2 == ex:
        return 1, []
    return 1, [{"s": _string_text(s), "exhaustive": ex, "search": str(bb), "winding": str(wn)}]


def _check_composition(rng, iota) -> tuple:
    lat = _lattice(rng)
    ps = lat.plaquettes
    A = [ps[int(rng.integers(len(ps)))] for _ in range(int(rng.integers(1, 4)))]
    A = [p if rng.random() < 0.5 else p.inverse() for p in A]
    s = plaquette_string(A)
    J1: dict = {}
    for p in A:
        J1[p.inverse()] = J1.get(p.inverse(), 0) + 1
    J2: dict = {}
    for _ in range(int(rng.integers(0, 3))):
        q = ps[int(rng.integers(len(ps)))]
        J2[q] = J2.get(q, 0) + 1
        J2[q.inverse()] = J2.get(q.inverse(), 0) + 1
    J12 = dict(J1)
    for p, m in J2.items():
        J12[p] = J12.get(p, 0) + m
    if not (is_balanced(s, J12) and is_balanced(make_string([]), J2)):
        return 1, [{"s": _string_text(s), "note": "construction not balanced"}]
    if is_balanced(s, J1):
        return 1, []
    return 1, [{"s": _string_text(s), "J1": _counts_text(J1), "J2": _counts_text(J2)}]


def _check_support(rng, iota) -> tuple:
    lat = _lattice(rng)
    s = rich_string(lat, rng, max_loops=2)
    if s.is_null:
        return 0, []
    sol = balancing_solution(lat, s, AREA_CAP, method="auto")
    if sol is None:
        return 0, []
    # turn the net solution into J and pad it with cancelling pairs
    J = {}
    for p, m in sol.items():
        q = p if m > 0 else p.inverse()
        J[q] = J.get(q, 0) + abs(m)
    for _ in range(int(rng.integers(0, 3))):
        q = lat.plaquettes[int(rng.integers(len(lat.plaquettes)))]
        J[q] = J.get(q, 0) + 1
        J[q.inverse()] = J.get(q.inverse(), 0) + 1
    assert is_balanced(s, J)
    supp = {p.positive() for p, m in J.items() if m}
    s_edges = {e.positive() for e in s.edges()}
    S = set()
    for comp in components(lat, supp):
        if any(e.positive() in s_edges for p in comp for e in p.edges()):
            S |= comp
    u = underbar_area(s, lat, AREA_CAP)
    if isinstance(u, Unbounded) or len(S) >= u:
        return 1, []
    return 1, [{"lattice": [lat.L, lat.d], "s": _string_text(s), "S": len(S), "underbar": u}]


def _check_clusters(rng, iota) -> tuple:
    d = 2 if rng.random() < 0.5 else 3
    lat = build_lattice(2, d) if d == 2 else build_lattice(1, 3)
    if rng.random() < 0.5:
        R, S = 1, 1
    else:
        R, S = (1, 2) if d == 2 else (1, 1)
    corner = (0,) * d if d == 3 else (-1, -1)
    loop = rectangular_loop(lat, corner, (0, 1), R, S)
    M = int(rng.integers(0, 4 if d == 2 else 3))
    n = len(enumerate_clusters(lat, loop, M))
    if n <= cluster_count_bound(len(loop), d, M):
        return 1, []
    return 1, [{"d": d, "loop": [R, S], "M": M, "count": n}]


LEMMAS: list = [
    ("splitting", _check_split),
    ("merger", _check_merge),
    ("deformation", _check_deform),
    ("revival", _check_revive),
    ("operation_counts", _check_op_counts),
    ("occurrence_monotone", _check_monotone),
    ("area_oracle", _check_area_oracle),
    ("balanced_composition", _check_composition),
    ("support_at_least_area", _check_support),
    ("cluster_bound", _check_clusters),
]

# cheap-to-generate but slow-to-check lemmas run on fewer cases
CASE_FRACTION = {"area_oracle": 0.2, "cluster_bound": 0.1}
MAX_DRAW_FACTOR = 5


def verify_lemmas(seed: int = 7, cases: int = 1000, iota: Callable = splitting_complexity,
                  workers: int = 1, only: Optional[list] = None) -> LemmaReport:
    """Run every lemma on ``cases`` generated instances (fewer for the
    expensive oracles) and collect per-lemma counts and witnesses.

    ``iota`` replaces the splitting complexity, which lets a test inject a
    deliberately wrong formula and watch the harness catch it."""
    if cases < 1:
        raise ValueError("cases must be positive")
    results = {}
    for idx, (name, fn) in enumerate(LEMMAS):
        if only is not None and name not in only:
            continue
        n = max(1, int(round(cases * CASE_FRACTION.get(name, 1.0))))
        res = LemmaResult(name)

        def one(c, fn=fn, idx=idx):
            return fn(case_rng(seed, idx, c), iota)

        # instances where the operation does not apply are skipped, so keep
        # drawing fresh case indices in rounds until n cases count
        start = 0
        while res.cases < n and start < MAX_DRAW_FACTOR * n:
            idxs = range(start, start + n - res.cases)
            start = idxs.stop
            if workers > 1:
                with ThreadPoolExecutor(max_workers=workers) as ex:
                    outs = list(ex.map(one, idxs))
            else:
                outs = [one(c) for c in idxs]
            for c, (checks, bad) in zip(idxs, outs):
                if checks:
                    res.cases += 1
                    res.checks += checks
                for w in bad:
                    w = dict(w, case=c, seed=seed)
                    _fail(res, w)
        results[name] = res
    return LemmaReport(seed, cases, results)


def mutant_iota(s: LatticeString) -> Fraction:
    """|s|/4 - 2n: a wrong splitting complexity used to test the harness."""
    if s.is_null:
        return Fraction(0)
    return Fraction(s.perimeter, 4) - 2 * len(s.loops)
