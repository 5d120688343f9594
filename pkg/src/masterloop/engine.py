"""Loop-equation operators on finite state spaces, norms and fixed-point solves.

Two models are supported.

truncated
    States are pairs (s, K) with K <= B on every plaquette and every edge
    carrying at most 2dB copies.  M acts at the first edge of the canonical
    representative of s; null strings are boundary states whose values are
    inputs.

modified
    States are triples (s, K, Q) with a set P of bad plaquettes.  M acts at
    the first good edge, or through revivals when the string is stuck.  The
    configuration space keeps |supp(B - K) u Q| <= underbar_area(loop).

A state key is ``(canonical string key, K, Q)``; Q is empty for the truncated
model.  Transitions are stored with their numeric coefficients, so applying M
is a fixed-order sparse sum that gives the same bits however the sweep is
scheduled.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping

from .area import Unbounded, area
from .lattice import CapacityError, Lattice
from .ops import ModifiedContext, classify_state, in_omega, loop_operations, modified_successors
from .strings import (Counts, LatticeString, canonical_form, canonical_string, edge_totals,
                      make_string, splitting_complexity)


@dataclass(frozen=True)
class NormParams:
    lam: float
    gamma: float
    rho: float

    def __post_init__(self):
        if not 0 < self.lam <= 1:
            raise ValueError("lambda must lie in (0, 1]")
        if not 0 < self.rho <= 1:
            raise ValueError("rho must lie in (0, 1]")
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")


@dataclass
class StateInfo:
    string: LatticeString
    K: Counts
    Q: frozenset
    iota: Fraction
    area: object
    kind: str  # interior, boundary, boundary0, boundary1, frontier


@dataclass
class StateSpace:
    model: str
    lat: Lattice
    B: int
    N: float
    beta: float
    root: tuple
    states: list
    info: dict
    transitions: dict
    P: frozenset = frozenset()
    loop: tuple = ()
    bounded: bool = False

    def __len__(self) -> int:
        return len(self.states)

    def boundary_keys(self) -> list:
        return [k for k in self.states if not self.transitions.get(k)]

    def interior_keys(self) -> list:
        return [k for k in self.states if self.transitions.get(k)]


def state_key(s: LatticeString, K: Counts, Q=frozenset()) -> tuple:
    return (canonical_form(s), K, frozenset(Q))


def _string_of(key) -> LatticeString:
    return LatticeString(key[0], None)


def truncated_successors(s: LatticeString, K: Counts, lat: Lattice, N: float, beta: float) -> list:
    """(canonical) results of M at the first edge of s."""
    s = canonical_string(s)
    if s.is_null:
        return []
    return loop_operations(s, (0, 0), K, lat, frozenset(), beta, N)


def check_truncated_member(s: LatticeString, K: Counts, lat: Lattice, B: int) -> bool:
    if any(v > B for v in K.values()):
        return False
    tot = edge_totals(s, K)
    return max(tot.values(), default=0) <= 2 * lat.d * B


def build_reachable(loop, B: int, lat: Lattice, model: str = "truncated", P=frozenset(),
                    N: float = 1.0, beta: float = 1.0, max_states: int = 10_000,
                    mode: str = "exact", area_cap: int = 64, with_area: bool = True) -> StateSpace:
    """Breadth-first closure of the root under M.

    State kinds: 'interior' (M has terms), 'boundary' (null strings of the
    truncated model), 'boundary0' / 'boundary1' (terminal triples of the
    modified model), 'outside' (successors of interior triples that fall out
    of the configuration space; their values are inputs like boundary
    values) and 'frontier' (bounded mode only: unexplored states).

    In exact mode exceeding ``max_states`` raises CapacityError.  In bounded
    mode the frontier is kept and the result is flagged ``bounded``.
    """
    if model not in ("truncated", "modified"):
        raise ValueError(f"unknown model {model!r}")
    if mode not in ("exact", "bounded"):
        raise ValueError(f"unknown mode {mode!r}")
    P = frozenset(P)
    root_s = canonical_string(make_string([loop]))
    K0 = Counts({p: B for p in lat.plaquettes if p not in P})
    root = state_key(root_s, K0)
    ctx = None
    limit = None
    if model == "modified":
        ctx = ModifiedContext(lat, tuple(loop), B, P, N, beta, area_cap)
        limit = ctx.size_limit
        if isinstance(limit, Unbounded):
            raise ValueError("driving loop has no spanning surface within the cap")
    info: dict = {}
    trans: dict = {}
    order = [root]
    queue = deque([root])
    seen = {root}
    outside: set = set()
    bounded = False

    def admit(k2) -> str:
        nonlocal bounded
        if k2 in seen:
            return "old"
        if len(seen) >= max_states:
            if mode == "exact":
                raise CapacityError(f"state space exceeds {max_states} states")
            bounded = True
            return "refused"
        seen.add(k2)
        order.append(k2)
        return "new"

    while queue:
        key = queue.popleft()
        s = _string_of(key)
        K, Q = key[1], key[2]
        if model == "truncated":
            if not check_truncated_member(s, K, lat, B):
                raise AssertionError("state outside the truncated space")
            results = truncated_successors(s, K, lat, N, beta)
            kind = "interior" if results else "boundary"
            flags = [True] * len(results)
        else:
            results = modified_successors(s, K, Q, ctx)
            flags = [in_omega(r.result_string, r.result_count, r.result_Q, ctx, limit)
                     for r in results]
            if results and any(flags):
                kind = "interior"
            else:
                kind = classify_state(s, K, Q, ctx)
                results, flags = [], []
        edges = []
        complete = True
        for r, inside in zip(results, flags):
            k2 = state_key(r.result_string, r.result_count, r.result_Q)
            status = admit(k2)
            if status == "refused":
                complete = False
                continue
            if status == "new":
                if inside:
                    queue.append(k2)
                else:
                    outside.add(k2)
            edges.append((k2, r.coefficient))
        if not complete:
            kind, edges = "frontier", []
        trans[key] = tuple(edges)
        info[key] = StateInfo(s, K, Q, splitting_complexity(s), None, kind)
    for key in order:
        if key not in info:
            st = "outside" if key in outside else "frontier"
            info[key] = StateInfo(_string_of(key), key[1], key[2],
                                  splitting_complexity(_string_of(key)), None, st)
            trans[key] = ()
    order = [k for k in order if k in info]
    if with_area:
        for st in info.values():
            st.area = area(st.string, lat, area_cap)
    return StateSpace(model, lat, B, N, beta, root, order, info, trans, P, tuple(loop), bounded)


def apply_m(space: StateSpace, f: Mapping, key) -> complex:
    """(Mf)(state): the loop-equation sum for interior states, the stored
    value itself for boundary states."""
    tr = space.transitions.get(key)
    if not tr:
        return f.get(key, 0.0)
    total = 0.0
    for k2, c in tr:
        total += c * f.get(k2, 0.0)
    return total


def apply_m_truncated(space: StateSpace, f: Mapping, key) -> complex:
    return apply_m(space, f, key)


def apply_m_modified(space: StateSpace, f: Mapping, key) -> complex:
    st = space.info[key]
    if st.kind == "boundary0":
        return 0.0
    return apply_m(space, f, key)


def full_action_terms(s: LatticeString, lat: Lattice, N: float, beta: float, pos=(0, 0)) -> list:
    """Right-hand side of the loop equation at ``pos`` for the untruncated
    action rho_p = exp: (coefficient, string) pairs.  Every plaquette is
    available for deformations and the exponential reproduces itself, so no
    plaquette count is tracked."""
    K = Counts.constant(lat.plaquettes, 1)
    return [(r.coefficient, r.result_string) for r in loop_operations(s, pos, K, lat, frozenset(), beta, N)]
