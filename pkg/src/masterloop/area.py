"""Minimal spanning plaquette counts for strings.

``area`` is the least total number of plaquette copies that balances a string
and ``underbar_area`` the least number of distinct plaquettes.  Both are exact
searches over the integer system "signed edge flux of s plus the plaquette
boundaries vanishes on every edge".

The general solver is iterative-deepening branch and bound.  It always repairs
the smallest unbalanced edge by adding one unit of a plaquette through it, and
prunes with the bound sum|residual| / 4: each plaquette unit cancels at most
four units of edge flux.  That bound is the value of a feasible point of the
dual of the linear relaxation, so it is exact integer arithmetic and never
cuts off an optimum.

In two dimensions the balancing plaquette multiplicities are unique (they are
minus the winding numbers of the string around each cell), so both quantities
are read off directly.  The search is still used, and tested against this.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

from .lattice import Edge, Lattice, Plaquette, enumerate_clusters
from .strings import LatticeString, canonical_form, canonical_string, edge_flux, make_string


@dataclass(frozen=True)
class Unbounded:
    """No balancing plaquette count within ``cap``."""

    cap: int

    def __repr__(self) -> str:
        return f"Unbounded({self.cap})"


def winding_numbers(lat: Lattice, s: LatticeString) -> Optional[dict]:
    """Two-dimensional only: plaquette -> net multiplicity m_p (copies of p
    minus copies of p^-1) with flux(s) + sum m_p boundary(p) = 0, or None when
    no such assignment exists inside the lattice."""
    if lat.d != 2:
        raise ValueError("winding numbers need d = 2")
    flux = edge_flux(s)
    m = {}
    for p in lat.plaquettes:
        (i, j) = p.corner
        w = 0
        for y in range(-lat.L, j + 1):
            w += flux.get(Edge((i, y), 0, 1), 0)
        if w:
            m[p] = -w
    check = dict(flux)
    for p, v in m.items():
        for e in p.edges():
            k = e.positive()
            check[k] = check.get(k, 0) + v * e.sign
    if any(check.values()):
        return None
    return m


def _search(lat: Lattice, flux: dict, cap: int, support: bool, max_units: int):
    inc = lat.incidence
    if any(e not in inc for e in flux):
        return None

    def h_area(res):
        t = sum(abs(v) for v in res.values())
        return (t + 3) // 4

    def h_support(res, used):
        covered = set()
        for p in used:
            for e in p.positive().edges():
                covered.add(e.positive())
        t = sum(1 for e in res if e not in covered)
        return (t + 3) // 4

    best: dict = {}

    def dfs(res: dict, used: dict, g: int, units: int, limit: int) -> Optional[dict]:
        if not res:
            return dict(used)
        h = h_support(res, used) if support else h_area(res)
        if g + h > limit or units >= max_units:
            return None
        key = (frozenset(res.items()), frozenset(used.items()) if support else None)
        prev = best.get(key)
        if prev is not None and prev <= (g if not support else units):
            return None
        best[key] = g if not support else units
        e = min(res)
        want = -1 if res[e] > 0 else 1
        for p, c in inc[e]:
            sp = want * c
            cur = used.get(p, 0)
            if cur * sp < 0:
                continue
            nres = dict(res)
            for f in p.edges():
                k = f.positive()
                nv = nres.get(k, 0) + sp * f.sign
                if nv:
                    nres[k] = nv
                else:
                    nres.pop(k, None)
            used[p] = cur + sp
            cost = g + (0 if (support and cur) else 1)
            out = dfs(nres, used, cost, units + 1, limit)
            if cur:
                used[p] = cur
            else:
                del used[p]
            if out is not None:
                return out
        return None

    start = (h_support(flux, {}) if support else h_area(flux))
    for limit in range(start, cap + 1):
        best.clear()
        sol = dfs(dict(flux), {}, 0, 0, limit)
        if sol is not None:
            return sol
    return None


def balancing_solution(lat: Lattice, s: LatticeString, cap: int, support: bool = False,
                       max_units: Optional[int] = None, method: str = "auto") -> Optional[dict]:
    """Net plaquette multiplicities realising the minimum, or None past cap."""
    flux = edge_flux(s)
    if not flux:
        return {}
    if method == "auto" and lat.d == 2:
        m = winding_numbers(lat, s)
        if m is None:
            return None
        cost = len(m) if support else sum(abs(v) for v in m.values())
        return m if cost <= cap else None
    if max_units is None:
        max_units = 4 * cap + 4 if support else cap + 1
    return _search(lat, flux, cap, support, max_units)


@lru_cache(maxsize=200_000)
def _area_cached(lat: Lattice, key: tuple, cap: int, support: bool, method: str):
    s = LatticeString(key, None) if key else LatticeString((), None)
    sol = balancing_solution(lat, s, cap, support=support, method=method)
    if sol is None:
        return Unbounded(cap)
    return len(sol) if support else sum(abs(v) for v in sol.values())


def area(s: LatticeString, lat: Lattice, cap: int = 64, method: str = "auto"):
    """Least sum_p J(p) over J with (s, J) balanced, or Unbounded(cap)."""
    return _area_cached(lat, canonical_form(s), cap, False, method)


def underbar_area(s: LatticeString, lat: Lattice, cap: int = 64, method: str = "auto"):
    """Least |supp J| over J with (s, J) balanced, or Unbounded(cap).

    For d >= 3 the search also bounds the total number of plaquette units by
    4 * cap + 4; within that bound the minimum is exact.
    """
    return _area_cached(lat, canonical_form(s), cap, True, method)


def m_of_p(lat: Lattice, loop, P, cap: int = 64) -> int:
    """Largest number of bad plaquettes met by a cluster of the loop with at
    most area(loop) plaquettes."""
    P = frozenset(P)
    if not P:
        return 0
    a = area(make_string([loop]), lat, cap)
    if isinstance(a, Unbounded):
        raise ValueError("loop has no spanning surface within cap")
    return max(len(C & P) for C in enumerate_clusters(lat, loop, a))
