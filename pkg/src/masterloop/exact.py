"""Exact evaluation of string integrals for the abelian group U(1).

With a single phase per edge, each action factor expands as

    exp_k(beta (z + 1/z)) = sum_{a + b <= k} beta^(a+b) / (a! b!) z^a z^-b,

and the Haar integral of a monomial is 1 when every edge phase cancels and 0
otherwise.  Only the net multiplicity m_p = a - b of each plaquette enters the
cancellation, so the integral is a sum over integer vectors m solving
flux(s) + sum_p m_p boundary(p) = 0 of a product of per-plaquette weights

    w(m) = sum over a - b = m of beta^(a+b) / (a! b!) * [a + b allowed].

"Allowed" is a + b <= K(p) for truncated factors, a + b > B for tail factors
and everything for the full exponential.  The last two are Bessel-type series
summed until the terms stop changing the result.
"""

from __future__ import annotations

import math
from functools import lru_cache
from typing import Mapping, Optional

from .lattice import CapacityError, Lattice
from .strings import LatticeString, edge_flux, is_balanced

FULL = "full"


def bessel_i(nu: int, x: float, rtol: float = 1e-17) -> float:
    """Modified Bessel function I_nu(x) for integer nu >= 0 from its power
    series sum (x/2)^(2k+nu) / (k! (k+nu)!)."""
    nu = abs(int(nu))
    h = x / 2.0
    term = h ** nu / math.factorial(nu)
    total = 0.0
    k = 0
    while True:
        total += term
        k += 1
        term *= h * h / (k * (k + nu))
        if term <= rtol * abs(total) or term == 0.0:
            total += term
            return total


@lru_cache(maxsize=None)
def _weight(kind: str, k: int, m: int, beta: float) -> float:
    """Per-plaquette weight for net multiplicity m.

    kind 'trunc': a + b <= k;  'tail': a + b > k;  'full': unrestricted."""
    m = abs(m)
    if kind == "trunc" and m > k:
        return 0.0
    if beta == 0.0:
        if kind == "tail":
            return 0.0
        return 1.0 if m == 0 else 0.0
    total = 0.0
    b = 0
    term = beta ** m / math.factorial(m)
    while True:
        deg = 2 * b + m
        if kind == "trunc" and deg > k:
            return total
        if kind != "tail" or deg > k:
            total += term
            if kind != "trunc" and (term == 0.0 or term <= 1e-18 * total):
                return total
        b += 1
        term *= beta * beta / (b * (b + m))


def plaquette_weight(kind: str, k: int, m: int, beta: float) -> float:
    return _weight(kind, int(k), int(m), float(beta))


def exact_u1_monomial(s: LatticeString, J: Mapping) -> int:
    """Haar integral of W_s times prod_p (U_p)^J(p) for U(1): 1 if balanced."""
    return 1 if is_balanced(s, J) else 0


def _max_net(kind: str, k: int, beta: float) -> int:
    if kind == "trunc":
        return k
    w0 = _weight(kind, k, 0, beta)
    m = 0
    scale = max(w0, _weight(kind, k, k + 1, beta)) if kind == "tail" else w0
    while True:
        m += 1
        w = _weight(kind, k, m, beta)
        if m > k + 1 and (w == 0.0 or w < 1e-300 or w < 1e-20 * scale):
            return m - 1


def exact_u1_phi(s: LatticeString, K: Mapping, beta: float, lat: Lattice,
                 P=frozenset(), B: Optional[int] = None, full: bool = False,
                 max_terms: int = 10_000_000) -> float:
    """phi(s, K) at N = 1.

    ``K`` holds truncation degrees on positive plaquettes.  Plaquettes in
    ``P`` carry the tail factor tau_B instead, and ``full=True`` puts the
    untruncated exponential on every plaquette (K is then ignored).
    """
    P = frozenset(P)
    kinds = {}
    for p in lat.plaquettes:
        if full:
            kinds[p] = (FULL, 0)
        elif p in P:
            if B is None:
                raise ValueError("tail factors need B")
            kinds[p] = ("tail", B)
        else:
            k = int(K.get(p, 0))
            if k > 0:
                kinds[p] = ("trunc", k)
    flux = edge_flux(s)
    cand = sorted(kinds)
    index = {p: t for t, p in enumerate(cand)}
    # edge -> list of (candidate index, coefficient)
    touch: dict = {}
    for p in cand:
        for e in p.edges():
            touch.setdefault(e.positive(), []).append((index[p], e.sign))
    for e, v in flux.items():
        if v and e not in touch:
            return 0.0
    closing: list = [[] for _ in cand]
    for e, lst in touch.items():
        last = max(t for t, _ in lst)
        closing[last].append((e, lst))
    ranges = [_max_net(kinds[p][0], kinds[p][1], beta) for p in cand]
    m = [0] * len(cand)
    count = [0]

    def weight_of(t: int, v: int) -> float:
        kind, k = kinds[cand[t]]
        return _weight(kind, k, v, beta)

    def residual(e, lst) -> int:
        return flux.get(e, 0) + sum(c * m[t] for t, c in lst)

    def rec(t: int) -> float:
        if t == len(cand):
            return 1.0
        count[0] += 1
        if count[0] > max_terms:
            raise CapacityError("exact U(1) enumeration exceeded its term cap")
        r = ranges[t]
        if closing[t]:
            e, lst = closing[t][0]
            c = next(c for tt, c in lst if tt == t)
            m[t] = 0
            v = -residual(e, lst) * c
            values = [v] if abs(v) <= r else []
        else:
            values = range(-r, r + 1)
        total = 0.0
        for v in values:
            w = weight_of(t, v)
            if w == 0.0:
                continue
            m[t] = v
            if all(residual(e, lst) == 0 for e, lst in closing[t]):
                total += w * rec(t + 1)
        m[t] = 0
        return total

    return rec(0)


def u1_plaquette_ratio(beta: float) -> float:
    """<W_p> = I_1(2 beta) / I_0(2 beta) for two-dimensional U(1)."""
    return bessel_i(1, 2 * beta) / bessel_i(0, 2 * beta)
