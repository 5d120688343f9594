"""Closed-form area-law bounds and the reduction estimate.

The formulas are evaluated in mpmath, since in the regime the bounds sit far
below the binary64 range for all but the smallest loops.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import mpmath
import numpy as np

from .truncexp import ParameterSet, tail_mp, exp_trunc_mp, validate_parameters


class RegimeError(ValueError):
    """Parameters outside the regime where the bounds are theorems."""


@dataclass(frozen=True)
class Rectangle:
    R: int
    S: int

    @property
    def perimeter(self) -> int:
        return 2 * (self.R + self.S)

    @property
    def area(self) -> int:
        return self.R * self.S


def rectangle_of(loop) -> Rectangle:
    """Side lengths of a rectangular loop, or ValueError."""
    if isinstance(loop, Rectangle):
        if loop.R < 1 or loop.S < 1:
            raise ValueError("degenerate rectangle")
        return loop
    edges = list(loop)
    if not edges:
        raise ValueError("empty loop is not a rectangle")
    axes = sorted({e.axis for e in edges})
    sites = {e.tail for e in edges} | {e.head for e in edges}
    if len(axes) != 2 or len(sites) != len(edges):
        raise ValueError("loop is not a rectangle")
    mu, nu = axes
    xs = [x[mu] for x in sites]
    ys = [x[nu] for x in sites]
    R, S = max(xs) - min(xs), max(ys) - min(ys)
    if len(edges) != 2 * (R + S) or R < 1 or S < 1:
        raise ValueError("loop is not a rectangle")
    for x in sites:
        on_edge = x[mu] in (min(xs), max(xs)) or x[nu] in (min(ys), max(ys))
        if not on_edge:
            raise ValueError("loop is not a rectangle")
    return Rectangle(R, S)


@dataclass(frozen=True)
class Bound:
    value: float
    log10: float
    rigorous: bool
    alpha: float = math.nan

    def to_dict(self) -> dict:
        return {"value": self.value, "log10": self.log10, "rigorous": self.rigorous,
                "alpha": None if math.isnan(self.alpha) else self.alpha}


def _regime_gate(p: ParameterSet, demo: bool) -> bool:
    ok = validate_parameters(p).regime
    if not ok and not demo:
        raise RegimeError("parameters are outside the regime; pass demo=True for a non-rigorous value")
    return ok


def _bound(v, rigorous: bool, alpha=math.nan) -> Bound:
    return Bound(float(v), float(mpmath.log10(v)) if v > 0 else -math.inf, rigorous, float(alpha))


def certify_truncated_bound(loop, p: ParameterSet, demo: bool = False) -> Bound:
    """2 N^(|l|/4 - 1) (10^3 d beta)^area for a rectangle l."""
    rect = rectangle_of(loop)
    rig = _regime_gate(p, demo)
    with mpmath.workprec(200):
        N = mpmath.mpf(p.N)
        g = 1000 * p.d * mpmath.mpf(p.beta)
        v = 2 * N ** (mpmath.mpf(rect.perimeter) / 4 - 1) * g ** rect.area
        return _bound(v, rig)


def area_law_alpha(p: ParameterSet):
    with mpmath.workprec(200):
        d = p.d
        return 2 * mpmath.mpf(10) ** (3 * d) * max(1000 * d * mpmath.mpf(p.beta),
                                                    mpmath.exp(-mpmath.mpf(p.N) / (10 ** 7 * d * d)))


def certify_area_law_bound(loop, p: ParameterSet, demo: bool = False) -> Bound:
    """2|l| N^(|l|/4 - 1) alpha^area with
    alpha = 2 10^(3d) max(10^3 d beta, exp(-N / (10^7 d^2)))."""
    rect = rectangle_of(loop)
    rig = _regime_gate(p, demo)
    with mpmath.workprec(200):
        a = area_law_alpha(p)
        N = mpmath.mpf(p.N)
        v = 2 * rect.perimeter * N ** (mpmath.mpf(rect.perimeter) / 4 - 1) * a ** rect.area
        return _bound(v, rig, a)


def reduction_rhs(C1: float, C2: float, loop, p: ParameterSet) -> float:
    """C1 e^(2d|l|) 50^(d area) 2^area max(e^-C2, e^(-B/(1000 d)))^area.

    ``loop`` is a rectangle, a rectangular loop, or a (perimeter, area) pair."""
    if isinstance(loop, tuple) and len(loop) == 2 and all(isinstance(t, int) for t in loop):
        per, ar = loop
    else:
        rect = rectangle_of(loop)
        per, ar = rect.perimeter, rect.area
    d = p.d
    with mpmath.workprec(200):
        m = max(mpmath.exp(-mpmath.mpf(C2)), mpmath.exp(-mpmath.mpf(p.B) / (1000 * d)))
        v = (mpmath.mpf(C1) * mpmath.exp(2 * d * per) * mpmath.mpf(50) ** (d * ar)
             * mpmath.mpf(2) ** ar * m ** ar)
        return float(v)


def binomial_split_identity_check(n_plaquettes: int, beta: float, N: int, B: int,
                                  samples: int = 10, seed: int = 0, rtol: float = 1e-10) -> bool:
    """prod_p exp(x_p) = sum_(P subset) prod_(p not in P) exp_B(x_p) prod_(p in P) tau_B(x_p)
    on random x_p in [-2 N beta, 2 N beta], summed over all 2^n subsets."""
    return binomial_split_max_error(n_plaquettes, beta, N, B, samples, seed) <= rtol


def binomial_split_max_error(n_plaquettes: int, beta: float, N: int, B: int,
                             samples: int = 10, seed: int = 0) -> float:
    if not 0 <= n_plaquettes <= 12:
        raise ValueError("n_plaquettes must lie in [0, 12]")
    rng = np.random.default_rng(seed)
    xmax = 2 * N * beta
    worst = 0.0
    for _ in range(samples):
        xs = rng.uniform(-xmax, xmax, size=n_plaquettes)
        with mpmath.workprec(160):
            e = [exp_trunc_mp(B, x, 160) for x in xs]
            t = [tail_mp(B, x, 160) for x in xs]
            lhs = mpmath.exp(mpmath.fsum(mpmath.mpf(x) for x in xs))
            # float products per subset, then an exact-rounded sum of the 2^n terms
            terms = []
            for r in range(n_plaquettes + 1):
                for sub in combinations(range(n_plaquettes), r):
                    s = set(sub)
                    prod = mpmath.mpf(1)
                    for i in range(n_plaquettes):
                        prod *= t[i] if i in s else e[i]
                    terms.append(float(prod))
            rhs = math.fsum(terms)
            worst = max(worst, abs(rhs - float(lhs)) / float(lhs))
    return worst
