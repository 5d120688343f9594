"""Truncated exponential exp_k, its tail tau_k, and the parameter regime.

exp_k(x) = sum_{j <= k} x^j / j!  and  tau_k(x) = exp(x) - exp_k(x).

Float entry points evaluate in extended precision with mpmath and round once,
so alternating sums at negative x keep full relative accuracy.  The ``*_mp``
variants stay in mpmath for the huge truncation levels of the asymptotic
regime, where quantities like exp(-B/10) underflow binary64.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from fractions import Fraction

import mpmath
import numpy as np

DEFAULT_PREC = 256


def _direct_mp(k: int, x) -> "mpmath.mpf":
    total = mpmath.mpf(0)
    term = mpmath.mpf(1)
    for j in range(k + 1):
        total += term
        term = term * x / (j + 1)
    return total


def tail_mp(k: int, x, prec: int = DEFAULT_PREC) -> "mpmath.mpf":
    """sum_{j > k} x^j / j! as an explicit series, in mpmath at ``prec`` bits."""
    k = int(k)
    with mpmath.workprec(prec):
        x = mpmath.mpf(x)
        if x == 0:
            return mpmath.mpf(0)
        ax = abs(x)
        # leading term x^(k+1) / (k+1)! through logs; k may be astronomically large
        logt = (k + 1) * mpmath.log(ax) - mpmath.loggamma(k + 2)
        term = mpmath.exp(logt)
        if x < 0 and (k + 1) % 2 == 1:
            term = -term
        total = mpmath.mpf(0)
        j = k + 1
        eps = mpmath.mpf(2) ** (-prec - 8)
        while True:
            total += term
            j += 1
            term = term * x / j
            if j > ax and abs(term) <= eps * abs(total):
                return total


def exp_trunc_mp(k: int, x, prec: int = DEFAULT_PREC) -> "mpmath.mpf":
    """exp_k(x) in mpmath.  Large k relative to |x| goes through the tail."""
    k = int(k)
    with mpmath.workprec(prec):
        x = mpmath.mpf(x)
        if k >= 2 * abs(x) + 30:
            return mpmath.exp(x) - tail_mp(k, x, prec)
        if k > 10_000_000:
            raise ValueError("direct partial sum too long; |x| too large for this k")
        return _direct_mp(k, x)


def _guard_bits(x: float) -> int:
    return 53 + 64 + int(2 * abs(x)) + 8


def exp_trunc(k: int, x: float) -> float:
    """Degree-k Taylor partial sum of exp at x."""
    k = int(k)
    if k < 0:
        raise ValueError("k must be nonnegative")
    x = float(x)
    if x == 0.0 or k == 0:
        return 1.0
    prec = _guard_bits(x)
    with mpmath.workprec(prec):
        return float(exp_trunc_mp(k, x, prec))


def tail(k: int, x: float) -> float:
    """tau_k(x) summed as the series sum_{j > k} x^j / j!."""
    k = int(k)
    if k < 0:
        raise ValueError("k must be nonnegative")
    x = float(x)
    if x == 0.0:
        return 0.0
    prec = _guard_bits(x)
    return float(tail_mp(k, x, prec))


def exp_trunc_array(k, x: np.ndarray) -> np.ndarray:
    """Vectorised exp_k for small k (Horner).  ``k`` may be an array
    broadcasting against ``x``; use ``k < 0`` to request the full exp."""
    x = np.asarray(x, dtype=float)
    k = np.broadcast_to(np.asarray(k), x.shape)
    out = np.ones_like(x)
    kmax = int(k.max()) if k.size else 0
    if kmax > 0:
        # partial sums built up term by term; entry j of the sum is kept where j <= k
        term = np.ones_like(x)
        for j in range(1, kmax + 1):
            term = term * x / j
            out = out + np.where(j <= k, term, 0.0)
    return np.where(k < 0, np.exp(x), out)


@dataclass(frozen=True)
class ParameterSet:
    d: int
    N: int
    beta: float
    B: int


@dataclass(frozen=True)
class RegimeReport:
    N_large: bool
    beta_small: bool
    B_window: bool
    B_odd: bool
    regime: bool
    dNbeta_over_B: float
    dB_over_N: float

    def to_dict(self) -> dict:
        return asdict(self)


def validate_parameters(p: ParameterSet) -> RegimeReport:
    """Regime conditions, checked in exact rational arithmetic:
    N >= 10^10 d^10, beta <= 10^(-10d) / d, N/(2d 10^3) <= B <= N/(d 10^3),
    B odd."""
    d, N, B = int(p.d), int(p.N), int(p.B)
    beta = Fraction(p.beta)
    n_ok = N >= 10 ** 10 * d ** 10
    b_ok = beta >= 0 and beta <= Fraction(1, 10 ** (10 * d) * d)
    w_ok = Fraction(N, 2 * d * 1000) <= B <= Fraction(N, d * 1000)
    odd = B % 2 == 1
    return RegimeReport(n_ok, b_ok, w_ok, odd, n_ok and b_ok and w_ok and odd,
                        float(d * N * beta / B) if B else math.inf,
                        float(Fraction(d * B, N)) if N else math.inf)


def demo_hypotheses(p: ParameterSet) -> dict:
    """Numerical forms of the closing steps of the lemma's proof; away from
    the regime the inequalities are only meaningful where these hold."""
    B, x = p.B, 2 * p.N * p.beta
    with mpmath.workprec(DEFAULT_PREC):
        lower = mpmath.exp(-x) * (1 - mpmath.exp(-mpmath.mpf(B) / 8))
        tail_ok = mpmath.exp(-mpmath.mpf(B) / 6) <= mpmath.exp(-mpmath.mpf(B) / 10) * lower
        small_k_ok = mpmath.exp(-9 * mpmath.mpf(B) / 10 + x) <= lower
        poisson_ok = bool(x <= B / 20)
    return {"tail_step": bool(tail_ok), "small_k_step": bool(small_k_ok),
            "concentration": poisson_ok}


def sample_levels(B: int, count: int = 12) -> list:
    """Truncation levels k <= B spread from 0 to B on a log scale."""
    ks = {0, 1, 2, B // 10, B // 2, B - 1, B}
    for t in np.linspace(0, math.log10(max(B, 1)), count):
        ks.add(min(B, int(round(10 ** t))))
    return sorted(k for k in ks if 0 <= k <= B)


def check_lemma_bounds(p: ParameterSet, grid_size: int = 1000, prec: int = DEFAULT_PREC,
                       demo: bool = False, slack: float = 1e-10, levels=None) -> dict:
    """Evaluate the three truncated-exponential inequalities on a grid of
    |x| <= 2 N beta:

      (1) 0 < exp_B(x) <= exp(x)              (sign conditions, no slack)
      (2) |tau_B(x)| <= e^(-B/10) exp_B(x)
      (3) |exp_k(x)| <= e^(B-k) exp_B(x)      for sampled k <= B

    Outside the regime (``demo=True``) the checks run only when the proof's
    closing inequalities hold numerically.
    """
    rep = validate_parameters(p)
    if not demo and not rep.regime:
        raise ValueError("parameters are outside the regime; use demo mode")
    hyp = demo_hypotheses(p) if demo else None
    out = {"params": asdict(p), "regime": rep.regime, "grid_size": grid_size, "prec": prec,
           "checked": {"1": 0, "2": 0, "3": 0}, "violations": [], "skipped": False}
    if demo and not all(hyp.values()):
        out["skipped"] = True
        out["hypotheses"] = hyp
        return out
    B = int(p.B)
    ks = sample_levels(B) if levels is None else list(levels)
    with mpmath.workprec(prec):
        xmax = 2 * mpmath.mpf(p.N) * mpmath.mpf(p.beta)
        sl = mpmath.mpf(slack)
        for i in range(grid_size):
            x = -xmax + 2 * xmax * i / (grid_size - 1) if grid_size > 1 else mpmath.mpf(0)
            ex = mpmath.exp(x)
            tB = tail_mp(B, x, prec)
            eB = ex - tB
            out["checked"]["1"] += 1
            if not (eB > 0 and tB >= 0):
                out["violations"].append({"ineq": 1, "x": mpmath.nstr(x, 20)})
            out["checked"]["2"] += 1
            if abs(tB) > mpmath.exp(-mpmath.mpf(B) / 10) * eB * (1 + sl):
                out["violations"].append({"ineq": 2, "x": mpmath.nstr(x, 20)})
            for k in ks:
                ek = exp_trunc_mp(k, x, prec)
                out["checked"]["3"] += 1
                if abs(ek) > mpmath.exp(mpmath.mpf(B - k)) * eB * (1 + sl):
                    out["violations"].append({"ineq": 3, "x": mpmath.nstr(x, 20), "k": k})
    return out
