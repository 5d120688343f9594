"""Weighted sup norms, contraction factors and the fixed-point iteration.

The iteration is Jacobi style: every sweep reads only the previous iterate,
and each state's sum runs over its stored successor list in order, so the
result does not depend on how the sweep is split across threads.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Optional

from .area import Unbounded
from .engine import NormParams, StateSpace, apply_m
from .lattice import boundary_of_set
from .truncexp import ParameterSet

TERMINAL_KINDS = ("boundary", "boundary1", "outside", "frontier")


class CertificationError(RuntimeError):
    """Certified mode was asked for parameters whose factor is not below 1."""


class MissingEstimateError(KeyError):
    pass


def log_weight(space: StateSpace, key, np_: NormParams) -> float:
    """log of the norm weight of one state.

    truncated: lambda^iota gamma^area rho^(sum_p B - K(p))
    modified:  gamma^|supp(B-K) minus dQ| rho^(sum off P and dQ of B - K)
               lambda^iota exp(B |Q| / 100)
    """
    st = space.info[key]
    B = space.B
    lw = float(st.iota) * math.log(np_.lam)
    if space.model == "truncated":
        a = st.area
        if isinstance(a, Unbounded) or a is None:
            if np_.gamma != 1.0:
                raise ValueError("state area unknown within the search cap")
            a = 0
        deficit = sum(B - st.K.get(p, 0) for p in space.lat.plaquettes)
        return lw + a * math.log(np_.gamma) + deficit * math.log(np_.rho)
    dQ = boundary_of_set(space.lat, st.Q, space.P) if st.Q else frozenset()
    good = [p for p in space.lat.plaquettes if p not in space.P]
    supp = sum(1 for p in good if st.K.get(p, 0) != B and p not in dQ)
    deficit = sum(B - st.K.get(p, 0) for p in good if p not in dQ)
    return (lw + supp * math.log(np_.gamma) + deficit * math.log(np_.rho)
            + B * len(st.Q) / 100.0)


def norm_eval(space: StateSpace, f: Mapping, np_: NormParams) -> float:
    """sup over states of weight * |f|, with the weights kept in logs."""
    best = -math.inf
    for key in space.states:
        v = abs(f.get(key, 0.0))
        if v == 0.0:
            continue
        best = max(best, log_weight(space, key, np_) + math.log(v))
    return 0.0 if best == -math.inf else math.exp(best)


def contraction_factor(p: ParameterSet, np_: NormParams, model: str = "truncated") -> float:
    """Closed-form operator bound for M on its configuration space.

    truncated: 2dB lam + 2dB/(lam N^2) + 4d beta gamma/(lam rho N)
    modified:  2dB lam + 2dB/(lam N^2) + 4d beta/(lam gamma rho N) + exp(-B/1000)
    """
    d, N, B, beta = p.d, float(p.N), float(p.B), float(p.beta)
    lam, gam, rho = np_.lam, np_.gamma, np_.rho
    base = 2 * d * B * lam + 2 * d * B / (lam * N * N)
    if model == "truncated":
        return base + 4 * d * beta * gam / (lam * rho * N)
    if model == "modified":
        return base + 4 * d * beta / (lam * gam * rho * N) + math.exp(-B / 1000.0)
    raise ValueError(f"unknown model {model!r}")


def space_parameters(space: StateSpace) -> ParameterSet:
    return ParameterSet(space.lat.d, space.N, space.beta, space.B)


@dataclass
class SolveResult:
    values: dict
    iterations: int
    converged: bool
    mode: str
    factor: float
    ratios: list = field(default_factory=list)
    residual: float = math.inf
    error_bound: Optional[float] = None

    @property
    def max_ratio(self) -> float:
        return max(self.ratios, default=0.0)


def boundary_injection(space: StateSpace, boundary: Mapping) -> dict:
    """Starting iterate: supplied values on terminal states, zero elsewhere."""
    f = {}
    for key in space.states:
        kind = space.info[key].kind
        if kind in TERMINAL_KINDS:
            if key not in boundary:
                raise MissingEstimateError(f"no boundary value for state {key!r}")
            f[key] = boundary[key]
        else:
            f[key] = 0.0
    return f


def _sweep(space: StateSpace, f: dict, keys: list, workers: int) -> dict:
    def one(k):
        st = space.info[k]
        if st.kind == "boundary0":
            return 0.0
        return apply_m(space, f, k)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            vals = list(ex.map(one, keys))
    else:
        vals = [one(k) for k in keys]
    return dict(zip(keys, vals))


def neumann_solve(space: StateSpace, boundary: Mapping, np_: NormParams, tol: float = 1e-14,
                  max_iter: int = 10_000, mode: str = "empirical", workers: int = 1) -> SolveResult:
    """Iterate f <- M f from the boundary injection.

    ``certified`` needs the closed-form factor q < 1 and reports the a
    posteriori bound q^n / (1 - q) * ||f_1 - f_0|| on the weighted distance
    to the fixed point.  ``empirical`` runs for any parameters and reports
    the sup-norm residual ||f_n - M f_n|| and the measured per-sweep ratios
    ||f_(n+1) - f_n|| / ||f_n - f_(n-1)||.
    """
    if mode not in ("certified", "empirical"):
        raise ValueError(f"unknown mode {mode!r}")
    q = contraction_factor(space_parameters(space), np_, space.model)
    if mode == "certified" and not q < 1.0:
        raise CertificationError(f"contraction factor {q:.6g} is not below 1; nothing to certify")
    f = boundary_injection(space, boundary)
    keys = list(space.states)
    if not space.interior_keys():
        return SolveResult(f, 0, True, mode, q, [], 0.0, 0.0 if mode == "certified" else None)
    ratios = []
    first = None
    prev = None
    converged = False
    n = 0
    for n in range(1, max_iter + 1):
        g = _sweep(space, f, keys, workers)
        diff = {k: g[k] - f[k] for k in keys}
        dn = norm_eval(space, diff, np_)
        if first is None:
            first = dn
        if prev is not None and prev > 0.0 and dn > 0.0:
            ratios.append(dn / prev)
        prev = dn
        f = g
        if dn <= tol * max(1.0, norm_eval(space, f, np_)):
            converged = True
            break
    g = _sweep(space, f, keys, workers)
    res = max((abs(g[k] - f[k]) for k in keys), default=0.0)
    bound = None
    if mode == "certified":
        bound = q ** n / (1.0 - q) * first
    return SolveResult(f, n, converged, mode, q, ratios, res, bound)


@dataclass(frozen=True)
class ResidualRow:
    key: tuple
    value: complex
    m_value: complex
    residual: float
    se: Optional[float]


def mle_residual(space: StateSpace, values: Mapping, se: Optional[Mapping] = None) -> list:
    """|phi - M phi| per interior state.  With standard errors, the error of
    the residual is propagated as if the estimates were independent."""
    rows = []
    for key in space.states:
        tr = space.transitions.get(key)
        if not tr:
            continue
        needed = [key] + [k2 for k2, _ in tr]
        for k2 in needed:
            if k2 not in values:
                raise MissingEstimateError(f"no estimate for state {k2!r}")
        mv = apply_m(space, values, key)
        r_se = None
        if se is not None:
            var = se.get(key, 0.0) ** 2 + sum(abs(c) ** 2 * se.get(k2, 0.0) ** 2 for k2, c in tr)
            r_se = math.sqrt(var)
        rows.append(ResidualRow(key, values[key], mv, abs(values[key] - mv), r_se))
    return rows


def check_boundary_consistency(space: StateSpace, boundary: Mapping, root_null_value: float,
                               slack: float = 1e-12) -> list:
    """Null-string states violating e^-(sum B-K) |phi(null, K)| <= phi(null, B)."""
    bad = []
    for key in space.states:
        st = space.info[key]
        if not st.string.is_null or key not in boundary:
            continue
        deficit = sum(space.B - st.K.get(p, 0) for p in space.lat.plaquettes if p not in space.P)
        lhs = math.exp(-deficit) * abs(boundary[key])
        if lhs > root_null_value * (1 + slack):
            bad.append(key)
    return bad


def terminal_value_violations(space: StateSpace, values: Mapping, Z: float,
                              slack: float = 1e-12) -> list:
    """Terminal triples breaking
    exp(B|Q|/100) |phi| <= exp(B|Q|/50) e^(sum off P and dQ of B-K) Z."""
    bad = []
    B = space.B
    for key in space.states:
        st = space.info[key]
        if st.kind != "boundary1" or key not in values:
            continue
        dQ = boundary_of_set(space.lat, st.Q, space.P) if st.Q else frozenset()
        deficit = sum(B - st.K.get(p, 0) for p in space.lat.plaquettes
                      if p not in space.P and p not in dQ)
        lhs = math.exp(B * len(st.Q) / 100.0) * abs(values[key])
        rhs = math.exp(B * len(st.Q) / 50.0 + deficit) * Z
        if lhs > rhs * (1 + slack):
            bad.append(key)
    return bad
