"""Command-line front end.

    masterloop <command> [--config FILE] [--set section.key=value ...] [shortcuts]

Every run writes ``<out>/<prefix>.json`` (resolved config, its hash, results,
checks and the hashes of the CSV tables) and one or more CSV tables.  The
exit status is 0 when every check passed, 1 when a check failed, 2 for
configuration errors and 3 when a capacity cap was hit.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import io
import json
import math
import os
import sys
from dataclasses import dataclass, field
from typing import Optional

from .area import Unbounded, area, underbar_area
from .certify import (RegimeError, certify_area_law_bound, certify_truncated_bound,
                      reduction_rhs)
from .engine import NormParams, build_reachable, full_action_terms
from .exact import exact_u1_phi, u1_plaquette_ratio
from .lattice import (CapacityError, Plaquette, build_lattice, cluster_count_bound,
                      enumerate_clusters, rectangular_loop)
from .lemmas import mutant_iota, verify_lemmas
from .montecarlo import FULL_ACTION, mc_linear_combination, mc_phi, mc_wilson_expectation
from .solver import (CertificationError, contraction_factor, mle_residual, neumann_solve)
from .strings import Counts, key_text, make_string, splitting_complexity
from .truncexp import ParameterSet, validate_parameters

EXIT_OK, EXIT_CHECK, EXIT_CONFIG, EXIT_CAPACITY = 0, 1, 2, 3

COMMANDS = ("check-params", "area", "clusters", "solve-truncated", "residual", "certify",
            "contraction", "mc-wilson", "mc-phi", "u1-exact", "verify-lemmas")


class ConfigError(ValueError):
    pass


@dataclass
class LatticeCfg:
    L: int = 1
    d: int = 2


@dataclass
class LoopCfg:
    corner: Optional[list] = None
    axes: list = field(default_factory=lambda: [0, 1])
    R: int = 1
    S: int = 1


@dataclass
class ParamsCfg:
    N: int = 1
    beta: float = 0.1
    B: int = 1


@dataclass
class NormCfg:
    lam: Optional[float] = None
    gamma: Optional[float] = None
    rho: Optional[float] = None


@dataclass
class ModelCfg:
    name: str = "truncated"
    bad: list = field(default_factory=list)
    exploration: str = "exact"
    solver: str = "empirical"
    action: str = "truncated"
    demo: bool = False


@dataclass
class SamplingCfg:
    n_samples: int = 100_000
    seed: int = 7
    workers: int = 1


@dataclass
class CapsCfg:
    max_states: int = 10_000
    area_cap: int = 64
    cluster_size: int = 1
    max_iter: int = 10_000
    tol: float = 1e-14


@dataclass
class CertifyCfg:
    C1: float = 1.0
    C2: float = 20.0


@dataclass
class LemmasCfg:
    cases: int = 1000
    mutant: bool = False


@dataclass
class OutputCfg:
    dir: str = "out"
    prefix: Optional[str] = None


@dataclass
class ExperimentConfig:
    lattice: LatticeCfg = field(default_factory=LatticeCfg)
    loop: LoopCfg = field(default_factory=LoopCfg)
    params: ParamsCfg = field(default_factory=ParamsCfg)
    norm: NormCfg = field(default_factory=NormCfg)
    model: ModelCfg = field(default_factory=ModelCfg)
    sampling: SamplingCfg = field(default_factory=SamplingCfg)
    caps: CapsCfg = field(default_factory=CapsCfg)
    certify: CertifyCfg = field(default_factory=CertifyCfg)
    lemmas: LemmasCfg = field(default_factory=LemmasCfg)
    output: OutputCfg = field(default_factory=OutputCfg)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def content_hash(self) -> str:
        return hashlib.sha256(canonical_json(self.to_dict()).encode()).hexdigest()


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def _as_int(v, name: str) -> int:
    if isinstance(v, bool):
        raise ConfigError(f"{name} must be an integer")
    if isinstance(v, float) and v.is_integer():
        return int(v)
    if not isinstance(v, int):
        raise ConfigError(f"{name} must be an integer")
    return v


def _coerce(section: str, obj, key: str, value):
    cur = getattr(obj, key)
    f = next(f for f in dataclasses.fields(obj) if f.name == key)
    name = f"{section}.{key}"
    typ = f.type if isinstance(f.type, str) else getattr(f.type, "__name__", str(f.type))
    if typ == "int":
        return _as_int(value, name)
    if typ == "float":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{name} must be a number")
        return float(value)
    if typ == "bool":
        if not isinstance(value, bool):
            raise ConfigError(f"{name} must be true or false")
        return value
    if typ == "str":
        if not isinstance(value, str):
            raise ConfigError(f"{name} must be a string")
        return value
    if typ.startswith("Optional[float]"):
        if value is None:
            return None
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{name} must be a number or null")
        return float(value)
    if typ.startswith("Optional[str]"):
        if value is not None and not isinstance(value, str):
            raise ConfigError(f"{name} must be a string or null")
        return value
    if typ.startswith("Optional[list]") or typ == "list":
        if value is None and typ.startswith("Optional"):
            return None
        if not isinstance(value, list):
            raise ConfigError(f"{name} must be a list")
        return value
    raise ConfigError(f"unsupported field {name} ({cur!r})")


def apply_overrides(cfg: ExperimentConfig, data: dict) -> ExperimentConfig:
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    for section, body in data.items():
        if not hasattr(cfg, section) or section.startswith("_"):
            raise ConfigError(f"unknown config section {section!r}")
        if not isinstance(body, dict):
            raise ConfigError(f"section {section!r} must be an object")
        obj = getattr(cfg, section)
        names = {f.name for f in dataclasses.fields(obj)}
        for key, value in body.items():
            if key not in names:
                raise ConfigError(f"unknown key {section}.{key}")
            setattr(obj, key, _coerce(section, obj, key, value))
    return cfg


def validate_config(cfg: ExperimentConfig) -> None:
    lat, lp, pr = cfg.lattice, cfg.loop, cfg.params
    if lat.d < 2 or lat.L < 1:
        raise ConfigError("lattice needs d >= 2 and L >= 1")
    if pr.N < 1 or pr.beta < 0 or pr.B < 0:
        raise ConfigError("params need N >= 1, beta >= 0, B >= 0")
    if len(lp.axes) != 2 or not all(isinstance(a, int) for a in lp.axes):
        raise ConfigError("loop.axes must be two integers")
    if not 0 <= lp.axes[0] < lp.axes[1] < lat.d:
        raise ConfigError("loop.axes must satisfy 0 <= mu < nu < d")
    if lp.corner is not None and (len(lp.corner) != lat.d
                                  or not all(isinstance(c, int) for c in lp.corner)):
        raise ConfigError("loop.corner must have d integer coordinates")
    if lp.R < 1 or lp.S < 1:
        raise ConfigError("loop sides must be positive")
    m = cfg.model
    if m.name not in ("truncated", "modified"):
        raise ConfigError("model.name must be truncated or modified")
    if m.exploration not in ("exact", "bounded"):
        raise ConfigError("model.exploration must be exact or bounded")
    if m.solver not in ("certified", "empirical"):
        raise ConfigError("model.solver must be certified or empirical")
    if m.action not in ("truncated", "full"):
        raise ConfigError("model.action must be truncated or full")
    for b in m.bad:
        if not (isinstance(b, list) and len(b) == 2 and isinstance(b[0], list)
                and len(b[0]) == lat.d and isinstance(b[1], list) and len(b[1]) == 2):
            raise ConfigError("model.bad entries must be [corner, [mu, nu]]")
    s = cfg.sampling
    if s.n_samples < 1 or s.workers < 1:
        raise ConfigError("sampling needs n_samples >= 1 and workers >= 1")
    c = cfg.caps
    if min(c.max_states, c.area_cap, c.max_iter) < 1 or c.cluster_size < 0 or c.tol <= 0:
        raise ConfigError("caps must be positive")
    if cfg.lemmas.cases < 1:
        raise ConfigError("lemmas.cases must be positive")
    n = cfg.norm
    for v, name in ((n.lam, "lam"), (n.rho, "rho")):
        if v is not None and not 0 < v <= 1:
            raise ConfigError(f"norm.{name} must lie in (0, 1]")
    if n.gamma is not None and n.gamma <= 0:
        raise ConfigError("norm.gamma must be positive")


def load_config(path: Optional[str], sets: list, shortcuts: dict) -> ExperimentConfig:
    cfg = ExperimentConfig()
    if path:
        try:
            with open(path, encoding="utf-8") as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        apply_overrides(cfg, data)
    for item in sets:
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise ConfigError(f"--set expects section.key=value, got {item!r}")
        lhs, raw = item.split("=", 1)
        section, key = lhs.split(".", 1)
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        apply_overrides(cfg, {section: {key: value}})
    for (section, key), value in shortcuts.items():
        if value is not None:
            apply_overrides(cfg, {section: {key: value}})
    validate_config(cfg)
    return cfg


# --- helpers ---------------------------------------------------------------

def _lattice(cfg):
    return build_lattice(cfg.lattice.L, cfg.lattice.d)


def _loop(cfg, lat):
    lp = cfg.loop
    corner = tuple(lp.corner) if lp.corner is not None else (0,) * lat.d
    try:
        return rectangular_loop(lat, corner, tuple(lp.axes), lp.R, lp.S)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _bad(cfg, lat) -> frozenset:
    out = set()
    for corner, axes in cfg.model.bad:
        p = Plaquette(tuple(corner), axes[0], axes[1])
        if p not in lat.plaquette_set:
            raise ConfigError(f"bad plaquette {corner} {axes} is not in the lattice")
        out.add(p)
    return frozenset(out)


def _pset(cfg) -> ParameterSet:
    return ParameterSet(cfg.lattice.d, cfg.params.N, cfg.params.beta, cfg.params.B)


def _num(x) -> str:
    return repr(float(x))


def _csv_text(header: list, rows: list) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow(r)
    return buf.getvalue()


def _mc_row(name: str, est, seed: int) -> list:
    return [name, _num(est.mean.real), _num(est.mean.imag), _num(est.standard_error),
            str(est.samples), str(seed)]


MC_HEADER = ["observable", "mean_re", "mean_im", "se", "samples", "seed"]
STATE_HEADER = ["key", "iota", "area", "value", "residual", "se"]


def _state_row(key, st, value, residual, se) -> list:
    ar = st.area
    return [key_text(key[0]) + _state_suffix(key), str(st.iota),
            "" if ar is None else str(ar), _num(complex(value).real),
            "" if residual is None else _num(residual), "" if se is None else _num(se)]


def _state_suffix(key) -> str:
    K, Q = key[1], key[2]
    parts = [" ; K=" + ",".join(f"{','.join(map(str, p.corner))}:{p.mu}{p.nu}={v}"
                                 for p, v in sorted(K.items()) if v)]
    if Q:
        parts.append(" ; Q=" + ",".join(f"{','.join(map(str, p.corner))}:{p.mu}{p.nu}"
                                        for p in sorted(Q)))
    return "".join(parts)


def _norm_params(cfg, default) -> NormParams:
    n = cfg.norm
    lam, gam, rho = default
    return NormParams(n.lam if n.lam is not None else lam,
                      n.gamma if n.gamma is not None else gam,
                      n.rho if n.rho is not None else rho)


def _exact_values(space, cfg, lat, keys) -> dict:
    P = space.P
    out = {}
    for k in keys:
        st = space.info[k]
        if st.kind == "boundary0":
            out[k] = 0.0
        else:
            out[k] = exact_u1_phi(st.string, st.K, cfg.params.beta, lat, P=P, B=cfg.params.B)
    return out


# --- commands --------------------------------------------------------------

def cmd_check_params(cfg):
    rep = validate_parameters(_pset(cfg))
    return {"regime": rep.to_dict()}, {}, {}


def cmd_area(cfg):
    lat = _lattice(cfg)
    s = make_string([_loop(cfg, lat)])
    a = area(s, lat, cfg.caps.area_cap)
    u = underbar_area(s, lat, cfg.caps.area_cap)
    rows = [["area", str(a)], ["underbar_area", str(u)], ["perimeter", str(s.perimeter)]]
    ok = not isinstance(a, Unbounded) and a == cfg.loop.R * cfg.loop.S
    return ({"area": str(a), "underbar_area": str(u)},
            {"area": (["quantity", "value"], rows)}, {"rectangle_area": ok})


def cmd_clusters(cfg):
    lat = _lattice(cfg)
    loop = _loop(cfg, lat)
    M = cfg.caps.cluster_size
    cl = enumerate_clusters(lat, loop, M)
    bound = cluster_count_bound(len(loop), lat.d, M)
    rows = [[str(i), str(len(c)), ";".join(f"{','.join(map(str, p.corner))}:{p.mu}{p.nu}"
                                           for p in sorted(c))] for i, c in enumerate(cl)]
    return ({"count": len(cl), "bound": bound},
            {"clusters": (["index", "size", "plaquettes"], rows)},
            {"count_within_bound": len(cl) <= bound})


def _build(cfg, lat, loop):
    return build_reachable(loop, cfg.params.B, lat, cfg.model.name, _bad(cfg, lat),
                           cfg.params.N, cfg.params.beta, cfg.caps.max_states,
                           cfg.model.exploration, cfg.caps.area_cap)


def cmd_solve(cfg):
    lat = _lattice(cfg)
    loop = _loop(cfg, lat)
    space = _build(cfg, lat, loop)
    if cfg.params.N != 1:
        raise ConfigError("solve-truncated takes its boundary values from the exact N = 1 oracle")
    oracle = _exact_values(space, cfg, lat, space.states)
    terminal = {k: oracle[k] for k in space.states if not space.transitions.get(k)}
    npar = _norm_params(cfg, (1.0, 1.0, 1.0))
    res = neumann_solve(space, terminal, npar, cfg.caps.tol, cfg.caps.max_iter,
                        cfg.model.solver, cfg.sampling.workers)
    rows = []
    worst = 0.0
    for k in space.states:
        st = space.info[k]
        dev = abs(res.values[k] - oracle[k])
        worst = max(worst, dev)
        rows.append(_state_row(k, st, res.values[k], dev, None))
    checks = {"converged": res.converged, "matches_oracle": worst <= 1e-9}
    if res.factor < 1:
        checks["ratio_within_factor"] = res.max_ratio <= res.factor + 1e-9
    summary = {"states": len(space), "iterations": res.iterations, "factor": res.factor,
               "max_ratio": res.max_ratio, "residual": res.residual,
               "error_bound": res.error_bound, "max_oracle_deviation": worst,
               "bounded": space.bounded, "mode": res.mode}
    return summary, {"states": (STATE_HEADER, rows)}, checks


def _residual_full(cfg, lat, loop):
    s = make_string([loop])
    N, beta = cfg.params.N, cfg.params.beta
    terms = full_action_terms(s, lat, N, beta)
    seed = cfg.sampling.seed
    if N == 1:
        lhs = exact_u1_phi(s, {}, beta, lat, full=True)
        rhs = sum(c * exact_u1_phi(t, {}, beta, lat, full=True) for c, t in terms)
        resid = abs(lhs - rhs)
        rows = [[key_text(s.loops), str(splitting_complexity(s)), "", _num(lhs), _num(resid), ""]]
        return ({"lhs": lhs, "rhs": rhs, "residual": resid},
                {"residual": (STATE_HEADER, rows)}, {"residual_small": resid <= 1e-9})
    combo = [(1.0, s, FULL_ACTION)] + [(-c, t, FULL_ACTION) for c, t in terms]
    ests = mc_linear_combination(combo, FULL_ACTION, lat, N, beta, cfg.sampling.n_samples,
                                 seed, 0, cfg.sampling.workers)
    r = ests[-1]
    resid = abs(r.mean)
    se = r.standard_error
    rows = [[key_text(s.loops), str(splitting_complexity(s)), "", _num(ests[0].mean.real),
             _num(resid), _num(se)]]
    mc_rows = [_mc_row("phi " + key_text(t.loops) if not t.is_null else "phi null", e, seed)
               for (_, t, _), e in zip(combo, ests)]
    mc_rows.append(_mc_row("lhs_minus_rhs", r, seed))
    return ({"residual": resid, "se": se, "terms": len(terms)},
            {"residual": (STATE_HEADER, rows), "terms": (MC_HEADER, mc_rows)},
            {"residual_within_3se": resid <= 3 * se})


def cmd_residual(cfg):
    lat = _lattice(cfg)
    loop = _loop(cfg, lat)
    if cfg.model.action == "full":
        return _residual_full(cfg, lat, loop)
    space = _build(cfg, lat, loop)
    keys = list(space.states)
    N, beta = cfg.params.N, cfg.params.beta
    rows = []
    if N == 1:
        vals = _exact_values(space, cfg, lat, keys)
        rep = mle_residual(space, vals)
        worst = max((r.residual for r in rep), default=0.0)
        for r in rep:
            rows.append(_state_row(r.key, space.info[r.key], r.value, r.residual, None))
        zero_ok = all(abs(vals[k]) <= 1e-12 for k in keys if space.info[k].kind == "boundary0")
        return ({"states": len(space), "interior": len(rep), "max_residual": worst},
                {"states": (STATE_HEADER, rows)},
                {"residual_small": worst <= 1e-9, "boundary0_zero": zero_ok})
    if space.model != "truncated":
        raise ConfigError("Monte Carlo residuals are limited to the truncated model")
    seed = cfg.sampling.seed
    ok = True
    for idx, k in enumerate(space.interior_keys()):
        st = space.info[k]
        combo = [(1.0, st.string, st.K)] + [(-c, space.info[k2].string, space.info[k2].K)
                                             for k2, c in space.transitions[k]]
        ests = mc_linear_combination(combo, st.K, lat, N, beta, cfg.sampling.n_samples,
                                     seed, idx, cfg.sampling.workers)
        r = ests[-1]
        ok = ok and abs(r.mean) <= 3 * r.standard_error
        rows.append(_state_row(k, st, ests[0].mean, abs(r.mean), r.standard_error))
    return ({"states": len(space), "interior": len(rows)}, {"states": (STATE_HEADER, rows)},
            {"residual_within_3se": ok})


def cmd_certify(cfg):
    p = _pset(cfg)
    lat = _lattice(cfg)
    loop = _loop(cfg, lat)
    demo = cfg.model.demo
    try:
        tb = certify_truncated_bound(loop, p, demo)
        ab = certify_area_law_bound(loop, p, demo)
    except RegimeError as exc:
        return {"error": str(exc)}, {}, {"regime": False}
    red = reduction_rhs(cfg.certify.C1, cfg.certify.C2, loop, p)
    N, d, beta = p.N, p.d, p.beta
    g = 1000 * d * beta
    f3 = contraction_factor(p, _norm_params(cfg, (1.0 / N, 1.0 / g if g else 1.0, math.exp(-1))),
                            "truncated")
    f4 = contraction_factor(p, _norm_params(cfg, (1.0 / N, min(g, 1.0) if g else 1.0,
                                                  math.exp(-1))), "modified")
    rows = [["truncated_bound", _num(tb.value), repr(tb.log10), str(tb.rigorous)],
            ["area_law_bound", _num(ab.value), repr(ab.log10), str(ab.rigorous)],
            ["area_law_alpha", _num(ab.alpha), repr(math.log10(ab.alpha)), str(ab.rigorous)],
            ["reduction_rhs", _num(red), repr(math.log10(red)) if red > 0 else "-inf", "True"],
            ["contraction_truncated", _num(f3), repr(math.log10(f3)), str(tb.rigorous)],
            ["contraction_modified", _num(f4), repr(math.log10(f4)), str(tb.rigorous)]]
    checks = {}
    if tb.rigorous:
        checks["contraction_truncated_half"] = f3 <= 0.5
        checks["contraction_modified_half"] = f4 <= 0.5
    return ({"truncated_bound": tb.to_dict(), "area_law_bound": ab.to_dict(),
             "reduction_rhs": red, "contraction_truncated": f3, "contraction_modified": f4},
            {"certify": (["quantity", "value", "log10", "rigorous"], rows)}, checks)


def cmd_contraction(cfg):
    p = _pset(cfg)
    npar = _norm_params(cfg, (1.0 / p.N, 1.0, math.exp(-1)))
    f3 = contraction_factor(p, npar, "truncated")
    f4 = contraction_factor(p, npar, "modified")
    rows = [["truncated", _num(f3)], ["modified", _num(f4)]]
    return ({"truncated": f3, "modified": f4, "norm": dataclasses.asdict(npar)},
            {"contraction": (["model", "factor"], rows)}, {})


def cmd_mc_wilson(cfg):
    lat = _lattice(cfg)
    loop = _loop(cfg, lat)
    N, beta, seed = cfg.params.N, cfg.params.beta, cfg.sampling.seed
    est = mc_wilson_expectation(loop, lat, N, beta, cfg.sampling.n_samples, seed, 0,
                                cfg.sampling.workers)
    rows = [_mc_row(f"W {cfg.loop.R}x{cfg.loop.S}", est, seed)]
    summary = {"mean_re": est.mean.real, "mean_im": est.mean.imag, "se": est.standard_error,
               "samples": est.samples}
    checks = {}
    if N == 1 and lat.d == 2:
        ref = u1_plaquette_ratio(beta) ** (cfg.loop.R * cfg.loop.S)
        summary["oracle"] = ref
        checks["oracle_within_3se"] = abs(est.mean.real - ref) <= 3 * est.se_re
    return summary, {"mc": (MC_HEADER, rows)}, checks


def _counts(cfg, lat):
    if cfg.model.action == "full":
        return FULL_ACTION
    return Counts.constant([p for p in lat.plaquettes], cfg.params.B)


def cmd_mc_phi(cfg):
    lat = _lattice(cfg)
    s = make_string([_loop(cfg, lat)])
    K = _counts(cfg, lat)
    N, beta, seed = cfg.params.N, cfg.params.beta, cfg.sampling.seed
    est = mc_phi(s, K, lat, N, beta, cfg.sampling.n_samples, seed, 0, cfg.sampling.workers)
    rows = [_mc_row("phi " + key_text(s.loops), est, seed)]
    summary = {"mean_re": est.mean.real, "mean_im": est.mean.imag, "se": est.standard_error}
    checks = {}
    if N == 1:
        ref = exact_u1_phi(s, K if K != FULL_ACTION else {}, beta, lat, full=K == FULL_ACTION)
        summary["oracle"] = ref
        checks["oracle_within_3se"] = abs(est.mean.real - ref) <= 3 * max(est.se_re, 1e-300)
    return summary, {"mc": (MC_HEADER, rows)}, checks


def cmd_u1_exact(cfg):
    lat = _lattice(cfg)
    s = make_string([_loop(cfg, lat)])
    beta = cfg.params.beta
    full = cfg.model.action == "full"
    K = {} if full else Counts.constant(lat.plaquettes, cfg.params.B)
    v = exact_u1_phi(s, K, beta, lat, full=full)
    z = exact_u1_phi(make_string([]), K, beta, lat, full=full)
    rows = [["phi " + key_text(s.loops), _num(v)], ["phi null", _num(z)],
            ["ratio", _num(v / z)]]
    return {"phi": v, "phi_null": z, "ratio": v / z}, {"exact": (["observable", "value"], rows)}, {}


def cmd_verify_lemmas(cfg):
    iota = mutant_iota if cfg.lemmas.mutant else splitting_complexity
    rep = verify_lemmas(cfg.sampling.seed, cfg.lemmas.cases, iota, cfg.sampling.workers)
    rows = [[name, str(r.cases), str(r.checks), str(r.violations), str(r.passed)]
            for name, r in rep.results.items()]
    checks = {name: r.passed for name, r in rep.results.items()}
    return (rep.to_dict(), {"lemmas": (["lemma", "cases", "checks", "violations", "passed"], rows)},
            checks)


HANDLERS = {
    "check-params": cmd_check_params, "area": cmd_area, "clusters": cmd_clusters,
    "solve-truncated": cmd_solve, "residual": cmd_residual, "certify": cmd_certify,
    "contraction": cmd_contraction, "mc-wilson": cmd_mc_wilson, "mc-phi": cmd_mc_phi,
    "u1-exact": cmd_u1_exact, "verify-lemmas": cmd_verify_lemmas,
}


def run(command: str, cfg: ExperimentConfig) -> tuple:
    """Execute one command and write its artifacts.  Returns (exit status,
    summary dict)."""
    try:
        summary, tables, checks = HANDLERS[command](cfg)
        status = EXIT_OK if all(checks.values()) else EXIT_CHECK
    except ConfigError as exc:
        summary, tables, checks, status = {"error": str(exc)}, {}, {}, EXIT_CONFIG
    except CapacityError as exc:
        summary, tables, checks, status = {"error": str(exc)}, {}, {}, EXIT_CAPACITY
    except CertificationError as exc:
        summary, tables, checks, status = {"error": str(exc)}, {}, {"certified": False}, EXIT_CHECK
    out_dir = cfg.output.dir
    prefix = cfg.output.prefix or command
    os.makedirs(out_dir, exist_ok=True)
    artifacts = {}
    for name, (header, rows) in tables.items():
        text = _csv_text(header, rows)
        path = os.path.join(out_dir, f"{prefix}_{name}.csv")
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        artifacts[os.path.basename(path)] = hashlib.sha256(text.encode()).hexdigest()
    doc = {"command": command, "config": cfg.to_dict(), "config_hash": cfg.content_hash(),
           "status": status, "checks": checks, "results": summary, "artifacts": artifacts}
    with open(os.path.join(out_dir, f"{prefix}.json"), "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")
    return status, doc


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="masterloop", description=__doc__.split("\n\n")[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", help="JSON config file")
    ap.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                    help="override one config entry (value parsed as JSON)")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--workers", type=int)
    ap.add_argument("--samples", type=int)
    ap.add_argument("--cases", type=int)
    ap.add_argument("--out", help="output directory")
    ap.add_argument("--mutant", action="store_true", default=None,
                    help="verify-lemmas: use the wrong complexity |s|/4 - 2n")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    shortcuts = {("sampling", "seed"): args.seed, ("sampling", "workers"): args.workers,
                 ("sampling", "n_samples"): args.samples, ("lemmas", "cases"): args.cases,
                 ("output", "dir"): args.out, ("lemmas", "mutant"): args.mutant}
    try:
        cfg = load_config(args.config, args.set, shortcuts)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    status, doc = run(args.command, cfg)
    print(json.dumps({"command": args.command, "status": status, "checks": doc["checks"],
                      "results": doc["results"]}, indent=2, sort_keys=True, default=str))
    return status


if __name__ == "__main__":
    sys.exit(main())
