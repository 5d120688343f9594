import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from masterloop.exact import bessel_i, exact_u1_monomial, exact_u1_phi, u1_plaquette_ratio
from masterloop.lattice import Edge, Plaquette, build_lattice, rectangular_loop
from masterloop.montecarlo import (FULL_ACTION, GaugeConfig, action_weights, edge_index,
                                   loop_matrix, mc_linear_combination, mc_monomial, mc_phi,
                                   mc_wilson_expectation, random_config, sample_haar_unitary,
                                   wilson_string_value, wilson_values)
from masterloop.strings import (Counts, is_balanced, make_string, null_string, plaquette_string,
                                random_string)

from strategies import lattice_and_string

P0 = Plaquette((0, 0), 0, 1)
LAT1 = build_lattice(1, 2)
PL = Plaquette((-1, -1), 0, 1)


def _mean_se(x):
    return x.mean(), x.std(ddof=1) / math.sqrt(len(x))


# Haar sampling


def test_unit_rank_is_uniform_phase():
    u = sample_haar_unitary(1, np.random.default_rng(1), 10 ** 6)[:, 0, 0]
    for part in (u.real, u.imag):
        m, se = _mean_se(part)
        assert abs(m) <= 3 * se


@pytest.mark.parametrize("N", [1, 2, 3, 5])
def test_unitarity_defect(N):
    U = sample_haar_unitary(N, np.random.default_rng(N), 2000)
    defect = np.abs(np.conj(np.swapaxes(U, 1, 2)) @ U - np.eye(N)).max()
    assert defect <= 1e-12


@pytest.mark.parametrize("N", [2, 3])
def test_trace_moments(N):
    # E|Tr U|^2 = 1 and E|Tr U|^4 = 2 for Haar U(N) with N >= 2
    U = sample_haar_unitary(N, np.random.default_rng(10 + N), 10 ** 6)
    t2 = np.abs(np.trace(U, axis1=1, axis2=2)) ** 2
    m2, se2 = _mean_se(t2)
    m4, se4 = _mean_se(t2 ** 2)
    assert abs(m2 - 1) <= 3 * se2
    assert abs(m4 - 2) <= 3 * se4


def test_uncorrected_qr_would_fail_moments():
    # sanity of the moment test: the raw Q factor is not Haar
    rng = np.random.default_rng(3)
    z = (rng.standard_normal((200_000, 2, 2)) + 1j * rng.standard_normal((200_000, 2, 2)))
    q, _ = np.linalg.qr(z)
    m, se = _mean_se(np.trace(q, axis1=1, axis2=2).real)
    assert abs(m) > 10 * se


# Wilson values


def test_null_string_value_is_one():
    U = random_config(LAT1, 3, np.random.default_rng(0))
    assert wilson_string_value(U, null_string()) == 1


@settings(max_examples=30)
@given(lattice_and_string(), st.integers(1, 3))
def test_wilson_values_bounded(data, N):
    lat, s, seed = data
    U = sample_haar_unitary(N, np.random.default_rng(seed), 50 * len(lat.edges))
    U = U.reshape(50, len(lat.edges), N, N)
    assert np.all(np.abs(wilson_values(U, s, lat)) <= 1 + 1e-12)


def test_backtrack_insertion_keeps_value():
    lat = build_lattice(2, 2)
    rng = np.random.default_rng(4)
    U = sample_haar_unitary(3, rng, 10 * len(lat.edges)).reshape(10, len(lat.edges), 3, 3)
    idx = edge_index(lat)
    loop = P0.edges()
    e = Edge(loop[1].tail, 0, 1)
    raw = loop[:1] + (e, e.inverse()) + loop[1:]
    a = np.trace(loop_matrix(U, raw, idx), axis1=1, axis2=2)
    b = np.trace(loop_matrix(U, loop, idx), axis1=1, axis2=2)
    assert np.allclose(a, b, atol=1e-12)


@settings(max_examples=20)
@given(lattice_and_string(), st.integers(1, 3))
def test_gauge_invariance(data, N):
    lat, s, seed = data
    rng = np.random.default_rng(seed)
    cfg = random_config(lat, N, rng)
    sites = {x for e in lat.edges for x in (e.tail, e.head)}
    g = dict(zip(sorted(sites), sample_haar_unitary(N, rng, len(sites))))
    U2 = np.array([g[e.tail] @ cfg.U[i] @ np.conj(g[e.head]).T for i, e in enumerate(lat.edges)])
    cfg2 = GaugeConfig(lat, U2)
    assert abs(wilson_string_value(cfg, s) - wilson_string_value(cfg2, s)) <= 1e-12
    K = Counts.constant(lat.plaquettes, 2)
    for Kt in (K, FULL_ACTION):
        w1 = action_weights(cfg.U[None], lat, 0.3, Kt)
        w2 = action_weights(cfg2.U[None], lat, 0.3, Kt)
        assert w1[0] == pytest.approx(w2[0], rel=1e-12)


# exact abelian oracle


@pytest.mark.parametrize("nu", [0, 1, 2, 5])
@pytest.mark.parametrize("x", [0.0, 0.1, 0.2, 0.4, 2.0, 10.0])
def test_bessel_series_matches_mpmath(nu, x):
    ref = float(mpmath.besseli(nu, x))
    assert bessel_i(nu, x) == pytest.approx(ref, rel=1e-12, abs=1e-300)


def test_plaquette_ratio_value():
    ref = float(mpmath.besseli(1, 0.2) / mpmath.besseli(0, 0.2))
    assert u1_plaquette_ratio(0.1) == pytest.approx(ref, rel=1e-12)
    assert abs(u1_plaquette_ratio(0.1) - 0.09950) < 5e-6


def test_exact_phi_examples():
    lat = build_lattice(1, 2)
    assert exact_u1_phi(null_string(), Counts(), 0.3, lat) == 1.0
    p = lat.plaquettes[0]
    assert exact_u1_phi(plaquette_string([p]), Counts({p: 1}), 0.3, lat) == pytest.approx(0.3)
    assert exact_u1_monomial(plaquette_string([p]), {p.inverse(): 1}) == 1
    assert exact_u1_monomial(plaquette_string([p]), {}) == 0


def test_exact_full_action_matches_bessel():
    lat = build_lattice(1, 2)
    z = exact_u1_phi(null_string(), {}, 0.1, lat, full=True)
    w = exact_u1_phi(plaquette_string([PL]), {}, 0.1, lat, full=True)
    assert z == pytest.approx(bessel_i(0, 0.2) ** 4, rel=1e-12)
    assert w / z == pytest.approx(float(mpmath.besseli(1, 0.2) / mpmath.besseli(0, 0.2)), rel=1e-12)


@settings(max_examples=200)
@given(lattice_and_string(max_loops=2), st.data())
def test_monomial_agrees_with_balance(data, draw):
    lat, s, _ = data
    oriented = list(lat.plaquettes) + [p.inverse() for p in lat.plaquettes]
    J = draw.draw(st.dictionaries(st.sampled_from(oriented), st.integers(0, 2), max_size=4))
    assert exact_u1_monomial(s, J) == int(is_balanced(s, J))


@settings(max_examples=30)
@given(st.integers(0, 2 ** 32 - 1), st.floats(0.01, 1.0))
def test_exact_null_phi_monotone_in_counts(seed, beta):
    lat = build_lattice(1, 2)
    rng = np.random.default_rng(seed)
    K = Counts({p: int(rng.integers(0, 3)) for p in lat.plaquettes})
    p = lat.plaquettes[int(rng.integers(len(lat.plaquettes)))]
    assert exact_u1_phi(null_string(), K.add(p, 1), beta, lat) >= exact_u1_phi(null_string(), K, beta, lat)


def test_exact_phi_brute_force_sum():
    # direct sum over J with J(p) + J(p^-1) <= K(p) of beta^|J| / J! [balanced]
    lat = build_lattice(1, 2)
    beta = 0.37
    K = Counts({lat.plaquettes[0]: 2, lat.plaquettes[1]: 1, lat.plaquettes[3]: 2})
    s = plaquette_string([lat.plaquettes[0]])
    total = 0.0
    ranges = [[(a, b) for a in range(K[p] + 1) for b in range(K[p] + 1 - a)] for p in lat.plaquettes]
    from itertools import product
    for combo in product(*ranges):
        J = {}
        w = 1.0
        for p, (a, b) in zip(lat.plaquettes, combo):
            J[p], J[p.inverse()] = a, b
            w *= beta ** (a + b) / (math.factorial(a) * math.factorial(b))
        if is_balanced(s, J):
            total += w
    assert exact_u1_phi(s, K, beta, lat) == pytest.approx(total, rel=1e-14)


# Monte Carlo estimators


def test_mc_phi_trivial_cases():
    est = mc_phi(null_string(), Counts.constant(LAT1.plaquettes, 2), LAT1, 2, 0.0, 2000, seed=1)
    assert est.mean == 1 and est.standard_error == 0
    est = mc_phi(plaquette_string([PL]), FULL_ACTION, LAT1, 2, 0.0, 20_000, seed=2)
    assert abs(est.mean) <= 3 * est.standard_error


@pytest.mark.parametrize("K", ["full", 1, 3])
def test_mc_phi_matches_exact_at_unit_rank(K):
    s = make_string([rectangular_loop(LAT1, (-1, -1), (0, 1), 2, 1)])
    Kc = FULL_ACTION if K == "full" else Counts.constant(LAT1.plaquettes, K)
    ref = exact_u1_phi(s, {} if K == "full" else Kc, 0.3, LAT1, full=K == "full")
    est = mc_phi(s, Kc, LAT1, 1, 0.3, 200_000, seed=3)
    assert abs(est.mean.real - ref) <= 3 * est.se_re


def test_mc_wilson_zero_coupling():
    est = mc_wilson_expectation(PL.edges(), LAT1, 2, 0.0, 20_000, seed=4)
    assert abs(est.mean) <= 3 * est.standard_error


def test_mc_wilson_matches_bessel_ratio():
    est = mc_wilson_expectation(PL.edges(), LAT1, 1, 0.1, 400_000, seed=5)
    assert abs(est.mean.real - u1_plaquette_ratio(0.1)) <= 3 * est.se_re


def test_mc_consistent_across_sample_sizes():
    s = plaquette_string([PL])
    a = mc_phi(s, FULL_ACTION, LAT1, 2, 0.2, 50_000, seed=6)
    b = mc_phi(s, FULL_ACTION, LAT1, 2, 0.2, 100_000, seed=6)
    assert abs(a.mean - b.mean) <= 3 * (a.standard_error + b.standard_error)


def test_mc_reproducible_across_workers():
    s = plaquette_string([PL])
    a = mc_phi(s, FULL_ACTION, LAT1, 2, 0.2, 20_000, seed=7, workers=1)
    b = mc_phi(s, FULL_ACTION, LAT1, 2, 0.2, 20_000, seed=7, workers=4)
    assert a == b
    c = mc_phi(s, FULL_ACTION, LAT1, 2, 0.2, 20_000, seed=8, workers=1)
    assert c != a


def test_monomial_of_unbalanced_pair_is_zero():
    s = plaquette_string([PL])
    est = mc_monomial(s, {PL: 1}, LAT1, 2, 50_000, seed=9)
    assert abs(est.mean) <= 3 * est.standard_error
    # the balanced pair has E[tr U Tr U^*] = 1/N * E|Tr U|^2 = 1/2
    bal = mc_monomial(s, {PL.inverse(): 1}, LAT1, 2, 50_000, seed=9)
    assert abs(bal.mean - 0.5) <= 3 * bal.standard_error


def test_linear_combination_combines_terms():
    s = plaquette_string([PL])
    terms = [(1.0, s, None), (-2.0, null_string(), None)]
    ests = mc_linear_combination(terms, FULL_ACTION, LAT1, 2, 0.2, 20_000, seed=10)
    assert len(ests) == 3
    assert ests[2].mean == pytest.approx(ests[0].mean - 2 * ests[1].mean, abs=1e-12)
