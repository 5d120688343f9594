import math
from itertools import product

import pytest
from hypothesis import given, strategies as st

from masterloop.lattice import (CapacityError, Edge, Plaquette, boundary_of_set, build_lattice,
                                cluster_count_bound, components, enumerate_clusters,
                                plaquettes_containing, rectangular_loop, shift)
from masterloop.strings import min_rotation

from strategies import lattices


def brute_counts(L, d):
    """Count unit edges and squares by scanning pairs of lattice sites."""
    r = range(-L, L + 1)
    sites = set(product(r, repeat=d))
    edges = sum(1 for x in sites for mu in range(d) if shift(x, mu, 1) in sites)
    plaq = sum(1 for x in sites for mu in range(d) for nu in range(mu + 1, d)
               if shift(shift(x, mu, 1), nu, 1) in sites)
    return edges, plaq


@pytest.mark.parametrize("L,d", [(1, 2), (2, 2), (1, 3), (2, 3), (1, 4)])
def test_cell_counts_match_brute_force(L, d):
    lat = build_lattice(L, d)
    assert (len(lat.edges), len(lat.plaquettes)) == brute_counts(L, d)
    assert len(lat.edges) == d * (2 * L + 1) ** (d - 1) * (2 * L)
    assert len(lat.plaquettes) == math.comb(d, 2) * (2 * L) ** 2 * (2 * L + 1) ** (d - 2)


def test_worked_counts():
    assert len(build_lattice(1, 2).edges) == 12
    assert len(build_lattice(1, 2).plaquettes) == 4
    assert len(build_lattice(1, 3).plaquettes) == 36


@pytest.mark.parametrize("L,d", [(1, 1), (0, 2)])
def test_rejects_bad_shapes(L, d):
    with pytest.raises(ValueError):
        build_lattice(L, d)


def test_enumeration_order_is_sorted():
    lat = build_lattice(2, 3)
    assert list(lat.edges) == sorted(lat.edges)
    assert list(lat.plaquettes) == sorted(lat.plaquettes)


def test_plaquettes_containing_bulk_and_boundary():
    lat2 = build_lattice(2, 2)
    e = Edge((0, 0), 0, 1)
    ps = plaquettes_containing(lat2, e)
    assert len(ps) == 2 and all(e in p.edges() for p in ps)
    lat3 = build_lattice(2, 3)
    assert len(plaquettes_containing(lat3, Edge((0, 0, 0), 0, 1))) == 4
    lat1 = build_lattice(1, 2)
    assert len(plaquettes_containing(lat1, Edge((-1, -1), 0, 1))) == 1


def test_plaquettes_containing_rejects_outside_edge():
    with pytest.raises(ValueError):
        plaquettes_containing(build_lattice(1, 2), Edge((1, 0), 0, 1))


@given(lattices, st.data())
def test_edge_plaquette_incidence(lat, data):
    e = data.draw(st.sampled_from(lat.edges))
    sign = data.draw(st.sampled_from([1, -1]))
    e = e if sign > 0 else e.inverse()
    assert e.inverse().inverse() == e
    assert lat.contains(e.head) and lat.contains(e.tail)
    through = plaquettes_containing(lat, e) + plaquettes_containing(lat, e.inverse())
    unoriented = {p.positive() for p in through}
    bulk = all(-lat.L < c < lat.L for i, c in enumerate(e.tail) if i != e.axis)
    if bulk:
        assert len(unoriented) == 2 * (lat.d - 1)
    assert len(unoriented) <= 2 * (lat.d - 1)
    assert len(through) <= 4 * (lat.d - 1) < 4 * lat.d


@given(lattices, st.data())
def test_plaquette_boundary_loops(lat, data):
    p = data.draw(st.sampled_from(lat.plaquettes))
    for q in (p, p.inverse()):
        es = q.edges()
        assert len(es) == 4
        assert all(es[i].head == es[(i + 1) % 4].tail for i in range(4))
        assert all(es[i].inverse() != es[(i + 1) % 4] for i in range(4))
    rev = tuple(e.inverse() for e in reversed(p.edges()))
    assert min_rotation(rev) == min_rotation(p.inverse().edges())
    assert min_rotation(p.inverse().inverse().edges()) == min_rotation(p.edges())


def test_boundary_of_set_examples():
    lat = build_lattice(3, 2)
    p = Plaquette((0, 0), 0, 1)
    assert boundary_of_set(lat, frozenset(), {p}) == frozenset()
    assert len(boundary_of_set(lat, {p}, {p})) == 4
    with pytest.raises(ValueError):
        boundary_of_set(lat, {p}, frozenset())


@given(lattices, st.data())
def test_boundary_of_set_invariants(lat, data):
    P = frozenset(data.draw(st.sets(st.sampled_from(lat.plaquettes), max_size=5)))
    Q = frozenset(data.draw(st.sets(st.sampled_from(sorted(P)), max_size=len(P))) if P else ())
    dQ = boundary_of_set(lat, Q, P)
    assert not dQ & P and not dQ & Q
    assert len(dQ) <= 8 * (lat.d - 1) * len(Q)
    for r in dQ:
        assert any(r in lat.neighbors[q] for q in Q)


def test_components():
    lat = build_lattice(2, 2)
    a, b, c = Plaquette((0, 0), 0, 1), Plaquette((1, 0), 0, 1), Plaquette((-2, -2), 0, 1)
    comps = components(lat, {a, b, c})
    assert sorted(map(len, comps)) == [1, 2]


def test_cluster_examples():
    lat = build_lattice(2, 2)
    loop = Plaquette((0, 0), 0, 1).edges()
    assert enumerate_clusters(lat, loop, 0) == [frozenset()]
    one = enumerate_clusters(lat, loop, 1)
    assert len(one) == 6
    assert {next(iter(c)) for c in one if c} == {Plaquette((0, 0), 0, 1)} | set(
        lat.neighbors[Plaquette((0, 0), 0, 1)])


def _brute_clusters(lat, loop, M):
    """All subsets of nearby plaquettes of size <= M, filtered by the
    component condition."""
    loop_edges = {e.positive() for e in loop}
    near = set()
    frontier = {p for e in loop_edges for p, _ in lat.incidence[e]}
    near |= frontier
    for _ in range(M - 1):
        frontier = {q for p in frontier for q in lat.neighbors[p]} - near
        near |= frontier
    near = sorted(near)
    out = 0
    for m in range(M + 1):
        from itertools import combinations
        for C in combinations(near, m):
            comps = components(lat, C)
            if all(any(f.positive() in loop_edges for p in comp for f in p.edges()) for comp in comps):
                out += 1
    return out


@pytest.mark.parametrize("L,d,M", [(2, 2, 2), (2, 2, 3), (1, 3, 2)])
def test_cluster_enumeration_matches_brute_force(L, d, M):
    lat = build_lattice(L, d)
    loop = Plaquette((0,) * d, 0, 1).edges()
    assert len(enumerate_clusters(lat, loop, M)) == _brute_clusters(lat, loop, M)


@pytest.mark.parametrize("L,d,M,R,S", [(2, 2, 3, 1, 1), (2, 2, 3, 1, 2), (1, 3, 2, 1, 1),
                                       (2, 2, 2, 2, 2), (1, 3, 3, 1, 1)])
def test_cluster_count_bound(L, d, M, R, S):
    lat = build_lattice(L, d)
    corner = (-1,) * d if d == 2 else (0,) * d
    loop = rectangular_loop(lat, corner, (0, 1), R, S)
    assert len(enumerate_clusters(lat, loop, M)) <= cluster_count_bound(len(loop), d, M)


def test_cluster_cap_is_explicit():
    lat = build_lattice(2, 2)
    with pytest.raises(CapacityError):
        enumerate_clusters(lat, Plaquette((0, 0), 0, 1).edges(), 3, cap=10)


def test_rectangular_loop():
    lat = build_lattice(2, 2)
    assert min_rotation(rectangular_loop(lat, (0, 0), (0, 1), 1, 1)) == min_rotation(
        Plaquette((0, 0), 0, 1).edges())
    loop = rectangular_loop(lat, (-2, -2), (0, 1), 2, 3)
    assert len(loop) == 10
    assert all(loop[i].head == loop[(i + 1) % 10].tail for i in range(10))
    with pytest.raises(ValueError):
        rectangular_loop(lat, (1, 1), (0, 1), 2, 2)
