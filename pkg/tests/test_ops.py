import numpy as np
import pytest
from hypothesis import given, strategies as st

from masterloop.area import Unbounded, area, underbar_area
from masterloop.lattice import CapacityError, Edge, Plaquette, build_lattice, components, rectangular_loop
from masterloop.lemmas import random_counts, stuck_case
from masterloop.ops import (ModifiedContext, classify_state, deformations, good_edge, mergers,
                            operation_bound_ok, revivals, splittings, stuck_component)
from masterloop.strings import (Counts, canonical_form, edge_totals, make_string, null_string,
                                plaquette_string, splitting_complexity, unoriented_occurrence_count)

from strategies import lattice_and_string

CAP = 24
P0 = Plaquette((0, 0), 0, 1)


def _rotate_to(loop, x):
    k = next(i for i, e in enumerate(loop) if e.tail == x)
    return loop[k:] + loop[:k]


def test_split_simple_rectangle_is_empty():
    lat = build_lattice(2, 2)
    s = make_string([rectangular_loop(lat, (-1, -1), (0, 1), 2, 3)])
    assert all(splittings(s, pos) == [] for pos in s.positions())


def test_negative_split_of_lollipop_gives_two_plaquettes():
    # e runs v -> w; A is a plaquette loop based at w, B one based at v
    v, w = (0, 0), (1, 0)
    e = Edge(v, 0, 1)
    A = _rotate_to(Plaquette((1, 0), 0, 1).edges(), w)
    B = _rotate_to(Plaquette((-1, -1), 0, 1).edges(), v)
    s = make_string([(e,) + A + (e.inverse(),) + B])
    out = splittings(s, (0, 0))
    assert [r.kind for r in out] == ["split-"]
    assert out[0].coefficient == 1.0
    assert canonical_form(out[0].result_string) == canonical_form(make_string([A, B]))


def test_merge_single_loop_is_empty():
    s = plaquette_string([P0])
    assert mergers(s, (0, 0), N=3) == []


def test_negative_merge_cancels_completely():
    s = plaquette_string([P0, P0.inverse()])
    out = mergers(s, (0, 0), N=2)
    assert len(out) == 1 and out[0].kind == "merge-"
    assert out[0].result_string.is_null
    assert out[0].coefficient == pytest.approx(0.25)


def test_positive_merge_coefficient():
    s = plaquette_string([P0, P0])
    out = mergers(s, (0, 0), N=2)
    assert [r.kind for r in out] == ["merge+"]
    assert out[0].coefficient == pytest.approx(-0.25)
    assert out[0].result_string.perimeter == 8


def test_deformations_bulk_edge_d2():
    lat = build_lattice(2, 2)
    s = plaquette_string([P0])
    K = Counts.constant(lat.plaquettes, 1)
    out = deformations(s, (0, 0), K, lat, beta=0.3, N=2)
    kinds = sorted(r.kind for r in out)
    assert kinds == ["deform+", "deform+", "deform-", "deform-"]
    for r in out:
        assert r.coefficient == pytest.approx(-0.15 if r.kind == "deform+" else 0.15)
        assert r.result_count.total() == K.total() - 1


def test_deformations_need_counts():
    lat = build_lattice(2, 2)
    assert deformations(plaquette_string([P0]), (0, 0), Counts(), lat) == []


def test_stuck_component_examples():
    lat = build_lattice(2, 2)
    s = plaquette_string([P0])
    assert stuck_component(s, frozenset(), lat) is None
    assert stuck_component(s, frozenset({P0}), lat) == frozenset({P0})
    domino = make_string([rectangular_loop(lat, (0, 0), (0, 1), 2, 1)])
    assert stuck_component(domino, frozenset({P0}), lat) is None


def test_revivals_single_boundary_plaquette():
    lat = build_lattice(1, 2)
    ps = list(lat.plaquettes)
    q = ps[-1]
    P = frozenset(ps[:-1])
    s = plaquette_string([ps[0]])
    assert stuck_component(s, P, lat) == P
    out = revivals(s, Counts({q: 1}), frozenset(), P, lat, beta=0.2, N=3)
    assert len(out) == 2
    assert {r.plaquettes for r in out} == {(q,), (q.inverse(),)}
    for r in out:
        assert r.coefficient == pytest.approx(0.6)
        assert r.result_count.get(q) == 0
        assert r.result_Q == P
    assert revivals(s, Counts(), frozenset(), P, lat) == []


def test_revival_cap_is_explicit():
    lat = build_lattice(2, 2)
    P = frozenset({P0})
    K = Counts.constant([p for p in lat.plaquettes if p != P0], 5)
    with pytest.raises(CapacityError):
        revivals(plaquette_string([P0]), K, frozenset(), P, lat, cap=100)


def test_good_edge_examples():
    lat = build_lattice(2, 2)
    s = plaquette_string([P0, Plaquette((1, 1), 0, 1)])
    assert good_edge(s, frozenset()) == (0, 0)
    assert good_edge(plaquette_string([P0]), frozenset({P0})) is None
    assert good_edge(s, frozenset({P0})) == good_edge(s, frozenset({P0}))
    assert good_edge(s, frozenset({P0}))[0] == 1


def test_classify_null_and_isolated():
    lat = build_lattice(2, 2)
    loop = rectangular_loop(lat, (0, 0), (0, 1), 1, 1)
    ctx = ModifiedContext(lat, loop, 1, frozenset({Plaquette((-2, -2), 0, 1)}))
    assert classify_state(null_string((0, 0)), Counts(), frozenset(), ctx) == "boundary1"
    s = make_string([loop])
    assert classify_state(s, Counts(), frozenset(), ctx) == "boundary0"


# property tests on random strings and edges


def _pos(s, seed):
    pos = list(s.positions())
    return pos[seed % len(pos)]


def _area_or_none(s, lat):
    a = area(s, lat, CAP)
    return None if isinstance(a, Unbounded) else a


@given(lattice_and_string())
def test_splitting_lowers_complexity(data):
    lat, s, seed = data
    if s.is_null:
        return
    pos = _pos(s, seed)
    a0 = _area_or_none(s, lat)
    for r in splittings(s, pos):
        r.result_string.validate(lat)
        drop = 1 if r.kind == "split+" else 1.5
        assert splitting_complexity(r.result_string) <= splitting_complexity(s) - drop
        assert _area_or_none(r.result_string, lat) == a0


@given(lattice_and_string())
def test_merger_raises_complexity_by_at_most_one(data):
    lat, s, seed = data
    if s.is_null:
        return
    pos = _pos(s, seed)
    a0 = _area_or_none(s, lat)
    for r in mergers(s, pos, N=2):
        r.result_string.validate(lat)
        assert splitting_complexity(r.result_string) <= splitting_complexity(s) + 1
        if len(r.result_string.loops) == len(s.loops) - 2:
            # the merged loop cancelled completely
            assert splitting_complexity(r.result_string) <= splitting_complexity(s)
        assert _area_or_none(r.result_string, lat) == a0


@given(lattice_and_string(), st.integers(1, 3))
def test_deformation_bounds(data, B):
    lat, s, seed = data
    if s.is_null:
        return
    rng = np.random.default_rng(seed)
    K = random_counts(lat, rng, B)
    pos = _pos(s, seed)
    a0 = _area_or_none(s, lat)
    for r in deformations(s, pos, K, lat):
        r.result_string.validate(lat)
        assert splitting_complexity(r.result_string) <= splitting_complexity(s) + 1
        assert r.result_count.total() == K.total() - 1
        a1 = _area_or_none(r.result_string, lat)
        if a0 is not None and a1 is not None:
            assert a0 <= a1 + 1


@given(lattice_and_string(), st.integers(1, 3))
def test_operation_counts_on_truncated_members(data, B):
    lat, s, seed = data
    rng = np.random.default_rng(seed)
    K = random_counts(lat, rng, B)
    if s.is_null or max(edge_totals(s, K).values()) > 2 * lat.d * B:
        return
    res = operation_bound_ok(s, K, _pos(s, seed), lat, B)
    assert all(ok for _, ok in res.values()), res


@given(lattice_and_string(), st.integers(1, 3))
def test_occurrence_counts_do_not_grow(data, B):
    lat, s, seed = data
    if s.is_null:
        return
    K = random_counts(lat, np.random.default_rng(seed), B)
    pos = _pos(s, seed)
    outs = splittings(s, pos, K) + mergers(s, pos, K) + deformations(s, pos, K, lat)
    for r in outs:
        for e in lat.edges:
            assert (unoriented_occurrence_count(r.result_string, r.result_count, e)
                    <= unoriented_occurrence_count(s, K, e))


@given(st.integers(0, 2 ** 32 - 1))
def test_revival_invariants(seed):
    rng = np.random.default_rng(seed)
    lat, P, s = stuck_case(rng)
    K = Counts({p: int(rng.integers(0, 2)) for p in lat.plaquettes
                if p not in P and rng.random() < 0.3})
    Qt = stuck_component(s, P, lat)
    if Qt is None:
        return
    try:
        outs = revivals(s, K, frozenset(), P, lat, cap=2000)
    except CapacityError:
        return
    u0 = underbar_area(s, lat, CAP)
    for r in outs[:6]:
        r.result_string.validate(lat)
        assert splitting_complexity(r.result_string) == splitting_complexity(s)
        assert r.result_Q == Qt
        for p in r.plaquettes:
            assert r.result_count.get(p.positive(), 0) == 0
        u1 = underbar_area(r.result_string, lat, CAP)
        if not isinstance(u0, Unbounded) and not isinstance(u1, Unbounded):
            assert u0 <= u1 + 8 * (lat.d - 1) * len(r.result_Q)


def _is_cluster(lat, loop, S):
    loop_edges = {e.positive() for e in loop}
    return all(any(f.positive() in loop_edges for p in comp for f in p.edges())
               for comp in components(lat, S))


@given(st.integers(0, 2 ** 32 - 1), st.sampled_from([(2, 2), (1, 3)]))
def test_trajectories_trace_clusters(seed, shape):
    L, d = shape
    lat = build_lattice(L, d)
    rng = np.random.default_rng(seed)
    loop = rectangular_loop(lat, (0,) * d, (0, 1), 1, 1)
    B = 1
    s = make_string([loop])
    K = Counts.constant(lat.plaquettes, B)
    for _ in range(8):
        if s.is_null:
            break
        pos = _pos(s, int(rng.integers(1 << 30)))
        outs = splittings(s, pos, K) + mergers(s, pos, K) + deformations(s, pos, K, lat)
        if not outs:
            break
        r = outs[int(rng.integers(len(outs)))]
        s, K = r.result_string, r.result_count
        deficit = {p for p in lat.plaquettes if K.get(p, 0) != B}
        assert _is_cluster(lat, loop, deficit)
