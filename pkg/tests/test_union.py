import numpy as np
import pytest

from conftest import random_polytope
from cpsimpact.geometry import (EXACT, MONTE_CARLO, STATISTICAL, HPolytope, PolyUnion,
                                Tolerances, disjoint_decomposition, multiset_equal,
                                polytope_difference, union_contains_point, union_difference,
                                union_expand, union_intersect, union_merge, union_prune,
                                union_subset, union_volume, volume)


def halves():
    return PolyUnion([HPolytope.box([-1, -1], [0, 1]), HPolytope.box([0, -1], [1, 1])], 2)


def test_prune_drops_empty_and_contained():
    U = PolyUnion([HPolytope.ball_inf(1.0, 2), HPolytope.ball_inf(0.5, 2),
                   HPolytope.empty(2)], 2)
    P = union_prune(U)
    assert len(P) == 1


def test_multiset_equal_examples():
    B = PolyUnion.of(HPolytope.ball_inf(1.0, 2))
    eq = multiset_equal(B, B)
    assert eq and eq.mode == EXACT
    # sampling fallback when the exact difference path is disabled
    eq = multiset_equal(B, halves(), allow_difference=False)
    assert eq and eq.mode == STATISTICAL
    eq = multiset_equal(B, halves())
    assert eq
    two = PolyUnion([HPolytope.box([-1, -1], [-0.5, 1]), HPolytope.box([0.5, -1], [1, 1])], 2)
    assert not multiset_equal(B, two)


def test_difference_and_subset():
    B = HPolytope.ball_inf(1.0, 2)
    small = HPolytope.ball_inf(0.5, 2)
    parts = polytope_difference(B, small)
    assert sum(volume(P) for P in parts) == pytest.approx(3.0)
    assert union_subset(PolyUnion.of(small), PolyUnion.of(B)) is True
    assert union_subset(PolyUnion.of(B), halves()) is True
    assert union_subset(PolyUnion.of(B), PolyUnion.of(small)) is False
    assert union_difference([B], halves()) == []


def test_union_volume_exact_and_mc():
    U = PolyUnion([HPolytope.box([0, 0], [2, 2]), HPolytope.box([1, 1], [3, 3])], 2)
    v, mode = union_volume(U)
    assert mode == EXACT and v == pytest.approx(7.0)
    vm, mode = union_volume(U, Tolerances(eps_vol=0.01), method="mc",
                            rng=np.random.default_rng(0))
    assert mode == MONTE_CARLO and abs(vm - 7.0) / 7.0 <= 0.02
    parts = disjoint_decomposition(U)
    assert sum(volume(P) for P in parts) == pytest.approx(7.0)


def test_intersect_and_membership(rng):
    U = halves()
    V = PolyUnion.of(HPolytope.box([-0.5, -0.5], [0.5, 0.5]))
    W = union_intersect(U, V)
    assert union_volume(W)[0] == pytest.approx(1.0)
    assert union_contains_point(U, [0.9, 0.9])
    assert not union_contains_point(U, [1.1, 0.0])


def test_merge_and_expand_preserve_union(rng):
    container = HPolytope.ball_inf(5.0, 2)
    for _ in range(10):
        pieces = []
        for _ in range(3):
            P = random_polytope(rng, 2, radius=0.6)
            shift = 0.3 * rng.standard_normal(2)
            pieces.append(HPolytope(P.G, P.g + P.G @ shift))
        U = union_prune(PolyUnion(pieces, 2))
        for V in (union_merge(U), union_expand(U, container)):
            assert union_subset(U, V) is True
            assert union_subset(V, U) is True


def test_merge_joins_adjacent_boxes():
    M = union_merge(halves())
    assert len(M) == 1
    assert multiset_equal(M, PolyUnion.of(HPolytope.ball_inf(1.0, 2)))


def test_union_json_round_trip():
    U = halves()
    V = PolyUnion.from_dict(U.to_dict())
    assert multiset_equal(U, V)
