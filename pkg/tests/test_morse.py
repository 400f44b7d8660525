import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bsing.geometry import BSurface, DomainError, SurfaceComponent, build_graph
from bsing.graph import arnold_bound_surface
from bsing.models import arnold_suite, closed_model, sphere_equator, torus_one_circle, tree_surface
from bsing.morse import (ChainComplexGF2, ComplexInvalid, ConstructionUnavailable, FloerGrid,
                         complex_from_inventory, convergence_order, discrete_floer_residual,
                         euler_identity_check, exact_floer_family, gradient_complex, homology_gf2,
                         minimum_principle_check, morse_inequality_bound, optimal_b_function,
                         perfect_morse_inventory, rank_gf2, sheared_non_solution, trivial_cylinder)


def test_perfect_inventories():
    for g, want in ((0, (1, 0, 1)), (1, (1, 2, 1)), (2, (1, 4, 1))):
        inv = perfect_morse_inventory(g)
        assert (inv.c_min, inv.c_saddle, inv.c_max) == want
        assert euler_identity_check(inv, g)


def test_euler_examples():
    assert euler_identity_check((1, 0, 1), 0)
    assert euler_identity_check((1, 2, 1), 1)
    assert not euler_identity_check((2, 0, 1), 0)
    assert not euler_identity_check((0, 0, 2), 0)


def test_bound_examples():
    assert morse_inequality_bound(1, 0) == 2
    assert morse_inequality_bound(1, 1) == 4
    assert morse_inequality_bound(2, 1) == 4
    for deg in range(1, 6):
        for g in range(3):
            assert morse_inequality_bound(deg, g, c_extrema_min=deg) == 2 * deg + 2 * g - 2
    assert morse_inequality_bound(3, 0) == 4


def _span_size(M):
    rows = [np.array(r) % 2 for r in M]
    seen = set()
    for coeffs in itertools.product((0, 1), repeat=len(rows)):
        v = sum((c * r for c, r in zip(coeffs, rows)), np.zeros(len(M[0]), dtype=int)) % 2
        seen.add(tuple(v))
    return len(seen)


@settings(max_examples=60)
@given(st.integers(1, 5), st.integers(1, 5), st.data())
def test_rank_gf2_matches_brute_force(r, c, data):
    M = np.array(data.draw(st.lists(st.lists(st.integers(0, 1), min_size=c, max_size=c),
                                    min_size=r, max_size=r)))
    assert 2 ** rank_gf2(M) == _span_size(M)


def test_complex_validation():
    bad = ChainComplexGF2({-1: ["x"], 0: ["y"], 1: ["w"]}, {0: [[1]], 1: [[1]]})
    with pytest.raises(ComplexInvalid):
        homology_gf2(bad)
    inv = perfect_morse_inventory(1)
    assert homology_gf2(complex_from_inventory(inv)) == (1, 2, 1)


@pytest.mark.parametrize("genus,signs,betti", [
    (0, [], (1, 0, 1)),
    (0, [("a", 1), ("b", 1), ("c", -1)], (1, 0, 1)),
    (0, [("a", 1), ("b", 1), ("c", -1), ("d", -1)], (1, 0, 1)),
    (1, [], (1, 2, 1)),
    (1, [("a", 1), ("b", 1), ("c", -1), ("d", -1)], (1, 2, 1)),
])
def test_gradient_complex_homology(genus, signs, betti):
    model = closed_model(genus, signs)
    C = gradient_complex(model)
    C.check()
    assert homology_gf2(C) == betti


def test_optimal_examples():
    for order in (1, 2):
        opt = optimal_b_function(sphere_equator(order))
        assert opt.expected_count == 2
        suite = arnold_suite(order)
        assert optimal_b_function(suite["two_annuli_torus"]).expected_count == 0
        g1 = optimal_b_function(suite["g1_deg1"])
        assert g1.inventories["A"].interior == 3
        for name, s in suite.items():
            assert optimal_b_function(s).expected_count == arnold_bound_surface(build_graph(s)), name


def test_optimal_numeric_count_small():
    opt = optimal_b_function(arnold_suite(1)["star3"])
    res = opt.numeric_count(grid_density=16)
    assert res["total"] == opt.expected_count
    assert res["all_nondegenerate"] and res["indices_consistent"]


def test_odd_cycle_blocks_construction():
    with pytest.raises(ConstructionUnavailable) as exc:
        optimal_b_function(torus_one_circle(1))
    assert exc.value.witness == ["A"]
    tri = tree_surface({"A": 0, "B": 0, "C": 0}, [("Z1", "A", "B"), ("Z2", "B", "C"), ("Z3", "C", "A")])
    with pytest.raises(ConstructionUnavailable):
        optimal_b_function(tri)
    # even order: a good orientation always exists
    assert optimal_b_function(torus_one_circle(2)).expected_count >= 0


@pytest.fixture
def collar1():
    return sphere_equator(1, eps=0.1).circles[0]


def test_floer_exact_family(collar1):
    res, R = discrete_floer_residual(exact_floer_family(collar1, 1e-2))
    assert res < 1e-6
    _, order = convergence_order(collar1)
    assert order >= 1.8
    c2 = sphere_equator(2, eps=0.1).circles[0]
    assert discrete_floer_residual(exact_floer_family(c2, 1e-2))[0] < 1e-6


def test_floer_controls(collar1):
    assert discrete_floer_residual(trivial_cylinder(collar1, 1e-2, 0.05))[0] < 1e-12
    bad = sheared_non_solution(collar1, 1e-2, 0.02)
    assert discrete_floer_residual(bad)[0] > 1e-3
    assert not minimum_principle_check(bad).applicable
    with pytest.raises(DomainError):
        trivial_cylinder(collar1, 1e-2, 0.2)


def test_minimum_principle(collar1):
    mp = minimum_principle_check(exact_floer_family(collar1, 1e-2))
    assert mp.applicable and mp.holds and "min" in mp.variant
    mp = minimum_principle_check(exact_floer_family(collar1, 1e-2, kappa=-0.5))
    assert mp.applicable and mp.holds and "max" in mp.variant
    assert minimum_principle_check(trivial_cylinder(collar1, 1e-2, 0.05)).variant == "constant"
