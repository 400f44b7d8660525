import numpy as np
import pytest
from hypothesis import given, strategies as st

from bsing.geometry import ValidationError, build_graph
from bsing.graph import SignAssignment, two_color
from bsing.hamiltonian import (AdmissibleHamiltonian, Fourier2D, admissibility_report,
                               disk_admissible, is_unimodular)
from bsing.models import b2_torus, b_torus, sphere_equator
from bsing.trigpoly import SeparableFn, TrigPoly


def H1(k, h=None):
    return AdmissibleHamiltonian({"Z": TrigPoly.from_json(k)}, collar_terms={"Z": h} if h else {})


def test_order_one_examples():
    s = sphere_equator(1)
    assert admissibility_report(H1(0.5), s).overall
    rep = admissibility_report(H1(1.0), s)
    assert not rep.overall and rep.circles[0].witness == "∫k ∈ TZ"
    rep = admissibility_report(H1(0.0), s)
    assert not rep.overall and rep.circles[0].witness == "k == 0"


def test_order_two_threshold_is_grid_infimum():
    s = sphere_equator(2, eps=0.1)
    rep = admissibility_report(H1(0.4), s)
    assert rep.overall
    # a_1 = 0, a_2 = 1: inf of the density is 1, so T_eps = 1/2
    assert rep.circles[0].threshold == pytest.approx(0.5, rel=1e-9)
    assert not admissibility_report(H1(0.6), s).overall


def test_order_two_with_lower_term_lowers_threshold():
    coeffs = (TrigPoly.constant(1.0), TrigPoly.constant(1.0))
    s = sphere_equator(2, eps=0.1, coeffs=coeffs)
    rep = admissibility_report(H1(0.4), s)
    assert rep.circles[0].threshold == pytest.approx(0.5 * 0.9, rel=1e-3)


def test_reversed_angle_uses_absolute_top_coefficient():
    s = sphere_equator(1, coeffs=(TrigPoly.constant(-2.0),))
    assert admissibility_report(H1(1.5), s).overall
    assert not admissibility_report(H1(2.0), s).overall


def test_theta_dependent_collar_term_fails():
    h = SeparableFn.autonomous(TrigPoly(0.0, sin=(1.0,)))
    rep = admissibility_report(H1(0.5, h), sphere_equator(1))
    assert not rep.overall and "theta" in rep.circles[0].witness


def test_missing_circle_is_validation_error():
    with pytest.raises(ValidationError):
        admissibility_report(AdmissibleHamiltonian({}), sphere_equator(1))


def test_unimodularity_of_torus_examples():
    for var, want in (("sin", True), ("tan", False)):
        M = b_torus(TrigPoly(0.3), variant=var)
        col = two_color(build_graph(M.surface))
        assert is_unimodular(M.hamiltonian, M.surface, col) is want
    for var, want in (("csc", True), ("cot", False)):
        M = b2_torus(TrigPoly(0.3), variant=var)
        col = two_color(build_graph(M.surface))
        assert is_unimodular(M.hamiltonian, M.surface, col) is want


@given(st.floats(-3, 3), st.integers(1, 4))
def test_single_circle_always_unimodular(k, m):
    s = sphere_equator(m)
    col = two_color(build_graph(s))
    assert is_unimodular(H1(k), s, col)


def test_unimodular_needs_vertex_coloring():
    s = sphere_equator(1)
    assert not is_unimodular(H1(0.5), s, None)
    bad = SignAssignment({"N": 1, "S": 1}, "vertex2coloring")
    assert not is_unimodular(H1(0.5), s, bad)


def test_disk_admissibility():
    assert disk_admissible(TrigPoly(1.0), 1.0)
    assert not disk_admissible(TrigPoly(7.0), 1.0)
    assert not disk_admissible(TrigPoly(0.0), 1.0)
    with pytest.raises(ValidationError):
        disk_admissible(TrigPoly(1.0), -1.0)


def test_json_round_trip():
    s = sphere_equator(1)
    h = SeparableFn(((TrigPoly(0.0, sin=(1.0,)), TrigPoly.constant(1.0)),))
    H = AdmissibleHamiltonian({"Z": TrigPoly(0.5, cos=(0.1,))}, {"N": Fourier2D(((1.0, 0.0, 1, 0),))},
                              {"Z": h})
    again = AdmissibleHamiltonian.from_json(H.to_json(), s)
    assert again.to_json() == H.to_json()


def test_fourier_gradient_against_finite_differences():
    f = Fourier2D(((0.3, -0.2, 1, 2), (0.1, 0.5, 0, 1)), (1.0, 2.0))
    x, y, h = 0.21, 0.73, 1e-6
    gx, gy = f.grad(x, y)
    assert gx == pytest.approx((f.value(x + h, y) - f.value(x - h, y)) / (2 * h), abs=1e-7)
    assert gy == pytest.approx((f.value(x, y + h) - f.value(x, y - h)) / (2 * h), abs=1e-7)
    hxx, hxy, hyy = f.hess(x, y)
    assert hxy == pytest.approx((f.grad(x, y + h)[0] - f.grad(x, y - h)[0]) / (2 * h), abs=1e-6)
