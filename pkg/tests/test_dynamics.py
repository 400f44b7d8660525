import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bsing import dynamics as dyn
from bsing.dynamics import (F_IDENTICALLY_ZERO, ApproachedCriticalSet, CollarSystem, IndexUnsupported,
                            LinearSystem, TorusSystem, Unsupported, collar_flow_closed_form,
                            collar_vector_field, find_fixed_points, find_periodic_orbits, integrate,
                            monodromy_det, roots_of_F, time_one_map)
from bsing.geometry import CriticalCircle, DomainError
from bsing.hamiltonian import AdmissibleHamiltonian, Fourier2D
from bsing.models import b2_torus, b_torus, closed_model, example_torus_field, two_annuli_torus
from bsing.trigpoly import SeparableFn, TrigPoly

TWO_PI = 2 * np.pi


def circ(order=1, T=1.0, eps=0.1, coeffs=None):
    coeffs = coeffs or [TrigPoly.constant(0.0, T)] * (order - 1) + [TrigPoly.constant(1.0, T)]
    return CriticalCircle("Z", order, T, tuple(coeffs), eps, "S", "N")


def ham(k, h=None):
    return AdmissibleHamiltonian({"Z": k if isinstance(k, TrigPoly) else TrigPoly(k)},
                                 collar_terms={"Z": h} if h is not None else {})


def test_collar_field_examples():
    assert collar_vector_field(circ(), ham(1.0), 0.05, 0.3) == pytest.approx((0.0, 1.0))
    c = circ(T=TWO_PI, eps=0.5)
    h = SeparableFn.autonomous(TrigPoly(0.0, sin=(1.0,), period=TWO_PI))
    assert collar_vector_field(c, ham(1.0, h), 0.3, 0.0) == pytest.approx((-0.3, 1.0))
    with pytest.raises(DomainError):
        collar_vector_field(circ(), ham(1.0), 0.0, 0.0)


def test_cot_torus_field_is_pure_rotation():
    k = 0.37
    M = b2_torus(TrigPoly(k), variant="cot")
    X = np.random.default_rng(0).uniform(0, TWO_PI, (50, 2))
    assert np.allclose(M.system.field(0.0, X), np.array([0.0, k]), atol=1e-15)


def test_closed_form_examples():
    c = circ()
    z, th = collar_flow_closed_form(c, ham(0.7), (0.03, 0.2), 2.0)
    assert z == pytest.approx(0.03) and th == pytest.approx(1.6)
    T = 1.5
    c = circ(T=T)
    h = SeparableFn.autonomous(TrigPoly(0.0, sin=(1.0,), period=T))
    z, _ = collar_flow_closed_form(c, ham(T, h), (0.02, 0.4), 1.0)
    assert z == pytest.approx(0.02, rel=1e-12)
    with pytest.raises(Unsupported):
        collar_flow_closed_form(circ(order=2), ham(0.5), (0.02, 0.0), 1.0)


@settings(max_examples=25)
@given(st.floats(0.2, 1.5), st.floats(-0.3, 0.3), st.floats(0.0, 1.0), st.floats(0.005, 0.02))
def test_closed_form_matches_integration(k, amp, th0, z0):
    c = circ(eps=1.0)
    h = SeparableFn.autonomous(TrigPoly(0.0, sin=(amp,), cos=(0.3 * amp,)))
    H = ham(k, h)
    sys = CollarSystem.from_hamiltonian(c, H)
    path = integrate(sys, [z0, th0], 1.0, tol=1e-12)
    z, th = collar_flow_closed_form(c, H, (z0, th0), 1.0)
    assert path.event is None
    assert path.end[0] == pytest.approx(float(z), rel=1e-7)
    assert path.end[1] == pytest.approx(float(th), abs=1e-8)


def test_integration_aborts_near_critical_set():
    c = circ()
    h = SeparableFn.autonomous(TrigPoly(0.0, sin=(30.0,)))
    sys = CollarSystem.from_hamiltonian(c, ham(0.3, h))
    with pytest.raises(ApproachedCriticalSet):
        integrate(sys, [0.0002, 0.0], 1.0)
    path = integrate(sys, [0.0002, 0.0], 1.0, on_floor="report")
    assert path.event == "critical set"


def test_rotation_returns_after_one_period():
    sys = TorusSystem.flat(Fourier2D(((0.0, 0.0, 0, 0),), (1.0, 1.0)))
    sys.k = TrigPoly(1.0)
    sys.psi = TrigPoly.constant(1.0, 1.0)
    path = integrate(sys, [0.3, 0.2], 1.0)
    assert np.allclose(sys.difference(path.end, [0.3, 0.2]), 0.0, atol=1e-10)


@settings(max_examples=15)
@given(st.floats(-1, 1), st.floats(-1, 1), st.floats(0, 1), st.floats(0, 1))
def test_energy_conservation_on_flat_torus(a, b, x0, y0):
    h = Fourier2D(((a, 0.2, 1, 0), (0.1, b, 1, 1), (0.3, 0.0, 0, 2)), (1.0, 1.0))
    sys = TorusSystem.flat(h)
    path = integrate(sys, [x0, y0], 1.0, tol=1e-12)
    E = h.value(path.y[0], path.y[1])
    assert np.max(np.abs(E - E[0])) < 1e-8


def test_time_one_map_examples():
    sys = TorusSystem(TrigPoly.constant(1.0, 1.0), TrigPoly.constant(1.0, 1.0), TrigPoly(0.25),
                      Fourier2D((), (1.0, 1.0)))
    sys.periods = (1.0, 1.0)
    _, D, _ = time_one_map(sys, [[0.1, 0.2]])
    assert np.allclose(D[0], np.eye(2), atol=1e-12)
    sad = LinearSystem(np.diag([1.0, -1.0]))
    _, D, _ = time_one_map(sad, [[0.0, 0.0]])
    assert np.allclose(D[0], np.diag([np.e, 1 / np.e]), rtol=1e-10)
    det = monodromy_det(sad, np.zeros((1, 2)), D)[0]
    assert det == pytest.approx((1 - np.e) * (1 - 1 / np.e), rel=1e-10)
    assert det == pytest.approx(-1.086, abs=1e-3)


@settings(max_examples=10)
@given(st.floats(0.1, 1.0), st.floats(-1, 1), st.floats(0.01, 0.05), st.floats(0, 1))
def test_jacobian_matches_finite_differences(k, amp, z0, th0):
    c = circ(order=2, coeffs=[TrigPoly(0.2, cos=(0.1,)), TrigPoly.constant(1.0)])
    h = SeparableFn(((TrigPoly(1.0, sin=(0.5,)), TrigPoly(0.0, sin=(0.1 * amp,))),))
    sys = CollarSystem(c, TrigPoly(k, cos=(0.1,)), h)
    X = np.array([[z0, th0]])
    _, D, _ = time_one_map(sys, X, check_floor=False)
    step = 1e-6
    fd = np.empty((2, 2))
    for j in range(2):
        e = np.zeros((1, 2)); e[0, j] = step
        fd[:, j] = (time_one_map(sys, X + e, check_floor=False)[0][0]
                    - time_one_map(sys, X - e, check_floor=False)[0][0]) / (2 * step)
    assert np.linalg.norm(D[0] - fd) / np.linalg.norm(fd) < 1e-4


def test_roots_of_F():
    T = 1.0
    c = circ(T=T)
    h = SeparableFn(((TrigPoly(0.0, cos=(1.0,), period=2.0), TrigPoly(0.0, sin=(1.0,))),))
    roots = roots_of_F(c, ham(T / 2, h))
    assert len(roots) >= 1
    # brute force: quadrature of F on a dense grid
    from scipy.integrate import quad
    speed = T / 2

    def F(th):
        return quad(lambda t: float(h.d_theta(t, th + speed * t)), 0.0, T / speed, epsabs=1e-13)[0]
    for r in roots:
        assert abs(F(r)) < 1e-8
    grid = np.linspace(0, T, 2001)
    vals = np.array([F(x) for x in grid])
    changes = np.nonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0)[0]
    brute = sorted(g for g in grid[changes])
    assert len(brute) == len(roots)
    assert np.allclose(roots, brute, atol=1e-3)
    assert roots_of_F(c, ham(0.5, SeparableFn.autonomous(TrigPoly(0.3)))) == F_IDENTICALLY_ZERO
    auto = SeparableFn.autonomous(TrigPoly(0.0, sin=(1.0,)))
    assert roots_of_F(c, ham(0.5, auto)) == F_IDENTICALLY_ZERO


def test_torus_tan_example_has_no_orbits():
    M = b_torus(TrigPoly(np.pi), variant="tan")
    res = find_periodic_orbits(M.hamiltonian, M.surface, grid_density=16, extra_systems=[M.system])
    assert res.count == 0 and not res.families


def test_example_field_has_no_orbits_near_Z():
    sys = example_torus_field(0.37, amp=1.0)
    res = find_fixed_points(sys, grid_density=16)
    assert not [o for o in res.orbits if o.location.startswith("collar")]


def test_sphere_model_orbits_and_indices():
    M = closed_model(0, [])
    res = find_fixed_points(M.system, grid_density=16)
    assert res.count == 2 and sorted(o.index for o in res.orbits) == [-1, 1]
    assert all(o.nondegenerate and o.residual < 1e-10 for o in res.orbits)


def test_index_classification_torus_and_time_dependence():
    M = closed_model(1, [])
    res = find_fixed_points(M.system, grid_density=16)
    assert sorted(o.index for o in res.orbits) == [-1, 0, 0, 1]
    sys = CollarSystem(circ(), TrigPoly(0.5, cos=(0.1,)))
    with pytest.raises(IndexUnsupported):
        dyn.morse_index(sys, [0.05, 0.0])


def test_admissible_collar_has_no_orbits_and_lattice_k_flags_family():
    c = circ()
    res = find_fixed_points(CollarSystem(c, TrigPoly(0.5, cos=(0.2,))), grid_density=16)
    assert res.count == 0 and not res.families
    res = find_fixed_points(CollarSystem(c, TrigPoly(1.0)), grid_density=16)
    assert res.count == 0 and res.families


def test_counts_stable_under_grid_doubling():
    M = closed_model(1, [("a", 1), ("b", -1)])
    a = find_fixed_points(M.system, grid_density=12)
    b = find_fixed_points(M.system, grid_density=24)
    assert a.count == b.count == 4 and a.by_location() == b.by_location()


def test_thread_count_does_not_change_results(monkeypatch):
    M = closed_model(0, [("a", 1), ("b", 1), ("c", -1)])
    one = find_fixed_points(M.system, grid_density=16, threads=1, chunk=64)
    many = find_fixed_points(M.system, grid_density=16, threads=4, chunk=64)
    assert one.to_json() == many.to_json()
    monkeypatch.setenv("BSING_THREADS", "3")
    assert dyn.max_threads() == 3


def test_orbit_table_columns():
    M = closed_model(0, [])
    res = find_fixed_points(M.system, grid_density=12)
    text = dyn.orbits_to_csv(res.orbits)
    header = text.splitlines()[0].split(",")
    for col in ("component", "z", "theta_or_coords", "residual", "det", "index", "degenerate_flag"):
        assert col in header
