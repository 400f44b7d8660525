"""Ready-made surfaces, Hamiltonians and explicit chart systems.

Torus models live on [0, 2 pi)^2 with omega = dx ^ dy / sin^m x and
Z = {x = 0} u {x = pi}.  Exact collar coordinates are

* order 1: z = tan(x/2) near x = 0 (a_1 = 1) and z = tan((x - pi)/2) near
  x = pi (a_1 = -1);
* order 2: z = tan x near both circles (a_2 = 1, a_1 = 0).

Closed models (sphere in R^3, flat unit torus) carry an explicit Morse
function whose extrema sit at the centres of the glued disks.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dynamics import ChartSystem, SphereSystem, TorusSystem, Unsupported
from .geometry import BSurface, CriticalCircle, FlatTorusChart, SphereChart, SurfaceComponent
from .hamiltonian import AdmissibleHamiltonian, Fourier2D
from .trigpoly import SeparableFn, TrigPoly, sin_power

TWO_PI = 2 * np.pi


def _tp(c, period=1.0):
    return TrigPoly.constant(c, period) if isinstance(c, (int, float)) else c


# ---------------------------------------------------------------------------
# graph-shaped surfaces (combinatorial data, generic collars)
# ---------------------------------------------------------------------------

def _circle(cid, neg, pos, order=1, eps=0.1, T=1.0, coeffs=None):
    if coeffs is None:
        coeffs = tuple(TrigPoly.constant(0.0, T) for _ in range(order - 1)) + (
            TrigPoly.constant(1.0, T),)
    return CriticalCircle(cid, order, T, tuple(coeffs), eps, neg, pos)


def sphere_equator(order: int = 1, eps: float = 0.1, T: float = 1.0, coeffs=None) -> BSurface:
    """Sphere cut by one equator: north cap N (pos side), south cap S."""
    comps = [SurfaceComponent("N", 0, chart=SphereChart()), SurfaceComponent("S", 0, chart=SphereChart())]
    return BSurface.assemble(comps, [_circle("Z", "S", "N", order, eps, T, coeffs)])


def two_annuli_torus(order: int = 1, eps: float = 0.1) -> BSurface:
    """Torus with Z = {x = 0} u {x = pi}; A = (0, pi), B = (pi, 2 pi)."""
    comps = [SurfaceComponent("A", 0), SurfaceComponent("B", 0)]
    if order == 1:
        circles = [
            _circle("Z0", "B", "A", 1, eps, TWO_PI),
            _circle("Zpi", "A", "B", 1, eps, TWO_PI, (TrigPoly.constant(-1.0, TWO_PI),)),
        ]
    elif order == 2:
        circles = [_circle("Z0", "B", "A", 2, eps, TWO_PI), _circle("Zpi", "A", "B", 2, eps, TWO_PI)]
    else:
        circles = [_circle("Z0", "B", "A", order, eps, TWO_PI),
                   _circle("Zpi", "A", "B", order, eps, TWO_PI)]
    return BSurface.assemble(comps, circles)


def torus_one_circle(order: int = 1, eps: float = 0.1) -> BSurface:
    """Torus cut along one non-separating circle: a single annulus with a loop."""
    return BSurface.assemble([SurfaceComponent("A", 0)], [_circle("Z", "A", "A", order, eps)])


def tree_surface(genera: dict[str, int], edges: list[tuple[str, str, str]], order: int = 1,
                 eps: float = 0.1) -> BSurface:
    """Surface realising a given graph; ``edges`` are (circle id, neg, pos)."""
    comps = [SurfaceComponent(v, g) for v, g in genera.items()]
    return BSurface.assemble(comps, [_circle(c, a, b, order, eps) for c, a, b in edges])


def arnold_suite(order: int = 1) -> dict[str, BSurface]:
    """Benchmark surfaces for the sharp lower bound."""
    return {
        "sphere_equator": sphere_equator(order),
        "two_annuli_torus": two_annuli_torus(order),
        "g1_deg1": tree_surface({"A": 1, "B": 0}, [("Z", "B", "A")], order),
        "g1_deg2": tree_surface({"D1": 0, "A": 1, "D2": 0},
                                [("Z1", "D1", "A"), ("Z2", "A", "D2")], order),
        "star3": tree_surface({"C": 0, "L1": 0, "L2": 0, "L3": 0},
                              [("Z1", "L1", "C"), ("Z2", "L2", "C"), ("Z3", "C", "L3")], order),
    }


# ---------------------------------------------------------------------------
# torus models
# ---------------------------------------------------------------------------

@dataclass
class TorusModel:
    surface: BSurface
    hamiltonian: AdmissibleHamiltonian
    system: TorusSystem
    description: str


def b_torus(k, eps: float = 0.1, variant: str = "sin") -> TorusModel:
    """b-torus with H = k log|sin x| ("sin", unimodular) or k log|tan(x/2)| ("tan")."""
    k = _tp(k)
    s = two_annuli_torus(1, eps)
    S = TrigPoly(0.0, sin=(1.0,), period=TWO_PI)
    if variant == "sin":
        per = {"Z0": k, "Zpi": k}
        psi = TrigPoly(0.0, cos=(1.0,), period=TWO_PI)
        G = lambda x: np.log(np.abs(np.sin(x)))
    elif variant == "tan":
        per = {"Z0": k, "Zpi": -k}
        psi = TrigPoly.constant(1.0, TWO_PI)
        G = lambda x: np.log(np.abs(np.tan(np.asarray(x) / 2)))
    else:
        raise ValueError(f"unknown b-torus variant {variant!r}")
    H = AdmissibleHamiltonian(per)
    sys = TorusSystem(S, psi, k, Fourier2D(periods=(TWO_PI, TWO_PI)), G=G,
                      circles=(("Z0", 0.0), ("Zpi", np.pi)), collar_eps=2 * np.arctan(eps),
                      name="interior")
    return TorusModel(s, H, sys, f"b-torus, H = k log|{variant}|")


def b2_torus(k, eps: float = 0.1, variant: str = "cot") -> TorusModel:
    """b^2-torus with H = -k cot x ("cot") or H = -k / sin x ("csc", unimodular)."""
    k = _tp(k)
    s = two_annuli_torus(2, eps)
    S = sin_power(2, TWO_PI)
    if variant == "cot":
        per = {"Z0": k, "Zpi": k}
        psi = TrigPoly.constant(1.0, TWO_PI)
        G = lambda x: -1.0 / np.tan(x)
    elif variant == "csc":
        per = {"Z0": k, "Zpi": -k}
        psi = TrigPoly(0.0, cos=(1.0,), period=TWO_PI)
        G = lambda x: -1.0 / np.sin(x)
    else:
        raise ValueError(f"unknown b^2-torus variant {variant!r}")
    H = AdmissibleHamiltonian(per)
    sys = TorusSystem(S, psi, k, Fourier2D(periods=(TWO_PI, TWO_PI)), G=G,
                      circles=(("Z0", 0.0), ("Zpi", np.pi)), collar_eps=np.arctan(eps),
                      name="interior")
    return TorusModel(s, H, sys, f"b^2-torus, H = {variant} profile")


def example_torus_field(k: float, amp: float = 1.0, eps: float = 0.1) -> TorusSystem:
    """X = k d/dy + amp cos y sin x d/dx, i.e. H = k log|tan(x/2)| - amp sin y."""
    S = TrigPoly(0.0, sin=(1.0,), period=TWO_PI)
    h = Fourier2D(((0.0, -amp, 0, 1),), (TWO_PI, TWO_PI))
    return TorusSystem(S, TrigPoly.constant(1.0, TWO_PI), TrigPoly.constant(k), h,
                       circles=(("Z0", 0.0), ("Zpi", np.pi)), collar_eps=2 * np.arctan(eps),
                       name="interior")


# ---------------------------------------------------------------------------
# closed models with explicit Morse functions
# ---------------------------------------------------------------------------

@dataclass
class ClosedModel:
    genus: int
    system: ChartSystem
    critical_points: list[tuple[np.ndarray, int]]  # (point, morse index)
    disks: list[tuple[str, np.ndarray, float]] = field(default_factory=list)

    @property
    def expected_interior(self) -> int:
        return len(self.critical_points) - len(self.disks)

    def inventory(self) -> tuple[int, int, int]:
        idx = [i for _, i in self.critical_points]
        return idx.count(0), idx.count(1), idx.count(2)


_SPHERE_SCALE = 0.3
_TORUS_SCALE = 0.05


def _sphere_model(plus: int, minus: int) -> tuple[SphereSystem, list]:
    """System and (point, morse index) list for the supported sign patterns."""
    N, S = np.array([0, 0, 1.0]), np.array([0, 0, -1.0])
    z3 = np.zeros((3, 3))
    if (plus, minus) in ((0, 0), (1, 0), (0, 1), (1, 1)):
        A, b = z3, np.array([0, 0, 1.0])
        pts = [(N, 2), (S, 0)]
    elif (plus, minus) in ((2, 1), (1, 2)):
        d = 0.2
        sgn = 1.0 if plus == 2 else -1.0
        A, b = sgn * np.diag([2.0, 0, 0]), sgn * np.array([0, 0, d])
        q = np.sqrt(1 - d * d / 4)
        if sgn > 0:
            pts = [(np.array([q, 0, d / 2]), 2), (np.array([-q, 0, d / 2]), 2), (S, 0), (N, 1)]
        else:
            pts = [(np.array([q, 0, d / 2]), 0), (np.array([-q, 0, d / 2]), 0), (S, 2), (N, 1)]
    elif (plus, minus) == (2, 2):
        A, b = np.diag([2.0, -2.0, 0]), np.zeros(3)
        e1, e2, e3 = np.eye(3)
        pts = [(e1, 2), (-e1, 2), (e2, 0), (-e2, 0), (e3, 1), (-e3, 1)]
    else:
        raise Unsupported(f"no explicit sphere model with {plus} max-disks and {minus} min-disks")
    return SphereSystem(A, b, scale=_SPHERE_SCALE), pts


def _torus_model(plus: int, minus: int):
    if (plus, minus) in ((0, 0), (1, 0), (0, 1), (1, 1)):
        n = 1
    elif plus == minus:
        n = plus
    else:
        raise Unsupported(f"no explicit torus model with {plus} max-disks and {minus} min-disks")
    h = Fourier2D(((_TORUS_SCALE, 0.0, 1, 0), (_TORUS_SCALE / n ** 2, 0.0, 0, n)), (1.0, 1.0))
    pts = []
    for j in range(n):
        pts.append((np.array([0.0, j / n]), 2))
        pts.append((np.array([0.5, (j + 0.5) / n]), 0))
        pts.append((np.array([0.0, (j + 0.5) / n]), 1))
        pts.append((np.array([0.5, j / n]), 1))
    return h, pts


def closed_model(genus: int, disk_signs: list[tuple[str, int]]) -> ClosedModel:
    """Closed genus-0/1 model with one disk per (label, sign); + = max, - = min."""
    plus = [lab for lab, sg in disk_signs if sg > 0]
    minus = [lab for lab, sg in disk_signs if sg < 0]
    if genus == 0:
        sys, pts = _sphere_model(len(plus), len(minus))
        metric = lambda a, b: float(np.linalg.norm(a - b))
    elif genus == 1:
        h, pts = _torus_model(len(plus), len(minus))
        sys = TorusSystem.flat(h)
        metric = lambda a, b: float(np.linalg.norm(sys.difference(a[None], b[None])[0]))
    else:
        raise Unsupported("explicit models exist for genus 0 and 1 only")
    maxima = [p for p, i in pts if i == 2]
    minima = [p for p, i in pts if i == 0]
    centres = list(zip(plus, maxima)) + list(zip(minus, minima))
    disks = []
    for lab, c in centres:
        others = [metric(c, p) for p, _ in pts if metric(c, p) > 1e-12]
        disks.append((f"disk:{lab}", c, 0.4 * min(others)))
    sys.disks = tuple(disks)
    sys.name = "interior"
    return ClosedModel(genus, sys, pts, disks)
