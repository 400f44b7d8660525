"""Optimal b-functions, GF(2) Morse complexes and the collar Floer identity.

Grading on surfaces: a critical point of Morse index i has grade 1 - i, so
minima sit in grade 1, saddles in grade 0 and maxima in grade -1.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import solve_ivp

from .dynamics import G_m, Unsupported, find_fixed_points
from .geometry import BSurface, CriticalCircle, DomainError, ValidationError, build_graph
from .graph import (BGraph, EdgeOrientation, GraphError, SignAssignment, check_edge_coloring,
                    check_good_orientation, edge_two_color, good_orientation)


class ComplexInvalid(ValueError):
    """Boundary maps that do not square to zero."""


class ConstructionUnavailable(GraphError):
    """The coloring or orientation needed by the optimal construction is missing."""

    def __init__(self, msg: str, witness=None):
        super().__init__(msg)
        self.witness = witness


# ---------------------------------------------------------------------------
# inventories
# ---------------------------------------------------------------------------

@dataclass
class CriticalInventory:
    component: str
    genus: int
    c_min: int
    c_saddle: int
    c_max: int
    disks: dict[str, int] = field(default_factory=dict)  # "circle:side" -> +1 (max) / -1 (min)
    positions: list | None = None

    @property
    def total(self) -> int:
        return self.c_min + self.c_saddle + self.c_max

    @property
    def interior(self) -> int:
        return self.total - len(self.disks)

    def grades(self) -> dict[int, int]:
        return {-1: self.c_max, 0: self.c_saddle, 1: self.c_min}

    def to_json(self) -> dict:
        out = {"component": self.component, "genus": self.genus, "c_min": self.c_min,
               "c_saddle": self.c_saddle, "c_max": self.c_max, "interior": self.interior,
               "disks": {k: ("max" if v > 0 else "min") for k, v in sorted(self.disks.items())}}
        if self.positions is not None:
            out["positions"] = [[list(map(float, p)), int(i)] for p, i in self.positions]
        return out


def perfect_morse_inventory(g: int) -> CriticalInventory:
    """One minimum, 2g saddles, one maximum (explicit points for g <= 1)."""
    if g < 0:
        raise ValidationError("genus must be nonnegative")
    pos = None
    if g <= 1:
        from .models import closed_model
        pos = [(np.asarray(p), i) for p, i in closed_model(g, []).critical_points]
    return CriticalInventory(f"genus{g}", g, 1, 2 * g, 1, positions=pos)


def euler_identity_check(inv: CriticalInventory | Sequence[int], g: int) -> bool:
    """c_{-1} - c_0 + c_1 = 2 - 2g with at least one minimum and one maximum."""
    if isinstance(inv, CriticalInventory):
        c_min, c_sad, c_max = inv.c_min, inv.c_saddle, inv.c_max
    else:
        c_min, c_sad, c_max = inv
    return c_min >= 1 and c_max >= 1 and c_max - c_sad + c_min == 2 - 2 * g


def morse_inequality_bound(deg: int, g: int, c_extrema_min: int | None = None) -> int:
    """Lower bound 2c + 2g - 2 on the critical points of a closed-up component.

    c bounds the number of extrema from below and saddles are counted as
    c - chi, so c = deg gives 2 deg + 2g - 2.  By default c = max(deg, 2),
    since a closed surface carries at least a minimum and a maximum.  The
    value is monotone in c; for c = 1, g = 0 it is 0, weaker than the
    trivial bound 1 but still valid.
    """
    if deg < 1:
        raise ValidationError("degree must be at least 1")
    c = max(deg, 2) if c_extrema_min is None else int(c_extrema_min)
    return 2 * c + 2 * g - 2


# ---------------------------------------------------------------------------
# optimal construction
# ---------------------------------------------------------------------------

def _odd_cycle_component(g: BGraph) -> list[str] | None:
    """Vertices of a component that is a cycle of odd length (the obstruction)."""
    from .graph import connected_components
    for comp in connected_components(g):
        cs = set(comp)
        edges = [e for e in g.edges if e.a in cs]
        if all(g.degree(v) == 2 for v in comp) and len(edges) % 2 == 1:
            return sorted(comp)
    return None


@dataclass
class OptimalConstruction:
    order: int
    inventories: dict[str, CriticalInventory]
    collar: dict[str, str]  # circle id -> collar expression of F
    signs: object

    @property
    def expected_count(self) -> int:
        return sum(inv.interior for inv in self.inventories.values())

    def closed_models(self) -> dict:
        """Explicit closed models per component (genus <= 1, supported patterns)."""
        from .models import closed_model
        out = {}
        for v, inv in sorted(self.inventories.items()):
            out[v] = closed_model(inv.genus, sorted(inv.disks.items()))
        return out

    def numeric_count(self, grid_density: int = 24, tol: float = 1e-10, threads=None) -> dict:
        """Run the orbit finder on every closed model; interior orbits only."""
        per, nondeg, index_ok = {}, True, True
        for v, model in self.closed_models().items():
            res = find_fixed_points(model.system, grid_density, tol, threads=threads)
            inner = [o for o in res.orbits if o.location == model.system.name]
            per[v] = len(inner)
            nondeg &= all(o.nondegenerate for o in res.orbits) and not res.families
            inv = self.inventories[v]
            grades = [o.index for o in inner]
            want = {-1: inv.c_max, 0: inv.c_saddle, 1: inv.c_min}
            for lab, sg in inv.disks.items():
                want[-1 if sg > 0 else 1] -= 1
            index_ok &= all(grades.count(k) == n for k, n in want.items())
        return {"per_component": per, "total": sum(per.values()), "all_nondegenerate": bool(nondeg),
                "indices_consistent": bool(index_ok)}

    def to_json(self) -> dict:
        return {"order": self.order, "expected_count": self.expected_count,
                "collar": dict(sorted(self.collar.items())),
                "signs": self.signs.to_json() if hasattr(self.signs, "to_json") else None,
                "components": {v: inv.to_json() for v, inv in sorted(self.inventories.items())}}


def _collar_expression(m: int, sigma: int) -> str:
    base = "log|z|" if m == 1 else f"1/({m - 1} z^{m - 1})"
    if m == 1:
        return ("+" if sigma > 0 else "-") + base
    # G_m = -1/((m-1) z^(m-1))
    return ("-" if sigma > 0 else "+") + base


def optimal_b_function(s: BSurface, signs: SignAssignment | EdgeOrientation | None = None
                       ) -> OptimalConstruction:
    """b-function with the fewest critical points allowed by the sign data.

    Odd order: an edge 2-coloring; a + edge puts maxima in both adjacent
    disks (F = -G_m in the collar), a - edge minima.  Even order: a good
    orientation; F = sigma G_m with the maximum at the terminal vertex.
    """
    g = build_graph(s)
    orders = {c.order for c in s.circles}
    if len({o % 2 for o in orders}) > 1:
        raise ValidationError("circles of mixed parity are not supported")
    m = min(orders) if orders else 1
    odd = m % 2 == 1
    if odd:
        if signs is None:
            signs = edge_two_color(g)
        if signs is None:
            raise ConstructionUnavailable("no edge 2-coloring: a component is an odd cycle",
                                          _odd_cycle_component(g))
        if not isinstance(signs, SignAssignment) or signs.kind != "edge2coloring":
            raise ValidationError("odd order needs an edge 2-coloring")
        bad = check_edge_coloring(g, signs)
        if bad:
            raise ConstructionUnavailable(f"vertices {bad} lack one of the edge signs", bad)
    else:
        if signs is None:
            signs = good_orientation(g)
        if not isinstance(signs, EdgeOrientation):
            raise ValidationError("even order needs a good orientation")
        bad = check_good_orientation(g, signs)
        if bad:
            raise ConstructionUnavailable(f"vertices {bad} lack an in- or out-edge", bad)

    disks: dict[str, dict[str, int]] = {c.id: {} for c in s.components}
    collar = {}
    for circ in s.circles:
        if odd:
            sg = signs.signs[circ.id]
            disks[circ.neg_side][f"{circ.id}:neg"] = sg
            disks[circ.pos_side][f"{circ.id}:pos"] = sg
            collar[circ.id] = _collar_expression(circ.order, -sg)
        else:
            src, _dst = signs.pairs[circ.id]
            sigma = 1 if circ.pos_side == src else -1
            # sigma G_m tends to -sigma infinity on the pos side: min at the initial vertex
            disks[circ.pos_side][f"{circ.id}:pos"] = -sigma
            disks[circ.neg_side][f"{circ.id}:neg"] = sigma
            collar[circ.id] = _collar_expression(circ.order, sigma)

    inventories = {}
    for comp in s.components:
        d = disks[comp.id]
        p = sum(1 for v in d.values() if v > 0)
        q = len(d) - p
        gv = comp.genus
        if len(d) <= 1:
            inv = CriticalInventory(comp.id, gv, 1, 2 * gv, 1, d)
        else:
            if p == 0 or q == 0:
                raise ConstructionUnavailable(
                    f"component {comp.id}: degree {len(d)} needs a max-disk and a min-disk", comp.id)
            inv = CriticalInventory(comp.id, gv, q, p + q - 2 + 2 * gv, p, d)
        if not euler_identity_check(inv, gv):
            raise AssertionError(f"component {comp.id}: Euler identity fails")
        inventories[comp.id] = inv
    return OptimalConstruction(m, inventories, collar, signs)


# ---------------------------------------------------------------------------
# GF(2) chain complexes
# ---------------------------------------------------------------------------

def rank_gf2(M) -> int:
    A = (np.asarray(M, dtype=np.int64) % 2).astype(np.uint8)
    if A.size == 0:
        return 0
    A = A.copy()
    rows, cols = A.shape
    r = 0
    for c in range(cols):
        piv = np.nonzero(A[r:, c])[0]
        if piv.size == 0:
            continue
        p = r + piv[0]
        if p != r:
            A[[r, p]] = A[[p, r]]
        hit = np.nonzero(A[:, c])[0]
        hit = hit[hit != r]
        A[hit] ^= A[r]
        r += 1
        if r == rows:
            break
    return r


@dataclass
class ChainComplexGF2:
    """Generators in grades -1, 0, 1; ``boundary[k]`` maps grade k to grade k - 1.

    ``boundary[k]`` has shape (len(gens[k-1]), len(gens[k])).
    """

    gens: dict[int, list[str]]
    boundary: dict[int, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        for k in (-1, 0, 1):
            self.gens.setdefault(k, [])
        for k in (0, 1):
            shape = (len(self.gens[k - 1]), len(self.gens[k]))
            B = self.boundary.get(k)
            B = np.zeros(shape, dtype=np.int64) if B is None else np.asarray(B, dtype=np.int64) % 2
            if B.shape != shape:
                raise ValidationError(f"boundary[{k}] has shape {B.shape}, expected {shape}")
            self.boundary[k] = B

    def check(self):
        sq = (self.boundary[0] @ self.boundary[1]) % 2
        if np.any(sq):
            raise ComplexInvalid("boundary does not square to zero over GF(2)")

    def to_json(self) -> dict:
        return {"generators": {str(k): v for k, v in sorted(self.gens.items())},
                "boundary": {str(k): B.tolist() for k, B in sorted(self.boundary.items())}}


def homology_gf2(c: ChainComplexGF2) -> tuple[int, int, int]:
    """Betti numbers (b_{-1}, b_0, b_1) by elimination over GF(2)."""
    c.check()
    r0, r1 = rank_gf2(c.boundary[0]), rank_gf2(c.boundary[1])
    n = {k: len(c.gens[k]) for k in (-1, 0, 1)}
    return (n[-1] - r0, n[0] - r0 - r1, n[1] - r1)


def complex_from_inventory(inv: CriticalInventory, boundary=None) -> ChainComplexGF2:
    gens = {-1: [f"max{i}" for i in range(inv.c_max)], 0: [f"saddle{i}" for i in range(inv.c_saddle)],
            1: [f"min{i}" for i in range(inv.c_min)]}
    return ChainComplexGF2(gens, dict(boundary or {}))


def _flow_to_critical(system, x0, sign: float, crit: np.ndarray, start: int, t_max: float = 1e4,
                      capture: float = 1e-3) -> int:
    """Follow sign * grad F from x0 and return the index of the critical point reached."""
    targets = np.delete(np.arange(len(crit)), start)
    def rhs(t, x):
        X = system.canonical(x[None])
        B = system.tangent_basis(X)[0]
        return sign * (B @ system.gradient(X)[0])

    def near(t, x):
        d = system.distance(system.canonical(x[None]), crit[targets])
        return float(np.min(d)) - capture
    near.terminal = True

    sol = solve_ivp(rhs, (0.0, t_max), np.asarray(x0, float), events=near, rtol=1e-9, atol=1e-11)
    end = system.canonical(sol.y[:, -1][None])
    d = system.distance(end, crit[targets])
    j = int(np.argmin(d))
    if d[j] > 10 * capture:
        raise RuntimeError("gradient line did not settle at a critical point")
    return int(targets[j])


def gradient_complex(model, offset: float = 1e-4) -> ChainComplexGF2:
    """Boundary of a closed model by shooting the unstable and stable branches of each saddle."""
    pts = [np.asarray(p, float) for p, _ in model.critical_points]
    idx = [i for _, i in model.critical_points]
    crit = np.array(pts)
    sys = model.system
    names = [f"p{j}({['min', 'saddle', 'max'][i]})" for j, i in enumerate(idx)]
    gens = {1 - i: [] for i in (0, 1, 2)}
    where = {}
    for j, i in enumerate(idx):
        where[j] = (1 - i, len(gens[1 - i]))
        gens[1 - i].append(names[j])
    B0 = np.zeros((len(gens[-1]), len(gens[0])), dtype=np.int64)
    B1 = np.zeros((len(gens[0]), len(gens[1])), dtype=np.int64)
    for j, i in enumerate(idx):
        if i != 1:
            continue
        X = crit[j][None]
        Hs = sys.hessian(X)[0]
        ev, V = np.linalg.eigh(Hs)
        basis = sys.tangent_basis(X)[0]
        col = where[j][1]
        for lam, vec in zip(ev, V.T):
            direction = basis @ vec
            sign = 1.0 if lam > 0 else -1.0  # ascend along the unstable direction of grad F
            for pm in (1.0, -1.0):
                start = sys.canonical(X + pm * offset * direction[None])[0]
                end = _flow_to_critical(sys, start, sign, crit, j)
                grade, row = where[end]
                if sign > 0:
                    if grade != -1:
                        raise RuntimeError("ascending branch did not reach a maximum")
                    B0[row, col] += 1
                else:
                    if grade != 1:
                        raise RuntimeError("descending branch did not reach a minimum")
                    # a +grad line from that minimum enters this saddle
                    B1[col, row] += 1
    return ChainComplexGF2(gens, {0: B0 % 2, 1: B1 % 2})


# ---------------------------------------------------------------------------
# discrete Floer identity
# ---------------------------------------------------------------------------

@dataclass
class FloerGrid:
    """Map u(s, t) = (z, theta) into a collar, sampled on a rectangular grid."""

    s: np.ndarray
    t: np.ndarray
    z: np.ndarray  # shape (len(s), len(t))
    theta: np.ndarray
    k: np.ndarray  # k(s, t) on the same grid
    circle: CriticalCircle
    z_floor: float = 0.0

    def __post_init__(self):
        self.s = np.asarray(self.s, float)
        self.t = np.asarray(self.t, float)
        shape = (len(self.s), len(self.t))
        for name in ("z", "theta", "k"):
            arr = np.broadcast_to(np.asarray(getattr(self, name), float), shape)
            setattr(self, name, np.array(arr))
        a = np.abs(self.z)
        if np.any(a <= self.z_floor) or np.any(a >= self.circle.epsilon):
            raise DomainError("map leaves the collar (|z| outside (z_floor, eps))")

    @property
    def h_s(self) -> float:
        return float(self.s[1] - self.s[0])

    @property
    def h_t(self) -> float:
        return float(self.t[1] - self.t[0])


def collar_potential(circle: CriticalCircle) -> Callable:
    """log|z| for order 1, -1/((m-1) z^(m-1)) otherwise."""
    return lambda z: G_m(circle.order, z)


def discrete_floer_residual(grid: FloerGrid, f: Callable | None = None) -> tuple[float, np.ndarray]:
    """Five-point Laplacian of f(u) plus the central s-difference of k, on interior nodes."""
    if len(grid.s) < 3 or len(grid.t) < 3:
        raise ValidationError("need at least a 3 x 3 grid for full stencils")
    f = f or collar_potential(grid.circle)
    w = np.asarray(f(grid.z), float)
    hs, ht = grid.h_s, grid.h_t
    lap = ((w[2:, 1:-1] - 2 * w[1:-1, 1:-1] + w[:-2, 1:-1]) / hs ** 2
           + (w[1:-1, 2:] - 2 * w[1:-1, 1:-1] + w[1:-1, :-2]) / ht ** 2)
    ks = (grid.k[2:, 1:-1] - grid.k[:-2, 1:-1]) / (2 * hs)
    R = lap + ks
    return float(np.max(np.abs(R))), R


@dataclass
class MinPrincipleResult:
    applicable: bool
    holds: bool
    variant: str
    witness: tuple[int, int] | None = None
    residual: float | None = None

    def to_json(self) -> dict:
        return dict(self.__dict__)


def minimum_principle_check(grid: FloerGrid, threshold: float = 1e-6,
                            f: Callable | None = None, tol: float = 1e-12) -> MinPrincipleResult:
    """Extrema of f(u) sit on the grid boundary (min if k_s >= 0, max if k_s <= 0)."""
    res, _ = discrete_floer_residual(grid, f)
    if res >= threshold:
        return MinPrincipleResult(False, False, "not applicable", None, res)
    w = np.asarray((f or collar_potential(grid.circle))(grid.z), float)
    if np.ptp(w) <= tol * max(1.0, np.max(np.abs(w))):
        return MinPrincipleResult(True, True, "constant", None, res)
    ks = np.gradient(grid.k, grid.s, axis=0)
    variants = []
    if np.all(ks >= -tol):
        variants.append("min")
    if np.all(ks <= tol):
        variants.append("max")
    if not variants:
        return MinPrincipleResult(False, False, "mixed sign of dk/ds", None, res)
    inner = w[1:-1, 1:-1]
    edge = np.concatenate([w[0], w[-1], w[:, 0], w[:, -1]])
    for var in variants:
        if var == "min" and inner.size and inner.min() < edge.min() - tol:
            i, j = np.unravel_index(np.argmin(inner), inner.shape)
            return MinPrincipleResult(True, False, var, (int(i) + 1, int(j) + 1), res)
        if var == "max" and inner.size and inner.max() > edge.max() + tol:
            i, j = np.unravel_index(np.argmax(inner), inner.shape)
            return MinPrincipleResult(True, False, var, (int(i) + 1, int(j) + 1), res)
    return MinPrincipleResult(True, True, "/".join(variants), None, res)


def _invert_potential(m: int, w):
    w = np.asarray(w, float)
    if m == 1:
        return np.exp(w)
    if np.any(w >= 0):
        raise DomainError("potential value outside the positive half-collar")
    return (-1.0 / ((m - 1) * w)) ** (1.0 / (m - 1))


def exact_floer_family(circle: CriticalCircle, h: float, z0: float | None = None,
                       k0: float = 0.5, kappa: float = 0.5, amp: float = 1e-5,
                       lam: float = 2 * np.pi, s_range=(-0.1, 0.1), t_range=(0.0, 1.0),
                       theta0: float = 0.0) -> FloerGrid:
    """Exact solutions near the trivial cylinders, in flat coordinates w = f(z):

    w = w0 - kappa s^2/2 + A e^(lam s) cos(lam t),
    theta = theta0 + k0 t + A e^(lam s) sin(lam t),  k = k0 + kappa s.

    Valid when the collar form is exactly dz/z^m ^ dtheta.
    """
    m = circle.order
    z0 = circle.epsilon / 2 if z0 is None else z0
    w0 = float(G_m(m, z0))
    ns = int(round((s_range[1] - s_range[0]) / h)) + 1
    nt = int(round((t_range[1] - t_range[0]) / h)) + 1
    s = np.linspace(*s_range, ns)
    t = np.linspace(*t_range, nt)
    S, T = np.meshgrid(s, t, indexing="ij")
    e = amp * np.exp(lam * S)
    w = w0 - kappa * S ** 2 / 2 + e * np.cos(lam * T)
    th = theta0 + k0 * T + e * np.sin(lam * T)
    return FloerGrid(s, t, _invert_potential(m, w), th, k0 + kappa * S, circle)


def trivial_cylinder(circle: CriticalCircle, h: float, z0: float, k: float = 0.5,
                     s_range=(0.0, 0.4), t_range=(0.0, 1.0), theta0: float = 0.0) -> FloerGrid:
    """u(s, t) = (z0, theta0 + k t): a collar orbit repeated in s."""
    s = np.linspace(*s_range, int(round((s_range[1] - s_range[0]) / h)) + 1)
    t = np.linspace(*t_range, int(round((t_range[1] - t_range[0]) / h)) + 1)
    S, T = np.meshgrid(s, t, indexing="ij")
    return FloerGrid(s, t, np.full_like(S, z0), theta0 + k * T, np.full_like(S, k), circle)


def sheared_non_solution(circle: CriticalCircle, h: float, z0: float, slope: float = 0.1,
                         k: float = 0.5, s_range=(0.0, 0.4), t_range=(0.0, 1.0)) -> FloerGrid:
    """u(s, t) = (z0 + slope s, theta0): not a Floer solution."""
    s = np.linspace(*s_range, int(round((s_range[1] - s_range[0]) / h)) + 1)
    t = np.linspace(*t_range, int(round((t_range[1] - t_range[0]) / h)) + 1)
    S, T = np.meshgrid(s, t, indexing="ij")
    return FloerGrid(s, t, z0 + slope * S, np.zeros_like(S), np.full_like(S, k), circle)


def convergence_order(circle: CriticalCircle, hs=(2e-2, 1e-2, 5e-3), **kw) -> tuple[list, float]:
    """Residuals on the exact family and the least-squares order in h."""
    res = [discrete_floer_residual(exact_floer_family(circle, h, **kw))[0] for h in hs]
    slope = np.polyfit(np.log(hs), np.log(res), 1)[0]
    return res, float(slope)
