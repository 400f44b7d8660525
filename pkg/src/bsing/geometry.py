"""b^m-symplectic surfaces as collar charts plus component data.

Collar convention: coordinates (z, theta) in (-eps, eps) x [0, T) with

    omega = (sum_{i=1..m} a_i(theta) z^{-i}) dz ^ dtheta,

normal field z^m d/dz and Reeb field (1/a_m) d/dtheta once a_m is constant.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .trigpoly import TrigPoly, as_trigpolys


class ValidationError(ValueError):
    """Malformed or inconsistent input data."""


class DomainError(ValueError):
    """Evaluation outside the domain of a formula (e.g. on the critical set)."""


# ---------------------------------------------------------------------------
# periodic coefficient functions
# ---------------------------------------------------------------------------

class Reparametrized:
    """Coefficient a_i / |a_m| pulled back to the normalized angle.

    The normalized angle is ``phi(theta) = int_0^theta |a_m|``; evaluation
    inverts ``phi`` by safeguarded Newton.  Only evaluation and the first
    derivative are needed by the flows.
    """

    def __init__(self, coeff: TrigPoly, am: TrigPoly, sign: float):
        self.coeff = coeff
        self.am = am
        self.sign = sign
        self.period = float(abs(am.integral(0.0, am.period)))

    def invert(self, phi):
        return invert_primitive(self.am, self.sign, phi)

    def __call__(self, phi):
        th = self.invert(phi)
        return self.coeff(th) / np.abs(self.am(th))

    def is_constant(self, tol: float = 0.0) -> bool:
        return False

    def derivative(self) -> Callable:
        coeff, am, sign = self.coeff, self.am, self.sign

        def d(phi):
            th = invert_primitive(am, sign, phi)
            a = np.abs(am(th))
            da = sign * am.derivative()(th)
            num = coeff.derivative()(th) * a - coeff(th) * da
            return num / a ** 3

        return d


def invert_primitive(am: TrigPoly, sign: float, phi):
    """Solve int_0^theta |a_m| = phi for theta (monotone, vectorised)."""
    phi = np.asarray(phi, dtype=float)
    T = am.period
    W = abs(am.integral(0.0, T))
    wraps = np.floor(phi / W)
    r = phi - wraps * W
    th = r / W * T
    for _ in range(60):
        g = sign * am.primitive(th) - r
        step = g / (sign * am(th))
        th = np.clip(th - step, 0.0, T)
        if np.max(np.abs(step)) < 1e-15 * max(1.0, T):
            break
    return th + wraps * T


def _coeff_to_json(c):
    if isinstance(c, TrigPoly):
        return c.to_json()
    raise ValidationError("only trig-polynomial coefficients can be serialised")


# ---------------------------------------------------------------------------
# charts
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FlatTorusChart:
    periods: tuple[float, float] = (2 * np.pi, 2 * np.pi)
    kind: str = "flat_torus"


@dataclass(frozen=True)
class SphereChart:
    kind: str = "sphere"


@dataclass(frozen=True)
class CompactifiedChart:
    base: str = "sphere"
    kind: str = "compactified"


def chart_from_json(obj):
    if obj is None:
        return None
    kind = obj.get("kind")
    if kind == "flat_torus":
        return FlatTorusChart(tuple(float(p) for p in obj.get("periods", (2 * np.pi, 2 * np.pi))))
    if kind == "sphere":
        return SphereChart()
    if kind == "compactified":
        return CompactifiedChart(obj.get("base", "sphere"))
    raise ValidationError(f"unknown chart kind {kind!r}")


def chart_to_json(chart):
    if chart is None:
        return None
    if isinstance(chart, FlatTorusChart):
        return {"kind": chart.kind, "periods": list(chart.periods)}
    if isinstance(chart, CompactifiedChart):
        return {"kind": chart.kind, "base": chart.base}
    return {"kind": chart.kind}


# ---------------------------------------------------------------------------
# domain types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CriticalCircle:
    """One component of Z with its collar Laurent data."""

    id: str
    order: int
    theta_period: float
    laurent_coeffs: tuple
    epsilon: float
    neg_side: str
    pos_side: str
    raw_modular_weight: float | None = None

    def __post_init__(self):
        if int(self.order) != self.order or self.order < 1:
            raise ValidationError(f"circle {self.id}: order must be a positive integer")
        if not (self.epsilon > 0 and self.theta_period > 0):
            raise ValidationError(f"circle {self.id}: epsilon and theta_period must be positive")
        if len(self.laurent_coeffs) != self.order:
            raise ValidationError(
                f"circle {self.id}: expected {self.order} Laurent coefficients, "
                f"got {len(self.laurent_coeffs)}")
        am = self.laurent_coeffs[-1]
        th = np.linspace(0.0, self.theta_period, 2048, endpoint=False)
        vals = np.asarray(am(th))
        if np.any(vals == 0) or (vals.min() < 0 < vals.max()):
            raise ValidationError(f"circle {self.id}: a_m must not vanish")

    @property
    def m(self) -> int:
        return self.order

    @property
    def a_m(self):
        return self.laurent_coeffs[-1]

    def am_sign(self) -> float:
        return float(np.sign(self.a_m(0.0)))

    def am_is_constant(self) -> bool:
        return bool(self.a_m.is_constant())

    def am_constant(self) -> float:
        if not self.am_is_constant():
            raise ValidationError(f"circle {self.id}: a_m is not constant; normalize first")
        return float(self.a_m.const)

    def modular_weight(self) -> float:
        """|int_0^T a_m dtheta|, the reparametrisation-invariant period."""
        am = self.a_m
        if isinstance(am, TrigPoly):
            return abs(am.integral(0.0, self.theta_period))
        th = np.linspace(0.0, self.theta_period, 4097)
        return abs(np.trapezoid(am(th), th))

    # density c(z, theta) = sum a_i z^{m-i}, so omega = c dz/z^m ^ dtheta
    def density(self, z, theta):
        z = np.asarray(z, dtype=float)
        out = 0.0
        for i, a in enumerate(self.laurent_coeffs, start=1):
            out = out + a(theta) * z ** (self.m - i)
        return np.broadcast_to(out, np.broadcast(z, np.asarray(theta)).shape) * 1.0

    def density_dz(self, z, theta):
        z = np.asarray(z, dtype=float)
        out = 0.0 * z
        for i, a in enumerate(self.laurent_coeffs, start=1):
            p = self.m - i
            if p > 0:
                out = out + p * a(theta) * z ** (p - 1)
        return np.broadcast_to(out, np.broadcast(z, np.asarray(theta)).shape) * 1.0

    def density_dtheta(self, z, theta):
        z = np.asarray(z, dtype=float)
        out = 0.0 * z
        for i, a in enumerate(self.laurent_coeffs, start=1):
            if a.is_constant():
                continue
            out = out + a.derivative()(theta) * z ** (self.m - i)
        return np.broadcast_to(out, np.broadcast(z, np.asarray(theta)).shape) * 1.0

    def density_inf(self, n_z: int = 401, n_theta: int = 256, sign: float = 1.0) -> float:
        """inf of sign * c over |z| < eps (grid, closed interval)."""
        z = np.linspace(-self.epsilon, self.epsilon, n_z)
        th = np.linspace(0.0, self.theta_period, n_theta, endpoint=False)
        Z, TH = np.meshgrid(z, th, indexing="ij")
        return float(np.min(sign * self.density(Z, TH)))

    def to_json(self) -> dict:
        return {
            "id": self.id, "order": self.order, "theta_period": self.theta_period,
            "laurent_coeffs": [_coeff_to_json(a) for a in self.laurent_coeffs],
            "epsilon": self.epsilon, "neg_side": self.neg_side, "pos_side": self.pos_side,
        }

    @classmethod
    def from_json(cls, obj) -> "CriticalCircle":
        try:
            T = float(obj["theta_period"])
            coeffs = as_trigpolys(obj["laurent_coeffs"], T)
            return cls(id=str(obj["id"]), order=int(obj["order"]), theta_period=T,
                       laurent_coeffs=coeffs, epsilon=float(obj["epsilon"]),
                       neg_side=str(obj["neg_side"]), pos_side=str(obj["pos_side"]))
        except KeyError as exc:
            raise ValidationError(f"circle entry missing field {exc}") from None


@dataclass(frozen=True)
class SurfaceComponent:
    id: str
    genus: int
    boundary: tuple[tuple[str, str], ...] = ()
    chart: object = None
    interior_symplectic_area: float = 1.0

    def __post_init__(self):
        if int(self.genus) != self.genus or self.genus < 0:
            raise ValidationError(f"component {self.id}: genus must be a nonnegative integer")
        for cid, side in self.boundary:
            if side not in ("neg", "pos"):
                raise ValidationError(f"component {self.id}: side must be 'neg' or 'pos'")
        if not self.interior_symplectic_area > 0:
            raise ValidationError(f"component {self.id}: area must be positive")

    @property
    def degree(self) -> int:
        return len(self.boundary)

    def to_json(self) -> dict:
        return {"id": self.id, "genus": self.genus,
                "boundary": [[c, s] for c, s in self.boundary],
                "chart": chart_to_json(self.chart),
                "interior_symplectic_area": self.interior_symplectic_area}


@dataclass(frozen=True)
class BSurface:
    components: tuple[SurfaceComponent, ...]
    circles: tuple[CriticalCircle, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "components", tuple(self.components))
        object.__setattr__(self, "circles", tuple(self.circles))
        if not self.components:
            raise ValidationError("a surface needs at least one component")
        ids = [c.id for c in self.components]
        if len(set(ids)) != len(ids):
            raise ValidationError("duplicate component ids")
        cids = [c.id for c in self.circles]
        if len(set(cids)) != len(cids):
            raise ValidationError("duplicate circle ids")
        comp = {c.id: c for c in self.components}
        expected: dict[str, list] = {i: [] for i in ids}
        for circ in self.circles:
            for side, owner in (("neg", circ.neg_side), ("pos", circ.pos_side)):
                if owner not in comp:
                    raise ValidationError(
                        f"circle {circ.id}: {side} side references unknown component {owner!r}")
                expected[owner].append((circ.id, side))
        for c in self.components:
            if sorted(c.boundary) != sorted(expected[c.id]):
                raise ValidationError(
                    f"component {c.id}: boundary {sorted(c.boundary)} does not match "
                    f"circle side references {sorted(expected[c.id])}")

    @classmethod
    def assemble(cls, components: Sequence[SurfaceComponent],
                 circles: Sequence[CriticalCircle]) -> "BSurface":
        """Fill every component's boundary list from the circles' side fields."""
        bnd: dict[str, list] = {c.id: [] for c in components}
        for circ in circles:
            for side, owner in (("neg", circ.neg_side), ("pos", circ.pos_side)):
                if owner not in bnd:
                    raise ValidationError(
                        f"circle {circ.id}: {side} side references unknown component {owner!r}")
                bnd[owner].append((circ.id, side))
        comps = [replace(c, boundary=tuple(bnd[c.id])) for c in components]
        return cls(tuple(comps), tuple(circles))

    def component(self, cid: str) -> SurfaceComponent:
        for c in self.components:
            if c.id == cid:
                return c
        raise KeyError(cid)

    def circle(self, cid: str) -> CriticalCircle:
        for c in self.circles:
            if c.id == cid:
                return c
        raise KeyError(cid)

    def to_json(self) -> dict:
        return {"components": [c.to_json() for c in self.components],
                "circles": [c.to_json() for c in self.circles]}

    @classmethod
    def from_json(cls, obj) -> "BSurface":
        if not isinstance(obj, dict) or "components" not in obj:
            raise ValidationError("surface JSON needs a 'components' array")
        circles = [CriticalCircle.from_json(c) for c in obj.get("circles", [])]
        comps = []
        derive = False
        for c in obj["components"]:
            try:
                bnd = c.get("boundary")
                derive = derive or bnd is None
                comps.append(SurfaceComponent(
                    id=str(c["id"]), genus=int(c.get("genus", 0)),
                    boundary=tuple((str(a), str(b)) for a, b in (bnd or ())),
                    chart=chart_from_json(c.get("chart")),
                    interior_symplectic_area=float(c.get("interior_symplectic_area", 1.0))))
            except KeyError as exc:
                raise ValidationError(f"component entry missing field {exc}") from None
        if derive:
            return cls.assemble(comps, circles)
        return cls(tuple(comps), tuple(circles))

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------

def eval_collar_form(circle: CriticalCircle, z, theta):
    """Coefficient c with omega = c dz ^ dtheta, c = sum a_i(theta) z^{-i}."""
    z = np.asarray(z, dtype=float)
    if np.any(z == 0):
        raise DomainError("evaluation on critical set")
    if np.any(np.abs(z) >= circle.epsilon):
        raise DomainError(f"|z| must be below the collar width {circle.epsilon}")
    out = 0.0
    for i, a in enumerate(circle.laurent_coeffs, start=1):
        out = out + a(theta) * z ** (-i)
    out = np.broadcast_to(out, np.broadcast(z, np.asarray(theta)).shape) * 1.0
    return out if out.ndim else float(out)


def normalize_collar(circle: CriticalCircle) -> CriticalCircle:
    """Reparametrise theta so that a_m is constant.

    A constant a_m is left alone.  Otherwise the new angle is
    int_0^theta |a_m|, a_m becomes sign(a_m) and the new period is the modular
    weight; the other coefficients become a_i / |a_m| in the new angle.
    """
    if circle.am_is_constant():
        if circle.raw_modular_weight is None:
            return replace(circle, raw_modular_weight=circle.modular_weight())
        return circle
    am = circle.a_m
    sign = circle.am_sign()
    W = circle.modular_weight()
    coeffs = []
    for a in circle.laurent_coeffs[:-1]:
        if a.is_constant() and a.const == 0.0:
            coeffs.append(TrigPoly.constant(0.0, W))
        else:
            coeffs.append(Reparametrized(a, am, sign))
    coeffs.append(TrigPoly.constant(sign, W))
    return CriticalCircle(id=circle.id, order=circle.order, theta_period=W,
                          laurent_coeffs=tuple(coeffs), epsilon=circle.epsilon,
                          neg_side=circle.neg_side, pos_side=circle.pos_side,
                          raw_modular_weight=W)


def normalized_angle(circle: CriticalCircle, theta):
    """Map a raw angle to the angle used by :func:`normalize_collar`."""
    if circle.am_is_constant():
        return np.asarray(theta, dtype=float)
    return circle.am_sign() * circle.a_m.primitive(theta)


def build_graph(surface: BSurface):
    """Vertices = components (with genus), edges = circles (loops allowed)."""
    from .graph import BGraph, Edge, Vertex

    comp_ids = {c.id for c in surface.components}
    for circ in surface.circles:
        for owner in (circ.neg_side, circ.pos_side):
            if owner not in comp_ids:
                raise ValidationError(f"circle {circ.id}: dangling side reference {owner!r}")
    verts = tuple(Vertex(c.id, c.genus) for c in surface.components)
    edges = tuple(Edge(c.id, c.neg_side, c.pos_side) for c in surface.circles)
    return BGraph(verts, edges)


def load_surface(path) -> BSurface:
    with open(path) as fh:
        return BSurface.from_json(json.load(fh))
