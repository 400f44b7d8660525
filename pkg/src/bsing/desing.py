"""Desingularization and singularization of forms and Hamiltonians.

Collar replacements:

* ``f_eps`` (even order n): odd, increasing, equal to -1/((n-1) x^(n-1)) +- 2/eps^(n-1)
  outside [-eps, eps], so that df_eps = dz/z^n there.
* ``g_eps`` (surfaces, any order m): G_m(x) for x > eps/2 and the reflected
  profile (derivative 1/|x|^m) minus a constant for x < -eps/2.
* ``s_eps`` (singularization): G_m near 0, z for z > 2 eps/3, (-1)^m z for z < -2 eps/3.

All interiors are filled by one monotone Hermite family (C^1 at the joins).
"""
from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .dynamics import G_m
from .geometry import BSurface, CriticalCircle, DomainError, ValidationError, build_graph
from .graph import SignAssignment, is_acyclic
from .hamiltonian import AdmissibleHamiltonian, disk_admissible, is_unimodular
from .trigpoly import SeparableFn, TrigPoly


class ConstructionError(RuntimeError):
    """A construction failed one of its runtime certificates."""


# ---------------------------------------------------------------------------
# piecewise functions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Piece:
    """One closed-form piece on [lo, hi).

    kinds: ``log`` a log|x| + b; ``power`` c x^(-p) + b; ``linear`` a x + b;
    ``hermite`` y0 + dy Q((x - x0)/(x1 - x0)) with
    Q(u) = a u + b0 (1 - (1-u)^(n+1))/(n+1) + b1 u^(n+1)/(n+1).
    """

    lo: float
    hi: float
    kind: str
    params: dict

    def value(self, x):
        p = self.params
        if self.kind == "log":
            return p["a"] * np.log(np.abs(x)) + p["b"]
        if self.kind == "power":
            return p["c"] * x ** (-p["p"]) + p["b"]
        if self.kind == "linear":
            return p["a"] * x + p["b"]
        if self.kind == "hermite":
            u = (x - p["x0"]) / (p["x1"] - p["x0"])
            n = p["n"]
            Q = p["qa"] * u + p["qb0"] * (1 - (1 - u) ** (n + 1)) / (n + 1) + p["qb1"] * u ** (n + 1) / (n + 1)
            return p["y0"] + p["dy"] * Q
        raise ValueError(self.kind)

    def deriv(self, x):
        p = self.params
        if self.kind == "log":
            return p["a"] / x
        if self.kind == "power":
            return -p["p"] * p["c"] * x ** (-p["p"] - 1)
        if self.kind == "linear":
            return p["a"] + 0.0 * x
        if self.kind == "hermite":
            L = p["x1"] - p["x0"]
            u = (x - p["x0"]) / L
            n = p["n"]
            dQ = p["qa"] + p["qb0"] * (1 - u) ** n + p["qb1"] * u ** n
            return p["dy"] * dQ / L
        raise ValueError(self.kind)

    def to_json(self) -> dict:
        return {"lo": _jnum(self.lo), "hi": _jnum(self.hi), "kind": self.kind,
                "params": {k: float(v) for k, v in self.params.items()}}


def _jnum(x: float):
    return x if math.isfinite(x) else ("inf" if x > 0 else "-inf")


def monotone_hermite(x0, x1, y0, y1, d0, d1, n_extra: int = 60) -> Piece:
    """Monotone C^1 interpolant with prescribed end values and slopes.

    Q' = a + (alpha - a)(1-u)^n + (beta - a) u^n with normalised slopes
    alpha, beta; n is the least degree with a > 0, confirmed on a 2001-point grid.
    """
    L = x1 - x0
    dy = y1 - y0
    if not (L > 0 and dy != 0):
        raise ConstructionError("degenerate interpolation data")
    alpha, beta = d0 * L / dy, d1 * L / dy
    if not (alpha > 0 and beta > 0):
        raise ConstructionError(
            f"end slopes ({d0:.4g}, {d1:.4g}) inconsistent with a monotone rise of {dy:.4g}")
    u = np.linspace(0.0, 1.0, 2001)
    # a > 0 needs n > alpha + beta - 1; the vertices a, alpha, beta bound Q' below
    n_min = max(2, int(math.floor(alpha + beta - 1)) + 1)
    for n in range(n_min, n_min + n_extra):
        a = (n + 1 - alpha - beta) / (n - 1)
        if a <= 0:
            continue
        dQ = a + (alpha - a) * (1 - u) ** n + (beta - a) * u ** n
        if np.all(dQ > 0):
            return Piece(x0, x1, "hermite", dict(x0=x0, x1=x1, y0=y0, dy=dy, n=n, qa=a,
                                                 qb0=alpha - a, qb1=beta - a))
    raise ConstructionError("no monotone interpolant up to the maximal degree")


@dataclass(frozen=True)
class PiecewiseSmoothFn:
    pieces: tuple[Piece, ...]
    name: str = ""
    singular: tuple[float, ...] = ()

    @property
    def breakpoints(self) -> list[float]:
        pts = []
        for a, b in zip(self.pieces[:-1], self.pieces[1:]):
            if a.hi == b.lo and a.hi not in self.singular:
                pts.append(a.hi)
        return pts

    def _eval(self, x, which):
        x = np.asarray(x, dtype=float)
        if any(np.any(x == s) for s in self.singular):
            raise DomainError("evaluation on critical set")
        out = np.full(x.shape, np.nan)
        for i, pc in enumerate(self.pieces):
            last = i == len(self.pieces) - 1
            mask = (x >= pc.lo) & ((x <= pc.hi) if last else (x < pc.hi))
            if np.any(mask):
                with np.errstate(divide="ignore", invalid="ignore"):
                    out[mask] = (pc.value if which == 0 else pc.deriv)(x[mask])
        if np.any(np.isnan(out)):
            raise DomainError(f"{self.name}: argument outside the pieces")
        return out if out.ndim else float(out)

    def __call__(self, x):
        return self._eval(x, 0)

    def derivative(self, x):
        return self._eval(x, 1)

    def c1_defect(self) -> float:
        """max jump in value or first derivative across the breakpoints."""
        worst = 0.0
        for a, b in zip(self.pieces[:-1], self.pieces[1:]):
            if a.hi != b.lo or a.hi in self.singular:
                continue
            x = a.hi
            scale = max(1.0, abs(float(a.value(x))), abs(float(a.deriv(x))))
            worst = max(worst, abs(float(a.value(x) - b.value(x))) / scale,
                        abs(float(a.deriv(x) - b.deriv(x))) / scale)
        return worst

    def derivative_sign_ok(self, lo: float, hi: float, sign: float = 1.0, n: int = 10_000) -> bool:
        x = np.linspace(lo, hi, n)
        x = x[np.all([x != s for s in self.singular], axis=0)] if self.singular else x
        return bool(np.all(sign * np.asarray(self.derivative(x)) > 0))

    def to_json(self) -> dict:
        return {"name": self.name, "breakpoints": self.breakpoints,
                "singular": list(self.singular), "pieces": [p.to_json() for p in self.pieces],
                "c1_defect": self.c1_defect()}


def _profile_piece(m: int, lo: float, hi: float, b: float = 0.0, reflect: bool = False) -> Piece:
    """G_m (or its reflection with derivative 1/|x|^m) plus b."""
    if m == 1:
        return Piece(lo, hi, "log", {"a": -1.0 if reflect else 1.0, "b": b})
    c = -1.0 / (m - 1)
    if reflect:
        c = (-1.0) ** (m - 1) / (m - 1)
    return Piece(lo, hi, "power", {"c": c, "p": m - 1, "b": b})


def f_eps(order: int, eps: float) -> PiecewiseSmoothFn:
    """Odd increasing replacement for G_order with f' = x^(-order) off [-eps, eps]."""
    if order < 2 or order % 2:
        raise ValidationError("f_eps needs an even order >= 2")
    if not eps > 0:
        raise ValidationError("eps must be positive")
    p = order - 1
    shift = 2.0 / eps ** p
    left = Piece(-math.inf, -eps, "power", {"c": -1.0 / p, "p": p, "b": -shift})
    right = Piece(eps, math.inf, "power", {"c": -1.0 / p, "p": p, "b": shift})
    mid = monotone_hermite(-eps, eps, float(left.value(-eps)), float(right.value(eps)),
                           eps ** -order, eps ** -order)
    mid = Piece(-eps, eps, mid.kind, mid.params)
    fn = PiecewiseSmoothFn((left, mid, right), f"f_eps(order={order}, eps={eps})")
    if not fn.derivative_sign_ok(-eps, eps):
        raise ConstructionError("f_eps derivative not positive on [-eps, eps]")
    return fn


def surface_constant(eps: float, m: int) -> float:
    """Offset C(eps, m) with g_eps = (-1)^m G_m - C on the negative side."""
    if m == 1:
        return eps - 2.0 * math.log(eps / 2.0)
    return 2.0 ** (m + 1) / ((m - 1) * eps ** (m - 1))


def g_eps(m: int, eps: float) -> PiecewiseSmoothFn:
    """Increasing collar function: G_m for x > eps/2, reflected G_m - C for x < -eps/2."""
    if m < 1:
        raise ValidationError("order must be >= 1")
    if not eps > 0:
        raise ValidationError("eps must be positive")
    h = eps / 2
    right = _profile_piece(m, h, math.inf)
    left = _profile_piece(m, -math.inf, -h, b=-surface_constant(eps, m), reflect=True)
    slope = h ** -m
    mid = monotone_hermite(-h, h, float(left.value(-h)), float(right.value(h)), slope, slope)
    fn = PiecewiseSmoothFn((left, mid, right), f"g_eps(m={m}, eps={eps})")
    if not fn.derivative_sign_ok(-eps, eps):
        raise ConstructionError("g_eps derivative not positive on (-eps, eps)")
    return fn


def s_eps(m: int, eps: float) -> PiecewiseSmoothFn:
    """b^m-singular collar function used to singularize a smooth surface."""
    if m < 1 or not eps > 0:
        raise ValidationError("need m >= 1 and eps > 0")
    sg = (-1.0) ** m
    a, b = eps / 2, 2 * eps / 3
    G = lambda x: float(G_m(m, x))
    dG = lambda x: float(x) ** -m
    far_l = Piece(-math.inf, -b, "linear", {"a": sg, "b": 0.0})
    far_r = Piece(b, math.inf, "linear", {"a": 1.0, "b": 0.0})
    near_l = _profile_piece(m, -a, 0.0)
    near_r = _profile_piece(m, 0.0, a)
    mid_r = monotone_hermite(a, b, G(a), b, dG(a), 1.0)
    # negative side: s is monotone with derivative sign (-1)^m; interpolate sg * s
    ml = monotone_hermite(-b, -a, sg * (sg * -b), sg * G(-a), sg * sg, sg * dG(-a))
    p = dict(ml.params)
    p["y0"], p["dy"] = sg * p["y0"], sg * p["dy"]
    mid_l = Piece(-b, -a, "hermite", p)
    fn = PiecewiseSmoothFn((far_l, mid_l, near_l, near_r, mid_r, far_r),
                           f"s_eps(m={m}, eps={eps})", singular=(0.0,))
    if not (fn.derivative_sign_ok(1e-9, eps) and fn.derivative_sign_ok(-eps, -1e-9, sg)):
        raise ConstructionError("s_eps derivative vanishes on the punctured collar")
    return fn


# ---------------------------------------------------------------------------
# forms
# ---------------------------------------------------------------------------

@dataclass
class DesingularizedForm:
    circle: CriticalCircle
    fn: PiecewiseSmoothFn
    min_abs_coefficient: float

    def coefficient(self, z, theta):
        """Coefficient of dz ^ dtheta: fn'(z) * sum a_i z^(m-i)."""
        return self.fn.derivative(z) * self.circle.density(z, theta)


def desingularize_form(circle: CriticalCircle, fn: PiecewiseSmoothFn,
                       n_z: int = 2001, n_theta: int = 64) -> DesingularizedForm:
    """Replace dz/z^m by d fn in the collar, certifying nondegeneracy on a grid."""
    z = np.linspace(-circle.epsilon, circle.epsilon, n_z)
    th = np.linspace(0.0, circle.theta_period, n_theta, endpoint=False)
    Z, TH = np.meshgrid(z, th, indexing="ij")
    coef = fn.derivative(Z) * circle.density(Z, TH)
    if np.any(coef == 0) or (coef.min() < 0 < coef.max()):
        raise ConstructionError(f"circle {circle.id}: desingularized form degenerates")
    return DesingularizedForm(circle, fn, float(np.min(np.abs(coef))))


# ---------------------------------------------------------------------------
# Hamiltonians
# ---------------------------------------------------------------------------

def _time_part(h: SeparableFn) -> TrigPoly:
    """The time-only part sum p_j(t) mean(q_j) of a theta-independent term."""
    out = TrigPoly.constant(0.0, 1.0)
    for p, q in h.terms:
        out = out + p * q.const
    return out


@dataclass
class CollarPiece:
    k: TrigPoly
    const: TrigPoly
    mu: int  # orientation multiplier of the collar relative to omega
    h: SeparableFn


@dataclass
class DesingularizedHamiltonian:
    """H~ = mu_v H + offset_v on components, mu_i (k_i fn(z) + h_i) + const_i on collars."""

    path: str  # "f" (even order) or "g" (surface)
    eps: float
    fns: dict[str, PiecewiseSmoothFn]
    collars: dict[str, CollarPiece]
    components: dict[str, tuple[int, TrigPoly]]
    root: str | None = None

    def collar_value(self, cid: str, t, z, theta):
        c = self.collars[cid]
        return c.mu * (c.k(t) * self.fns[cid](z) + c.h.value(t, theta)) + c.const(t)

    def collar_dz(self, cid: str, t, z):
        c = self.collars[cid]
        return c.mu * c.k(t) * self.fns[cid].derivative(z)

    def component_value(self, vid: str, t, H_value):
        mu, off = self.components[vid]
        return mu * H_value + off(t)

    def to_json(self) -> dict:
        return {
            "path": self.path, "eps": self.eps, "root": self.root,
            "collars": {cid: {"k": c.k.to_json(), "const": c.const.to_json(), "mu": c.mu,
                              "fn": self.fns[cid].to_json()} for cid, c in sorted(self.collars.items())},
            "components": {v: {"mu": mu, "offset": off.to_json()}
                           for v, (mu, off) in sorted(self.components.items())},
        }


def _check_collar_terms(H: AdmissibleHamiltonian, s: BSurface):
    for c in s.circles:
        if not H.collar_h(c.id).is_theta_independent():
            raise ValidationError(f"circle {c.id}: collar term depends on theta")


def _propagate(H: AdmissibleHamiltonian, s: BSurface, eps: float, path: str, root: str,
               tol: float = 1e-9) -> DesingularizedHamiltonian:
    """Breadth-first offset propagation; non-tree circles are checked for consistency."""
    g = build_graph(s)
    fns, collars = {}, {}
    comps: dict[str, tuple[int, TrigPoly]] = {root: (1, TrigPoly.constant(0.0))}
    adj = g.adjacency()
    queue = deque([root])
    done_edges = set()
    zero = TrigPoly.constant(0.0)

    def jump(circ: CriticalCircle, k: TrigPoly, mu: int):
        """(offset on pos side, offset on neg side) relative to const, mu_neg."""
        m = circ.order
        if path == "f":
            q = 2.0 / eps ** (m - 1)
            return k * q, k * (-q), mu
        p = _time_part(H.collar_h(circ.id))
        sg = (-1) ** m
        return zero, (k * (-surface_constant(eps, m)) + p * (1 - sg)) * float(mu), sg * mu

    while queue:
        v = queue.popleft()
        mu_v, off_v = comps[v]
        for cid, _w in sorted(adj[v]):
            if cid in done_edges:
                continue
            done_edges.add(cid)
            circ = s.circle(cid)
            k = H.k(cid)
            fns[cid] = f_eps(circ.order, eps) if path == "f" else g_eps(circ.order, eps)
            from_pos = circ.pos_side == v
            if path == "f":
                mu_i = 1
            else:
                mu_i = mu_v if from_pos else (-1) ** circ.order * mu_v
            jp, jn, mu_neg = jump(circ, k, mu_i)
            const = off_v - (jp if from_pos else jn)
            collars[cid] = CollarPiece(k, const, mu_i, H.collar_h(cid))
            new = [(circ.pos_side, (mu_i, const + jp)), (circ.neg_side, (mu_neg, const + jn))]
            for side, val in new:
                if side in comps:
                    mu_old, off_old = comps[side]
                    diff = off_old - val[1]
                    if mu_old != val[0] or not diff.is_constant(tol) or abs(diff.const) > tol:
                        raise ConstructionError(
                            f"inconsistent offsets around circle {cid}: the cycle through "
                            f"{side!r} does not close")
                else:
                    comps[side] = val
                    queue.append(side)
    for c in s.components:
        comps.setdefault(c.id, (1, TrigPoly.constant(0.0)))
    return DesingularizedHamiltonian(path, eps, fns, collars, comps, root)


def _path_for(s: BSurface, path: str | None) -> str:
    orders = {c.order for c in s.circles}
    if path is None:
        path = "f" if orders and all(o % 2 == 0 for o in orders) else "g"
    if path == "f" and any(o % 2 for o in orders):
        raise ValidationError("f_eps path needs even orders; use the surface (g_eps) path")
    if path not in ("f", "g"):
        raise ValidationError(f"unknown desingularization path {path!r}")
    return path


def desingularize_hamiltonian_unimodular(H: AdmissibleHamiltonian, s: BSurface,
                                         coloring: SignAssignment | None, eps: float,
                                         path: str | None = None) -> DesingularizedHamiltonian:
    """Global smooth H~ from a unimodular H (offsets +-2k/eps^(n-1), or -k C on the surface path)."""
    if not is_unimodular(H, s, coloring):
        raise ValidationError("Hamiltonian is not unimodular; use desingularize_hamiltonian_acyclic "
                              "on acyclic surfaces")
    _check_collar_terms(H, s)
    path = _path_for(s, path)
    plus = sorted(v for v, sg in coloring.signs.items() if sg > 0)
    root = plus[0] if plus else s.components[0].id
    return _propagate(H, s, eps, path, root)


def desingularize_hamiltonian_acyclic(H: AdmissibleHamiltonian, s: BSurface, eps: float,
                                      root: str | None = None,
                                      path: str | None = None) -> DesingularizedHamiltonian:
    """Tree traversal: each crossed circle shifts the offset by -+4k/eps^(n-1) (or the surface constant)."""
    if not is_acyclic(build_graph(s)):
        raise ValidationError("graph not acyclic")
    _check_collar_terms(H, s)
    path = _path_for(s, path)
    root = root or sorted(c.id for c in s.components)[0]
    return _propagate(H, s, eps, path, root)


def continuity_defect(D: DesingularizedHamiltonian, H: AdmissibleHamiltonian, s: BSurface,
                      times: Sequence[float] = (0.0, 0.25, 0.5, 0.75)) -> dict:
    """Value and z-derivative mismatch at z = +-eps between collar and component formulas."""
    worst_v, worst_d = 0.0, 0.0
    for circ in s.circles:
        m = circ.order
        k = H.k(circ.id)
        hc = H.collar_h(circ.id)
        for t in times:
            for side, z in (("pos", D.eps), ("neg", -D.eps)):
                vid = circ.pos_side if side == "pos" else circ.neg_side
                Hval = float(k(t) * G_m(m, z) + hc.value(t, 0.0))
                inner = float(D.collar_value(circ.id, t, z, 0.0))
                outer = float(D.component_value(vid, t, Hval))
                worst_v = max(worst_v, abs(inner - outer) / max(1.0, abs(outer)))
                # derivatives from each side of the join (the fn pieces switch exactly at +-eps)
                d_in = float(D.collar_dz(circ.id, t, z))
                mu = D.components[vid][0]
                d_out = mu * float(k(t)) * float(z) ** (-m)
                scale = max(1.0, abs(d_out))
                worst_d = max(worst_d, abs(float(d_in) - float(d_out)) / scale)
    return {"value": worst_v, "derivative": worst_d}


# ---------------------------------------------------------------------------
# field agreement
# ---------------------------------------------------------------------------

def planar_field(rho, Hx, Hy):
    """X with i_X (rho dx ^ dy) = -dH: (-H_y / rho, H_x / rho)."""
    return np.stack([-Hy / rho, Hx / rho], axis=-1)


def verify_field_agreement(field_a: Callable, field_b: Callable, grid, times=(0.0, 0.3, 0.7),
                           mask=None) -> float:
    """sup over grid points and sample times of |X_a - X_b| (Euclidean chart metric)."""
    P = np.asarray(grid, dtype=float)
    if mask is not None:
        P = P[np.asarray(mask(P), dtype=bool)]
    worst = 0.0
    for t in times:
        d = np.linalg.norm(np.asarray(field_a(t, P)) - np.asarray(field_b(t, P)), axis=-1)
        worst = max(worst, float(np.max(d)) if d.size else 0.0)
    return worst


def sin_chart_field(phi_prime: Callable, k: TrigPoly, phi: Callable | None = None,
                    extra: Callable | None = None):
    """Field of H = k(t) phi(sin x) (+ extra) for omega = phi'(sin x) dx ^ dy on the torus.

    ``extra(t, x, y)`` returns (h, h_x, h_y) for an additional interior term.
    """
    def field(t, P):
        x, y = P[:, 0], P[:, 1]
        rho = phi_prime(np.sin(x))
        Hx = k(t) * rho * np.cos(x)
        Hy = np.zeros_like(x)
        if extra is not None:
            _, hx, hy = extra(t, x, y)
            Hx, Hy = Hx + hx, Hy + hy
        return planar_field(rho, Hx, Hy)
    return field


def collar_field(circle: CriticalCircle, k: TrigPoly, dphi: Callable | None = None,
                 h: SeparableFn | None = None):
    """Collar field of k G_m (dphi = None, singular form) or of k phi with omega = phi' c dz ^ dtheta."""
    h = h or SeparableFn.zero()
    m = circle.order

    def field(t, P):
        z, th = P[:, 0], P[:, 1]
        c = circle.density(z, th)
        dp = z ** (-float(m)) if dphi is None else dphi(z)
        rho = dp * c
        Hz = k(t) * dp
        Hth = h.d_theta(t, th)
        # i_X (rho dz ^ dtheta) = -dH
        return np.stack([-Hth / rho, Hz / rho], axis=-1)
    return field


def desingularized_collar_field(D: DesingularizedHamiltonian, circle: CriticalCircle):
    """Field of H~ for omega~ = mu fn'(z) c dz ^ dtheta, read off the stored collar data."""
    c_data = D.collars[circle.id]
    fn = D.fns[circle.id]

    def field(t, P):
        z, th = P[:, 0], P[:, 1]
        rho = c_data.mu * fn.derivative(z) * circle.density(z, th)
        Hz = D.collar_dz(circle.id, t, z)
        Hth = c_data.mu * c_data.h.d_theta(t, th)
        return np.stack([-Hth / rho, Hz / rho], axis=-1)
    return field


# ---------------------------------------------------------------------------
# compactification and singularization
# ---------------------------------------------------------------------------

@dataclass
class CompactifiedComponent:
    component: str
    genus: int
    model: object  # models.ClosedModel
    disk_fixed_points: int
    expected_interior: int

    def to_json(self) -> dict:
        return {"component": self.component, "genus": self.genus,
                "disks": [lab for lab, _, _ in self.model.disks],
                "disk_fixed_points": self.disk_fixed_points,
                "expected_interior": self.expected_interior}


def compactify_component(s: BSurface, component: str, H: AdmissibleHamiltonian | None = None,
                         disk_signs: dict[str, int] | None = None) -> CompactifiedComponent:
    """Glue one disk per boundary circle and return an explicit closed model.

    Each glued disk carries exactly one (elliptic) fixed point; with
    alternating signs the interior count is 2g + |deg - 2| for deg >= 1.
    """
    from .models import closed_model

    comp = s.component(component)
    if comp.genus > 1:
        raise ValidationError("explicit compactification needs genus <= 1")
    if H is not None:
        for cid, _ in comp.boundary:
            circ = s.circle(cid)
            from .geometry import normalize_collar
            am = abs(normalize_collar(circ).am_constant())
            k = H.k(cid)
            if k.grid_extrema()[0] <= 0:
                k = -k
            if not disk_admissible(k, am * 2 * np.pi / normalize_collar(circ).theta_period):
                raise ValidationError(f"circle {cid}: profile is not disk-admissible")
    signs = []
    for i, (cid, side) in enumerate(sorted(comp.boundary)):
        label = f"{cid}:{side}"
        sg = (disk_signs or {}).get(label, (disk_signs or {}).get(cid, 1 if i % 2 == 0 else -1))
        signs.append((label, sg))
    model = closed_model(comp.genus, signs)
    return CompactifiedComponent(component, comp.genus, model, len(model.disks),
                                 model.expected_interior)


@dataclass
class SingularizedModel:
    """b^m model on the flat torus obtained from omega~ = dx ^ dy and H~ = sin x."""

    order: int
    eps: float
    s_fn: PiecewiseSmoothFn
    surface: BSurface
    hamiltonian: AdmissibleHamiltonian

    def singular_field(self, t, P):
        x = P[:, 0]
        z = np.sin(x)
        rho = self.s_fn.derivative(z)
        Hx = rho * np.cos(x)
        return planar_field(rho, Hx, np.zeros_like(x))


def smooth_torus_field(t, P):
    """Field of H~ = sin x for dx ^ dy: cos x d/dy."""
    x = P[:, 0]
    return planar_field(np.ones_like(x), np.cos(x), np.zeros_like(x))


def singularize_surface(order: int, eps: float, collar_h=None) -> SingularizedModel:
    """Singularize (T^2, dx ^ dy) along {sin x = 0} with H~ = sin x.

    ``collar_h`` replaces H~ near the curves; anything other than the defining
    function z = sin x is rejected, since s_eps must act on H~ = z there.
    """
    if collar_h is not None:
        probe = np.linspace(-eps, eps, 11)
        if not np.allclose(np.asarray(collar_h(probe), dtype=float), probe, atol=1e-12):
            raise ValidationError("smooth Hamiltonian must equal the defining function z near the curves")
    s_fn = s_eps(order, eps)
    from .models import two_annuli_torus
    surf = two_annuli_torus(order, eps / 2)
    k = TrigPoly.constant(1.0)
    H = AdmissibleHamiltonian({c.id: k for c in surf.circles})
    return SingularizedModel(order, eps, s_fn, surf, H)


def desingularize_singularized(model: SingularizedModel, eps_d: float):
    """Surface (g_eps) desingularization of a singularized torus: (rho~, field)."""
    if not eps_d <= model.eps / 2:
        raise ValidationError("desingularization width must not exceed half the singular collar")
    m = model.order
    g = g_eps(m, eps_d)
    sg = (-1.0) ** m
    C = surface_constant(eps_d, m)

    def rho_d(z):
        # |z| < eps_d: g'(z); elsewhere s'(z) on z > 0 and (-1)^m s'(z) for z < 0
        z = np.asarray(z, dtype=float)
        inner = np.abs(z) < eps_d
        gd = g.derivative(np.where(inner, z, 0.0))
        sd = model.s_fn.derivative(np.where(inner, 1.0, z))
        return np.where(inner, gd, np.where(z > 0, sd, sg * sd))

    def H_d(z):
        z = np.asarray(z, dtype=float)
        inner = np.abs(z) < eps_d
        gv = g(np.where(inner, z, 0.0))
        sv = model.s_fn(np.where(inner, 1.0, z))
        return np.where(inner, gv, np.where(z > 0, sv, sg * sv - C))

    def field(t, P):
        x = P[:, 0]
        z = np.sin(x)
        rho = rho_d(z)
        # d/dx H_d(sin x) = H_d'(z) cos x with H_d' = rho_d (same piecewise derivative)
        Hx = rho * np.cos(x)
        return planar_field(rho, Hx, np.zeros_like(x))

    return field, H_d, rho_d
