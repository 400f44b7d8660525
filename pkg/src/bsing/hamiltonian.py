"""Admissible b^m-Hamiltonians: collar profiles, admissibility, unimodularity."""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .geometry import BSurface, CriticalCircle, ValidationError, build_graph, normalize_collar
from .graph import SignAssignment
from .trigpoly import SeparableFn, TrigPoly


@dataclass(frozen=True)
class Fourier2D:
    """Autonomous chart function sum c cos(2 pi (nx x/Lx + ny y/Ly)) + s sin(...)."""

    terms: tuple[tuple[float, float, int, int], ...] = ()  # (c_cos, c_sin, nx, ny)
    periods: tuple[float, float] = (1.0, 1.0)
    const: float = 0.0

    @classmethod
    def from_json(cls, obj) -> "Fourier2D":
        terms = tuple((float(t.get("cos", 0.0)), float(t.get("sin", 0.0)),
                       int(t["nx"]), int(t["ny"])) for t in obj.get("terms", []))
        return cls(terms, tuple(float(p) for p in obj.get("periods", (1.0, 1.0))),
                   float(obj.get("const", 0.0)))

    def to_json(self) -> dict:
        return {"const": self.const, "periods": list(self.periods),
                "terms": [{"cos": c, "sin": s, "nx": nx, "ny": ny} for c, s, nx, ny in self.terms]}

    def _phase(self, x, y, nx, ny):
        return 2 * np.pi * (nx * np.asarray(x) / self.periods[0] + ny * np.asarray(y) / self.periods[1])

    def value(self, x, y):
        out = self.const + 0.0 * np.asarray(x) * np.asarray(y)
        for c, s, nx, ny in self.terms:
            p = self._phase(x, y, nx, ny)
            out = out + c * np.cos(p) + s * np.sin(p)
        return out

    def grad(self, x, y):
        gx = 0.0 * np.asarray(x) * np.asarray(y)
        gy = gx.copy()
        for c, s, nx, ny in self.terms:
            p = self._phase(x, y, nx, ny)
            d = -c * np.sin(p) + s * np.cos(p)
            gx = gx + d * 2 * np.pi * nx / self.periods[0]
            gy = gy + d * 2 * np.pi * ny / self.periods[1]
        return gx, gy

    def hess(self, x, y):
        hxx = 0.0 * np.asarray(x) * np.asarray(y)
        hxy = hxx.copy()
        hyy = hxx.copy()
        for c, s, nx, ny in self.terms:
            p = self._phase(x, y, nx, ny)
            d2 = -c * np.cos(p) - s * np.sin(p)
            wx = 2 * np.pi * nx / self.periods[0]
            wy = 2 * np.pi * ny / self.periods[1]
            hxx = hxx + d2 * wx * wx
            hxy = hxy + d2 * wx * wy
            hyy = hyy + d2 * wy * wy
        return hxx, hxy, hyy


@dataclass(frozen=True)
class AdmissibleHamiltonian:
    """Collar profiles k_i(t), collar interior terms and component terms.

    On the collar of circle i the Hamiltonian is k_i(t) log|z| (order 1) or
    -k_i(t) / ((m-1) z^(m-1)) (order m > 1), plus ``collar_terms[i]``.
    """

    per_circle: dict[str, TrigPoly]
    per_component: dict[str, object] = field(default_factory=dict)
    collar_terms: dict[str, SeparableFn] = field(default_factory=dict)
    sign_data: SignAssignment | None = None

    def k(self, cid: str) -> TrigPoly:
        try:
            return self.per_circle[cid]
        except KeyError:
            raise ValidationError(f"Hamiltonian has no profile for circle {cid!r}") from None

    def collar_h(self, cid: str) -> SeparableFn:
        return self.collar_terms.get(cid, SeparableFn.zero())

    def to_json(self) -> dict:
        circles = {}
        for cid, k in self.per_circle.items():
            entry = {"k": k.to_json()}
            if cid in self.collar_terms:
                entry["h"] = self.collar_terms[cid].to_json()
            circles[cid] = entry
        comps = {}
        for cid, h in self.per_component.items():
            comps[cid] = {"h": h.to_json() if hasattr(h, "to_json") else h}
        return {"circles": circles, "components": comps}

    @classmethod
    def from_json(cls, obj, surface: BSurface | None = None) -> "AdmissibleHamiltonian":
        if not isinstance(obj, dict) or "circles" not in obj:
            raise ValidationError("Hamiltonian JSON needs a 'circles' object")
        periods = {c.id: c.theta_period for c in surface.circles} if surface else {}
        per_circle, collar = {}, {}
        for cid, entry in obj["circles"].items():
            if "k" not in entry:
                raise ValidationError(f"circle {cid}: missing 'k'")
            per_circle[cid] = TrigPoly.from_json(entry["k"], period=1.0)
            if "h" in entry:
                collar[cid] = SeparableFn.from_json(entry["h"], periods.get(cid, 1.0))
        comps = {}
        for cid, entry in obj.get("components", {}).items():
            h = entry.get("h")
            if isinstance(h, dict) and "terms" in h and "periods" in h:
                comps[cid] = Fourier2D.from_json(h)
            elif h is not None:
                comps[cid] = TrigPoly.from_json(h)
        return cls(per_circle, comps, collar)


# ---------------------------------------------------------------------------
# admissibility
# ---------------------------------------------------------------------------

@dataclass
class CircleVerdict:
    circle: str
    order: int
    passed: bool
    criterion: str
    integral_k: float
    threshold: float
    witness: str | None = None
    raw_modular_weight: float | None = None
    normalized_period: float | None = None

    def to_json(self) -> dict:
        return dict(self.__dict__)


@dataclass
class AdmissibilityReport:
    circles: list[CircleVerdict]

    @property
    def overall(self) -> bool:
        return all(c.passed for c in self.circles)

    def to_json(self) -> dict:
        return {"overall": self.overall, "per_circle": [c.to_json() for c in self.circles]}


def _lattice_witness(value: float, period: float, tol: float = 1e-12) -> bool:
    q = value / period
    return abs(q - round(q)) <= tol * max(1.0, abs(q))


def admissibility_report(H: AdmissibleHamiltonian, s: BSurface) -> AdmissibilityReport:
    """Certify each collar orbit-free with the sufficient integral criteria.

    Order 1: 0 < int_0^1 k < |a_m| T.  Order m > 1: 0 < int k < T_eps with
    T_eps = T/2 inf_{|z|<eps} sigma sum a_i z^(m-i).  Here sigma = sign(a_m):
    reversing the angle makes a_m positive and leaves H, hence k, untouched.
    """
    out = []
    for raw in s.circles:
        k = H.k(raw.id)
        circ = normalize_collar(raw)
        sigma = circ.am_sign()
        I = k.integral(0.0, 1.0)
        h = H.collar_h(raw.id)
        T = circ.theta_period
        if circ.order == 1:
            thr = abs(circ.am_constant()) * T
            crit = "0 < int k < T"
        else:
            thr = 0.5 * T * circ.density_inf(sign=sigma)
            crit = "0 < int k < T_eps"
        passed = 0.0 < I < thr
        witness = None
        if k.is_constant() and k.const == 0.0:
            witness = "k == 0"
        elif _lattice_witness(I, abs(circ.am_constant()) * T):
            witness = "∫k ∈ TZ"
        elif not passed:
            witness = f"int k = {I:.6g} outside (0, {thr:.6g})"
        if not h.is_theta_independent():
            passed = False
            witness = "collar term depends on theta (not Reeb invariant)"
        out.append(CircleVerdict(raw.id, raw.order, bool(passed), crit, float(I), float(thr),
                                 witness, raw.modular_weight(), T))
    return AdmissibilityReport(out)


def unimodular_profiles(H: AdmissibleHamiltonian, s: BSurface,
                        coloring: SignAssignment) -> dict[str, TrigPoly]:
    """k_i rewritten with respect to the global defining function of ``coloring``.

    A circle whose positive side carries the - sign is read in the flipped
    coordinate -z, which multiplies k by (-1)^(m-1).
    """
    out = {}
    for c in s.circles:
        k = H.k(c.id)
        flip = coloring.signs[c.pos_side] < 0
        if flip and c.order % 2 == 0:
            k = -k
        out[c.id] = k
    return out


def is_unimodular(H: AdmissibleHamiltonian, s: BSurface,
                  coloring: SignAssignment | None, tol: float = 1e-12) -> bool:
    """One k(t) on every circle, read against a global defining function."""
    if coloring is None or coloring.kind != "vertex2coloring":
        return False
    g = build_graph(s)
    for e in g.edges:
        if coloring.signs[e.a] == coloring.signs[e.b]:
            return False
    if not s.circles:
        return True
    profs = list(unimodular_profiles(H, s, coloring).values())
    ref = profs[0]
    for k in profs[1:]:
        if not (k - ref).is_constant(tol) or abs((k - ref).const) > tol:
            return False
    return True


def disk_admissible(k: TrigPoly, a_m: float) -> bool:
    """k > 0 everywhere and int_0^1 k < 2 pi / a_m."""
    if not a_m > 0:
        raise ValidationError("disk admissibility needs a_m > 0")
    kmin, _ = k.grid_extrema()
    return bool(kmin > 0 and k.integral(0.0, 1.0) < 2 * np.pi / a_m)


def load_hamiltonian(path, surface: BSurface | None = None) -> AdmissibleHamiltonian:
    with open(path) as fh:
        return AdmissibleHamiltonian.from_json(json.load(fh), surface)
