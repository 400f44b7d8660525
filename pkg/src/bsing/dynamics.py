"""Hamiltonian vector fields, flows, time-one maps and 1-periodic orbits.

Sign convention throughout: i_X omega = -dH.  On a collar with
omega = c(z, theta) dz/z^m ^ dtheta and H = k(t) G_m(z) + h(t, theta) this gives

    X = (1/c) (k d/dtheta - z^m dh/dtheta d/dz).
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .geometry import CriticalCircle, DomainError, ValidationError
from .hamiltonian import AdmissibleHamiltonian, Fourier2D
from .trigpoly import SeparableFn, TrigPoly


class ApproachedCriticalSet(RuntimeError):
    """A path came closer to Z than the configured floor."""


class IndexUnsupported(ValueError):
    """The orbit is not a nondegenerate critical point of an autonomous H."""


class Unsupported(NotImplementedError):
    pass


F_IDENTICALLY_ZERO = "F ≡ 0: all θ0"
DET_TOL = 1e-6
FAMILY_MIN_SEEDS = 8


def max_threads() -> int:
    """Thread cap from BSING_THREADS (defaults to the CPU count)."""
    raw = os.environ.get("BSING_THREADS")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            raise ValidationError(f"BSING_THREADS must be an integer, got {raw!r}") from None
    return max(1, os.cpu_count() or 1)


def G_m(m: int, z):
    """Collar profile with G_m'(z) = z^{-m}."""
    z = np.asarray(z, dtype=float)
    if m == 1:
        return np.log(np.abs(z))
    return -1.0 / ((m - 1) * z ** (m - 1))


# ---------------------------------------------------------------------------
# chart systems
# ---------------------------------------------------------------------------

class ChartSystem:
    """A planar (or spherical) Hamiltonian system in one chart.

    Subclasses provide ``field`` and ``jacobian`` on stacked states of shape
    (N, dim); the Newton driver only relies on the methods below.
    """

    dim = 2
    name = "chart"
    autonomous = False
    floor_axis: int | None = None  # coordinate that must stay away from 0
    z_floor = 0.0
    z_ceiling = math.inf
    disks: tuple = ()  # (label, centre, radius)

    def field(self, t, X):
        raise NotImplementedError

    def jacobian(self, t, X):
        raise NotImplementedError

    periods: tuple = (None, None)

    def difference(self, A, B):
        d = np.asarray(A, float) - np.asarray(B, float)
        for i, p in enumerate(self.periods):
            if p:
                d[..., i] = (d[..., i] + 0.5 * p) % p - 0.5 * p
        return d

    def canonical(self, X):
        X = np.array(X, dtype=float)
        for i, p in enumerate(self.periods):
            if p:
                X[..., i] = X[..., i] % p
        return X

    def retract(self, X, V):
        return self.canonical(X + V)

    def tangent_basis(self, X):
        N = len(X)
        return np.broadcast_to(np.eye(self.dim)[None, :, :2], (N, self.dim, 2)).copy()

    def inside(self, X):
        if self.floor_axis is None:
            return np.ones(len(X), dtype=bool)
        z = np.abs(X[:, self.floor_axis])
        return (z > self.z_floor) & (z < self.z_ceiling)

    def distance(self, A, B):
        return np.linalg.norm(self.difference(A, B), axis=-1)

    def locate(self, X) -> list[str]:
        out = []
        for x in np.atleast_2d(X):
            label = self.name
            for lab, centre, radius in self.disks:
                if float(self.distance(x[None], np.asarray(centre, float)[None])[0]) < radius:
                    label = lab
                    break
            out.append(label)
        return out

    def seeds(self, n: int):
        raise NotImplementedError

    # autonomous systems used for index classification
    def hamiltonian(self, t, X):
        raise NotImplementedError

    def gradient(self, X):
        raise IndexUnsupported(f"{self.name}: no gradient available")

    def hessian(self, X):
        raise IndexUnsupported(f"{self.name}: no Hessian available")


def _grid_seeds(xs, ys):
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    I, J = np.meshgrid(np.arange(len(xs)), np.arange(len(ys)), indexing="ij")
    return np.stack([X.ravel(), Y.ravel()], axis=1), np.stack([I.ravel(), J.ravel()], axis=1)


class CollarSystem(ChartSystem):
    """Field of k(t) G_m(z) + h(t, theta) on the collar of one circle."""

    def __init__(self, circle: CriticalCircle, k: TrigPoly, h: SeparableFn | None = None):
        self.circle = circle
        self.k = k
        self.h = h if h is not None else SeparableFn.zero()
        self.m = circle.order
        self.periods = (None, circle.theta_period)
        self.floor_axis = 0
        self.z_floor = circle.epsilon * 1e-3
        self.z_ceiling = circle.epsilon
        self.name = f"collar:{circle.id}"
        self.autonomous = k.is_constant() and self.h.is_autonomous()

    @classmethod
    def from_hamiltonian(cls, circle: CriticalCircle, H: AdmissibleHamiltonian):
        return cls(circle, H.k(circle.id), H.collar_h(circle.id))

    def field(self, t, X):
        z, th = X[:, 0], X[:, 1]
        c = self.circle.density(z, th)
        out = np.empty_like(X)
        out[:, 0] = -z ** self.m * self.h.d_theta(t, th) / c
        out[:, 1] = self.k(t) / c
        return out

    def jacobian(self, t, X):
        z, th = X[:, 0], X[:, 1]
        m = self.m
        c = self.circle.density(z, th)
        cz = self.circle.density_dz(z, th)
        cth = self.circle.density_dtheta(z, th)
        h1 = self.h.d_theta(t, th)
        h2 = self.h.d_theta(t, th, 2)
        k = self.k(t)
        zm = z ** m
        zm1 = m * z ** (m - 1)
        J = np.empty((len(X), 2, 2))
        J[:, 0, 0] = -zm1 * h1 / c + zm * h1 * cz / c ** 2
        J[:, 0, 1] = -zm * h2 / c + zm * h1 * cth / c ** 2
        J[:, 1, 0] = -k * cz / c ** 2
        J[:, 1, 1] = -k * cth / c ** 2
        return J

    def hamiltonian(self, t, X):
        return self.k(t) * G_m(self.m, X[:, 0]) + self.h.value(t, X[:, 1])

    def seeds(self, n: int):
        eps = self.circle.epsilon
        zs = eps * (-1.0 + (2 * np.arange(n) + 1) / n)
        ths = self.circle.theta_period * np.arange(n) / n
        return _grid_seeds(zs, ths)


class TorusSystem(ChartSystem):
    """Global torus chart with omega = dx ^ dy / S(x) and H = k(t) G(x) + h(x, y).

    ``psi = S G'`` must be a trig polynomial; then
    x' = -S h_y and y' = k psi + S h_x are smooth across {S = 0}.
    """

    def __init__(self, S: TrigPoly, psi: TrigPoly, k: TrigPoly, h: Fourier2D | None = None,
                 G: Callable | None = None, circles: Sequence[tuple[str, float]] = (),
                 collar_eps: float | None = None, disks: Sequence = (), name: str = "torus"):
        self.S, self.psi, self.k = S, psi, k
        self.dS, self.dpsi = S.derivative(), psi.derivative()
        self.h = h if h is not None else Fourier2D()
        self.G = G
        self.periods = (S.period, self.h.periods[1] if h is not None else S.period)
        self.circles = tuple(circles)
        self.collar_eps = collar_eps
        self.disks = tuple(disks)
        self.name = name
        self.autonomous = k.is_constant()

    @classmethod
    def flat(cls, h: Fourier2D, disks: Sequence = (), name: str = "interior"):
        Lx, Ly = h.periods
        one = TrigPoly.constant(1.0, Lx)
        sys = cls(one, TrigPoly.constant(0.0, Lx), TrigPoly.constant(0.0), h,
                  G=lambda x: 0.0 * np.asarray(x), disks=disks, name=name)
        sys.periods = (Lx, Ly)
        return sys

    def field(self, t, X):
        x, y = X[:, 0], X[:, 1]
        hx, hy = self.h.grad(x, y)
        S = self.S(x)
        out = np.empty_like(X)
        out[:, 0] = -S * hy
        out[:, 1] = self.k(t) * self.psi(x) + S * hx
        return out

    def jacobian(self, t, X):
        x, y = X[:, 0], X[:, 1]
        hx, hy = self.h.grad(x, y)
        hxx, hxy, hyy = self.h.hess(x, y)
        S, dS = self.S(x), self.dS(x)
        J = np.empty((len(X), 2, 2))
        J[:, 0, 0] = -dS * hy - S * hxy
        J[:, 0, 1] = -S * hyy
        J[:, 1, 0] = self.k(t) * self.dpsi(x) + dS * hx + S * hxx
        J[:, 1, 1] = S * hxy
        return J

    def hamiltonian(self, t, X):
        if self.G is None:
            raise Unsupported("no collar primitive G supplied")
        return self.k(t) * self.G(X[:, 0]) + self.h.value(X[:, 0], X[:, 1])

    def _collar_of(self, x):
        if self.collar_eps is None:
            return None
        for cid, x0 in self.circles:
            d = (x - x0 + 0.5 * self.periods[0]) % self.periods[0] - 0.5 * self.periods[0]
            if abs(d) < self.collar_eps:
                return cid
        return None

    def locate(self, X):
        out = []
        base = ChartSystem.locate(self, X)
        for x, lab in zip(np.atleast_2d(X), base):
            cid = self._collar_of(float(x[0]))
            out.append(f"collar:{cid}" if cid is not None else lab)
        return out

    def seeds(self, n: int):
        Lx, Ly = self.periods
        ys = Ly * np.arange(n) / n
        if self.collar_eps is None or not self.circles:
            return _grid_seeds(Lx * np.arange(n) / n, ys)
        per = max(2, n // len(self.circles))
        xs = []
        for _, x0 in self.circles:
            xs.extend(x0 + self.collar_eps * (-1.0 + (2 * np.arange(per) + 1) / per))
        return _grid_seeds(np.asarray(xs) % Lx, ys)

    def gradient(self, X):
        X = np.atleast_2d(X)
        if not (self.k.is_constant() and self.k.const == 0.0):
            raise IndexUnsupported("index classification needs k = 0 on the chart")
        gx, gy = self.h.grad(X[:, 0], X[:, 1])
        return np.stack([gx, gy], axis=1)

    def hessian(self, X):
        X = np.atleast_2d(X)
        self.gradient(X)
        hxx, hxy, hyy = self.h.hess(X[:, 0], X[:, 1])
        return np.stack([np.stack([hxx, hxy], -1), np.stack([hxy, hyy], -1)], -2)


class SphereSystem(ChartSystem):
    """Unit sphere in R^3 with the area form and F = x.A.x/2 + b.x (scaled)."""

    dim = 3
    autonomous = True
    periods = (None, None, None)

    def __init__(self, A, b, scale: float = 1.0, disks: Sequence = (), name: str = "interior"):
        self.A = scale * np.asarray(A, dtype=float)
        self.b = scale * np.asarray(b, dtype=float)
        self.disks = tuple(disks)
        self.name = name

    def _grad_ambient(self, X):
        return X @ self.A.T + self.b

    def field(self, t, X):
        return np.cross(X, self._grad_ambient(X))

    def jacobian(self, t, X):
        g = self._grad_ambient(X)
        return -_skew(g) + _skew(X) @ self.A

    def hamiltonian(self, t, X):
        return 0.5 * np.einsum("ni,ij,nj->n", X, self.A, X) + X @ self.b

    def canonical(self, X):
        X = np.asarray(X, dtype=float)
        return X / np.linalg.norm(X, axis=-1, keepdims=True)

    def retract(self, X, V):
        return self.canonical(X + V)

    def difference(self, A, B):
        return np.asarray(A, float) - np.asarray(B, float)

    def tangent_basis(self, X):
        X = np.atleast_2d(X)
        e = np.where(np.abs(X[:, :1]) < 0.9, np.array([[1.0, 0, 0]]), np.array([[0, 1.0, 0]]))
        u = e - np.sum(e * X, axis=1, keepdims=True) * X
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        w = np.cross(X, u)
        return np.stack([u, w], axis=2)

    def seeds(self, n: int):
        N = n * n
        i = np.arange(N) + 0.5
        phi = np.arccos(1 - 2 * i / N)
        golden = np.pi * (3 - np.sqrt(5))
        th = golden * i
        X = np.stack([np.cos(th) * np.sin(phi), np.sin(th) * np.sin(phi), np.cos(phi)], axis=1)
        # seed order along the spiral: row = latitude band, column = position
        idx = np.stack([np.arange(N) // n, np.arange(N) % n], axis=1)
        return X, idx

    def gradient(self, X):
        X = np.atleast_2d(X)
        g = self._grad_ambient(X)
        B = self.tangent_basis(X)
        return np.einsum("nik,ni->nk", B, g)

    def hessian(self, X):
        X = np.atleast_2d(X)
        g = self._grad_ambient(X)
        lam = np.sum(g * X, axis=1)
        B = self.tangent_basis(X)
        Hm = self.A[None] - lam[:, None, None] * np.eye(3)[None]
        return np.einsum("nik,nij,njl->nkl", B, Hm, B)


def _skew(v):
    v = np.atleast_2d(v)
    out = np.zeros((len(v), 3, 3))
    out[:, 0, 1], out[:, 0, 2] = -v[:, 2], v[:, 1]
    out[:, 1, 0], out[:, 1, 2] = v[:, 2], -v[:, 0]
    out[:, 2, 0], out[:, 2, 1] = -v[:, 1], v[:, 0]
    return out


class LinearSystem(ChartSystem):
    """x' = A x on R^n, a test chart with exact exponential flow."""

    def __init__(self, A, name: str = "linear"):
        self.A = np.asarray(A, dtype=float)
        self.dim = self.A.shape[0]
        self.periods = (None,) * self.dim
        self.name = name
        self.autonomous = True

    def field(self, t, X):
        return X @ self.A.T

    def jacobian(self, t, X):
        return np.broadcast_to(self.A, (len(X),) + self.A.shape).copy()

    def seeds(self, n: int):
        s = np.linspace(-1, 1, n)
        if self.dim != 2:
            raise Unsupported("seed grids only for planar linear systems")
        return _grid_seeds(s, s)


# ---------------------------------------------------------------------------
# single-collar helpers
# ---------------------------------------------------------------------------

def collar_vector_field(circle: CriticalCircle, H: AdmissibleHamiltonian, z, theta, t=0.0):
    """(z', theta') of X_H in collar coordinates."""
    z = np.asarray(z, dtype=float)
    if np.any(z == 0):
        raise DomainError("evaluation on critical set")
    theta = np.asarray(theta, dtype=float)
    k = H.k(circle.id)(t)
    h = H.collar_h(circle.id)
    c = circle.density(z, theta)
    dz = -z ** circle.order * h.d_theta(t, theta) / c
    dth = k / c
    if np.ndim(dz) == 0:
        return float(dz), float(dth)
    return dz, dth


def _closed_form_data(circle: CriticalCircle, H: AdmissibleHamiltonian):
    if circle.order != 1:
        raise Unsupported("closed-form collar flow needs order 1; use integrate()")
    if not circle.am_is_constant():
        raise Unsupported("closed-form collar flow needs a normalized collar (constant a_1)")
    k = H.k(circle.id)
    if not k.is_constant():
        raise Unsupported("closed-form collar flow needs constant k")
    return k.const, circle.am_constant(), H.collar_h(circle.id)


def collar_flow_closed_form(circle: CriticalCircle, H: AdmissibleHamiltonian, x0, t):
    """Exact flow theta = theta0 + (k/a) t, z = z0 exp(-(1/a) int h_theta)."""
    k, a, h = _closed_form_data(circle, H)
    z0, th0 = (np.asarray(v, dtype=float) for v in x0)
    t = np.asarray(t, dtype=float)
    speed = k / a
    theta = th0 + speed * t
    I = h.integral_along(th0, speed, 0.0, t, order=1)
    z = z0 * np.exp(-np.asarray(I) / a)
    return z, theta


def roots_of_F(circle: CriticalCircle, H: AdmissibleHamiltonian, resolution: float = 1e-4):
    """Zeros on [0, T) of F(theta0) = int_0^{T/k} dh_t/dtheta(theta0 + k t / a) dt.

    Returns the sentinel :data:`F_IDENTICALLY_ZERO` when F vanishes identically
    (always the case for autonomous h).
    """
    k, a, h = _closed_form_data(circle, H)
    if k == 0:
        raise ValidationError("roots_of_F needs k != 0")
    T = circle.theta_period
    speed = k / a
    t_ret = T / abs(speed)
    if h.is_theta_independent():
        return F_IDENTICALLY_ZERO

    def F(th):
        return h.integral_along(th, speed, 0.0, t_ret, order=1)

    n = int(math.ceil(T / resolution))
    grid = T * np.arange(n + 1) / n
    vals = np.asarray(F(grid))
    scale = float(np.max(np.abs(vals)))
    if scale < 1e-13:
        return F_IDENTICALLY_ZERO
    roots = []
    for i in range(n):
        f0, f1 = vals[i], vals[i + 1]
        if f0 == 0.0:
            roots.append(float(grid[i]))
        elif f0 * f1 < 0:
            roots.append(float(brentq(lambda x: float(F(x)), grid[i], grid[i + 1],
                                      xtol=1e-15, rtol=4 * np.finfo(float).eps)))
    roots = sorted({round(r % T, 13) for r in roots})
    return [float(r) for r in roots]


# ---------------------------------------------------------------------------
# integration
# ---------------------------------------------------------------------------

@dataclass
class Path:
    t: np.ndarray
    y: np.ndarray
    event: str | None = None

    @property
    def end(self) -> np.ndarray:
        return self.y[:, -1]


def integrate(field, x0, duration: float, tol: float = 1e-12, t0: float = 0.0,
              on_floor: str = "raise", dense: bool = False) -> Path:
    """Adaptive DOP853 path of ``field`` (a ChartSystem or f(t, x)).

    For collar systems the path stops at the collar boundary (event
    ``"collar boundary"``) or at |z| = z_floor; the latter raises
    :class:`ApproachedCriticalSet` unless ``on_floor == "report"``.
    """
    x0 = np.asarray(x0, dtype=float)
    events = []
    names = []
    if isinstance(field, ChartSystem):
        sys = field

        def f(t, x):
            return sys.field(t, x[None])[0]

        if sys.floor_axis is not None:
            ax = sys.floor_axis

            def hit_floor(t, x):
                return abs(x[ax]) - sys.z_floor

            def hit_edge(t, x):
                return sys.z_ceiling - abs(x[ax])

            for ev, nm in ((hit_floor, "critical set"), (hit_edge, "collar boundary")):
                ev.terminal = True
                events.append(ev)
                names.append(nm)
    else:
        f = field
    sol = solve_ivp(f, (t0, t0 + duration), x0, method="DOP853", rtol=tol, atol=tol * 1e-2,
                    events=events or None, dense_output=dense)
    if not sol.success:
        raise RuntimeError(f"integration failed: {sol.message}")
    event = None
    for nm, te in zip(names, sol.t_events or []):
        if len(te):
            event = nm
    if event == "critical set" and on_floor == "raise":
        raise ApproachedCriticalSet(
            f"path reached |z| < z_floor at t = {sol.t[-1]:.6g} from {x0.tolist()}")
    return Path(sol.t, sol.y, event)


def time_one_map(system: ChartSystem, X0, t0: float = 0.0, duration: float = 1.0,
                 rtol: float = 1e-12, atol: float = 1e-14, check_floor: bool = True):
    """Batched phi^1 and D phi^1 via the variational equations.

    Returns ``(Phi, D, ok)``; ``ok`` is False for seeds whose sampled path
    left the collar or came within the floor of Z.
    """
    X0 = np.atleast_2d(np.asarray(X0, dtype=float))
    N, n = X0.shape
    y0 = np.concatenate([X0.ravel(), np.tile(np.eye(n).ravel(), N)])

    def rhs(t, y):
        X = y[:N * n].reshape(N, n)
        M = y[N * n:].reshape(N, n, n)
        dX = system.field(t, X)
        dM = system.jacobian(t, X) @ M
        return np.concatenate([dX.ravel(), dM.ravel()])

    sample = system.floor_axis is not None and check_floor
    t_eval = t0 + duration * np.linspace(0, 1, 17) if sample else None
    sol = solve_ivp(rhs, (t0, t0 + duration), y0, method="DOP853", rtol=rtol, atol=atol,
                    t_eval=t_eval)
    if not sol.success:
        raise RuntimeError(f"variational integration failed: {sol.message}")
    yend = sol.y[:, -1]
    Phi = yend[:N * n].reshape(N, n)
    D = yend[N * n:].reshape(N, n, n)
    ok = np.all(np.isfinite(Phi), axis=1)
    if sample:
        zs = np.abs(sol.y[system.floor_axis:N * n:n, :])
        ok &= (zs.min(axis=1) > system.z_floor) & (zs.max(axis=1) < system.z_ceiling)
    return Phi, D, ok


def monodromy_det(system: ChartSystem, X, D):
    """det(Id - D phi^1) on the tangent plane at X."""
    B = system.tangent_basis(np.atleast_2d(X))
    M = np.einsum("nik,nij,njl->nkl", B, D, B)
    I2 = np.eye(2)[None]
    return np.linalg.det(I2 - M)


# ---------------------------------------------------------------------------
# orbit records
# ---------------------------------------------------------------------------

@dataclass
class OrbitRecord:
    location: str
    point: tuple
    residual: float
    det: float
    nondegenerate: bool
    index: int | None = None
    morse_index: int | None = None
    degenerate_family: bool = False
    family_size: int = 0

    def to_json(self) -> dict:
        d = asdict(self)
        d["point"] = list(self.point)
        return d


@dataclass
class OrbitSearch:
    orbits: list[OrbitRecord]
    families: list[OrbitRecord]
    n_seeds: int
    n_converged: int

    @property
    def count(self) -> int:
        return len(self.orbits)

    def by_location(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for r in self.orbits:
            out[r.location] = out.get(r.location, 0) + 1
        return dict(sorted(out.items()))

    def to_json(self) -> dict:
        return {"count": self.count, "by_location": self.by_location(),
                "n_seeds": self.n_seeds, "n_converged": self.n_converged,
                "orbits": [r.to_json() for r in self.orbits],
                "families": [r.to_json() for r in self.families]}

    def extend(self, other: "OrbitSearch") -> "OrbitSearch":
        return OrbitSearch(self.orbits + other.orbits, self.families + other.families,
                           self.n_seeds + other.n_seeds, self.n_converged + other.n_converged)


ORBIT_CSV_COLUMNS = ["component", "z", "theta_or_coords", "residual", "det", "index",
                     "degenerate_flag"]


def orbits_to_csv(records: Sequence[OrbitRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(ORBIT_CSV_COLUMNS)
    for r in records:
        rest = ";".join(f"{v:.12g}" for v in r.point[1:])
        w.writerow([r.location, f"{r.point[0]:.12g}", rest, f"{r.residual:.3e}",
                    f"{r.det:.6e}", "" if r.index is None else r.index,
                    int(r.degenerate_family)])
    return buf.getvalue()


def orbits_to_json(records: Sequence[OrbitRecord]) -> str:
    return json.dumps([r.to_json() for r in records], sort_keys=True, indent=1)


# ---------------------------------------------------------------------------
# Newton shooting on phi^1
# ---------------------------------------------------------------------------

def _pinv_solve(M, r, sv_floor=1e-9):
    """Minimum-norm least-squares solves of M_n d = r_n with an absolute SVD floor."""
    U, s, Vt = np.linalg.svd(M, full_matrices=False)
    inv = np.where(s > sv_floor, 1.0 / np.where(s > sv_floor, s, 1.0), 0.0)
    coef = np.einsum("nik,ni->nk", U, r) * inv
    return np.einsum("nki,nk->ni", Vt, coef)


def _newton_batch(system, X, tol, max_iter, max_step, rtol):
    N = len(X)
    X = system.canonical(X.copy())
    res = np.full(N, np.inf)
    det = np.full(N, np.nan)
    alive = system.inside(X)
    done = np.zeros(N, dtype=bool)
    for _ in range(max_iter):
        act = alive & ~done
        if not act.any():
            break
        ia = np.flatnonzero(act)
        Xa = X[ia]
        Phi, D, ok = time_one_map(system, Xa, rtol=rtol)
        r = system.difference(Phi, Xa)
        B = system.tangent_basis(Xa)
        n = system.dim
        M = np.einsum("nij,njk->nik", D - np.eye(n)[None], B)
        res[ia] = np.linalg.norm(r, axis=1)
        det[ia] = monodromy_det(system, Xa, D)
        conv = ok & (res[ia] < tol)
        done[ia[conv]] = True
        alive[ia[~ok]] = False
        move = ia[ok & ~conv]
        if not len(move):
            continue
        sel = ok & ~conv
        d2 = _pinv_solve(M[sel], -r[sel])
        step = np.einsum("nik,nk->ni", B[sel], d2)
        norm = np.linalg.norm(step, axis=1, keepdims=True)
        stalled = norm[:, 0] < 1e-15
        alive[move[stalled]] = False
        step = np.where(norm > max_step, step * (max_step / np.maximum(norm, 1e-300)), step)
        X[move] = system.retract(X[move], step)
        alive[move] &= system.inside(X[move])
    return X, res, det, done & alive


def _refine(system, x, tol, max_iter=12):
    """Single-seed Newton polish; returns (x, residual, det) or None."""
    x = x[None].copy()
    best = None
    for _ in range(max_iter):
        Phi, D, ok = time_one_map(system, x, rtol=1e-13, atol=1e-15)
        if not ok[0]:
            return best
        r = system.difference(Phi, x)
        res = float(np.linalg.norm(r))
        det = float(monodromy_det(system, x, D)[0])
        best = (x[0].copy(), res, det) if best is None or res <= best[1] else best
        B = system.tangent_basis(x)
        M = np.einsum("nij,njk->nik", D - np.eye(system.dim)[None], B)
        d2 = _pinv_solve(M, -r)
        step = np.einsum("nik,nk->ni", B, d2)
        if res < tol and float(np.linalg.norm(step)) < 1e-13:
            break
        x = system.retract(x, step)
        if not system.inside(x)[0]:
            break
    return best


def _families(points, idx, degenerate):
    """Connected clusters (grid 8-neighbourhood) of degenerate converged seeds."""
    sel = np.flatnonzero(degenerate)
    key = {tuple(idx[i]): i for i in sel}
    seen = set()
    clusters = []
    for i in sel:
        if i in seen:
            continue
        stack, comp = [i], []
        seen.add(i)
        while stack:
            j = stack.pop()
            comp.append(j)
            a, b = idx[j]
            for da in (-1, 0, 1):
                for db in (-1, 0, 1):
                    nb = key.get((a + da, b + db))
                    if nb is not None and nb not in seen:
                        seen.add(nb)
                        stack.append(nb)
        rows = np.bincount(idx[comp, 0]).max()
        cols = np.bincount(idx[comp, 1]).max()
        if len(comp) >= FAMILY_MIN_SEEDS and max(rows, cols) >= FAMILY_MIN_SEEDS:
            clusters.append(sorted(comp))
    return clusters


def find_fixed_points(system: ChartSystem, grid_density: int = 64, tol: float = 1e-10,
                      max_iter: int = 30, max_step: float | None = None,
                      threads: int | None = None, chunk: int = 512,
                      rtol: float = 1e-12, classify: bool = True) -> OrbitSearch:
    """Fixed points of phi^1 by Newton shooting from a seed grid."""
    X, idx = system.seeds(grid_density)
    if max_step is None:
        spans = [p for p in system.periods if p] or [1.0]
        max_step = 0.1 * min(spans)
        if system.floor_axis is not None:
            max_step = min(max_step, 0.25 * system.z_ceiling)
    threads = threads or max_threads()
    batch_tol = max(tol, 1e-9)
    parts = [slice(i, min(i + chunk, len(X))) for i in range(0, len(X), chunk)]

    def run(sl):
        return _newton_batch(system, X[sl], batch_tol, max_iter, max_step, rtol)

    if threads > 1 and len(parts) > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            outs = list(ex.map(run, parts))
    else:
        outs = [run(p) for p in parts]
    Xf = np.concatenate([o[0] for o in outs])
    res = np.concatenate([o[1] for o in outs])
    det = np.concatenate([o[2] for o in outs])
    conv = np.concatenate([o[3] for o in outs])

    degenerate = conv & (np.abs(det) < DET_TOL)
    fams = _families(Xf, idx, degenerate)
    in_family = np.zeros(len(X), dtype=bool)
    family_records = []
    for comp in fams:
        in_family[comp] = True
        pts = Xf[comp]
        order = np.lexsort(pts.T[::-1])
        rep = pts[order[0]]
        family_records.append(OrbitRecord(system.locate(rep[None])[0], tuple(map(float, rep)),
                                          float(res[comp].max()), float(np.abs(det[comp]).max()),
                                          False, degenerate_family=True, family_size=len(comp)))

    cand = np.flatnonzero(conv & ~in_family)
    # polish distinct candidates only: cluster coarse duplicates first
    cand = cand[np.lexsort(Xf[cand].T[::-1])] if len(cand) else cand
    reps: list[int] = []
    for i in cand:
        if not reps or np.min(system.distance(Xf[reps], Xf[i][None])) > 1e-6:
            reps.append(i)
    polished = []
    for i in reps:
        out = _refine(system, Xf[i], tol)
        if out is not None and out[1] < tol:
            polished.append(out)
    polished.sort(key=lambda p: tuple(np.round(p[0], 12)))
    kept = []
    for x, r, d in polished:
        if all(float(system.distance(x[None], y[None])[0]) > 10 * tol for y, _, _ in kept):
            kept.append((system.canonical(x[None])[0], r, d))
    records = []
    for x, r, d in kept:
        rec = OrbitRecord(system.locate(x[None])[0], tuple(map(float, x)), float(r), float(d),
                          bool(abs(d) > DET_TOL))
        if classify and system.autonomous:
            try:
                rec.morse_index = morse_index(system, x)
                rec.index = 1 - rec.morse_index
            except IndexUnsupported:
                pass
        records.append(rec)
    return OrbitSearch(records, family_records, len(X), int(conv.sum()))


def find_periodic_orbits(H: AdmissibleHamiltonian, s, grid_density: int = 64,
                         tol: float = 1e-10, extra_systems: Sequence[ChartSystem] = (),
                         threads: int | None = None) -> OrbitSearch:
    """1-periodic orbits in every collar of ``s`` and in any supplied chart."""
    total = OrbitSearch([], [], 0, 0)
    for circ in s.circles:
        sys = CollarSystem.from_hamiltonian(circ, H)
        total = total.extend(find_fixed_points(sys, grid_density, tol, threads=threads))
    for sys in extra_systems:
        total = total.extend(find_fixed_points(sys, grid_density, tol, threads=threads))
    return total


# ---------------------------------------------------------------------------
# index classification
# ---------------------------------------------------------------------------

def morse_index(system: ChartSystem, x, grad_tol: float = 1e-6, eig_tol: float = 1e-9) -> int:
    """Number of negative Hessian eigenvalues of H at a nondegenerate critical point."""
    if not system.autonomous:
        raise IndexUnsupported("time-dependent Hamiltonian")
    x = np.atleast_2d(np.asarray(x, dtype=float))
    g = system.gradient(x)[0]
    if float(np.linalg.norm(g)) > grad_tol:
        raise IndexUnsupported(f"not a critical point (|grad H| = {np.linalg.norm(g):.3g})")
    ev = np.linalg.eigvalsh(system.hessian(x)[0])
    if np.min(np.abs(ev)) < eig_tol:
        raise IndexUnsupported("degenerate critical point")
    return int(np.sum(ev < 0))


def classify_index(rec: OrbitRecord, system: ChartSystem) -> int:
    """Grading 1 - ind on {-1, 0, 1}: minimum -> +1, saddle -> 0, maximum -> -1."""
    return 1 - morse_index(system, np.asarray(rec.point))
