"""Finite trigonometric polynomials on a circle of fixed period.

A :class:`TrigPoly` stores ``const + sum_n cos[n-1] cos(n w x) + sin[n-1] sin(n w x)``
with ``w = 2 pi / period``.  The family is closed under differentiation,
products and (mean-free) integration, which keeps every collar flow we need
in closed form.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np


def _as_tuple(x: Iterable[float] | None) -> tuple[float, ...]:
    if x is None:
        return ()
    return tuple(float(v) for v in x)


@dataclass(frozen=True)
class TrigPoly:
    """Real trigonometric polynomial with period ``period``."""

    const: float = 0.0
    cos: tuple[float, ...] = ()
    sin: tuple[float, ...] = ()
    period: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "const", float(self.const))
        object.__setattr__(self, "cos", _as_tuple(self.cos))
        object.__setattr__(self, "sin", _as_tuple(self.sin))
        if not self.period > 0:
            raise ValueError(f"period must be positive, got {self.period}")

    # ---- construction -------------------------------------------------
    @classmethod
    def constant(cls, c: float, period: float = 1.0) -> "TrigPoly":
        return cls(const=c, period=period)

    @classmethod
    def from_complex(cls, coeffs: np.ndarray, period: float) -> "TrigPoly":
        """Build from complex coefficients c_n, n = -N..N (index N is n=0)."""
        coeffs = np.asarray(coeffs, dtype=complex)
        n_max = (len(coeffs) - 1) // 2
        c0 = coeffs[n_max].real
        pos = coeffs[n_max + 1:]
        cos = 2.0 * pos.real
        sin = -2.0 * pos.imag
        return cls(const=c0, cos=cos, sin=sin, period=period)

    @classmethod
    def from_json(cls, obj, period: float | None = None) -> "TrigPoly":
        """Parse ``{"cos": [...], "sin": [...], "const": c}`` or a bare number."""
        if isinstance(obj, (int, float)):
            return cls(const=float(obj), period=period or 1.0)
        if not isinstance(obj, dict):
            raise ValueError(f"cannot read trig polynomial from {obj!r}")
        unknown = set(obj) - {"cos", "sin", "const", "period"}
        if unknown:
            raise ValueError(f"unknown trig polynomial keys: {sorted(unknown)}")
        p = obj.get("period", period if period is not None else 1.0)
        return cls(const=obj.get("const", 0.0), cos=obj.get("cos", ()),
                   sin=obj.get("sin", ()), period=p)

    def to_json(self, with_period: bool = True) -> dict:
        out = {"const": self.const, "cos": list(self.cos), "sin": list(self.sin)}
        if with_period:
            out["period"] = self.period
        return out

    # ---- basic properties --------------------------------------------
    @property
    def omega(self) -> float:
        return 2.0 * np.pi / self.period

    @property
    def degree(self) -> int:
        return max(len(self.cos), len(self.sin))

    def _padded(self) -> tuple[np.ndarray, np.ndarray]:
        n = self.degree
        a = np.zeros(n)
        b = np.zeros(n)
        a[: len(self.cos)] = self.cos
        b[: len(self.sin)] = self.sin
        return a, b

    def is_constant(self, tol: float = 0.0) -> bool:
        a, b = self._padded()
        return bool(np.all(np.abs(a) <= tol) and np.all(np.abs(b) <= tol))

    def to_complex(self, n_max: int | None = None) -> np.ndarray:
        """Complex coefficients c_{-N..N} with f = sum c_n exp(i n w x)."""
        a, b = self._padded()
        n = self.degree if n_max is None else n_max
        out = np.zeros(2 * n + 1, dtype=complex)
        out[n] = self.const
        k = min(n, len(a))
        pos = 0.5 * (a[:k] - 1j * b[:k])
        out[n + 1:n + 1 + k] = pos
        out[n - k:n][::-1] = np.conj(pos)
        return out

    # ---- evaluation --------------------------------------------------
    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.full(x.shape, self.const)
        w = self.omega
        for n, c in enumerate(self.cos, start=1):
            if c:
                out = out + c * np.cos(n * w * x)
        for n, s in enumerate(self.sin, start=1):
            if s:
                out = out + s * np.sin(n * w * x)
        return out if out.ndim else float(out)

    def derivative(self, order: int = 1) -> "TrigPoly":
        f = self
        for _ in range(order):
            a, b = f._padded()
            n = np.arange(1, f.degree + 1) * f.omega
            f = TrigPoly(0.0, cos=n * b, sin=-n * a, period=f.period)
        return f

    def mean(self) -> float:
        return self.const

    def antiderivative_periodic(self) -> "TrigPoly":
        """Mean-free primitive of ``f - const``."""
        a, b = self._padded()
        n = np.arange(1, self.degree + 1) * self.omega
        return TrigPoly(0.0, cos=-b / n if len(n) else (), sin=a / n if len(n) else (),
                        period=self.period)

    def primitive(self, x):
        """P(x) = int_0^x f, exact."""
        x = np.asarray(x, dtype=float)
        q = self.antiderivative_periodic()
        return self.const * x + (q(x) - q(0.0))

    def integral(self, a: float = 0.0, b: float | None = None) -> float:
        if b is None:
            b = a + self.period
        return float(self.primitive(b) - self.primitive(a))

    def grid_extrema(self, n: int = 4096) -> tuple[float, float]:
        """Min and max on a uniform grid (dense enough for low degrees)."""
        n = max(n, 64 * (self.degree + 1))
        x = np.linspace(0.0, self.period, n, endpoint=False)
        v = np.asarray(self(x))
        return float(v.min()), float(v.max())

    # ---- algebra -----------------------------------------------------
    def _check_period(self, other: "TrigPoly"):
        if not np.isclose(self.period, other.period, rtol=1e-12, atol=0):
            raise ValueError("trig polynomials with different periods")

    def __add__(self, other):
        if isinstance(other, (int, float)):
            return TrigPoly(self.const + other, self.cos, self.sin, self.period)
        self._check_period(other)
        n = max(self.degree, other.degree)
        a1, b1 = self._padded()
        a2, b2 = other._padded()
        a = np.zeros(n); b = np.zeros(n)
        a[: len(a1)] += a1; a[: len(a2)] += a2
        b[: len(b1)] += b1; b[: len(b2)] += b2
        return TrigPoly(self.const + other.const, a, b, self.period)

    __radd__ = __add__

    def __neg__(self):
        return self * -1.0

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, float, np.floating)):
            o = float(other)
            return TrigPoly(self.const * o, tuple(o * c for c in self.cos),
                            tuple(o * s for s in self.sin), self.period)
        self._check_period(other)
        c = np.convolve(self.to_complex(), other.to_complex())
        return TrigPoly.from_complex(c, self.period)

    __rmul__ = __mul__

    def power(self, k: int) -> "TrigPoly":
        out = TrigPoly.constant(1.0, self.period)
        for _ in range(k):
            out = out * self
        return out


def sin_power(m: int, period: float = 2 * np.pi) -> TrigPoly:
    """sin(w x)^m as an exact trig polynomial."""
    return TrigPoly(0.0, sin=(1.0,), period=period).power(m)


@dataclass(frozen=True)
class SeparableFn:
    """Time-dependent circle function h(t, theta) = sum_j p_j(t) q_j(theta).

    ``p_j`` has period 1 (time), ``q_j`` has the circle period.  An autonomous
    function is a single term with ``p = 1``.
    """

    terms: tuple[tuple[TrigPoly, TrigPoly], ...] = field(default_factory=tuple)

    @classmethod
    def autonomous(cls, q: TrigPoly) -> "SeparableFn":
        return cls(((TrigPoly.constant(1.0, 1.0), q),))

    @classmethod
    def zero(cls) -> "SeparableFn":
        return cls(())

    @classmethod
    def from_json(cls, obj, period: float) -> "SeparableFn":
        if obj is None:
            return cls.zero()
        if isinstance(obj, dict) and "terms" in obj:
            terms = []
            for term in obj["terms"]:
                p = TrigPoly.from_json(term.get("t", 1.0), period=1.0)
                q = TrigPoly.from_json(term["theta"], period=period)
                terms.append((p, q))
            return cls(tuple(terms))
        return cls.autonomous(TrigPoly.from_json(obj, period=period))

    def to_json(self) -> dict:
        return {"terms": [{"t": p.to_json(), "theta": q.to_json()} for p, q in self.terms]}

    @property
    def theta_period(self) -> float | None:
        return self.terms[0][1].period if self.terms else None

    def is_theta_independent(self, tol: float = 0.0) -> bool:
        return all(q.is_constant(tol) or p.is_constant(tol) and abs(p.const) <= tol
                   for p, q in self.terms)

    def is_autonomous(self) -> bool:
        return all(p.is_constant() for p, _ in self.terms)

    def value(self, t, theta):
        out = 0.0
        for p, q in self.terms:
            out = out + p(t) * q(theta)
        return np.broadcast_to(out, np.broadcast(np.asarray(t), np.asarray(theta)).shape) * 1.0

    def d_theta(self, t, theta, order: int = 1):
        out = 0.0
        for p, q in self.terms:
            out = out + p(t) * q.derivative(order)(theta)
        return np.broadcast_to(out, np.broadcast(np.asarray(t), np.asarray(theta)).shape) * 1.0

    def integral_along(self, theta0, speed: float, t0: float, t1, order: int = 1):
        """Exact  int_{t0}^{t1} d^order h_s/dtheta^order (theta0 + speed*s) ds.

        ``theta0`` and ``t1`` broadcast.  Uses the complex exponential form of
        both factors, so the result is exact up to rounding.
        """
        theta0 = np.asarray(theta0, dtype=float)
        t1 = np.asarray(t1, dtype=float)
        total = np.zeros(np.broadcast(theta0, t1).shape, dtype=complex)
        for p, q in self.terms:
            dq = q.derivative(order)
            if dq.is_constant() and dq.const == 0.0:
                continue
            cp = p.to_complex()
            cq = dq.to_complex()
            np_ = (len(cp) - 1) // 2
            nq = (len(cq) - 1) // 2
            for ia, alpha in enumerate(cp):
                if alpha == 0:
                    continue
                a = ia - np_
                for ib, beta in enumerate(cq):
                    if beta == 0:
                        continue
                    b = ib - nq
                    om = a * p.omega + b * dq.omega * speed
                    phase = np.exp(1j * b * dq.omega * theta0)
                    total = total + alpha * beta * phase * _exp_integral(om, t0, t1)
        return total.real if total.ndim else float(total.real)


def _exp_integral(om: float, t0: float, t1):
    """int_{t0}^{t1} exp(i om s) ds with a cancellation-free small-om branch."""
    dt = t1 - t0
    if abs(om) < 1e-300:
        return dt + 0j
    z = 1j * om * dt
    small = np.abs(om * dt) < 1e-3
    series = dt * (1 + z / 2 + z ** 2 / 6 + z ** 3 / 24)
    full = (np.exp(z) - 1) / (1j * om) if np.any(~small) else series
    return np.exp(1j * om * t0) * np.where(small, series, full)


def as_trigpolys(seq: Sequence, period: float) -> tuple[TrigPoly, ...]:
    out = []
    for item in seq:
        out.append(item if isinstance(item, TrigPoly) else TrigPoly.from_json(item, period))
    return tuple(out)
