"""Analytic catalog of potentials and velocity-type (magnetic) terms.

Each entry supplies the value, first two derivatives, and segment averages
along the straight line between two endpoints.  Polynomial entries average
exactly via antiderivatives; the Gaussian entry falls back to Gauss-Legendre
quadrature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

GL_ORDER_DEFAULT = 32
_gl_cache: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def gl_nodes(order: int = GL_ORDER_DEFAULT) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes/weights mapped to [0, 1]."""
    if order not in _gl_cache:
        x, w = np.polynomial.legendre.leggauss(order)
        _gl_cache[order] = (0.5 * (x + 1.0), 0.5 * w)
    return _gl_cache[order]


def segment_average(f: Callable, q_a: float, q_b: float, order: int = GL_ORDER_DEFAULT):
    """Uniform average of f along tau -> (1-tau) q_a + tau q_b."""
    t, w = gl_nodes(order)
    return np.sum(w * f((1.0 - t) * q_a + t * q_b))


def poly_segment_average(coeffs: Sequence[float], q_a: float, q_b: float) -> float:
    """Exact uniform segment average of a polynomial (ascending coefficients)."""
    if abs(q_b - q_a) < 1e-300:
        return float(np.polynomial.polynomial.polyval(q_a, coeffs))
    anti = np.polynomial.polynomial.polyint(coeffs)
    num = np.polynomial.polynomial.polyval(q_b, anti) - \
        np.polynomial.polynomial.polyval(q_a, anti)
    return float(num / (q_b - q_a))


def _poly_mul(a: Sequence[float], b: Sequence[float]) -> np.ndarray:
    return np.polynomial.polynomial.polymul(np.asarray(a, float), np.asarray(b, float))


@dataclass(frozen=True)
class Potential:
    """Potential V(q) with derivatives and segment averages.

    kind: free | linear | harmonic | quartic | poly | gauss.  Polynomial
    kinds carry ascending coefficients; gauss carries (V0, width).
    """

    kind: str
    coeffs: tuple = ()          # ascending polynomial coefficients, if polynomial
    params: dict = field(default_factory=dict, compare=False, hash=False)

    # -- constructors -------------------------------------------------------
    @staticmethod
    def free() -> "Potential":
        return Potential("free", ())

    @staticmethod
    def linear(F: float) -> "Potential":
        # constant force F, V = -F q
        return Potential("linear", (0.0, -float(F)), {"F": float(F)})

    @staticmethod
    def harmonic(omega: float, mass: float = 1.0) -> "Potential":
        k = float(mass) * float(omega) ** 2
        return Potential("harmonic", (0.0, 0.0, 0.5 * k),
                         {"omega": float(omega), "mass": float(mass)})

    @staticmethod
    def quartic(lam: float) -> "Potential":
        return Potential("quartic", (0.0, 0.0, 0.0, 0.0, float(lam)), {"lambda": float(lam)})

    @staticmethod
    def polynomial(coeffs: Sequence[float]) -> "Potential":
        return Potential("poly", tuple(float(c) for c in coeffs))

    @staticmethod
    def gaussian(V0: float, width: float) -> "Potential":
        if width <= 0:
            raise ValueError("gaussian width must be positive")
        return Potential("gauss", (), {"V0": float(V0), "w": float(width)})

    # -- evaluation ---------------------------------------------------------
    @property
    def is_polynomial(self) -> bool:
        return self.kind != "gauss"

    def v(self, q):
        if self.is_polynomial:
            return np.polynomial.polynomial.polyval(q, self.coeffs) if self.coeffs \
                else np.zeros_like(np.asarray(q, float)) + 0.0
        V0, w = self.params["V0"], self.params["w"]
        return V0 * np.exp(-np.asarray(q, float) ** 2 / (2.0 * w * w))

    def dv(self, q):
        if self.is_polynomial:
            d = np.polynomial.polynomial.polyder(self.coeffs) if self.coeffs else [0.0]
            return np.polynomial.polynomial.polyval(q, d)
        V0, w = self.params["V0"], self.params["w"]
        q = np.asarray(q, float)
        return -q / (w * w) * V0 * np.exp(-q ** 2 / (2.0 * w * w))

    def d2v(self, q):
        if self.is_polynomial:
            d2 = np.polynomial.polynomial.polyder(self.coeffs, 2) if len(self.coeffs) > 1 else [0.0]
            return np.polynomial.polynomial.polyval(q, d2)
        V0, w = self.params["V0"], self.params["w"]
        q = np.asarray(q, float)
        return V0 * (q ** 2 / w ** 4 - 1.0 / w ** 2) * np.exp(-q ** 2 / (2.0 * w * w))

    # -- segment averages ---------------------------------------------------
    def avg(self, q_a: float, q_b: float) -> float:
        """Uniform segment average of V."""
        if self.is_polynomial:
            return poly_segment_average(self.coeffs or (0.0,), q_a, q_b)
        return float(segment_average(self.v, q_a, q_b))

    def avg_sq(self, q_a: float, q_b: float) -> float:
        """Uniform segment average of V^2."""
        if self.is_polynomial:
            sq = _poly_mul(self.coeffs or (0.0,), self.coeffs or (0.0,))
            return poly_segment_average(sq, q_a, q_b)
        return float(segment_average(lambda q: self.v(q) ** 2, q_a, q_b, order=64))

    def avg_vf(self, q_a: float, q_b: float) -> float:
        """Uniform segment average of V*F with F = -V'."""
        if self.is_polynomial:
            d = np.polynomial.polynomial.polyder(self.coeffs) if self.coeffs else [0.0]
            vf = -_poly_mul(self.coeffs or (0.0,), d)
            return poly_segment_average(vf, q_a, q_b)
        return float(segment_average(lambda q: -self.v(q) * self.dv(q), q_a, q_b, order=64))

    def avg_f(self, q_a: float, q_b: float) -> float:
        """Uniform segment average of F = -V'."""
        if self.is_polynomial:
            d = np.polynomial.polynomial.polyder(self.coeffs) if self.coeffs else [0.0]
            return poly_segment_average(-np.asarray(d), q_a, q_b)
        return float(segment_average(lambda q: -self.dv(q), q_a, q_b, order=64))

    def measure_avg(self, q_a: float, q_b: float, weights, taus) -> float:
        """Atom-measure segment average: sum_i w_i V((1-t_i) q_a + t_i q_b)."""
        qs = (1.0 - np.asarray(taus)) * q_a + np.asarray(taus) * q_b
        return float(np.sum(np.asarray(weights) * self.v(qs)))


@dataclass(frozen=True)
class MagneticTerm:
    """Velocity-type coupling u0(q), restricted to polynomials."""

    coeffs: tuple

    @staticmethod
    def constant(c: float) -> "MagneticTerm":
        return MagneticTerm((float(c),))

    @staticmethod
    def linear(gamma: float) -> "MagneticTerm":
        return MagneticTerm((0.0, float(gamma)))

    @staticmethod
    def polynomial(coeffs: Sequence[float]) -> "MagneticTerm":
        return MagneticTerm(tuple(float(c) for c in coeffs))

    def u0(self, q):
        return np.polynomial.polynomial.polyval(q, self.coeffs)

    def du0(self, q):
        return np.polynomial.polynomial.polyval(q, np.polynomial.polynomial.polyder(self.coeffs))

    def d2u0(self, q):
        if len(self.coeffs) < 3:
            return np.zeros_like(np.asarray(q, float)) + 0.0
        return np.polynomial.polynomial.polyval(
            q, np.polynomial.polynomial.polyder(self.coeffs, 2))

    def avg_power(self, n: int, q_a: float, q_b: float) -> float:
        """Exact uniform segment average of u0^n."""
        acc = np.array([1.0])
        for _ in range(n):
            acc = _poly_mul(acc, self.coeffs)
        return poly_segment_average(acc, q_a, q_b)

    def avg(self, q_a: float, q_b: float) -> float:
        return self.avg_power(1, q_a, q_b)

    def antiderivative_diff(self, q_a: float, q_b: float) -> float:
        """Integral of u0 over [q_a, q_b] in q (the gauge function increment)."""
        anti = np.polynomial.polynomial.polyint(self.coeffs)
        return float(np.polynomial.polynomial.polyval(q_b, anti)
                     - np.polynomial.polynomial.polyval(q_a, anti))


def parse_potential(text: str, mass: float = 1.0) -> Potential:
    """Parse compact specs: free, linear:F=2.0, harmonic:omega=1.0,
    quartic:lambda=0.1, poly:1,0,0.5, gauss:V0=1,w=0.5."""
    head, _, rest = text.strip().partition(":")
    head = head.lower()
    kv = _parse_kv(rest)
    if head == "free":
        return Potential.free()
    if head == "linear":
        return Potential.linear(_req(kv, "F", text))
    if head == "harmonic":
        return Potential.harmonic(_req(kv, "omega", text), mass)
    if head == "quartic":
        return Potential.quartic(_req(kv, "lambda", text))
    if head == "poly":
        coeffs = [float(c) for c in rest.split(",") if c.strip() != ""]
        if not coeffs:
            raise ValueError(f"empty coefficient list in {text!r}")
        return Potential.polynomial(coeffs)
    if head == "gauss":
        return Potential.gaussian(_req(kv, "V0", text), _req(kv, "w", text))
    raise ValueError(f"unknown potential spec {text!r}")


def parse_magnetic(text: str) -> MagneticTerm:
    """Parse magnetic specs of the form poly:c0,c1,..."""
    head, _, rest = text.strip().partition(":")
    if head.lower() != "poly":
        raise ValueError(f"magnetic term must be poly:..., got {text!r}")
    coeffs = [float(c) for c in rest.split(",") if c.strip() != ""]
    if not coeffs:
        raise ValueError(f"empty coefficient list in {text!r}")
    return MagneticTerm.polynomial(coeffs)


def _parse_kv(rest: str) -> dict:
    out = {}
    if not rest:
        return out
    for part in rest.split(","):
        if "=" in part:
            k, v = part.split("=", 1)
            out[k.strip()] = v.strip()
    return out


def _req(kv: dict, key: str, ctx: str) -> float:
    if key not in kv:
        raise ValueError(f"missing {key}= in potential spec {ctx!r}")
    return float(kv[key])
