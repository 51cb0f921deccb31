"""Exact operator algebra for the canonical pair (q, p) with [q, p] = i*hbar.

Everything in this module is computed over complex rationals graded by powers
of hbar; no floating point enters except in `cohen_multiplier`, which is
explicitly numeric.  Operator polynomials are kept in canonical (normal)
order: every q factor to the left of every p factor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Mapping, Sequence, Tuple

Q = "Q"
P = "P"

Word = Tuple[str, ...]


class GradingError(Exception):
    """An hbar-grade shift would leave the graded scalar ring."""


@dataclass(frozen=True)
class CRat:
    """Complex number with exact rational real and imaginary parts."""

    re: Fraction = Fraction(0)
    im: Fraction = Fraction(0)

    @staticmethod
    def of(value) -> "CRat":
        if isinstance(value, CRat):
            return value
        if isinstance(value, complex):
            return CRat(Fraction(value.real).limit_denominator(10**12),
                        Fraction(value.imag).limit_denominator(10**12))
        return CRat(Fraction(value))

    def __add__(self, other: "CRat") -> "CRat":
        return CRat(self.re + other.re, self.im + other.im)

    def __sub__(self, other: "CRat") -> "CRat":
        return CRat(self.re - other.re, self.im - other.im)

    def __neg__(self) -> "CRat":
        return CRat(-self.re, -self.im)

    def __mul__(self, other: "CRat") -> "CRat":
        return CRat(self.re * other.re - self.im * other.im,
                    self.re * other.im + self.im * other.re)

    def conjugate(self) -> "CRat":
        return CRat(self.re, -self.im)

    def is_zero(self) -> bool:
        return self.re == 0 and self.im == 0

    def __complex__(self) -> complex:
        return complex(float(self.re), float(self.im))

    def __str__(self) -> str:
        if self.im == 0:
            return str(self.re)
        if self.re == 0:
            return f"{self.im}i"
        sign = "+" if self.im > 0 else "-"
        return f"({self.re}{sign}{abs(self.im)}i)"


CR_ZERO = CRat()
CR_ONE = CRat(Fraction(1))
CR_I = CRat(Fraction(0), Fraction(1))


class ExactScalar:
    """Element of the hbar-graded scalar ring: sum_k c_k hbar^k, c_k complex rational."""

    __slots__ = ("terms",)

    def __init__(self, terms: Mapping[int, CRat] | None = None):
        clean = {}
        if terms:
            for k, c in terms.items():
                if k < 0:
                    raise GradingError(f"negative hbar power {k}")
                if not c.is_zero():
                    clean[k] = c
        self.terms = clean

    @staticmethod
    def of(value, hbar_power: int = 0) -> "ExactScalar":
        return ExactScalar({hbar_power: CRat.of(value)})

    def __add__(self, other: "ExactScalar") -> "ExactScalar":
        out = dict(self.terms)
        for k, c in other.terms.items():
            out[k] = out.get(k, CR_ZERO) + c
        return ExactScalar(out)

    def __neg__(self) -> "ExactScalar":
        return ExactScalar({k: -c for k, c in self.terms.items()})

    def __sub__(self, other: "ExactScalar") -> "ExactScalar":
        return self + (-other)

    def __mul__(self, other: "ExactScalar") -> "ExactScalar":
        out: dict[int, CRat] = {}
        for k1, c1 in self.terms.items():
            for k2, c2 in other.terms.items():
                k = k1 + k2
                out[k] = out.get(k, CR_ZERO) + c1 * c2
        return ExactScalar(out)

    def scale(self, c) -> "ExactScalar":
        c = CRat.of(c)
        return ExactScalar({k: v * c for k, v in self.terms.items()})

    def conjugate(self) -> "ExactScalar":
        # hbar is real, so conjugation acts on coefficients only
        return ExactScalar({k: c.conjugate() for k, c in self.terms.items()})

    def shift_grade(self, delta: int) -> "ExactScalar":
        if delta < 0 and any(k + delta < 0 for k in self.terms):
            raise GradingError("hbar grade would become negative")
        return ExactScalar({k + delta: c for k, c in self.terms.items()})

    def min_grade(self) -> int | None:
        return min(self.terms) if self.terms else None

    def is_zero(self) -> bool:
        return not self.terms

    def __eq__(self, other) -> bool:
        return isinstance(other, ExactScalar) and self.terms == other.terms

    def __hash__(self):
        return hash(frozenset(self.terms.items()))

    def __repr__(self):
        if not self.terms:
            return "0"
        return " + ".join(f"{c}*hbar^{k}" if k else str(c)
                          for k, c in sorted(self.terms.items()))


ES_ZERO = ExactScalar()
ES_ONE = ExactScalar.of(1)
# i*hbar, the commutator [q, p]
ES_I_HBAR = ExactScalar({1: CR_I})


class OperatorPoly:
    """Normal-ordered polynomial sum_{a,b} s_{a,b}(hbar) q^a p^b."""

    __slots__ = ("terms",)

    def __init__(self, terms: Mapping[Tuple[int, int], ExactScalar] | None = None):
        clean = {}
        if terms:
            for ab, s in terms.items():
                if not s.is_zero():
                    clean[ab] = s
        self.terms = clean

    @staticmethod
    def zero() -> "OperatorPoly":
        return OperatorPoly()

    @staticmethod
    def identity() -> "OperatorPoly":
        return OperatorPoly({(0, 0): ES_ONE})

    @staticmethod
    def monomial(a: int, b: int, scalar: ExactScalar = ES_ONE) -> "OperatorPoly":
        return OperatorPoly({(a, b): scalar})

    def __add__(self, other: "OperatorPoly") -> "OperatorPoly":
        out = dict(self.terms)
        for ab, s in other.terms.items():
            out[ab] = out.get(ab, ES_ZERO) + s
        return OperatorPoly(out)

    def __neg__(self) -> "OperatorPoly":
        return OperatorPoly({ab: -s for ab, s in self.terms.items()})

    def __sub__(self, other: "OperatorPoly") -> "OperatorPoly":
        return self + (-other)

    def scale(self, s: ExactScalar | CRat | int | Fraction) -> "OperatorPoly":
        if not isinstance(s, ExactScalar):
            s = ExactScalar.of(s)
        return OperatorPoly({ab: t * s for ab, t in self.terms.items()})

    def shift_grade(self, delta: int) -> "OperatorPoly":
        return OperatorPoly({ab: s.shift_grade(delta) for ab, s in self.terms.items()})

    def min_grade(self) -> int | None:
        grades = [s.min_grade() for s in self.terms.values() if not s.is_zero()]
        return min(grades) if grades else None

    def is_zero(self) -> bool:
        return not self.terms

    def __eq__(self, other) -> bool:
        return isinstance(other, OperatorPoly) and self.terms == other.terms

    def __hash__(self):
        return hash(frozenset((ab, s) for ab, s in self.terms.items()))

    def __repr__(self):
        return to_text(self)


def normal_order(word: Sequence[str]) -> OperatorPoly:
    """Rewrite a word over {Q, P} into canonical order via p q -> q p - i*hbar."""
    return _normal_order_cached(tuple(word))


@lru_cache(maxsize=None)
def _normal_order_cached(word: Word) -> OperatorPoly:
    for i in range(len(word) - 1):
        if word[i] == P and word[i + 1] == Q:
            swapped = word[:i] + (Q, P) + word[i + 2:]
            dropped = word[:i] + word[i + 2:]
            return _normal_order_cached(swapped) - \
                _normal_order_cached(dropped).scale(ES_I_HBAR)
    a = sum(1 for c in word if c == Q)
    b = len(word) - a
    return OperatorPoly.monomial(a, b)


def op_mul(A: OperatorPoly, B: OperatorPoly) -> OperatorPoly:
    """Associative product, normal-ordering the cross terms p^b q^c."""
    out = OperatorPoly.zero()
    for (a, b), sa in A.terms.items():
        for (c, d), sb in B.terms.items():
            mid = normal_order((P,) * b + (Q,) * c)
            shifted = OperatorPoly({(a + x, y + d): s for (x, y), s in mid.terms.items()})
            out = out + shifted.scale(sa * sb)
    return out


def commutator(A: OperatorPoly, B: OperatorPoly) -> OperatorPoly:
    return op_mul(A, B) - op_mul(B, A)


def adjoint(A: OperatorPoly) -> OperatorPoly:
    """Formal adjoint: conjugate coefficients, reverse factor order, re-order."""
    out = OperatorPoly.zero()
    for (a, b), s in A.terms.items():
        reversed_word = (P,) * b + (Q,) * a
        out = out + normal_order(reversed_word).scale(s.conjugate())
    return out


@dataclass(frozen=True)
class TauMeasure:
    """Probability measure on [0, 1] selecting an ordering rule.

    kind is one of "point", "uniform", "mixture"; atoms is a tuple of
    (weight, tau) pairs with exact rational entries (empty for uniform).
    """

    kind: str
    atoms: Tuple[Tuple[Fraction, Fraction], ...] = ()

    def __post_init__(self):
        if self.kind not in ("point", "uniform", "mixture"):
            raise ValueError(f"unknown measure kind {self.kind!r}")
        for w, t in self.atoms:
            if not (0 <= t <= 1):
                raise ValueError(f"atom tau={t} outside [0,1]")
            if w <= 0:
                raise ValueError(f"non-positive weight {w}")
        if self.kind in ("point", "mixture"):
            total = sum(w for w, _ in self.atoms)
            if total != 1:
                raise ValueError(f"weights sum to {total}, expected 1")

    @staticmethod
    def point(tau) -> "TauMeasure":
        return TauMeasure("point", ((Fraction(1), Fraction(tau)),))

    @staticmethod
    def uniform() -> "TauMeasure":
        return TauMeasure("uniform")

    @staticmethod
    def mixture(pairs: Iterable[Tuple[Fraction, Fraction]]) -> "TauMeasure":
        return TauMeasure("mixture", tuple((Fraction(w), Fraction(t)) for w, t in pairs))

    def mean(self) -> Fraction:
        if self.kind == "uniform":
            return Fraction(1, 2)
        return sum((w * t for w, t in self.atoms), Fraction(0))

    def reflect(self) -> "TauMeasure":
        """Pushforward under tau -> 1 - tau."""
        if self.kind == "uniform":
            return self
        return TauMeasure(self.kind, tuple((w, 1 - t) for w, t in self.atoms))

    def float_atoms(self):
        """(weights, taus) as floats; None for the uniform measure."""
        if self.kind == "uniform":
            return None
        ws = [float(w) for w, _ in self.atoms]
        ts = [float(t) for _, t in self.atoms]
        return ws, ts


WEYL = TauMeasure.point(Fraction(1, 2))
BORN_JORDAN = TauMeasure.uniform()


def tau_moment(measure: TauMeasure, m: int, r: int) -> Fraction:
    """Exact integral of (1-tau)^m tau^(r-m) against the measure."""
    if not (0 <= m <= r):
        raise ValueError(f"need 0 <= m <= r, got m={m}, r={r}")
    if measure.kind == "uniform":
        # Beta(m+1, r-m+1) = m! (r-m)! / (r+1)!
        return Fraction(math.factorial(m) * math.factorial(r - m),
                        math.factorial(r + 1))
    total = Fraction(0)
    for w, t in measure.atoms:
        total += w * (1 - t) ** m * t ** (r - m)
    return total


def quantize_monomial(s: int, r: int, measure: TauMeasure) -> OperatorPoly:
    """Ordering-rule image of the symbol q^s p^r, normal-ordered."""
    if s < 0 or r < 0:
        raise ValueError("powers must be non-negative")
    out = OperatorPoly.zero()
    for m in range(r + 1):
        weight = Fraction(math.comb(r, m)) * tau_moment(measure, m, r)
        if weight == 0:
            continue
        word = (P,) * (r - m) + (Q,) * s + (P,) * m
        out = out + normal_order(word).scale(weight)
    return out


class PolySymbol:
    """Finitely supported classical symbol sum c_{s,r} q^s p^r."""

    __slots__ = ("coeffs",)

    def __init__(self, coeffs: Mapping[Tuple[int, int], CRat | Fraction | int] | None = None):
        clean = {}
        if coeffs:
            for sr, c in coeffs.items():
                c = CRat.of(c)
                if not c.is_zero():
                    clean[sr] = c
        self.coeffs = clean

    def __eq__(self, other):
        return isinstance(other, PolySymbol) and self.coeffs == other.coeffs

    def __repr__(self):
        if not self.coeffs:
            return "0"
        return " + ".join(f"{c}*q^{s}*p^{r}" for (s, r), c in sorted(self.coeffs.items()))


def quantize_poly(f: PolySymbol, measure: TauMeasure) -> OperatorPoly:
    out = OperatorPoly.zero()
    for (s, r), c in f.coeffs.items():
        out = out + quantize_monomial(s, r, measure).scale(c)
    return out


def poisson_bracket(f: PolySymbol, g: PolySymbol) -> PolySymbol:
    """{f, g} = df/dq dg/dp - df/dp dg/dq, exact."""
    out: dict[Tuple[int, int], CRat] = {}

    def accumulate(sign: int, df: Mapping, dg: Mapping):
        for (s1, r1), c1 in df.items():
            for (s2, r2), c2 in dg.items():
                key = (s1 + s2, r1 + r2)
                term = c1 * c2
                if sign < 0:
                    term = -term
                out[key] = out.get(key, CR_ZERO) + term

    dq_f = {(s - 1, r): c * CRat.of(s) for (s, r), c in f.coeffs.items() if s > 0}
    dp_f = {(s, r - 1): c * CRat.of(r) for (s, r), c in f.coeffs.items() if r > 0}
    dq_g = {(s - 1, r): c * CRat.of(s) for (s, r), c in g.coeffs.items() if s > 0}
    dp_g = {(s, r - 1): c * CRat.of(r) for (s, r), c in g.coeffs.items() if r > 0}
    accumulate(+1, dq_f, dp_g)
    accumulate(-1, dp_f, dq_g)
    return PolySymbol(out)


def bj_product_rule(n: int, r: int) -> OperatorPoly:
    """(1/(i*hbar)) [q^(n+1)/(n+1), p^(r+1)/(r+1)], normal-ordered.

    The division by i*hbar is exact: every commutator term carries at least
    one power of hbar, so the grade shift stays inside the ring.
    """
    if n < 0 or r < 0:
        raise ValueError("powers must be non-negative")
    A = OperatorPoly.monomial(n + 1, 0, ExactScalar.of(Fraction(1, n + 1)))
    B = OperatorPoly.monomial(0, r + 1, ExactScalar.of(Fraction(1, r + 1)))
    comm = commutator(A, B)
    mg = comm.min_grade()
    if mg is not None and mg < 1:
        raise GradingError("commutator has an hbar^0 term; cannot divide by i*hbar")
    # 1/(i*hbar) = -i * hbar^{-1}
    return comm.shift_grade(-1).scale(CRat(Fraction(0), Fraction(-1)))


def bj_sandwich(n: int, r: int) -> OperatorPoly:
    """The q-sandwich monomial form (1/(n+1)) sum_k q^k p^r q^(n-k)."""
    out = OperatorPoly.zero()
    for k in range(n + 1):
        out = out + normal_order((Q,) * k + (P,) * r + (Q,) * (n - k))
    return out.scale(Fraction(1, n + 1))


def cohen_multiplier(measure: TauMeasure, u: float) -> complex:
    """Numeric Cohen multiplier at u = q0*p0/hbar for the mixed tau rule.

    Point/mixture measures evaluate exp(-i(tau-1/2)u) atom by atom; the
    uniform measure has the closed form sin(u/2)/(u/2).
    """
    import cmath
    if measure.kind == "uniform":
        if u == 0:
            return 1.0 + 0.0j
        return complex(math.sin(u / 2) / (u / 2))
    total = 0.0 + 0.0j
    for w, t in measure.atoms:
        total += float(w) * cmath.exp(-1j * (float(t) - 0.5) * u)
    return total


def to_text(A: OperatorPoly) -> str:
    """Canonical text form: terms `coeff * hbar^k * q^a * p^b` sorted by (a, b, k)."""
    if A.is_zero():
        return "0"
    rows = []
    for (a, b), s in A.terms.items():
        for k, c in s.terms.items():
            rows.append((a, b, k, c))
    rows.sort(key=lambda t: (t[0], t[1], t[2]))
    parts = []
    for a, b, k, c in rows:
        factors = [str(c)]
        if k:
            factors.append(f"hbar^{k}")
        if a:
            factors.append(f"q^{a}")
        if b:
            factors.append(f"p^{b}")
        parts.append(" * ".join(factors))
    return " + ".join(parts)
