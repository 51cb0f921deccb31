"""Position-representation kernels on uniform grids.

Transform convention (fixed for reproducibility): the forward transform is the
unnormalized sum sum_j x_j e^{-2 pi i j k / n}.  The conjugate momentum grid is
centered, p_j = 2 pi hbar j / (n dq) for j in {-n/2, ..., n/2 - 1}, so that
p (q_i - q_j) / hbar = 2 pi k (i - j) / n on-grid.

Normalization: operator matrices (kernel_matrix, kinetic_matrix) absorb the dq
integration weight, i.e. entry(i,j) = (1/n) sum_k fbar(q_i, q_j, p_k)
e^{2 pi i k (i-j)/n}, and act on wavefunction samples by plain matrix-vector
product.  Integral kernels (short_time_kernel) keep the 1/(n dq) density
normalization and are applied with an explicit dq weight.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .catalog import MagneticTerm, Potential, gl_nodes
from .exact import TauMeasure


@dataclass(frozen=True)
class Grid1D:
    """Uniform position grid with its conjugate centered momentum grid."""

    q_min: float
    q_max: float
    n: int
    hbar: float = 1.0

    def __post_init__(self):
        if self.n < 8 or self.n % 2:
            raise ValueError("grid size must be even and >= 8")
        if self.q_max <= self.q_min:
            raise ValueError("need q_max > q_min")
        if self.hbar <= 0:
            raise ValueError("hbar must be positive")

    @property
    def dq(self) -> float:
        return (self.q_max - self.q_min) / self.n

    @property
    def q(self) -> np.ndarray:
        return self.q_min + self.dq * np.arange(self.n)

    @property
    def p(self) -> np.ndarray:
        """Momenta in ascending order, j = -n/2 .. n/2 - 1."""
        j = np.arange(-self.n // 2, self.n // 2)
        return 2.0 * np.pi * self.hbar * j / (self.n * self.dq)


def _toeplitz_from_multiplier(g: Grid1D, F_centered: np.ndarray) -> np.ndarray:
    """Matrix of the Fourier multiplier F(p): M[i,j] = (1/n) sum_k F_k
    e^{2 pi i k (i-j)/n} with k running over the centered momentum grid."""
    d = np.fft.ifft(np.fft.ifftshift(F_centered))
    idx = (np.arange(g.n)[:, None] - np.arange(g.n)[None, :]) % g.n
    return d[idx]


@dataclass(frozen=True)
class SymbolFunction:
    """Classical phase-space function H(q, p) with declared structure.

    fn evaluates vectorized in q at scalar p.  p_degree is the declared
    polynomial degree in p (None if non-polynomial); separable marks
    T(p) + V(q) form.  q_poly_avg, if given, returns the exact uniform
    segment average of the p-coefficient functions (index -> callable
    (qa, qb) -> average), used to bypass quadrature.  provenance optionally
    carries the originating classical.HamiltonianSpec.
    """

    fn: Callable
    p_degree: Optional[int] = None
    separable: bool = False
    name: str = "symbol"
    q_poly_avg: Optional[dict] = None
    q_coeff: Optional[dict] = None   # index -> callable q -> coefficient of p^index
    provenance: object = None

    def __call__(self, q, p):
        return self.fn(q, p)

    # -- constructors -------------------------------------------------------
    @staticmethod
    def from_hamiltonian(spec) -> "SymbolFunction":
        """Symbol p^2/2m + u0(q) p + V(q) from a classical.HamiltonianSpec."""
        m, V, u0 = spec.m, spec.V, spec.u0

        def fn(q, p):
            out = p * p / (2.0 * m) + V.v(q)
            if u0 is not None:
                out = out + u0.u0(q) * p
            return out

        coeff = {0: V.v, 2: lambda q: np.full_like(np.asarray(q, float), 1.0 / (2 * m))}
        avg = {2: lambda qa, qb: np.full_like(np.asarray(qa, float), 1.0 / (2 * m))}
        if V.is_polynomial:
            avg[0] = lambda qa, qb: _poly_avg_vec(V.coeffs or (0.0,), qa, qb)
        if u0 is not None:
            coeff[1] = u0.u0
            avg[1] = lambda qa, qb: _poly_avg_vec(u0.coeffs, qa, qb)
        return SymbolFunction(fn, p_degree=2, separable=(u0 is None),
                              name=f"H[m={m}]", q_poly_avg=avg, q_coeff=coeff,
                              provenance=spec)

    @staticmethod
    def monomial(s: int, r: int) -> "SymbolFunction":
        """q^s p^r."""
        coeffs = tuple([0.0] * s + [1.0])

        def fn(q, p):
            return np.asarray(q, float) ** s * p ** r

        return SymbolFunction(
            fn, p_degree=r, separable=(s == 0 or r == 0), name=f"q^{s}p^{r}",
            q_poly_avg={r: lambda qa, qb: _poly_avg_vec(coeffs, qa, qb)},
            q_coeff={r: lambda q: np.asarray(q, float) ** s})

    @staticmethod
    def potential_only(V: Potential) -> "SymbolFunction":
        avg = {0: (lambda qa, qb: _poly_avg_vec(V.coeffs or (0.0,), qa, qb))} \
            if V.is_polynomial else None
        return SymbolFunction(lambda q, p: V.v(q) + 0.0 * p, p_degree=0,
                              separable=True, name=f"V[{V.kind}]",
                              q_poly_avg=avg, q_coeff={0: V.v})


def _poly_avg_vec(coeffs, qa, qb):
    """Vectorized exact uniform segment average of a polynomial."""
    qa = np.asarray(qa, float)
    qb = np.asarray(qb, float)
    anti = np.polynomial.polynomial.polyint(coeffs)
    num = np.polynomial.polynomial.polyval(qb, anti) \
        - np.polynomial.polynomial.polyval(qa, anti)
    dq = qb - qa
    mid = np.polynomial.polynomial.polyval(qa, coeffs)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(np.abs(dq) > 1e-300, num / np.where(dq == 0, 1.0, dq), mid)
    return out


def average_symbol(H: SymbolFunction, q_a, q_b, p: float, P: TauMeasure):
    """Measure-average of H along the straight segment q_a -> q_b at fixed p.

    Point masses and mixtures evaluate exactly at their atoms; the uniform
    measure uses exact polynomial segment moments when the symbol declares
    them and Gauss-Legendre order 32 otherwise.  Accepts broadcastable arrays
    for the endpoints.
    """
    q_a = np.asarray(q_a, float)
    q_b = np.asarray(q_b, float)
    if P.kind == "uniform":
        if H.q_poly_avg is not None and H.p_degree is not None:
            out = 0.0
            for k in range(H.p_degree + 1):
                if k in H.q_poly_avg:
                    out = out + H.q_poly_avg[k](q_a, q_b) * p ** k
                elif H.q_coeff is not None and k in H.q_coeff:
                    out = out + _gl_average(H.q_coeff[k], q_a, q_b) * p ** k
            return out
        t, w = gl_nodes(32)
        out = 0.0
        for ti, wi in zip(t, w):
            out = out + wi * H((1.0 - ti) * q_a + ti * q_b, p)
        return out
    w, t = P.float_atoms()
    out = 0.0
    for wi, ti in zip(w, t):
        out = out + wi * H((1.0 - ti) * q_a + ti * q_b, p)
    return out


def _gl_average(f, q_a, q_b, order: int = 32):
    t, w = gl_nodes(order)
    qa = np.asarray(q_a, float)[..., None]
    qb = np.asarray(q_b, float)[..., None]
    vals = f((1.0 - t) * qa + t * qb)
    return np.sum(w * vals, axis=-1)


@dataclass
class KernelMatrix:
    """Complex operator matrix on a grid, with provenance metadata."""

    entries: np.ndarray
    grid: Grid1D
    meta: dict = field(default_factory=dict)

    def hermiticity_defect(self) -> float:
        K = self.entries
        denom = np.linalg.norm(K)
        return float(np.linalg.norm(K - K.conj().T) / denom) if denom else 0.0

    def apply(self, psi: "WaveFunction") -> "WaveFunction":
        return WaveFunction(self.entries @ psi.values, self.grid)


def kernel_matrix(f: SymbolFunction, g: Grid1D, P: TauMeasure,
                  p_cutoff: Optional[float] = None) -> KernelMatrix:
    """Quantization-kernel matrix of the symbol under the measure P.

    entry(i, j) = (1/n) sum_k avg(f; q_i, q_j, p_k) e^{2 pi i k (i-j)/n}.
    Symbols polynomial in p of degree <= 2 decompose into Hadamard products
    of averaged-coefficient matrices with Fourier-multiplier matrices (p=0,
    +-1 probe evaluations); higher degrees require an explicit p_cutoff and
    take the direct O(n^3) route.
    """
    if (f.p_degree is None or f.p_degree > 2) and p_cutoff is None:
        raise ValueError(
            "symbol is not polynomial of degree <= 2 in p; pass p_cutoff")
    if f.p_degree is not None and f.p_degree <= 2:
        QI, QJ = np.meshgrid(g.q, g.q, indexing="ij")
        A0 = np.asarray(average_symbol(f, QI, QJ, 0.0, P), float)
        if f.p_degree == 0:
            K = _toeplitz_from_multiplier(g, np.ones(g.n)) * A0
        else:
            Ap = np.asarray(average_symbol(f, QI, QJ, 1.0, P), float)
            Am = np.asarray(average_symbol(f, QI, QJ, -1.0, P), float)
            C1 = 0.5 * (Ap - Am)
            C2 = 0.5 * (Ap + Am) - A0
            K = (_toeplitz_from_multiplier(g, np.ones(g.n)) * A0
                 + _toeplitz_from_multiplier(g, g.p) * C1
                 + _toeplitz_from_multiplier(g, g.p ** 2) * C2)
    else:
        K = _direct_kernel(lambda qa, qb, p: average_symbol(f, qa, qb, p, P),
                           g, p_cutoff)
    return KernelMatrix(K, g, {"symbol": f.name, "measure": P.kind})


def _direct_kernel(avg, g: Grid1D, p_cutoff: Optional[float]) -> np.ndarray:
    p = g.p
    keep = np.ones_like(p, bool) if p_cutoff is None else (np.abs(p) <= p_cutoff)
    k = np.arange(-g.n // 2, g.n // 2)[keep]
    p = p[keep]
    K = np.empty((g.n, g.n), complex)
    q = g.q
    for i in range(g.n):
        F = np.asarray(avg(q[i], q[:, None], p[None, :]), float)
        phase = np.exp(2j * np.pi * k[None, :] * (i - np.arange(g.n)[:, None]) / g.n)
        K[i, :] = np.sum(F * phase, axis=1) / g.n
    return K


def kinetic_matrix(g: Grid1D, m: float) -> KernelMatrix:
    """Fourier-multiplier matrix of p^2/2m (Hermitian Toeplitz)."""
    if m <= 0:
        raise ValueError("mass must be positive")
    K = _toeplitz_from_multiplier(g, g.p ** 2 / (2.0 * m))
    return KernelMatrix(K, g, {"symbol": f"p^2/2m[m={m}]", "measure": "any"})


def short_time_kernel(H: SymbolFunction, g: Grid1D, dt: float,
                      P: TauMeasure) -> KernelMatrix:
    """Integral kernel (1/(n dq)) sum_p e^{i (p dq_ij - Hbar(q_j, q_i, p) dt)/hbar}.

    Applied with an explicit dq weight; for quadratic-in-p symbols the p-sum
    approximates the closed Gaussian slice form.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if H.p_degree is None or H.p_degree > 2:
        raise ValueError("short-time kernel needs p-degree <= 2")
    q, p, hb = g.q, g.p, g.hbar
    K = np.empty((g.n, g.n), complex)
    if H.separable and H.p_degree == 2:
        # exp factorizes: kinetic Toeplitz row times potential phase
        QI, QJ = np.meshgrid(q, q, indexing="ij")
        vbar = np.asarray(average_symbol(
            SymbolFunction(H.fn, 0, True, H.name, H.q_poly_avg,
                           H.q_coeff, H.provenance), QJ, QI, 0.0, P), float)
        c2 = float(np.asarray(average_symbol(H, 0.0, 0.0, 1.0, P))
                   - np.asarray(average_symbol(H, 0.0, 0.0, 0.0, P)))
        idx = (np.arange(g.n)[:, None] - np.arange(g.n)[None, :]) % g.n
        d = np.fft.ifft(np.fft.ifftshift(np.exp(-1j * c2 * p * p * dt / hb))) / g.dq
        K = d[idx] * np.exp(-1j * vbar * dt / hb)
        # kinetic phase e^{i p dq_ij / hbar} is exactly the DFT twiddle on-grid
    else:
        for i in range(g.n):
            F = np.asarray(average_symbol(H, q[:, None], q[i], p[None, :], P), float)
            phase = np.exp(1j * (p[None, :] * (q[i] - q[:, None]) - F * dt) / hb)
            K[i, :] = np.sum(phase, axis=1) / (g.n * g.dq)
    return KernelMatrix(K, g, {"symbol": H.name, "measure": P.kind, "dt": dt})


@dataclass
class WaveFunction:
    """Complex samples on a grid with dq-weighted 2-norm."""

    values: np.ndarray
    grid: Grid1D

    def __post_init__(self):
        self.values = np.asarray(self.values, complex)
        if self.values.shape != (self.grid.n,):
            raise ValueError("wavefunction length must match the grid")

    def norm(self) -> float:
        return float(np.sqrt(self.grid.dq * np.sum(np.abs(self.values) ** 2)))

    def normalized(self) -> "WaveFunction":
        nrm = self.norm()
        if nrm == 0:
            raise ValueError("cannot normalize the zero wavefunction")
        return WaveFunction(self.values / nrm, self.grid)

    @staticmethod
    def gaussian(g: Grid1D, q0: float = 0.0, sigma: float = 1.0,
                 p0: float = 0.0) -> "WaveFunction":
        q = g.q
        psi = np.exp(-(q - q0) ** 2 / (4.0 * sigma ** 2) + 1j * p0 * q / g.hbar)
        return WaveFunction(psi, g).normalized()


def apply_pseudodiff(H: SymbolFunction, P: TauMeasure, psi: WaveFunction,
                     E: float) -> WaveFunction:
    """Cutoff pseudo-differential application:
    (H psi)(q_i) = (1/n) sum_j sum_p Hbar(q_j, q_i, p) 1{|Hbar| <= E}
    e^{i p (q_i - q_j)/hbar} psi(q_j)."""
    g = psi.grid
    q, p = g.q, g.p
    k = np.arange(-g.n // 2, g.n // 2)
    out = np.empty(g.n, complex)
    for i in range(g.n):
        F = np.asarray(average_symbol(H, q[:, None], q[i], p[None, :], P), float)
        F = np.where(np.abs(F) <= E, F, 0.0)
        phase = np.exp(2j * np.pi * k[None, :] * (i - np.arange(g.n)[:, None]) / g.n)
        out[i] = np.sum(F * phase * psi.values[:, None]) / g.n
    return WaveFunction(out, g)


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

_HEADER = struct.Struct("<q3d")  # n, q_min, q_max, hbar


def save_matrix_csv(path, K: KernelMatrix, comment: str = "") -> None:
    """Row-major CSV of re,im pairs, with a header row and optional comment."""
    n = K.grid.n
    with open(path, "w") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        fh.write(",".join(f"re{j},im{j}" for j in range(n)) + "\n")
        for row in K.entries:
            fh.write(",".join(f"{z.real:.17g},{z.imag:.17g}" for z in row) + "\n")


def save_matrix_bin(path, K: KernelMatrix) -> None:
    g = K.grid
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(g.n, g.q_min, g.q_max, g.hbar))
        inter = np.empty((g.n, g.n, 2))
        inter[..., 0] = K.entries.real
        inter[..., 1] = K.entries.imag
        fh.write(inter.astype("<f8").tobytes())


def load_matrix_bin(path) -> KernelMatrix:
    with open(path, "rb") as fh:
        n, q_min, q_max, hbar = _HEADER.unpack(fh.read(_HEADER.size))
        data = np.frombuffer(fh.read(), dtype="<f8").reshape(n, n, 2)
    g = Grid1D(q_min, q_max, n, hbar)
    return KernelMatrix(data[..., 0] + 1j * data[..., 1], g)


def save_wavefunction_bin(path, psi: WaveFunction) -> None:
    g = psi.grid
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(g.n, g.q_min, g.q_max, g.hbar))
        inter = np.empty((g.n, 2))
        inter[:, 0] = psi.values.real
        inter[:, 1] = psi.values.imag
        fh.write(inter.astype("<f8").tobytes())


def load_wavefunction_bin(path) -> WaveFunction:
    with open(path, "rb") as fh:
        n, q_min, q_max, hbar = _HEADER.unpack(fh.read(_HEADER.size))
        data = np.frombuffer(fh.read(), dtype="<f8").reshape(n, 2)
    g = Grid1D(q_min, q_max, n, hbar)
    return WaveFunction(data[:, 0] + 1j * data[:, 1], g)
