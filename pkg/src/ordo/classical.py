"""Classical engine: Hamilton flows, two-point boundary solves at small
duration, secular expansion profiles, and short-time action asymptotics.

Conventions: the trajectory from (q_a, 0) to (q_b, eps) is reparametrized by
tau = t/eps in [0, 1]; the straight-line interpolant is
q_seg(tau) = (1-tau) q_a + tau q_b.  The momentum path develops a 1/eps
singular (secular) leading term pi_{-1} = m (q_b - q_a).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from numpy.polynomial import polynomial as npoly
from scipy.integrate import cumulative_simpson, simpson

from .catalog import MagneticTerm, Potential, gl_nodes

TAU_SAMPLES_DEFAULT = 2049


class NoConvergenceError(Exception):
    """Shooting iteration failed to reach the endpoint tolerance."""


class ConjugatePointError(Exception):
    """The endpoint map p_a -> q(eps) is (numerically) singular."""


class DegenerateEndpointsError(Exception):
    """q_a == q_b is not admissible for series operations (1/dq factors)."""


class TrajectoryOverflowError(Exception):
    """The flow left the representable range (runaway trajectory)."""


@dataclass(frozen=True)
class HamiltonianSpec:
    """H(q, p) = p^2/2m + u0(q) p + V(q) with constant mass."""

    m: float
    V: Potential
    u0: Optional[MagneticTerm] = None

    def __post_init__(self):
        if self.m <= 0:
            raise ValueError("mass must be positive")

    def hamiltonian(self, q, p):
        out = p * p / (2.0 * self.m) + self.V.v(q)
        if self.u0 is not None:
            out = out + self.u0.u0(q) * p
        return out

    def rhs(self, q, p):
        """Hamilton vector field (dq/dt, dp/dt)."""
        dq = p / self.m
        dp = -self.V.dv(q)
        if self.u0 is not None:
            dq = dq + self.u0.u0(q)
            dp = dp - self.u0.du0(q) * p
        return dq, dp

    def effective_potential(self):
        """V - m u0^2 / 2; the u0 coupling in 1D is this shift plus a
        path-independent boundary term m * int u0 dq."""
        if self.u0 is None:
            return self.V
        u_sq = npoly.polymul(self.u0.coeffs, self.u0.coeffs) * (-0.5 * self.m)
        if self.V.is_polynomial:
            coeffs = npoly.polyadd(self.V.coeffs or (0.0,), u_sq)
            return Potential.polynomial(coeffs)
        return _ShiftedGauss(self.V, tuple(u_sq))


@dataclass(frozen=True)
class _ShiftedGauss:
    """Gaussian potential plus a polynomial offset (internal, callable-compatible)."""

    base: Potential
    extra: tuple

    is_polynomial = False
    kind = "gauss+poly"

    def v(self, q):
        return self.base.v(q) + npoly.polyval(q, self.extra)

    def dv(self, q):
        return self.base.dv(q) + npoly.polyval(q, npoly.polyder(self.extra))

    def d2v(self, q):
        return self.base.d2v(q) + npoly.polyval(q, npoly.polyder(self.extra, 2))

    def avg(self, q_a, q_b):
        from .catalog import poly_segment_average
        return self.base.avg(q_a, q_b) + poly_segment_average(self.extra, q_a, q_b)


def hamilton_rhs(H: HamiltonianSpec, q: float, p: float):
    return H.rhs(q, p)


@dataclass
class PhasePath:
    """Sampled trajectory on a uniform tau grid with endpoints (q_a, q_b)."""

    eps: float
    tau: np.ndarray
    q: np.ndarray
    p: np.ndarray
    q_a: float
    q_b: float

    def endpoint_residual(self) -> float:
        return abs(self.q[-1] - self.q_b)


def integrate_ivp(H: HamiltonianSpec, q_a: float, p_a: float, eps: float,
                  n_steps: int = 256) -> PhasePath:
    """Classical fixed-step RK4 flow of Hamilton's equations over [0, eps]."""
    if n_steps == 0:
        tau = np.array([0.0])
        return PhasePath(eps, tau, np.array([q_a]), np.array([p_a]), q_a, q_a)
    if n_steps < 16:
        raise ValueError("n_steps must be >= 16 (or 0 for the trivial path)")
    h = eps / n_steps
    q = np.empty(n_steps + 1)
    p = np.empty(n_steps + 1)
    q[0], p[0] = q_a, p_a
    qc, pc = float(q_a), float(p_a)
    for i in range(n_steps):
        k1q, k1p = H.rhs(qc, pc)
        k2q, k2p = H.rhs(qc + 0.5 * h * k1q, pc + 0.5 * h * k1p)
        k3q, k3p = H.rhs(qc + 0.5 * h * k2q, pc + 0.5 * h * k2p)
        k4q, k4p = H.rhs(qc + h * k3q, pc + h * k3p)
        qc = qc + (h / 6.0) * (k1q + 2 * k2q + 2 * k3q + k4q)
        pc = pc + (h / 6.0) * (k1p + 2 * k2p + 2 * k3p + k4p)
        if not (math.isfinite(qc) and math.isfinite(pc)) or abs(qc) > 1e12 or abs(pc) > 1e14:
            raise TrajectoryOverflowError(
                f"trajectory diverged at step {i + 1}/{n_steps}: q={qc}, p={pc}")
        q[i + 1], p[i + 1] = qc, pc
    tau = np.linspace(0.0, 1.0, n_steps + 1)
    return PhasePath(eps, tau, q, p, q_a, float(q[-1]))


def solve_bvp(H: HamiltonianSpec, q_a: float, q_b: float, eps: float,
              tol: float = 1e-12, n_steps: int = 256,
              max_iter: int = 60) -> PhasePath:
    """Shooting on p_a with secant updates; the initial guess comes from the
    secular profiles, which keeps iteration counts O(1) uniformly in eps."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    p0 = _secular_initial_momentum(H, q_a, q_b, eps)

    def endpoint(p_init: float) -> float:
        return integrate_ivp(H, q_a, p_init, eps, n_steps).q[-1] - q_b

    g0 = endpoint(p0)
    if abs(g0) <= tol:
        path = integrate_ivp(H, q_a, p0, eps, n_steps)
        path.q_b = q_b
        return path
    scale = max(abs(p0), H.m * (abs(q_b - q_a) + 1.0) / eps)
    p1 = p0 + 1e-6 * scale
    g1 = endpoint(p1)
    for _ in range(max_iter):
        denom = g1 - g0
        slope = denom / (p1 - p0) if p1 != p0 else 0.0
        # endpoint map sensitivity ~ eps/m for regular points
        if abs(slope) < 1e-8 * eps / H.m:
            raise ConjugatePointError(
                f"endpoint map is singular (dq_b/dp_a ~ {slope:.3e}) at eps={eps}")
        p2 = p1 - g1 * (p1 - p0) / denom
        g2 = endpoint(p2)
        p0, g0, p1, g1 = p1, g1, p2, g2
        if abs(g1) <= tol:
            path = integrate_ivp(H, q_a, p1, eps, n_steps)
            path.q_b = q_b
            return path
    raise NoConvergenceError(
        f"shooting did not reach |q(eps)-q_b| <= {tol} in {max_iter} iterations "
        f"(residual {abs(g1):.3e})")


def _secular_initial_momentum(H: HamiltonianSpec, q_a: float, q_b: float,
                              eps: float) -> float:
    if q_a == q_b:
        p = 0.0
        if H.u0 is not None:
            p -= H.m * float(H.u0.u0(q_a))
        return p
    prof = secular_profiles(H, q_a, q_b, n_tau=65)
    p = prof.pi_minus1 / eps + prof.pi1[0] * eps
    if H.u0 is not None:
        p += prof.pi0[0]
    return p


def action_along(path: PhasePath, H: HamiltonianSpec) -> float:
    """Composite-Simpson quadrature of p dq - H dt along a sampled solution."""
    t = path.tau * path.eps
    qdot, _ = H.rhs(path.q, path.p)
    integrand = path.p * qdot - H.hamiltonian(path.q, path.p)
    return float(simpson(integrand, x=t))


def exact_action(kind: str, params: dict, q_a: float, q_b: float, eps: float,
                 m: float = 1.0) -> float:
    """Closed-form classical actions for the free, constant-force, and
    harmonic cases."""
    dq = q_b - q_a
    if kind == "free":
        return 0.5 * m * dq * dq / eps
    if kind == "linear":
        F = params["F"]
        return 0.5 * m * dq * dq / eps + 0.5 * F * (q_a + q_b) * eps \
            - F * F * eps ** 3 / (24.0 * m)
    if kind == "harmonic":
        w = params["omega"]
        s = math.sin(w * eps)
        if abs(s) < 1e-14:
            raise ConjugatePointError(f"sin(omega*eps)=0 at omega*eps={w * eps}")
        return (m * w / (2.0 * s)) * ((q_a ** 2 + q_b ** 2) * math.cos(w * eps)
                                      - 2.0 * q_a * q_b)
    raise ValueError(f"no closed-form action for kind {kind!r}")


def path_average(f: Callable, q_a: float, q_b: float,
                 poly_coeffs: Optional[Sequence[float]] = None) -> float:
    """Uniform average of f along the straight segment; exact for polynomials."""
    from .catalog import poly_segment_average, segment_average
    if poly_coeffs is not None:
        return poly_segment_average(poly_coeffs, q_a, q_b)
    return float(segment_average(f, q_a, q_b))


# ---------------------------------------------------------------------------
# Secular profiles
# ---------------------------------------------------------------------------

@dataclass
class SecularProfile:
    """Expansion profiles of the two-point trajectory at fixed separation.

    q(tau) = q_seg + eps^2 chi2 + eps^4 chi4 + ...,
    p(tau) = pi_{-1}/eps + pi0 + eps pi1 + eps^2 pi2 + eps^3 pi3 + ...

    pi2 solves d(pi2)/dtau = -u0'(q_seg) pi1 - m dq u0''(q_seg) chi2 with
    pi2(0) = 0, equivalently pi2 = -m u0'(q_seg) chi2.
    """

    tau: np.ndarray
    pi_minus1: float
    pi0: np.ndarray
    pi1: np.ndarray
    pi2: np.ndarray
    pi3: np.ndarray
    chi2: np.ndarray
    chi4: np.ndarray
    vanishing: dict = field(default_factory=dict)

    def mean(self, name: str) -> float:
        return float(simpson(getattr(self, name), x=self.tau))


def secular_profiles(H: HamiltonianSpec, q_a: float, q_b: float,
                     n_tau: int = TAU_SAMPLES_DEFAULT) -> SecularProfile:
    """Profiles pi_n / chi_n sampled on a uniform tau grid.

    pi1 integrates the momentum equation along the segment with zero mean;
    chi2 integrates pi1/m from chi2(0) = 0; pi3 integrates its own equation
    with the constant fixed by zero mean, which makes chi4(1) = 0 emerge
    rather than being imposed.
    """
    if q_a == q_b:
        raise DegenerateEndpointsError("secular profiles need q_a != q_b")
    if n_tau % 2 == 0:
        n_tau += 1
    tau = np.linspace(0.0, 1.0, n_tau)
    dq = q_b - q_a
    m = H.m
    qs = (1.0 - tau) * q_a + tau * q_b
    V, u0 = H.V, H.u0

    def cumint(y):
        return np.concatenate(([0.0], cumulative_simpson(y, x=tau)))

    def zero_mean(y):
        return y - simpson(y, x=tau)

    pi_minus1 = m * dq
    if u0 is None:
        pi0 = np.zeros_like(tau)
        dpi1 = -np.asarray(V.dv(qs), float)
        pi1 = zero_mean(cumint(dpi1))
        chi2 = cumint(pi1) / m
        pi2 = np.zeros_like(tau)
        dpi3 = -np.asarray(V.d2v(qs), float) * chi2
        pi3 = zero_mean(cumint(dpi3))
        chi4 = cumint(pi3) / m
        vanishing = {"pi0": True, "pi2": True, "chi1": True, "chi3": True}
    else:
        u = np.asarray(u0.u0(qs), float)
        du = np.asarray(u0.du0(qs), float)
        d2u = np.asarray(u0.d2u0(qs), float)
        pi0 = -m * u
        dpi1 = -du * pi0 - np.asarray(V.dv(qs), float)
        pi1 = zero_mean(cumint(dpi1))
        chi2 = cumint(pi1) / m
        pi2 = -m * du * chi2
        dpi3 = -du * pi2 - d2u * chi2 * pi0 - np.asarray(V.d2v(qs), float) * chi2
        pi3 = zero_mean(cumint(dpi3))
        chi4 = cumint(pi3) / m
        vanishing = {"pi0": False, "pi2": bool(np.all(pi2 == 0.0)),
                     "chi1": True, "chi3": True}
    return SecularProfile(tau, pi_minus1, pi0, pi1, pi2, pi3, chi2, chi4, vanishing)


def pi3_closed_form(H: HamiltonianSpec, q_a: float, q_b: float,
                    tau: np.ndarray) -> np.ndarray:
    """The commonly quoted closed form -(V'(q_seg) - avg V')/dq.

    Differentiating it gives -V''(q_seg), which is inconsistent with the
    defining equation d(pi3)/dtau = -V''(q_seg) chi2 unless chi2 == 1; it is
    kept only for the discrepancy report.
    """
    dq = q_b - q_a
    qs = (1.0 - tau) * q_a + tau * q_b
    vp = np.asarray(H.V.dv(qs), float)
    return -(vp - simpson(vp, x=tau)) / dq


def pi2_closed_form(H: HamiltonianSpec, q_a: float, q_b: float,
                    tau: np.ndarray) -> np.ndarray:
    """Quoted magnetic closed form -m u0'(q_seg); the defining equation is
    solved by -m u0'(q_seg) chi2(tau) instead (discrepancy report entry)."""
    if H.u0 is None:
        return np.zeros_like(tau)
    qs = (1.0 - tau) * q_a + tau * q_b
    return -H.m * np.asarray(H.u0.du0(qs), float)


def magnetic_pi1_closed_form(H: HamiltonianSpec, q_a: float, q_b: float,
                             tau: np.ndarray) -> np.ndarray:
    """Quoted magnetic pi1 with m u0^2 (no 1/2).  Integrating
    d(pi1)/dtau = -u0'(q_seg) pi0 - V'(q_seg) = +m u0 u0' - V' yields the
    coefficient m/2 instead; kept for the discrepancy report."""
    if H.u0 is None:
        raise ValueError("magnetic closed form needs u0")
    dq = q_b - q_a
    qs = (1.0 - tau) * q_a + tau * q_b
    u = np.asarray(H.u0.u0(qs), float)
    v = np.asarray(H.V.v(qs), float)
    val = H.m * u * u - v
    return (val - simpson(val, x=tau)) / dq


def chi2_harmonic_quoted(omega: float, q_a: float, q_b: float,
                         tau: np.ndarray) -> np.ndarray:
    """Often-quoted oscillator chi2; disagrees with the eps^2 expansion of
    the exact solution (discrepancy report entry)."""
    return 0.5 * omega ** 2 * q_a * tau * (1.0 - tau ** 2) \
        + omega ** 2 / 6.0 * q_b * tau * (1.0 - tau ** 3)


def chi2_harmonic_derived(omega: float, q_a: float, q_b: float,
                          tau: np.ndarray) -> np.ndarray:
    """eps^2 coefficient of the exact oscillator two-point path."""
    return 0.5 * omega ** 2 * q_a * tau * (1.0 - tau) \
        + omega ** 2 / 6.0 * (q_b - q_a) * tau * (1.0 - tau ** 2)


# ---------------------------------------------------------------------------
# Action series
# ---------------------------------------------------------------------------

@dataclass
class ActionSeries:
    """Coefficients of S(eps) ~ c_{-1}/eps + c0 + c1 eps + c2 eps^2 + c3 eps^3
    + c5 eps^5, with a provenance tag per coefficient."""

    c_minus1: float
    c0: float
    c1: float
    c2: float
    c3: float
    c5: float
    provenance: dict = field(default_factory=dict)


def action_series(H: HamiltonianSpec, q_a: float, q_b: float) -> ActionSeries:
    """Short-time expansion coefficients from segment averages.

    Without u0: c_{-1} = m dq^2/2, c1 = -avg(V), c3 = -var(V)/(2 m dq^2) and
    c5 is the designated candidate route (see `c5_candidates`).  With u0 the
    coupling contributes the boundary term c0 = -m int u0 dq and shifts the
    potential to V - m u0^2/2; the eps^2 coefficient vanishes identically in
    one dimension (the secular integral below evaluates it and doubles as a
    consistency check).
    """
    if q_a == q_b:
        raise DegenerateEndpointsError("action series needs q_a != q_b")
    dq = q_b - q_a
    m = H.m
    prov = {"c_minus1": "free-kinetic", "c3": "segment-variance"}
    c_minus1 = 0.5 * m * dq * dq
    if H.u0 is None:
        c0 = 0.0
        c2 = 0.0
        vbar = H.V.avg(q_a, q_b)
        var = H.V.avg_sq(q_a, q_b) - vbar * vbar
        c1 = -vbar
        c3 = -var / (2.0 * m * dq * dq)
        cands = c5_candidates(H, q_a, q_b)
        c5 = cands["c"]
        prov.update({"c0": "zero (no u0)", "c1": "segment-average",
                     "c2": "zero (no u0)",
                     "c5": "designated route (c): -(1/2m) int pi1 pi3"})
    else:
        u0 = H.u0
        c0 = -m * u0.antiderivative_diff(q_a, q_b)
        c1 = 0.5 * m * u0.avg_power(2, q_a, q_b) - H.V.avg(q_a, q_b)
        c2 = _magnetic_eps2_secular(H, q_a, q_b)
        veff = H.effective_potential()
        vbar = veff.avg(q_a, q_b)
        var = _avg_sq(veff, q_a, q_b) - vbar * vbar
        c3 = -var / (2.0 * m * dq * dq)
        c5 = _c5_from_profiles(m, _effective_profiles(H, q_a, q_b))["c"]
        prov.update({"c0": "gauge boundary term -m int u0 dq",
                     "c1": "segment-average (effective potential)",
                     "c2": "secular integral (vanishes identically in 1D)",
                     "c3": "segment-variance (effective potential)",
                     "c5": "designated route (c) on effective potential"})
    return ActionSeries(c_minus1, c0, c1, c2, c3, c5, prov)


def magnetic_c2_closed_form(H: HamiltonianSpec, q_a: float, q_b: float) -> float:
    """Quoted closed form for the eps^2 magnetic coefficient,
    -(m avg(u0^3) - avg(u0 V) - m avg(u0) avg(u0^2) + avg(u0) avg(V))/dq.

    The coefficient actually vanishes in 1D (the u0 p coupling is a gauge
    term plus a potential shift); kept for the discrepancy report.
    """
    if H.u0 is None:
        return 0.0
    dq = q_b - q_a
    u0, V = H.u0, H.V
    u3 = u0.avg_power(3, q_a, q_b)
    u2 = u0.avg_power(2, q_a, q_b)
    u1 = u0.avg(q_a, q_b)
    if V.is_polynomial:
        from .catalog import poly_segment_average
        uv = poly_segment_average(npoly.polymul(u0.coeffs, V.coeffs or (0.0,)), q_a, q_b)
    else:
        from .catalog import segment_average
        uv = float(segment_average(lambda q: u0.u0(q) * V.v(q), q_a, q_b, order=64))
    return -(H.m * u3 - uv - H.m * u1 * u2 + u1 * V.avg(q_a, q_b)) / dq


def _magnetic_eps2_secular(H: HamiltonianSpec, q_a: float, q_b: float) -> float:
    """-int [u0(q_seg) pi1 + m dq u0'(q_seg) chi2] dtau; identically zero by
    parts, evaluated numerically as a self-check."""
    prof = secular_profiles(H, q_a, q_b)
    qs = (1.0 - prof.tau) * q_a + prof.tau * q_b
    u = np.asarray(H.u0.u0(qs), float)
    du = np.asarray(H.u0.du0(qs), float)
    integrand = u * prof.pi1 + H.m * (q_b - q_a) * du * prof.chi2
    return -float(simpson(integrand, x=prof.tau))


def _avg_sq(pot, q_a: float, q_b: float) -> float:
    if hasattr(pot, "avg_sq"):
        return pot.avg_sq(q_a, q_b)
    from .catalog import segment_average
    return float(segment_average(lambda q: pot.v(q) ** 2, q_a, q_b, order=64))


def _effective_profiles(H: HamiltonianSpec, q_a: float, q_b: float) -> SecularProfile:
    veff = H.effective_potential()
    if isinstance(veff, Potential):
        Heff = HamiltonianSpec(H.m, veff)
    else:
        Heff = HamiltonianSpec(H.m, Potential.gaussian(1.0, 1.0))  # placeholder
        return _profiles_from_callables(H.m, veff, q_a, q_b)
    return secular_profiles(Heff, q_a, q_b)


def _profiles_from_callables(m: float, pot, q_a: float, q_b: float,
                             n_tau: int = TAU_SAMPLES_DEFAULT) -> SecularProfile:
    tau = np.linspace(0.0, 1.0, n_tau if n_tau % 2 else n_tau + 1)
    qs = (1.0 - tau) * q_a + tau * q_b

    def cumint(y):
        return np.concatenate(([0.0], cumulative_simpson(y, x=tau)))

    pi1 = -cumint(np.asarray(pot.dv(qs), float))
    pi1 = pi1 - simpson(pi1, x=tau)
    chi2 = cumint(pi1) / m
    pi3 = cumint(-np.asarray(pot.d2v(qs), float) * chi2)
    pi3 = pi3 - simpson(pi3, x=tau)
    chi4 = cumint(pi3) / m
    z = np.zeros_like(tau)
    return SecularProfile(tau, m * (q_b - q_a), z, pi1, z.copy(), pi3, chi2, chi4,
                          {"pi0": True, "pi2": True, "chi1": True, "chi3": True})


def c5_candidates(H: HamiltonianSpec, q_a: float, q_b: float) -> dict:
    """Three labeled routes to the eps^5 coefficient (u0 absent).

    (a) the quoted covariance form (avg(VF) - avg(V) avg(F))/(m dq^2);
    (b) the quoted integral +(1/m) int pi1 pi3 dtau;
    (c) -(1/2m) int pi1 pi3 dtau, obtained by keeping the eps^5 Taylor terms
        V' chi4 + V'' chi2^2 / 2 of the potential along the expanded path.
    Route (c) is the designated value (pinned by the exact-oscillator series
    oracle in the tests).
    """
    if H.u0 is not None:
        raise ValueError("c5 candidates are defined for u0 absent")
    if q_a == q_b:
        raise DegenerateEndpointsError("c5 candidates need q_a != q_b")
    prof = secular_profiles(H, q_a, q_b)
    out = _c5_from_profiles(H.m, prof)
    dq = q_b - q_a
    cov_vf = H.V.avg_vf(q_a, q_b) - H.V.avg(q_a, q_b) * H.V.avg_f(q_a, q_b)
    out["a"] = cov_vf / (H.m * dq * dq)
    out["designated"] = "c"
    return out


def _c5_from_profiles(m: float, prof: SecularProfile) -> dict:
    i13 = float(simpson(prof.pi1 * prof.pi3, x=prof.tau))
    return {"b": i13 / m, "c": -0.5 * i13 / m}


def harmonic_series_oracle(m: float, omega: float, q_a: float, q_b: float) -> dict:
    """Taylor coefficients of the exact oscillator action, derived from the
    Laurent series of cot and csc:

        (m w/2) [a cot(w e) - 2 b csc(w e)],  a = qa^2 + qb^2,  b = qa qb.
    """
    a = q_a ** 2 + q_b ** 2
    b = q_a * q_b
    return {
        -1: 0.5 * m * (q_b - q_a) ** 2,
        1: -m * omega ** 2 * (a + b) / 6.0,
        3: -m * omega ** 4 * (4.0 * a + 7.0 * b) / 360.0,
        5: -m * omega ** 6 * (16.0 * a + 31.0 * b) / 15120.0,
    }


# ---------------------------------------------------------------------------
# Numeric series fit
# ---------------------------------------------------------------------------

FIT_POWERS = (-1, 0, 1, 2, 3, 4, 5)


@dataclass
class SeriesFit:
    """Least-squares fit of sampled S(eps) on {eps^-1, 1, eps, ..., eps^5}."""

    eps: np.ndarray
    S: np.ndarray
    coefficients: dict
    residual: float
    cond: float


def default_eps_sweep(n: int = 24, lo: float = 5e-3, hi: float = 0.12) -> np.ndarray:
    """Sweep for series fits.  The window balances two error sources: below
    ~5e-3 the eps^3 signal drops toward the double-precision floor of
    S ~ c_{-1}/eps and the rows only inject roundoff into the high-order
    coefficients, while above ~0.12 the eps^7 tail (absent from the fixed
    basis) biases c3."""
    return np.geomspace(lo, hi, n)


def fit_series_numeric(H: HamiltonianSpec, q_a: float, q_b: float,
                       eps_list: Sequence[float] | None = None,
                       n_steps: int = 256, tol: float = 1e-12) -> SeriesFit:
    """Solve the boundary problem along the sweep, then fit the fixed basis
    with relative row weighting and column scaling."""
    if eps_list is None:
        eps_list = default_eps_sweep()
    eps = np.asarray(sorted(float(e) for e in eps_list))
    if len(eps) < 9:
        raise ValueError("need at least 9 eps values")
    if eps[-1] / eps[0] < 9.0:
        raise ValueError("eps sweep should span at least one decade")
    S = np.array([action_along(solve_bvp(H, q_a, q_b, e, tol=tol, n_steps=n_steps), H)
                  for e in eps])
    A = np.vstack([eps ** k for k in FIT_POWERS]).T
    w = 1.0 / np.maximum(np.abs(S), 1e-30)
    Aw = A * w[:, None]
    col = np.linalg.norm(Aw, axis=0)
    col[col == 0] = 1.0
    sol, *_ = np.linalg.lstsq(Aw / col, S * w, rcond=None)
    coeff = sol / col
    resid = float(np.linalg.norm((A @ coeff - S) * w))
    cond = float(np.linalg.cond(Aw / col))
    return SeriesFit(eps, S, dict(zip(FIT_POWERS, coeff)), resid, cond)


def fit_high_order_residual(H: HamiltonianSpec, q_a: float, q_b: float,
                            known: dict, powers: Sequence[int] = (5, 7, 9),
                            eps_list: Sequence[float] | None = None,
                            n_steps: int = 1024, tol: float = 1e-13) -> dict:
    """Targeted fit of high-order coefficients after subtracting known terms.

    `known` maps eps powers to coefficients removed exactly before fitting;
    this keeps the eps^5 signal above the floating-point floor of the full
    basis fit.
    """
    if eps_list is None:
        eps_list = np.geomspace(0.03, 0.25, 14)
    eps = np.asarray(sorted(float(e) for e in eps_list))
    S = np.array([action_along(solve_bvp(H, q_a, q_b, e, tol=tol, n_steps=n_steps), H)
                  for e in eps])
    R = S - sum(c * eps ** k for k, c in known.items())
    A = np.vstack([eps ** k for k in powers]).T
    sol, *_ = np.linalg.lstsq(A, R, rcond=None)
    return dict(zip(powers, sol))


# ---------------------------------------------------------------------------
# Classification gate
# ---------------------------------------------------------------------------

@dataclass
class Classification:
    accepted: bool
    spec: Optional[HamiltonianSpec] = None
    reason: Optional[str] = None   # "p-degree" | "mass"


def classify_hamiltonian(symbol, probe_points: Sequence[float] = (-1.7, -0.3, 0.42, 1.9),
                         rtol: float = 1e-9) -> Classification:
    """Gate for the admissible class p^2/2m + u0(q) p + V(q), constant m.

    `symbol` is a kernels.SymbolFunction; the declared p-degree is trusted
    and the p^2 coefficient is probed for constancy at sample points.
    """
    if symbol.p_degree is None or symbol.p_degree > 2:
        return Classification(False, reason="p-degree")
    qs = np.asarray(probe_points, float)
    c0, c1, c2 = _p_coefficients(symbol, qs)
    if symbol.p_degree == 2:
        ref = c2[0]
        if ref == 0 or not np.allclose(c2, ref, rtol=rtol, atol=1e-12):
            return Classification(False, reason="mass")
        mass = 1.0 / (2.0 * ref)
        if mass <= 0:
            return Classification(False, reason="mass")
    else:
        # no p^2/2m term at all: there is no admissible constant mass
        return Classification(False, reason="mass")
    if symbol.provenance is not None:
        return Classification(True, spec=symbol.provenance)
    V = Potential.polynomial(np.polynomial.polynomial.polyfit(qs, c0, len(qs) - 1))
    u0 = None
    if np.max(np.abs(c1)) > 1e-12:
        u0 = MagneticTerm.polynomial(np.polynomial.polynomial.polyfit(qs, c1, len(qs) - 1))
    return Classification(True, spec=HamiltonianSpec(mass, V, u0))


def _p_coefficients(symbol, qs: np.ndarray):
    f0 = np.asarray(symbol(qs, 0.0), float)
    fp = np.asarray(symbol(qs, 1.0), float)
    fm = np.asarray(symbol(qs, -1.0), float)
    c1 = 0.5 * (fp - fm)
    c2 = 0.5 * (fp + fm) - f0
    return f0, c1, c2
