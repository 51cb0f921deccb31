"""Flow, boundary-solve, action, fit, and classification tests."""

import math

import numpy as np
import pytest

from ordo import classical as cl
from ordo.catalog import MagneticTerm, Potential
from ordo.kernels import SymbolFunction

M = 1.0
HARM = cl.HamiltonianSpec(M, Potential.harmonic(1.0))
LIN = cl.HamiltonianSpec(M, Potential.linear(2.0))
FREE = cl.HamiltonianSpec(M, Potential.free())


def harmonic_endpoint(q0, p0, t, m=1.0, w=1.0):
    return q0 * math.cos(w * t) + p0 / (m * w) * math.sin(w * t)


class TestRhs:
    def test_free(self):
        assert FREE.rhs(0.3, 2.0) == (2.0, 0.0)

    def test_linear(self):
        dq, dp = LIN.rhs(0.5, 1.0)
        assert dq == 1.0 and dp == pytest.approx(2.0)

    def test_harmonic(self):
        dq, dp = HARM.rhs(0.5, 1.0)
        assert dq == 1.0 and dp == pytest.approx(-0.5)

    def test_magnetic(self):
        H = cl.HamiltonianSpec(2.0, Potential.free(), MagneticTerm.linear(0.3))
        dq, dp = H.rhs(1.0, 4.0)
        assert dq == pytest.approx(4.0 / 2.0 + 0.3)
        assert dp == pytest.approx(-0.3 * 4.0)


class TestIntegrate:
    def test_free_endpoint(self):
        path = cl.integrate_ivp(FREE, 0.0, 2.0, 0.5)
        assert path.q[-1] == pytest.approx(1.0, abs=1e-13)
        assert np.allclose(path.p, 2.0)

    def test_harmonic_vs_exact(self):
        for eps in (0.1, 0.3, 0.5):
            path = cl.integrate_ivp(HARM, 0.7, -0.4, eps, n_steps=512)
            assert path.q[-1] == pytest.approx(
                harmonic_endpoint(0.7, -0.4, eps), abs=1e-10)

    def test_zero_steps_returns_initial(self):
        path = cl.integrate_ivp(HARM, 0.7, -0.4, 0.5, n_steps=0)
        assert len(path.q) == 1 and path.q[0] == 0.7

    def test_order_four(self):
        eps = 0.8
        exact = harmonic_endpoint(1.0, 0.5, eps)
        ns = np.array([16, 32, 64, 128, 256])
        errs = np.array([abs(cl.integrate_ivp(HARM, 1.0, 0.5, eps, int(n)).q[-1]
                             - exact) for n in ns])
        slope = np.polyfit(np.log(ns), np.log(errs), 1)[0]
        assert slope == pytest.approx(-4.0, abs=0.3)

    def test_overflow(self):
        H = cl.HamiltonianSpec(1.0, Potential.polynomial([0.0, 0.0, -50.0]))
        with pytest.raises(cl.TrajectoryOverflowError):
            cl.integrate_ivp(H, 1.0, 10.0, 50.0, n_steps=4096)

    def test_uniform_tau_grid(self):
        path = cl.integrate_ivp(HARM, 0.0, 1.0, 0.2, n_steps=64)
        assert np.allclose(np.diff(path.tau), path.tau[1] - path.tau[0])
        assert path.tau[0] == 0.0 and path.tau[-1] == 1.0


class TestSolveBvp:
    def test_linear_momentum(self):
        F, eps = 2.0, 0.05
        path = cl.solve_bvp(LIN, 0.0, 1.0, eps)
        assert path.p[0] == pytest.approx(M / eps - 0.5 * F * eps, abs=1e-9)

    def test_free_exact(self):
        path = cl.solve_bvp(FREE, 0.0, 1.0, 0.25)
        assert path.p[0] == pytest.approx(4.0, abs=1e-12)
        assert path.endpoint_residual() < 1e-12

    def test_conjugate_point(self):
        with pytest.raises(cl.ConjugatePointError):
            cl.solve_bvp(HARM, 0.0, 0.5, math.pi)

    def test_degenerate_endpoints_allowed(self):
        path = cl.solve_bvp(HARM, 0.4, 0.4, 0.3)
        assert abs(path.q[-1] - 0.4) < 1e-12

    def test_secular_vs_exact_path(self):
        # sup distance between the true path and q_seg + eps^2 chi2 is O(eps^4)
        q_a, q_b = 0.0, 1.0
        eps_list = np.array([0.4, 0.2, 0.1, 0.05])
        sups = []
        for eps in eps_list:
            path = cl.solve_bvp(HARM, q_a, q_b, float(eps), n_steps=512)
            chi2 = cl.chi2_harmonic_derived(1.0, q_a, q_b, path.tau)
            qs = (1 - path.tau) * q_a + path.tau * q_b
            sups.append(np.max(np.abs(path.q - qs - eps ** 2 * chi2)))
        slope = np.polyfit(np.log(eps_list), np.log(sups), 1)[0]
        assert slope == pytest.approx(4.0, abs=0.2)


class TestAction:
    def test_free(self):
        path = cl.solve_bvp(FREE, 0.0, 1.0, 0.5)
        assert cl.action_along(path, FREE) == pytest.approx(1.0, rel=1e-10)

    def test_linear(self):
        for eps in (0.01, 0.1):
            path = cl.solve_bvp(LIN, 0.0, 1.0, eps)
            exact = cl.exact_action("linear", {"F": 2.0}, 0.0, 1.0, eps)
            assert cl.action_along(path, LIN) == pytest.approx(exact, rel=1e-8)

    def test_harmonic(self):
        for eps in (0.05, 0.4):
            path = cl.solve_bvp(HARM, 0.2, 1.0, eps, n_steps=512)
            exact = cl.exact_action("harmonic", {"omega": 1.0}, 0.2, 1.0, eps)
            assert cl.action_along(path, HARM) == pytest.approx(exact, rel=1e-8)


class TestExactAction:
    def test_free_value(self):
        assert cl.exact_action("free", {}, 0.0, 1.0, 0.5) == pytest.approx(1.0)

    def test_linear_reduces_to_free(self):
        a = cl.exact_action("linear", {"F": 0.0}, 0.0, 1.0, 0.3)
        b = cl.exact_action("free", {}, 0.0, 1.0, 0.3)
        assert a == pytest.approx(b)

    def test_harmonic_small_omega_limit(self):
        a = cl.exact_action("harmonic", {"omega": 1e-5}, 0.0, 1.0, 0.3)
        b = cl.exact_action("free", {}, 0.0, 1.0, 0.3)
        assert a == pytest.approx(b, rel=1e-8)

    def test_harmonic_conjugate(self):
        with pytest.raises(cl.ConjugatePointError):
            cl.exact_action("harmonic", {"omega": 1.0}, 0.0, 1.0, math.pi)


class TestPathAverage:
    def test_linear_function(self):
        assert cl.path_average(lambda q: q, 0.0, 1.0, (0.0, 1.0)) == \
            pytest.approx(0.5)

    def test_quadratic(self):
        got = cl.path_average(lambda q: q ** 2, 1.0, 3.0, (0.0, 0.0, 1.0))
        assert got == pytest.approx((1 + 3 + 9) / 3.0)

    def test_degenerate(self):
        assert cl.path_average(lambda q: q ** 2, 2.0, 2.0, (0.0, 0.0, 1.0)) == \
            pytest.approx(4.0)

    def test_quadrature_matches_exact(self):
        got = cl.path_average(lambda q: q ** 4, -0.3, 1.1)
        ref = cl.path_average(None, -0.3, 1.1, (0.0, 0.0, 0.0, 0.0, 1.0))
        assert got == pytest.approx(ref, rel=1e-12)


class TestSeries:
    def test_linear_coefficients(self):
        s = cl.action_series(LIN, 0.0, 1.0)
        F = 2.0
        assert s.c_minus1 == pytest.approx(0.5)
        assert s.c0 == 0.0 and s.c2 == 0.0
        assert s.c1 == pytest.approx(F * (0.0 + 1.0) / 2.0)
        assert s.c3 == pytest.approx(-F * F / 24.0)
        assert s.c5 == pytest.approx(0.0, abs=1e-14)

    def test_harmonic_c1_c3_exact(self):
        q_a, q_b = 0.3, 1.1
        s = cl.action_series(HARM, q_a, q_b)
        oracle = cl.harmonic_series_oracle(M, 1.0, q_a, q_b)
        assert s.c1 == pytest.approx(oracle[1], rel=1e-12)
        assert s.c3 == pytest.approx(oracle[3], rel=1e-10)

    def test_degenerate_rejected(self):
        with pytest.raises(cl.DegenerateEndpointsError):
            cl.action_series(HARM, 0.5, 0.5)

    def test_constant_u0_c2_zero(self):
        H = cl.HamiltonianSpec(M, Potential.harmonic(1.0),
                               MagneticTerm.constant(0.7))
        s = cl.action_series(H, 0.0, 1.0)
        assert s.c2 == pytest.approx(0.0, abs=1e-12)

    def test_magnetic_c0_c1(self):
        gamma = 0.3
        H = cl.HamiltonianSpec(M, Potential.harmonic(1.0),
                               MagneticTerm.linear(gamma))
        s = cl.action_series(H, 0.0, 1.0)
        # c0 = -m int u0 dq = -m gamma/2; c1 = (m/2) avg(u0^2) - avg(V)
        assert s.c0 == pytest.approx(-gamma / 2.0)
        assert s.c1 == pytest.approx(0.5 * gamma ** 2 / 3.0 - 1.0 / 6.0)


class TestC5Candidates:
    def test_linear_all_zero(self):
        cands = cl.c5_candidates(LIN, 0.0, 1.0)
        for key in "abc":
            assert cands[key] == pytest.approx(0.0, abs=1e-12)

    def test_free_all_zero(self):
        cands = cl.c5_candidates(FREE, 0.0, 1.0)
        for key in "abc":
            assert cands[key] == pytest.approx(0.0, abs=1e-14)

    def test_harmonic_oracle_designates_c(self):
        q_a, q_b = 0.0, 1.0
        cands = cl.c5_candidates(HARM, q_a, q_b)
        oracle = cl.harmonic_series_oracle(M, 1.0, q_a, q_b)[5]
        assert cands["designated"] == "c"
        assert cands["c"] == pytest.approx(oracle, rel=1e-6)
        assert abs(cands["a"] - oracle) > 1e-3 * abs(oracle)
        assert abs(cands["b"] - oracle) > 1e-3 * abs(oracle)

    def test_rejects_magnetic(self):
        H = cl.HamiltonianSpec(M, Potential.harmonic(1.0),
                               MagneticTerm.constant(0.2))
        with pytest.raises(ValueError):
            cl.c5_candidates(H, 0.0, 1.0)


class TestFit:
    def test_free(self):
        fit = cl.fit_series_numeric(FREE, 0.0, 1.0)
        assert fit.coefficients[-1] == pytest.approx(0.5, rel=1e-10)
        for k in (0, 1, 2, 3, 4, 5):
            assert abs(fit.coefficients[k]) < 1e-5

    def test_linear(self):
        fit = cl.fit_series_numeric(LIN, 0.0, 1.0)
        assert fit.coefficients[1] == pytest.approx(1.0, rel=1e-6)
        assert fit.coefficients[3] == pytest.approx(-4.0 / 24.0, rel=1e-6)
        assert abs(fit.coefficients[0]) < 1e-10
        assert abs(fit.coefficients[2]) < 1e-6
        assert abs(fit.coefficients[4]) < 1e-4

    def test_harmonic_c3(self):
        fit = cl.fit_series_numeric(HARM, 0.0, 1.0)
        oracle = cl.harmonic_series_oracle(M, 1.0, 0.0, 1.0)
        assert fit.coefficients[3] == pytest.approx(oracle[3], rel=1e-4)
        assert fit.coefficients[1] == pytest.approx(oracle[1], rel=1e-6)

    def test_sweep_validation(self):
        with pytest.raises(ValueError):
            cl.fit_series_numeric(FREE, 0.0, 1.0, [0.01] * 5)
        with pytest.raises(ValueError):
            cl.fit_series_numeric(FREE, 0.0, 1.0,
                                  np.linspace(0.01, 0.02, 10))


class TestClassify:
    def test_standard_accepted(self):
        H = cl.HamiltonianSpec(2.0, Potential.harmonic(1.5, 2.0))
        res = cl.classify_hamiltonian(SymbolFunction.from_hamiltonian(H))
        assert res.accepted and res.spec is H

    def test_p_cubed_rejected(self):
        res = cl.classify_hamiltonian(SymbolFunction.monomial(0, 3))
        assert not res.accepted and res.reason == "p-degree"

    def test_position_dependent_mass_rejected(self):
        sym = SymbolFunction(lambda q, p: p * p / (2.0 * (1.0 + 0.2 * q ** 2)),
                             p_degree=2)
        res = cl.classify_hamiltonian(sym)
        assert not res.accepted and res.reason == "mass"

    def test_accepted_roundtrip(self):
        # accepted spec flows through profiles, series, and BVP action
        H = cl.HamiltonianSpec(1.0, Potential.harmonic(1.0),
                               MagneticTerm.linear(0.2))
        res = cl.classify_hamiltonian(SymbolFunction.from_hamiltonian(H))
        assert res.accepted
        s = cl.action_series(res.spec, 0.0, 1.0)
        path = cl.solve_bvp(res.spec, 0.0, 1.0, 0.05)
        S = cl.action_along(path, res.spec)
        model = s.c_minus1 / 0.05 + s.c0 + s.c1 * 0.05 + s.c3 * 0.05 ** 3
        assert S == pytest.approx(model, rel=1e-5)


class TestPotentialDerivatives:
    @pytest.mark.parametrize("pot", [
        Potential.linear(2.0), Potential.harmonic(1.3), Potential.quartic(0.4),
        Potential.polynomial([1.0, -0.5, 0.25, 0.1]),
        Potential.gaussian(2.0, 0.7)])
    def test_finite_difference_consistency(self, pot):
        h = 1e-5
        for q in (-1.1, 0.2, 0.9):
            fd1 = (pot.v(q + h) - pot.v(q - h)) / (2 * h)
            fd2 = (pot.v(q + h) - 2 * pot.v(q) + pot.v(q - h)) / h ** 2
            assert pot.dv(q) == pytest.approx(fd1, rel=1e-6, abs=1e-8)
            assert pot.d2v(q) == pytest.approx(fd2, rel=1e-4, abs=1e-4)
