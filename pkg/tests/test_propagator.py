"""Time-sliced propagator, convergence, scaling, and bounded-symbol tests."""

from fractions import Fraction

import numpy as np
import pytest

from ordo import classical as cl
from ordo import kernels as kn
from ordo import propagator as pg
from ordo.catalog import MagneticTerm, Potential
from ordo.exact import TauMeasure

HARM = cl.HamiltonianSpec(1.0, Potential.harmonic(1.0))
FREE = cl.HamiltonianSpec(1.0, Potential.free())
G64 = kn.Grid1D(-8.0, 8.0, 64)
G128 = kn.Grid1D(-8.0, 8.0, 128)


class TestScheme:
    def test_measures(self):
        assert pg.LEFT.measure().atoms[0][1] == 0
        assert pg.RIGHT.measure().atoms[0][1] == 1
        assert pg.MIDPOINT.measure().atoms[0][1] == Fraction(1, 2)
        assert pg.UNIFORM_BJ.measure().kind == "uniform"

    def test_parse(self):
        assert pg.parse_scheme("midpoint").name == "midpoint"
        s = pg.parse_scheme("mixture:0.5@0,0.5@1")
        assert s.name == "mixture" and s.measure().mean() == Fraction(1, 2)
        with pytest.raises(ValueError):
            pg.parse_scheme("simpson")


class TestSliceKernel:
    def test_free_slice_is_unitary(self):
        U = pg.slice_kernel(FREE, G64, 0.1, pg.LEFT)
        assert U.unitarity_defect() < 1e-10

    def test_endpoint_slice_is_unitary_with_potential(self):
        # the left rule averages V at the source point only, so the slice is
        # a unitary multiplier matrix times a diagonal phase; two-point rules
        # give Hadamard products that are not exactly unitary
        U = pg.slice_kernel(HARM, G64, 0.05, pg.LEFT)
        assert U.unitarity_defect() < 1e-10
        M = pg.slice_kernel(HARM, G64, 0.05, pg.MIDPOINT)
        assert M.unitarity_defect() > 1e-3

    def test_free_slice_propagates_plane_wave(self):
        g = G64
        p0 = g.p[g.n // 2 + 3]
        psi = kn.WaveFunction(np.exp(1j * p0 * g.q), g).normalized()
        out = pg.slice_kernel(FREE, g, 0.2, pg.LEFT).apply(psi)
        expect = psi.values * np.exp(-1j * p0 ** 2 * 0.2 / 2.0)
        assert np.max(np.abs(out.values - expect)) < 1e-10

    def test_matches_short_time_kernel(self):
        # the band-limited slice equals the discrete p-sum kernel times dq
        g = kn.Grid1D(-6.0, 6.0, 48)
        dt = 0.07
        sym = kn.SymbolFunction.from_hamiltonian(HARM)
        A = pg.slice_kernel(HARM, g, dt, pg.UNIFORM_BJ).entries
        B = kn.short_time_kernel(sym, g, dt, pg.UNIFORM_BJ.measure()).entries
        assert np.max(np.abs(A - B * g.dq)) < 1e-10

    def test_rejects_drift_term(self):
        H = cl.HamiltonianSpec(1.0, Potential.free(), MagneticTerm.constant(0.2))
        with pytest.raises(ValueError):
            pg.slice_kernel(H, G64, 0.1, pg.LEFT)

    def test_gaussian_form_quadratic_exponent(self):
        # entry phase of the closed Gaussian at fixed endpoints is
        # m dq^2/(2 dt) - Vbar dt (checked against a hand evaluation)
        g = kn.Grid1D(-6.0, 6.0, 48)
        dt = 0.3
        K = pg.slice_kernel_gaussian(HARM, g, dt, pg.MIDPOINT)
        i, j = 30, 20
        qi, qj = g.q[i], g.q[j]
        vmid = 0.5 * ((qi + qj) / 2.0) ** 2
        phase = (qi - qj) ** 2 / (2.0 * dt) - vmid * dt
        amp = np.sqrt(1.0 / (2.0 * np.pi * dt)) * g.dq
        expect = amp * np.exp(1j * (phase - np.pi / 4.0))
        assert K.entries[i, j] == pytest.approx(expect, rel=1e-12)


class TestCompose:
    def test_two_free_slices_equal_one_double_slice(self):
        A = pg.compose_slices(FREE, G64, 0.4, 2, pg.LEFT).entries
        B = pg.slice_kernel(FREE, G64, 0.4, pg.LEFT).entries
        assert np.max(np.abs(A - B)) < 1e-10

    def test_left_composition_stays_unitary(self):
        U = pg.compose_slices(HARM, G64, 1.0, 64, pg.LEFT)
        assert U.unitarity_defect() < 1e-8

    def test_invalid_slice_count(self):
        with pytest.raises(ValueError):
            pg.compose_slices(HARM, G64, 1.0, 0, pg.LEFT)


class TestReference:
    def test_free_reference_diagonal_in_momentum(self):
        g = G64
        U = pg.reference_propagator(FREE, g, 0.5)
        p0 = g.p[g.n // 2 + 5]
        psi = kn.WaveFunction(np.exp(1j * p0 * g.q), g).normalized()
        out = U.apply(psi)
        expect = psi.values * np.exp(-1j * p0 ** 2 * 0.5 / 2.0)
        assert np.max(np.abs(out.values - expect)) < 1e-10

    def test_unitary(self):
        U = pg.reference_propagator(HARM, G64, 0.7)
        assert U.unitarity_defect() < 1e-10

    def test_oscillator_period_revival(self):
        # grid oscillator eigenvalues near (k + 1/2) omega; after one period
        # the low-energy subspace returns to minus-or-plus itself.  Track a
        # coherent state: |<psi(T)|psi(0)>| ~ 1.
        g = G128
        T = 2.0 * np.pi
        psi = kn.WaveFunction.gaussian(g, 1.0, np.sqrt(0.5))
        out = pg.reference_propagator(HARM, g, T).apply(psi)
        overlap = abs(g.dq * np.vdot(psi.values, out.values))
        assert overlap == pytest.approx(1.0, abs=1e-6)


class TestProjector:
    def test_idempotent(self):
        Pr = pg.low_momentum_projector(G64)
        assert np.max(np.abs(Pr @ Pr - Pr)) < 1e-10

    def test_keeps_low_kills_high(self):
        g = G64
        Pr = pg.low_momentum_projector(g, 0.5)
        low = np.exp(1j * g.p[g.n // 2 + 2] * g.q)
        high = np.exp(1j * g.p[g.n // 2 + g.n // 4 + 2] * g.q)
        assert np.max(np.abs(Pr @ low - low)) < 1e-10
        assert np.max(np.abs(Pr @ high)) < 1e-10


class TestConvergence:
    def test_study_shrinks_and_schemes_agree(self):
        schemes = [pg.LEFT, pg.MIDPOINT, pg.UNIFORM_BJ]
        rep = pg.convergence_study(HARM, G64, 1.0, schemes, [8, 32, 128, 512])
        for name in rep.schemes:
            d = rep.dist_to_reference[name]
            assert all(x > y for x, y in zip(d, d[1:]))
            # distances collapse to the same limit set by the slice count
        ratio = rep.max_pairwise(8) / rep.max_pairwise(512)
        assert ratio >= 4.0

    def test_validation(self):
        with pytest.raises(ValueError):
            pg.convergence_study(HARM, G64, 1.0, [pg.LEFT], [8, 32, 128])
        with pytest.raises(ValueError):
            pg.convergence_study(HARM, G64, 1.0, [pg.LEFT], [8, 8, 32, 128])

    def test_left_first_order(self):
        rep = pg.convergence_study(HARM, G64, 1.0, [pg.LEFT],
                                   [64, 128, 256, 512])
        d = rep.dist_to_reference["left"]
        slope = np.polyfit(np.log([64, 128, 256, 512]), np.log(d), 1)[0]
        assert slope == pytest.approx(-1.0, abs=0.15)


class TestPhaseScaling:
    def test_slopes_and_gap(self):
        dts = np.geomspace(1e-3, 1e-1, 10)
        rep = pg.short_time_phase_scaling(
            HARM, 0.0, 1.0, dts, [pg.LEFT, pg.MIDPOINT, pg.UNIFORM_BJ])
        # at fixed endpoint separation only the uniform average matches the
        # potential term of the action; every other rule errs at O(dt) with
        # coefficient |Vbar_rule - Vbar_uniform|
        assert rep.slopes["left"] == pytest.approx(1.0, abs=0.1)
        assert rep.slopes["midpoint"] == pytest.approx(1.0, abs=0.1)
        assert rep.slopes["uniform"] > 2.5
        assert rep.slope_gap("uniform", "midpoint") > 1.5

    def test_midpoint_eps_coefficient_harmonic(self):
        # harmonic benchmark: uniform average of q^2/2 on [0,1] is 1/6,
        # midpoint value is 1/8; the first-order coefficient is the gap 1/24
        dts = np.geomspace(1e-4, 1e-2, 8)
        rep = pg.short_time_phase_scaling(HARM, 0.0, 1.0, dts, [pg.MIDPOINT],
                                          n_steps=1024)
        assert rep.eps_coefficient["midpoint"] == \
            pytest.approx(1.0 / 24.0, rel=1e-5)

    def test_linear_force_uniform_exact_coefficient(self):
        # for V = -F q the uniform average reproduces the exact action up to
        # the curvature term: error = F^2 dt^3 / 24 m exactly
        F = 2.0
        H = cl.HamiltonianSpec(1.0, Potential.linear(F))
        dts = np.geomspace(5e-3, 1e-1, 8)
        rep = pg.short_time_phase_scaling(H, 0.0, 1.0, dts, [pg.UNIFORM_BJ])
        expect = F ** 2 * rep.dt_list ** 3 / 24.0
        assert np.allclose(rep.phase_error["uniform"], expect, rtol=1e-5)

    def test_midpoint_matches_uniform_for_linear_potential(self):
        # for linear V the midpoint value equals the uniform average, so the
        # midpoint rule inherits the exact F^2 dt^3 / 24 m error law
        F = 2.0
        H = cl.HamiltonianSpec(1.0, Potential.linear(F))
        dts = np.geomspace(5e-3, 1e-1, 8)
        rep = pg.short_time_phase_scaling(H, 0.0, 1.0, dts, [pg.MIDPOINT])
        got = rep.phase_error["midpoint"][-1] / rep.dt_list[-1] ** 3
        assert got == pytest.approx(F ** 2 / 24.0, rel=1e-3)

    def test_degenerate_rejected(self):
        with pytest.raises(ValueError):
            pg.short_time_phase_scaling(HARM, 0.5, 0.5, [0.1, 0.05, 0.02, 0.01],
                                        [pg.LEFT])


class TestChernoff:
    def test_step_matrix_unitary_for_point_measures(self):
        K = pg.chernoff_step_matrix(HARM, G64, 0.05, TauMeasure.point(Fraction(0)))
        U = K.entries
        assert np.max(np.abs(U.conj().T @ U - np.eye(G64.n))) < 1e-10

    def test_uniform_step_matches_left_for_free(self):
        A = pg.chernoff_step_matrix(FREE, G64, 0.1, TauMeasure.uniform()).entries
        B = pg.chernoff_step_matrix(FREE, G64, 0.1,
                                    TauMeasure.point(Fraction(0))).entries
        assert np.max(np.abs(A - B)) < 1e-12

    def test_error_decreases_with_iterations(self):
        g = G128
        psi = kn.WaveFunction.gaussian(g, 0.5, 0.7)
        errs = [pg.chernoff_error(HARM, g, 0.2, n, TauMeasure.uniform(), psi)
                for n in (1, 4, 16, 64)]
        assert all(x > y for x, y in zip(errs, errs[1:]))
        assert errs[-1] < 1e-3

    def test_point_measure_iteration_matches_compose(self):
        # a point measure at tau=0 averages V at the incoming endpoint, which
        # is exactly the left-rule Trotter slice
        A = pg.chernoff_step_matrix(HARM, G64, 0.1,
                                    TauMeasure.point(Fraction(0))).entries
        B = pg.slice_kernel(HARM, G64, 0.1, pg.LEFT).entries
        assert np.max(np.abs(A - B)) < 1e-12
