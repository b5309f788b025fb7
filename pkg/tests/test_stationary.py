import math

import numpy as np
import pytest
from scipy.integrate import simpson, solve_ivp
from scipy.special import expit

from wasep.core import (
    BracketNotFound,
    DomainError,
    Grid,
    Params,
    derivative_4,
    mobility,
)
from wasep.euler_lagrange import el_residual
from wasep.stationary import (
    asymmetric_constants,
    current_residual,
    normalization_constant,
    solve_current,
    solve_stationary,
    stationary_profile,
)

E0 = 2.0 * math.log(2.0)


class TestCurrent:
    def test_zero_field_closed_form(self):
        # E = 0 collapses the current equation to (rho_+ - rho_-)/(-2J) = 1
        assert solve_current(Params(0.0, 0.2, 0.8)) == pytest.approx(-0.3, abs=1e-14)

    def test_reversible_point(self):
        # at E0 the integral (1/(2E0)) int dr/chi equals (phi_+ - phi_-)/(2E0) = 1
        assert solve_current(Params(E0, 0.2, 0.8)) == 0.0

    @pytest.mark.parametrize("E", [-10.0, -2.0, -0.5, 0.5, 0.9 * E0])
    def test_residual_tolerance(self, E):
        p = Params(E, 0.2, 0.8)
        J = solve_current(p)
        assert J < 0.0
        assert abs(current_residual(J, p)) <= 1e-10

    def test_strong_field_ratio(self):
        # J/E approaches the maximal mobility from above
        p = Params(-100.0, 0.2, 0.8)
        J = solve_current(p)
        assert J / p.E == pytest.approx(0.25, rel=0.05)
        assert J / p.E > 0.25

    def test_strong_field_against_bisection_oracle(self):
        # independent route: dense fixed-grid quadrature + plain bisection
        p = Params(-100.0, 0.2, 0.8)
        r = np.linspace(0.2, 0.8, 1_000_001)
        chi = r * (1.0 - r)

        def residual(J):
            return 0.5 * simpson(1.0 / (p.E * chi - J), x=r) - 1.0

        lo, hi = -40.0, p.E * 0.25 - 1e-6
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if residual(mid) > 0.0:
                hi = mid
            else:
                lo = mid
        assert solve_current(p) == pytest.approx(0.5 * (lo + hi), abs=1e-8)

    def test_supercritical_rejected(self):
        with pytest.raises((BracketNotFound, DomainError)):
            solve_current(Params(2.0, 0.2, 0.8))


class TestProfile:
    def test_zero_field_affine(self, grid):
        p = Params(0.0, 0.2, 0.8)
        rb = stationary_profile(p, -0.3, grid)
        assert np.max(np.abs(rb.values - (0.2 + 0.3 * (grid.nodes + 1)))) <= 1e-12

    def test_reversible_logistic(self, grid):
        p = Params(E0, 0.2, 0.8)
        rb = stationary_profile(p, 0.0, grid)
        phi = p.phi_minus * (1 - grid.nodes) / 2 + p.phi_plus * (1 + grid.nodes) / 2
        assert np.max(np.abs(rb.values - expit(phi))) <= 1e-12

    def test_against_stiff_oracle(self):
        # independent stiff integrator at 10x resolution
        p = Params(-4.0, 0.2, 0.8)
        J = solve_current(p)
        fine = Grid(4001)
        rb = stationary_profile(p, J, fine)
        ivp = solve_ivp(
            lambda u, r: p.E * r * (1 - r) - J,
            (-1.0, 1.0),
            [0.2],
            method="Radau",
            rtol=1e-11,
            atol=1e-13,
            dense_output=True,
        )
        assert np.max(np.abs(rb.values - ivp.sol(fine.nodes)[0])) <= 1e-6

    @pytest.mark.parametrize("E", [-10.0, -2.0, 0.9 * E0])
    def test_ode_residual_and_monotonicity(self, E, grid):
        p = Params(E, 0.2, 0.8)
        J = solve_current(p)
        rb = stationary_profile(p, J, grid)
        assert np.all(np.diff(rb.values) > 0)
        res = derivative_4(rb.values, grid) - E * mobility(rb.values) + J
        assert np.max(np.abs(res)) <= 1e-5

    def test_inconsistent_current_detected(self, grid):
        from wasep.core import EndpointMismatch

        p = Params(-2.0, 0.2, 0.8)
        with pytest.raises(EndpointMismatch):
            stationary_profile(p, -0.9, grid)

    def test_strong_field_inequality(self):
        # J/E > max chi on [rho-, rho+] for E < 0
        for E in (-1.0, -5.0, -40.0):
            p = Params(E, 0.2, 0.8)
            assert solve_current(p) / E > 0.25


class TestNormalization:
    def test_zero_field_closed_form(self):
        A0 = normalization_constant(Params(0.0, 0.2, 0.8))
        assert A0 == pytest.approx(math.log(0.3) + 1.0, abs=1e-14)
        assert A0 == pytest.approx(-0.203973, abs=1e-6)

    def test_continuity_toward_zero_field(self):
        # |A_E - A_0| shrinks linearly in E (the true slope is ~0.37 here,
        # so the gap at E = -0.01 is a few 1e-3)
        A0 = normalization_constant(Params(0.0, 0.2, 0.8))
        gap_2 = abs(normalization_constant(Params(-0.01, 0.2, 0.8)) - A0)
        gap_3 = abs(normalization_constant(Params(-0.001, 0.2, 0.8)) - A0)
        assert gap_2 <= 5e-3
        assert gap_3 <= 5e-4

    def test_strong_field_shift(self):
        # A_E - log(-E) approaches max log chi
        A = normalization_constant(Params(-100.0, 0.2, 0.8))
        assert A - math.log(100.0) == pytest.approx(math.log(0.25), rel=0.10)

    def test_needs_negative_current(self):
        with pytest.raises(DomainError):
            normalization_constant(Params(E0, 0.2, 0.8))


class TestAsymmetricConstants:
    @pytest.mark.parametrize(
        "rm,rp,expected_rho,expected_A",
        [
            (0.2, 0.8, 0.5, math.log(0.25)),
            (0.6, 0.8, 0.6, math.log(0.24)),
            (0.2, 0.4, 0.4, math.log(0.24)),
        ],
    )
    def test_candidates(self, rm, rp, expected_rho, expected_A):
        rho_a, A_a = asymmetric_constants(Params(-1.0, rm, rp))
        assert rho_a == pytest.approx(expected_rho)
        assert A_a == pytest.approx(expected_A, abs=1e-12)


class TestStationaryState:
    def test_bundle(self, stationary, params, grid):
        assert stationary.J < 0.0
        assert stationary.rho_bar.values[0] == pytest.approx(0.2, abs=1e-9)
        assert stationary.rho_bar.values[-1] == pytest.approx(0.8, abs=1e-9)
        assert np.all(np.diff(stationary.rho_bar.values) > 0)
        assert math.isfinite(stationary.A_E)

    def test_phi_bar_solves_euler_lagrange(self, stationary, params, grid):
        # cross-module residual of the optimal-potential equation
        res = el_residual(
            stationary.rho_bar.values, stationary.phi_bar.values, grid.h, params.E
        )
        assert res <= 1e-4
