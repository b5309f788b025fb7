import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wasep.core import (
    CLIP_EPS,
    DensityProfile,
    DomainError,
    Grid,
    Params,
    PotentialProfile,
    SpacetimePath,
    clip_for_logit,
    cumulative_integral_4,
    default_grid,
    density_of_potential,
    derivative,
    derivative_4,
    mobility,
    potential_of_density,
    quadrature,
    second_derivative_4,
    xlogx,
)


class TestParams:
    def test_chemical_potentials(self):
        p = Params(-2.0, 0.2, 0.8)
        assert p.phi_minus == pytest.approx(math.log(0.2 / 0.8), abs=1e-15)
        assert p.phi_plus == pytest.approx(math.log(4.0), abs=1e-15)
        assert p.E0 == pytest.approx(math.log(4.0), abs=1e-14)
        assert p.E0 > 0

    @pytest.mark.parametrize("bad", [(0.0, 0.5), (0.5, 0.2), (0.5, 1.0), (0.5, 0.5)])
    def test_rejects_bad_reservoirs(self, bad):
        with pytest.raises(DomainError):
            Params(-1.0, *bad)

    def test_subcritical_guard(self):
        p = Params(2.0, 0.2, 0.8)
        with pytest.raises(DomainError):
            p.require_subcritical()
        Params(1.0, 0.2, 0.8).require_subcritical()


class TestGrid:
    def test_basic(self):
        g = Grid(5)
        assert g.h == pytest.approx(0.5)
        assert g.nodes[0] == -1.0 and g.nodes[-1] == 1.0
        assert np.all(np.diff(g.nodes) > 0)

    def test_minimum_size(self):
        with pytest.raises(DomainError):
            Grid(2)

    def test_default(self):
        assert default_grid().M == 401

    def test_immutability(self):
        g = Grid(5)
        with pytest.raises(ValueError):
            g.nodes[0] = 0.0


class TestProfiles:
    def test_density_range_enforced(self, grid):
        with pytest.raises(DomainError):
            DensityProfile(grid, np.full(grid.M, 1.5))
        DensityProfile(grid, np.zeros(grid.M))  # 0 and 1 are allowed

    def test_density_immutable(self, grid):
        rho = DensityProfile.constant(grid, 0.5)
        with pytest.raises(ValueError):
            rho.values[0] = 0.3

    def test_potential_admissibility(self, grid, params):
        phi = params.phi_minus * (1 - grid.nodes) / 2 + params.phi_plus * (1 + grid.nodes) / 2
        PotentialProfile(grid, phi).check_admissible(params)
        bad = phi.copy()
        bad[5] = phi[10]  # kill monotonicity
        with pytest.raises(Exception):
            PotentialProfile(grid, bad).check_admissible(params)

    def test_spacetime_path_checks(self, grid):
        vals = np.tile(np.full(grid.M, 0.5), (3, 1))
        path = SpacetimePath(grid, [0.0, 1.0, 2.0], vals)
        assert path.T == 2.0
        with pytest.raises(DomainError):
            SpacetimePath(grid, [0.0, 0.0, 1.0], vals)
        rev = path.reversed()
        assert np.allclose(rev.times, [0.0, 1.0, 2.0])


class TestQuadrature:
    def test_constant(self, grid):
        assert quadrature(np.ones(grid.M), grid) == pytest.approx(2.0, abs=1e-14)

    def test_odd_function(self, grid):
        assert quadrature(grid.nodes, grid) == pytest.approx(0.0, abs=1e-14)

    def test_parabola_tolerance(self, grid):
        # trapezoid vs exact antiderivative 2/3
        assert quadrature(grid.nodes**2, grid) == pytest.approx(2.0 / 3.0, abs=1e-4)

    @given(st.floats(-5, 5), st.floats(-5, 5))
    @settings(max_examples=25, deadline=None)
    def test_linearity(self, a, b):
        g = Grid(41)
        f1 = np.sin(g.nodes)
        f2 = np.cos(2 * g.nodes)
        lhs = quadrature(a * f1 + b * f2, g)
        rhs = a * quadrature(f1, g) + b * quadrature(f2, g)
        assert lhs == pytest.approx(rhs, abs=1e-10)

    @given(st.integers(0, 1000))
    @settings(max_examples=25, deadline=None)
    def test_monotone(self, seed):
        g = Grid(41)
        rng = np.random.default_rng(seed)
        f = rng.normal(size=g.M)
        bump = np.abs(rng.normal(size=g.M))
        assert quadrature(f + bump, g) >= quadrature(f, g) - 1e-12


class TestDerivative:
    def test_constant(self, grid):
        assert np.max(np.abs(derivative(np.full(grid.M, 3.0), grid))) == 0.0

    def test_affine_exact(self, grid):
        d = derivative(grid.nodes, grid)
        assert np.max(np.abs(d - 1.0)) <= 1e-12

    def test_sine(self, grid):
        d = derivative(np.sin(grid.nodes), grid)
        assert np.max(np.abs(d - np.cos(grid.nodes))) <= 1e-4

    def test_fourth_order_variants(self, grid):
        f = np.sin(2 * grid.nodes)
        assert np.max(np.abs(derivative_4(f, grid) - 2 * np.cos(2 * grid.nodes))) <= 1e-8
        assert np.max(np.abs(second_derivative_4(f, grid) + 4 * np.sin(2 * grid.nodes))) <= 1e-6

    def test_fundamental_theorem(self, grid):
        f = np.exp(grid.nodes) * np.sin(2 * grid.nodes)
        total = quadrature(derivative(f, grid), grid)
        assert total == pytest.approx(f[-1] - f[0], abs=grid.h**2)

    def test_cumulative_integral(self, grid):
        f = np.cos(3 * grid.nodes)
        exact = (np.sin(3 * grid.nodes) - np.sin(-3.0)) / 3.0
        assert np.max(np.abs(cumulative_integral_4(f, grid.h) - exact)) <= 1e-9


class TestScalarMaps:
    def test_mobility_values(self):
        assert mobility(0.0) == 0.0
        assert mobility(0.5) == pytest.approx(0.25)
        assert mobility(0.2) == pytest.approx(0.16)

    def test_mobility_domain(self):
        with pytest.raises(DomainError):
            mobility(1.2)
        with pytest.raises(DomainError):
            mobility(-0.1)

    def test_logistic_center(self):
        assert density_of_potential(0.0) == pytest.approx(0.5)

    def test_logit_value(self):
        assert potential_of_density(0.8) == pytest.approx(math.log(4.0), abs=1e-12)

    @pytest.mark.parametrize("rho", [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9])
    def test_round_trip(self, rho):
        assert density_of_potential(potential_of_density(rho)) == pytest.approx(rho, abs=1e-12)

    def test_logit_domain(self):
        for bad in (0.0, 1.0):
            with pytest.raises(DomainError):
                potential_of_density(bad)

    @given(st.floats(0.01, 0.99), st.floats(0.01, 0.99))
    @settings(max_examples=50, deadline=None)
    def test_monotone_inverse_pair(self, a, b):
        if a < b:
            assert potential_of_density(a) < potential_of_density(b)
        assert density_of_potential(potential_of_density(a)) == pytest.approx(a, abs=1e-12)

    def test_clip_records_events(self):
        vals, n = clip_for_logit(np.array([0.0, 0.5, 1.0]))
        assert n == 2
        assert vals[0] == CLIP_EPS and vals[-1] == 1 - CLIP_EPS

    def test_xlogx_convention(self):
        assert xlogx(0.0) == 0.0
        assert xlogx(1.0) == 0.0
        assert xlogx(0.5) == pytest.approx(0.5 * math.log(0.5))
