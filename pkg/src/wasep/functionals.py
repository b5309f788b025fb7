"""Static free-energy functionals and their maximizers.

``free_energy`` is the nonequilibrium free energy: the supremum over
admissible potentials of a concave trial functional whose unique maximizer
is the solution of the Euler-Lagrange boundary value problem.  At the
reversible point E = E0 it degenerates to the relative entropy with
respect to the local-equilibrium profile.  ``free_energy_asym`` is the
strong-asymmetry (E -> -infinity) limit functional: its trial integrand
has no slope term, so the maximizer is the monotone projection of the
pointwise optimum, computed exactly by pool-adjacent-violators.

G-type values use Simpson quadrature with fourth-order slope stencils;
the asymmetric functional uses trapezoid weights throughout so that the
PAV maximizer is exactly optimal for the reported discrete objective.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import simpson
from scipy.optimize import isotonic_regression
from scipy.special import expit, rel_entr

from .core import (
    DensityProfile,
    DomainError,
    Grid,
    Params,
    PotentialProfile,
    derivative_4,
    xlogx,
)
from .euler_lagrange import ELSolution, solve_phi
from .stationary import asymmetric_constants, normalization_constant


@dataclass(frozen=True)
class RateReport:
    """Value of a rate functional plus solver diagnostics."""

    value: float
    maximizer: PotentialProfile | None = None
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise DomainError("rate functional value must be finite")


def _entropy_terms(rho):
    return xlogx(rho) + xlogx(1.0 - rho)


def _slope(phi, h, params: Params):
    """phi' with admissibility check; machine-flat slopes clamp to zero."""
    d1 = derivative_4(phi, h)
    floor = max(0.0, params.E)
    noise = 1e-9 * max(1.0, float(np.max(np.abs(phi)))) / h
    if np.min(d1) < floor - noise:
        raise DomainError("potential slope must exceed max(0, E)")
    return np.maximum(d1, floor)


def _g_integrand(rho, phi, h, params: Params):
    slope = _slope(phi, h, params)
    E = params.E
    A_E = normalization_constant(params)
    base = _entropy_terms(rho) + (1.0 - rho) * phi - np.logaddexp(0.0, phi)
    if E == 0.0:
        if np.min(slope) <= 0.0:
            raise DomainError("zero-field functional needs strictly positive slope")
        return base + np.log(slope) + 1.0 - A_E
    gain = (xlogx(slope) - xlogx(slope - E)) / E
    return base + gain - A_E


def trial_value(rho: DensityProfile, phi: PotentialProfile, params: Params) -> float:
    """Concave trial functional whose maximum over potentials is the free energy.

    Requires E < E0; the E = 0 case is the zero-field (symmetric) form.
    """
    params.require_subcritical(strict=True)
    if params.E == 0.0:
        return trial_value_zero_field(rho, phi, params)
    vals = _g_integrand(rho.values, phi.values, rho.grid.h, params)
    return float(simpson(vals, dx=rho.grid.h))


def trial_value_zero_field(rho: DensityProfile, phi: PotentialProfile, params: Params) -> float:
    """Zero-field trial functional (slope term becomes log phi' + 1)."""
    if params.E != 0.0:
        raise DomainError("zero-field functional requires E = 0")
    vals = _g_integrand(rho.values, phi.values, rho.grid.h, params)
    return float(simpson(vals, dx=rho.grid.h))


def reversible_profile(params: Params, grid: Grid) -> DensityProfile:
    """Logistic of the affine potential: the E = E0 product-measure profile."""
    phi = params.phi_minus * (1.0 - grid.nodes) / 2.0 + params.phi_plus * (1.0 + grid.nodes) / 2.0
    return DensityProfile(grid, expit(phi))


def relative_entropy(rho: DensityProfile, ref: DensityProfile) -> float:
    """int { rho log(rho/ref) + (1-rho) log((1-rho)/(1-ref)) } du (Simpson)."""
    r = rho.values
    q = ref.values
    vals = rel_entr(r, q) + rel_entr(1.0 - r, 1.0 - q)
    return float(simpson(vals, dx=rho.grid.h))


def equilibrium_free_energy(rho: DensityProfile, params: Params) -> float:
    """Free energy at the reversible point: relative entropy vs the logistic profile."""
    return relative_entropy(rho, reversible_profile(params, rho.grid))


def free_energy(rho: DensityProfile, params: Params, **solver_kwargs) -> RateReport:
    """Nonequilibrium free energy S_E(rho) with its maximizing potential.

    For E < E0 the value is the trial functional at the Euler-Lagrange
    solution, evaluated on the solver's refined internal grid; at E = E0
    it is the relative entropy with respect to the reversible profile.
    """
    params.require_subcritical()
    grid = rho.grid
    if params.at_reversible_point:
        phi = params.phi_minus * (1.0 - grid.nodes) / 2.0 + params.phi_plus * (1.0 + grid.nodes) / 2.0
        return RateReport(
            equilibrium_free_energy(rho, params),
            PotentialProfile(grid, phi),
            {"branch": "E0", "iterations": 0, "el_residual": 0.0},
        )
    sol = solve_phi(rho, params, **solver_kwargs)
    value = _g_value_fine(sol, params)
    return RateReport(
        value,
        sol.phi,
        {
            "branch": sol.branch,
            "iterations": sol.iterations,
            "el_residual": sol.residual,
            "fixed_point_gap": sol.fp_gap,
        },
    )


def _g_value_fine(sol: ELSolution, params: Params) -> float:
    vals = _g_integrand(sol.fine_rho, sol.fine_phi, sol.fine_h, params)
    return float(simpson(vals, dx=sol.fine_h))


# ---------------------------------------------------------------------------
# strong-asymmetry functional


def _trapezoid_weights(grid: Grid) -> np.ndarray:
    w = np.full(grid.M, grid.h)
    w[0] = w[-1] = 0.5 * grid.h
    return w


def _asym_integrand(rho, phi, params: Params) -> np.ndarray:
    _, A_a = asymmetric_constants(params)
    return _entropy_terms(rho) + (1.0 - rho) * phi - np.logaddexp(0.0, phi) - A_a


def trial_value_asym(rho: DensityProfile, phi: PotentialProfile, params: Params) -> float:
    """Strong-asymmetry trial functional (no slope term, trapezoid weights)."""
    v = phi.values
    if np.min(np.diff(v)) < -1e-12:
        raise DomainError("asymmetric trial potential must be nondecreasing")
    if v[0] < params.phi_minus - 1e-12 or v[-1] > params.phi_plus + 1e-12:
        raise DomainError("asymmetric trial potential must stay within the reservoir window")
    w = _trapezoid_weights(rho.grid)
    return float(np.dot(w, _asym_integrand(rho.values, v, params)))


def free_energy_asym(rho: DensityProfile, params: Params) -> RateReport:
    """Strong-asymmetry free energy S_a(rho) by exact monotone projection.

    The pointwise maximizer of the concave per-node objective is
    logit(1 - rho); the monotone-constrained maximizer is its weighted
    isotonic regression (pool-adjacent-violators in the mean parameter),
    clamped to the reservoir window.  The maximizer is a staircase in the
    closure of the admissible set.
    """
    grid = rho.grid
    w = _trapezoid_weights(grid)
    fit = isotonic_regression(1.0 - rho.values, weights=w, increasing=True)
    nu = np.clip(fit.x, params.rho_minus, params.rho_plus)
    n_clipped = int(np.count_nonzero(nu != fit.x))
    phi = np.log(nu) - np.log1p(-nu)
    value = float(np.dot(w, _asym_integrand(rho.values, phi, params)))
    return RateReport(
        value,
        PotentialProfile(grid, phi),
        {"branch": "asym-pav", "clips": n_clipped},
    )
