"""Stationary current, density profile, and the normalization constants.

For E <= E0 the stationary hydrodynamic profile is characterized by a
current parameter J (J/2 is the physical current): J is the unique
nonpositive root of

    (1/2) * int_{rho-}^{rho+} dr / (E chi(r) - J) = 1,

and the profile solves rho' = E chi(rho) - J from rho(-1) = rho_minus.
The free-energy normalization A_E and its strong-asymmetry analogue A_a
are one-dimensional integrals over the density interval; they are
evaluated with adaptive quadrature because the integrands develop
log-sharp structure as E -> -infinity.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.integrate import IntegrationWarning, quad
from scipy.optimize import brentq

from .core import (
    BracketNotFound,
    DensityProfile,
    DomainError,
    EndpointMismatch,
    Grid,
    Params,
    PotentialProfile,
    mobility,
    potential_of_density,
)

TOL_ROOT = 1e-10  # current-equation residual
TOL_BVP = 1e-6  # endpoint mismatch of the integrated profile


def _max_mobility(params: Params) -> float:
    r_star, _ = asymmetric_constants(params)
    return mobility(r_star)


def _spike_points(params: Params):
    # the integrands peak where chi is maximal; give quad the location
    if params.rho_minus < 0.5 < params.rho_plus:
        return (0.5,)
    return None


def current_residual(J: float, params: Params) -> float:
    """(1/2) int dr / (E chi - J) - 1, the defining equation of J."""
    E = params.E
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IntegrationWarning)
        val, _ = quad(
            lambda r: 1.0 / (E * mobility(r) - J),
            params.rho_minus,
            params.rho_plus,
            epsabs=1e-13,
            epsrel=1e-13,
            limit=400,
            points=_spike_points(params) if E < 0.0 else None,
        )
    return 0.5 * val - 1.0


@lru_cache(maxsize=256)
def _solve_current_cached(E: float, rho_minus: float, rho_plus: float) -> float:
    params = Params(E, rho_minus, rho_plus)
    params.require_subcritical()
    if params.at_reversible_point:
        # (1/(2 E0)) int dr/chi = (phi_+ - phi_-)/(2 E0) = 1 exactly
        return 0.0
    if E == 0.0:
        return -0.5 * (rho_plus - rho_minus)

    chi_max = _max_mobility(params)
    # E chi - J must stay positive on [rho-, rho+]: the admissible range is
    # J < E*chi_max for E < 0 and J < 0 for E in (0, E0).
    upper = min(E * chi_max, 0.0)
    width = rho_plus - rho_minus
    # approach the singular end until the residual turns positive
    offset = 1e-2 * max(1.0, abs(upper))
    hi = upper - offset
    for _ in range(14):
        if current_residual(hi, params) > 0.0:
            break
        offset *= 0.1
        hi = upper - offset
    else:
        raise BracketNotFound(
            "current equation has no root below the singular end; "
            "parameters are likely outside E <= E0"
        )
    lo = hi - width
    for _ in range(200):
        if current_residual(lo, params) < 0.0:
            break
        lo = hi - 2.0 * (hi - lo)
    else:  # pragma: no cover - integral -> 0 as J -> -inf
        raise BracketNotFound("could not bracket the stationary current")
    J = brentq(current_residual, lo, hi, args=(params,), xtol=1e-14, rtol=8.9e-16)
    return float(J)


def solve_current(params: Params) -> float:
    """Unique J <= 0 solving the current equation (residual <= 1e-10)."""
    return _solve_current_cached(params.E, params.rho_minus, params.rho_plus)


def stationary_profile(params: Params, J: float, grid: Grid, substeps: int = 16) -> DensityProfile:
    """Integrate rho' = E chi(rho) - J from rho(-1) = rho_minus with RK4.

    ``substeps`` internal RK4 steps per grid cell keep the integration error
    well below TOL_BVP; the endpoint is checked against rho_plus.
    """
    E = params.E
    if params.at_reversible_point:
        # J = 0 makes the logistic of the affine potential exact
        phi = params.phi_minus * (1.0 - grid.nodes) / 2.0 + params.phi_plus * (1.0 + grid.nodes) / 2.0
        from .core import density_of_potential

        return DensityProfile(grid, density_of_potential(phi))
    if E == 0.0:
        vals = params.rho_minus - J * (grid.nodes + 1.0)
        return DensityProfile(grid, vals)

    def f(r):
        return E * r * (1.0 - r) - J

    k = grid.h / substeps
    vals = np.empty(grid.M)
    r = params.rho_minus
    vals[0] = r
    for i in range(grid.M - 1):
        for _ in range(substeps):
            k1 = f(r)
            k2 = f(r + 0.5 * k * k1)
            k3 = f(r + 0.5 * k * k2)
            k4 = f(r + k * k3)
            r = r + (k / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        vals[i + 1] = r
    gap = abs(vals[-1] - params.rho_plus)
    if gap > TOL_BVP:
        raise EndpointMismatch(
            f"profile missed rho_plus by {gap:.3e} (> {TOL_BVP}); J inconsistent with params"
        )
    vals[-1] = params.rho_plus
    return DensityProfile(grid, np.clip(vals, 0.0, 1.0))


@lru_cache(maxsize=256)
def _normalization_cached(E: float, rho_minus: float, rho_plus: float) -> float:
    params = Params(E, rho_minus, rho_plus)
    if E == 0.0:
        return math.log(0.5 * (rho_plus - rho_minus)) + 1.0
    params.require_subcritical(strict=True)
    J = solve_current(params)
    if J >= 0.0:
        raise DomainError("normalization constant needs J < 0 (E < E0)")

    def integrand(r):
        chi = mobility(r)
        return math.log1p(-E * chi / J) / (E * chi)

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IntegrationWarning)
        val, _ = quad(
            integrand,
            rho_minus,
            rho_plus,
            epsabs=1e-12,
            epsrel=1e-12,
            limit=400,
            points=_spike_points(params) if E < 0.0 else None,
        )
    return math.log(-J) + 0.5 * val


def normalization_constant(params: Params, J: float | None = None) -> float:
    """The additive constant A_E of the free-energy integrand.

    A_E = log(-J) + (1/2) int dr log[1 - E chi / J] / (E chi); the E = 0
    branch uses the closed form log[(rho_+ - rho_-)/2] + 1.
    """
    if J is not None and J >= 0.0 and params.E != 0.0:
        raise DomainError("normalization constant needs J < 0")
    return _normalization_cached(params.E, params.rho_minus, params.rho_plus)


def asymmetric_constants(params: Params) -> tuple[float, float]:
    """Strong-asymmetry stationary density and constant: argmax/max of log chi.

    The maximizer of chi over [rho-, rho+] is one of {rho-, rho+, 1/2}.
    """
    candidates = [params.rho_minus, params.rho_plus]
    if params.rho_minus <= 0.5 <= params.rho_plus:
        candidates.append(0.5)
    r_star = max(candidates, key=mobility)
    return r_star, math.log(mobility(r_star))


@dataclass(frozen=True)
class StationaryState:
    """Bundle of the stationary solution at fixed parameters."""

    params: Params
    J: float
    rho_bar: DensityProfile
    phi_bar: PotentialProfile
    A_E: float


def solve_stationary(params: Params, grid: Grid | None = None) -> StationaryState:
    """Solve current + profile and attach phi_bar = logit(rho_bar) and A_E."""
    if grid is None:
        from .core import default_grid

        grid = default_grid()
    J = solve_current(params)
    rho_bar = stationary_profile(params, J, grid)
    phi_bar = PotentialProfile(grid, potential_of_density(rho_bar.values))
    A_E = math.nan if params.at_reversible_point else normalization_constant(params, J)
    return StationaryState(params, J, rho_bar, phi_bar, A_E)
