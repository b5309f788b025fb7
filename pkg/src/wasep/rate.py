"""Dynamical cost of fluctuation paths and the identities that certify them.

The rate functional of a path is computed through the controlled form of
the dynamics: at each time the control H solves an elliptic problem whose
right-hand side is the deviation of the path from the hydrodynamic flow,
and the cost is half the mobility-weighted H^1 norm of H.  In one space
dimension the elliptic problem integrates in closed form (the right-hand
side is a divergence), so no linear solve is needed:

    chi grad H = (1/2) grad pi - (E/2) chi - int_{-1}^u dt_pi dv + c,

with c fixed by H(+-1) = 0.  Hydrodynamic solutions cost zero; the
reversed adjoint relaxation costs exactly the free-energy difference of
its endpoints.

Time derivatives of stored paths use fourth-order stencils on uniform
time grids; all integrals are Simpson.  Degenerate mobility (chi = 0 on
an interior region with nonzero gradient) makes the cost infinite, which
is reported by the +inf sentinel rather than regularized.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import simpson

from .core import (
    DegenerateMobility,
    DensityProfile,
    DomainError,
    Params,
    SpacetimePath,
    clip_for_logit,
    cumulative_integral_4,
    derivative_4,
    mobility,
    second_derivative_4,
)
from .euler_lagrange import solve_phi


@dataclass(frozen=True)
class CostBreakdown:
    """Rate-functional value with the per-time control profiles."""

    cost: float  # I_T
    energy: float  # Q
    controls: np.ndarray | None = None  # H_t per stored time
    cost_density: np.ndarray | None = None  # d(cost)/dt at stored times
    k_norm_sq: float | None = None  # squared distance from the optimal path
    diagnostics: dict = field(default_factory=dict)


def _time_derivative(values: np.ndarray, times: np.ndarray) -> np.ndarray:
    dts = np.diff(times)
    if values.shape[0] >= 6 and np.allclose(dts, dts[0], rtol=1e-8, atol=0.0):
        return derivative_4(values, float(dts[0]))  # slicing acts along axis 0
    return np.gradient(values, times, axis=0)


def energy(path: SpacetimePath) -> float:
    """Space-time energy (1/2) int dt int du (grad pi)^2 / chi(pi).

    Returns +inf when the mobility vanishes at an interior node with a
    nonzero density gradient there.
    """
    h = path.grid.h
    chi = path.values * (1.0 - path.values)
    q = np.empty(path.times.size)
    for k in range(path.times.size):
        grad = derivative_4(path.values[k], h)
        c = chi[k]
        degenerate = (c[1:-1] == 0.0) & (np.abs(grad[1:-1]) > 1e-12)
        if np.any(degenerate):
            return math.inf
        dens = np.zeros_like(grad)
        pos = c > 0.0
        dens[pos] = grad[pos] ** 2 / c[pos]
        q[k] = simpson(dens, dx=h)
    return 0.5 * float(simpson(q, x=path.times))


def _control_gradient(pi, dt_pi, h, E):
    """chi * grad H on one time slice, by double integration."""
    chi = pi * (1.0 - pi)
    if np.any(chi[1:-1] <= 0.0):
        raise DegenerateMobility("mobility vanished inside the interval")
    grad_pi = derivative_4(pi, h)
    P = cumulative_integral_4(dt_pi, h)
    v = 0.5 * grad_pi - 0.5 * E * chi - P
    inv_chi = 1.0 / chi
    c = -cumulative_integral_4(v * inv_chi, h)[-1] / cumulative_integral_4(inv_chi, h)[-1]
    flux = v + c
    return flux, flux * inv_chi, chi


def path_cost(
    path: SpacetimePath,
    gamma: DensityProfile,
    params: Params,
    with_decomposition: bool = False,
) -> CostBreakdown:
    """Rate functional I_T(path | gamma) via the per-time elliptic controls.

    A path whose initial slice differs from gamma by more than 1e-6 caries
    infinite cost (the functional pins the initial condition).  With
    ``with_decomposition`` the free-energy decomposition terms are also
    computed: the endpoint free energies and the squared norm of the
    deviation K = Gamma - H from the optimal drift (one Euler-Lagrange
    solve per stored time).
    """
    grid = path.grid
    if float(np.max(np.abs(path.values[0] - gamma.values))) > 1e-6:
        return CostBreakdown(math.inf, energy(path), diagnostics={"reason": "initial-condition"})
    h = grid.h
    E = params.E
    dt_pi = _time_derivative(path.values, path.times)
    n_t = path.times.size
    controls = np.empty((n_t, grid.M))
    q = np.empty(n_t)
    k_density = np.empty(n_t) if with_decomposition else None
    clips = 0
    for k in range(n_t):
        flux, grad_H, chi = _control_gradient(path.values[k], dt_pi[k], h, E)
        q[k] = simpson(flux * grad_H, dx=h)
        controls[k] = cumulative_integral_4(grad_H, h)
        if with_decomposition:
            pi_c, n_c = clip_for_logit(path.values[k])
            clips += n_c
            gamma_t = (
                np.log(pi_c)
                - np.log1p(-pi_c)
                - solve_phi(DensityProfile(grid, path.values[k]), params).phi.values
            )
            grad_K = derivative_4(gamma_t, h) - grad_H
            k_density[k] = simpson(chi * grad_K**2, dx=h)
    cost = 0.5 * float(simpson(q, x=path.times))
    k_norm_sq = float(simpson(k_density, x=path.times)) if with_decomposition else None
    return CostBreakdown(
        cost,
        energy(path),
        controls,
        0.5 * q,
        k_norm_sq,
        {"logit_clips": clips},
    )


def variational_bound(
    path: SpacetimePath, gamma: DensityProfile, H: np.ndarray, params: Params
) -> float:
    """Value of the trial functional J_H on the path (a lower bound family).

    H is a space-time test function vanishing at u = +-1; the supremum of
    J_H over all such H equals the rate functional.
    """
    grid = path.grid
    times = path.times
    if H.shape != path.values.shape:
        raise DomainError("test function must be sampled on the path's space-time grid")
    if float(np.max(np.abs(H[:, 0]))) > 1e-12 or float(np.max(np.abs(H[:, -1]))) > 1e-12:
        raise DomainError("test function must vanish at the endpoints of [-1, 1]")
    h = grid.h
    E = params.E
    pi = path.values
    chi = pi * (1.0 - pi)
    dt_H = _time_derivative(H, times)
    sp = lambda a: simpson(a, dx=h)  # noqa: E731

    term_boundary = sp(pi[-1] * H[-1]) - sp(gamma.values * H[0])
    inner_t = np.empty(times.size)
    lap_bnd_plus = np.empty(times.size)
    lap_bnd_minus = np.empty(times.size)
    lap_term = np.empty(times.size)
    drift_term = np.empty(times.size)
    quad_term = np.empty(times.size)
    for k in range(times.size):
        grad_H = derivative_4(H[k], h)
        lap_H = second_derivative_4(H[k], h)
        inner_t[k] = sp(pi[k] * dt_H[k])
        lap_term[k] = sp(pi[k] * lap_H)
        lap_bnd_plus[k] = grad_H[-1]
        lap_bnd_minus[k] = grad_H[0]
        drift_term[k] = sp(chi[k] * grad_H)
        quad_term[k] = sp(chi[k] * grad_H**2)
    ti = lambda a: float(simpson(a, x=times))  # noqa: E731
    return float(
        term_boundary
        - ti(inner_t)
        - 0.5 * ti(lap_term)
        + 0.5 * params.rho_plus * ti(lap_bnd_plus)
        - 0.5 * params.rho_minus * ti(lap_bnd_minus)
        - 0.5 * E * ti(drift_term)
        - 0.5 * ti(quad_term)
    )


def hamilton_jacobi_residual(rho: DensityProfile, params: Params) -> float:
    """|<grad G, chi grad G> - <grad rho - E chi, grad G>| at G = logit(rho) - Phi(rho).

    Vanishes identically when the free energy solves the Hamilton-Jacobi
    equation of the fluctuation dynamics; the returned number is the
    quadrature value of the left-hand side.
    """
    grid = rho.grid
    h = grid.h
    clipped, _ = clip_for_logit(rho.values)
    sol = solve_phi(rho, params)
    gamma_fn = np.log(clipped) - np.log1p(-clipped) - sol.phi.values
    grad_g = derivative_4(gamma_fn, h)
    grad_rho = derivative_4(rho.values, h)
    chi = mobility(rho.values)
    lhs = simpson(grad_g * chi * grad_g, dx=h)
    rhs = simpson((grad_rho - params.E * chi) * grad_g, dx=h)
    return float(abs(lhs - rhs))


def chain_rule_gap(path: SpacetimePath, params: Params) -> float:
    """|S(pi_T) - S(pi_0) - int dt <Gamma_t, dt pi_t>| along a smooth path.

    One Euler-Lagrange solve per stored time; keep the number of stored
    times moderate.
    """
    from .functionals import free_energy

    grid = path.grid
    h = grid.h
    dt_pi = _time_derivative(path.values, path.times)
    integrand = np.empty(path.times.size)
    for k in range(path.times.size):
        pi_c, _ = clip_for_logit(path.values[k])
        gamma_t = (
            np.log(pi_c)
            - np.log1p(-pi_c)
            - solve_phi(DensityProfile(grid, path.values[k]), params).phi.values
        )
        integrand[k] = simpson(gamma_t * dt_pi[k], dx=h)
    rhs = float(simpson(integrand, x=path.times))
    s_T = free_energy(path.profile(-1), params).value
    s_0 = free_energy(path.profile(0), params).value
    return abs(s_T - s_0 - rhs)
