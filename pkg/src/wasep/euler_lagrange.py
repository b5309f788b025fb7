"""Nonlinear two-point boundary value problem for the optimal potential.

For a density profile rho and field E < E0 the maximizing potential of the
free-energy variational problem solves

    phi'' / (phi' (phi' - E)) + 1/(1 + e^phi) = rho,
    phi(+-1) = phi_+-,   phi' > max(0, E).

Two independent routes are implemented:

* ``solve_phi`` iterates the integral fixed-point operator (K1 for E <= 0,
  K2 for 0 < E < E0) with adaptive damping.  The iteration runs on an
  internally refined grid (piecewise-linear prolongation of rho) because
  several downstream tolerances require the solution well below the
  caller-grid truncation level.
* ``shooting_oracle`` integrates the equivalent first-order system in
  W = (1/E) log[(phi'-E)/phi'] with RK4 and bisects on the initial slope.
  W -> phi' inverts as phi' = E/(1 - e^{E W}), with the E -> 0 limit
  phi' = -1/W; the map is strictly monotone, so bisection is safe.

The two solvers share nothing beyond the grid, which is what makes their
agreement a meaningful correctness gate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.linalg import solve_banded
from scipy.special import expit

from .backend import maybe_njit
from .core import (
    BracketNotFound,
    DensityProfile,
    DomainError,
    Grid,
    MonotonicityLoss,
    NoConvergence,
    Params,
    PotentialProfile,
    cumulative_integral_4,
    derivative_4,
    second_derivative_4,
)

MAX_ITER = 10_000
TOL_FIXED_POINT = 1e-10
TOL_RESIDUAL = 1e-6


def el_residual(rho_values, phi_values, h, E, interior_only=True):
    """Sup-norm residual of the Euler-Lagrange equation on a uniform grid.

    Uses fourth-order stencils; with ``interior_only`` the two nodes at each
    end (where one-sided stencils are noisiest) are excluded.

    At strong fields the solution develops machine-flat segments
    (phi' ~ e^{-c|E|}) where the division by phi'(phi'-E) amplifies stencil
    roundoff beyond any tolerance; the residual is reported as zero at
    nodes where the denominator sits below its measurability floor, after
    checking that the slope is at least nonnegative there.
    """
    rho = np.asarray(rho_values, dtype=float)
    phi = np.asarray(phi_values, dtype=float)
    d1 = derivative_4(phi, h)
    d2 = second_derivative_4(phi, h)
    denom = d1 * (d1 - E)
    floor = 5e-9 * max(1.0, float(np.max(np.abs(phi)))) / (h * h)
    if np.any(d1 < -1e-7 * max(1.0, float(np.max(np.abs(phi)))) / h):
        raise MonotonicityLoss("potential slope went negative beyond noise level")
    res = np.where(denom >= floor, d2 / np.where(denom >= floor, denom, 1.0), 0.0)
    res += expit(-phi) - rho
    res[denom < floor] = 0.0
    if interior_only:
        res = res[2:-2]
    return float(np.max(np.abs(res)))


def _apply_k(rho, phi, h, params: Params, branch: str) -> np.ndarray:
    """One application of the integral operator K1 or K2 (array level)."""
    E = params.E
    dphi = derivative_4(phi, h)
    defect = rho - expit(-phi)  # rho - 1/(1+e^phi)
    if branch == "K1":
        r = defect * (dphi - E)
    else:
        r = defect * dphi
    g = cumulative_integral_4(r, h)
    g -= g.max()  # exponentials stay bounded for large |E|
    w = np.exp(g)
    integral = cumulative_integral_4(w, h)
    ratio = integral / integral[-1]
    if branch == "K1":
        return params.phi_minus + (params.phi_plus - params.phi_minus) * ratio
    span = params.phi_plus - params.phi_minus - 2.0 * E
    u = np.linspace(-1.0, 1.0, rho.size)
    return params.phi_minus + E * (u + 1.0) + span * ratio


def _branch_for(params: Params) -> str:
    return "K1" if params.E <= 0.0 else "K2"


def operator_k1(rho: DensityProfile, phi: PotentialProfile, params: Params) -> PotentialProfile:
    """Integral fixed-point operator for E <= 0; output lies in the admissible cone."""
    if params.E > 0.0:
        raise DomainError("K1 branch requires E <= 0")
    return PotentialProfile(
        rho.grid, _apply_k(rho.values, phi.values, rho.grid.h, params, "K1")
    )


def operator_k2(rho: DensityProfile, phi: PotentialProfile, params: Params) -> PotentialProfile:
    """Integral fixed-point operator for 0 < E < E0."""
    if not (0.0 < params.E < params.E0):
        raise DomainError("K2 branch requires 0 < E < E0")
    return PotentialProfile(
        rho.grid, _apply_k(rho.values, phi.values, rho.grid.h, params, "K2")
    )


@dataclass(frozen=True)
class ELSolution:
    """Solution record of the boundary value problem."""

    rho: DensityProfile
    phi: PotentialProfile
    residual: float
    iterations: int
    branch: str
    fp_gap: float
    # refined internals, consumed by the functional evaluators
    fine_h: float = field(repr=False, default=0.0)
    fine_rho: np.ndarray = field(repr=False, default=None)
    fine_phi: np.ndarray = field(repr=False, default=None)


def _auto_refine(h: float, E: float) -> int:
    # strong fields develop layers of width ~1/|E|; keep k|E| small enough
    # that the fourth-order discretization error stays below tol_el
    k_max = min(6.5e-4, 0.02 / max(1.0, abs(E)))
    return int(min(64, max(1, math.ceil(h / k_max))))


def _fixed_point_iterate(rho_f, phi0, h_f, params, branch, gap_tol, max_iter):
    """Anderson-accelerated damped iteration of the integral operator.

    The plain map is expansive at strong fields, so plain relaxation is
    safeguarded: steps come from a depth-6 Anderson mixing of the residual
    history, and whenever the fixed-point gap blows past the best value the
    history is flushed, the mixing parameter halves, and iteration restarts
    from the best iterate seen.
    """
    depth = 6
    beta = 0.5
    phi = phi0.copy()
    g = _apply_k(rho_f, phi, h_f, params, branch) - phi
    gap = float(np.max(np.abs(g)))
    best_gap, best_phi = gap, phi.copy()
    dphi_hist: list[np.ndarray] = []
    dg_hist: list[np.ndarray] = []
    n_iter = 1
    while gap > gap_tol and n_iter < max_iter:
        if dg_hist:
            F = np.column_stack(dg_hist)
            gamma, *_ = np.linalg.lstsq(F, g, rcond=None)
            X = np.column_stack(dphi_hist)
            step = beta * g - (X + beta * F) @ gamma
        else:
            step = beta * g
        phi_new = phi + step
        g_new = _apply_k(rho_f, phi_new, h_f, params, branch) - phi_new
        gap_new = float(np.max(np.abs(g_new)))
        n_iter += 1
        if not math.isfinite(gap_new) or gap_new > 1e3 * max(best_gap, gap_tol):
            beta = max(0.5 * beta, 2.0 ** -12)
            dphi_hist.clear()
            dg_hist.clear()
            phi = best_phi.copy()
            g = _apply_k(rho_f, phi, h_f, params, branch) - phi
            gap = float(np.max(np.abs(g)))
            continue
        dphi_hist.append(phi_new - phi)
        dg_hist.append(g_new - g)
        if len(dphi_hist) > depth:
            dphi_hist.pop(0)
            dg_hist.pop(0)
        phi, g, gap = phi_new, g_new, gap_new
        if gap < best_gap:
            best_gap, best_phi = gap, phi.copy()
    if gap > gap_tol:
        raise NoConvergence(
            f"fixed point not converged in {max_iter} iterations (gap {best_gap:.3e}); "
            "grid too coarse or field too extreme",
            residual=best_gap,
        )
    return phi, gap, n_iter


def _prolong(
    values: np.ndarray, grid: Grid, factor: int, clip01: bool = True
) -> tuple[np.ndarray, np.ndarray, np.ndarray, float]:
    """Cubic-spline prolongation onto a ``factor``-times finer grid.

    Returns node values, mid-cell values (for RK4 stages), fine nodes and the
    fine spacing.  Not-a-knot ends keep the interpolant fourth-order up to
    the boundary; densities are clipped back into [0, 1] after interpolation.
    """
    fine = Grid((grid.M - 1) * factor + 1)
    spline = CubicSpline(grid.nodes, values, bc_type="not-a-knot")
    at_nodes = spline(fine.nodes)
    at_half = spline(fine.nodes[:-1] + 0.5 * fine.h)
    if clip01:
        at_nodes = np.clip(at_nodes, 0.0, 1.0)
        at_half = np.clip(at_half, 0.0, 1.0)
    return at_nodes, at_half, fine.nodes, fine.h


def _affine_potential(nodes: np.ndarray, params: Params) -> np.ndarray:
    return params.phi_minus * (1.0 - nodes) / 2.0 + params.phi_plus * (1.0 + nodes) / 2.0


def solve_phi(
    rho: DensityProfile,
    params: Params,
    tol: float = TOL_FIXED_POINT,
    max_iter: int = MAX_ITER,
    refine: int | None = None,
    residual_tol: float = TOL_RESIDUAL,
) -> ELSolution:
    """Optimal potential for ``rho`` by damped fixed-point iteration.

    The damping factor starts at 0.5 and adapts: it halves whenever the
    fixed-point gap grows (strong fields make the plain map expansive) and
    creeps back up after sustained decrease.  Convergence is declared when
    the damped update falls below ``tol`` in sup norm.
    """
    params.require_subcritical()
    grid = rho.grid
    if params.at_reversible_point:
        phi = _affine_potential(grid.nodes, params)
        return ELSolution(
            rho, PotentialProfile(grid, phi), 0.0, 0, "E0", 0.0, grid.h, rho.values.copy(), phi
        )

    branch = _branch_for(params)
    factor = _auto_refine(grid.h, params.E) if refine is None else max(1, int(refine))
    rho_f, _, nodes_f, h_f = _prolong(rho.values, grid, factor)
    phi_f = _affine_potential(nodes_f, params)

    phi_f, gap, n_iter = _fixed_point_iterate(
        rho_f, phi_f, h_f, params, branch, tol, max_iter
    )
    residual = el_residual(rho_f, phi_f, h_f, params.E)
    if residual > residual_tol:
        raise NoConvergence(
            f"converged iterate violates the equation residual: {residual:.3e} > {residual_tol:.1e}",
            residual=residual,
        )
    phi_coarse = phi_f[::factor].copy()
    phi_coarse[0] = params.phi_minus
    phi_coarse[-1] = params.phi_plus
    return ELSolution(
        rho,
        PotentialProfile(grid, phi_coarse),
        residual,
        n_iter,
        branch,
        gap,
        h_f,
        rho_f,
        phi_f,
    )


# ---------------------------------------------------------------------------
# shooting oracle


@maybe_njit
def _shoot_sweep(rho_nodes, rho_half, h, E, phi_minus, W0):  # pragma: no cover - jitted
    """RK4 sweep of phi' = z(W), W' = rho - 1/(1+e^phi); returns (phi, ok)."""
    n = rho_nodes.shape[0]
    phi = np.empty(n)
    phi[0] = phi_minus
    p = phi_minus
    W = W0

    def z(w):
        if abs(E) < 1e-13:
            return -1.0 / w
        ew = E * w
        if ew > 500.0:
            return -E * np.exp(-ew)
        return E / (1.0 - np.exp(ew))

    for i in range(n - 1):
        r0 = rho_nodes[i]
        rh = rho_half[i]
        r1 = rho_nodes[i + 1]
        k1p = z(W)
        k1w = r0 - 1.0 / (1.0 + np.exp(p))
        w2 = W + 0.5 * h * k1w
        if w2 >= -1e-14:
            return phi, False
        k2p = z(w2)
        k2w = rh - 1.0 / (1.0 + np.exp(p + 0.5 * h * k1p))
        w3 = W + 0.5 * h * k2w
        if w3 >= -1e-14:
            return phi, False
        k3p = z(w3)
        k3w = rh - 1.0 / (1.0 + np.exp(p + 0.5 * h * k2p))
        w4 = W + h * k3w
        if w4 >= -1e-14:
            return phi, False
        k4p = z(w4)
        k4w = r1 - 1.0 / (1.0 + np.exp(p + h * k3p))
        p = p + (h / 6.0) * (k1p + 2.0 * k2p + 2.0 * k3p + k4p)
        W = W + (h / 6.0) * (k1w + 2.0 * k2w + 2.0 * k3w + k4w)
        if W >= -1e-14 or p > 1e6:
            return phi, False
        phi[i + 1] = p
    return phi, True


def _shoot_mismatch(xi, rho_nodes, rho_half, h, params):
    phi, ok = _shoot_sweep(rho_nodes, rho_half, h, params.E, params.phi_minus, -math.exp(xi))
    if not ok:
        return 1e9, phi  # slope blew past the admissible cone: overshoot
    return phi[-1] - params.phi_plus, phi


def shooting_oracle(
    rho: DensityProfile,
    params: Params,
    refine: int | None = None,
    tol: float = 1e-13,
    xi_bracket: tuple[float, float] = (-25.0, 25.0),
) -> PotentialProfile:
    """Independent BVP solution by bisection on the initial slope.

    The slope is parametrized as W0 = -e^xi; phi(1) is strictly decreasing
    in xi, so a sign change of the endpoint mismatch brackets the root.
    """
    params.require_subcritical(strict=True)
    grid = rho.grid
    factor = _auto_refine(grid.h, params.E) if refine is None else max(1, int(refine))
    rho_f, rho_half, _, h_f = _prolong(rho.values, grid, factor)

    lo, hi = xi_bracket
    m_lo, _ = _shoot_mismatch(lo, rho_f, rho_half, h_f, params)
    m_hi, _ = _shoot_mismatch(hi, rho_f, rho_half, h_f, params)
    for _ in range(30):
        if m_lo > 0.0:
            break
        lo -= 10.0
        m_lo, _ = _shoot_mismatch(lo, rho_f, rho_half, h_f, params)
    for _ in range(30):
        if m_hi < 0.0:
            break
        hi += 10.0
        m_hi, _ = _shoot_mismatch(hi, rho_f, rho_half, h_f, params)
    if not (m_lo > 0.0 > m_hi):
        raise BracketNotFound("shooting bracket failed: no admissible slope hits phi_plus")

    phi_best = None
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        m_mid, phi_mid = _shoot_mismatch(mid, rho_f, rho_half, h_f, params)
        if m_mid > 0.0:
            lo = mid
        else:
            hi = mid
        phi_best = phi_mid
        if abs(m_mid) <= tol or (hi - lo) <= 4e-16 * max(1.0, abs(mid)):
            break
    phi = phi_best[::factor].copy()
    phi[0] = params.phi_minus
    phi[-1] = params.phi_plus
    return PotentialProfile(grid, phi)


# ---------------------------------------------------------------------------
# linearized problem


def linearized_sensitivity(
    rho: DensityProfile, drho: np.ndarray, params: Params, solution: ELSolution | None = None
) -> np.ndarray:
    """Directional derivative of the optimal potential.

    Solves the linear elliptic problem
        d/du [ psi' / (phi' (phi' - E)) ] - e^phi/(1+e^phi)^2 psi = drho,
        psi(+-1) = 0,
    by a conservative tridiagonal discretization on the caller grid.
    """
    if solution is None:
        solution = solve_phi(rho, params)
    grid = rho.grid
    h = grid.h
    phi = solution.phi.values
    E = params.E
    slope_half = np.diff(phi) / h
    a_half = 1.0 / (slope_half * (slope_half - E))
    c = expit(phi) * expit(-phi)  # e^phi / (1+e^phi)^2
    f = np.asarray(drho, dtype=float)

    n = grid.M - 2
    lower = np.zeros(n)
    diag = np.empty(n)
    upper = np.zeros(n)
    diag[:] = -(a_half[:-1] + a_half[1:]) / h**2 - c[1:-1]
    lower[:-1] = a_half[1:-1] / h**2
    upper[1:] = a_half[1:-1] / h**2
    ab = np.zeros((3, n))
    ab[0, 1:] = upper[1:]
    ab[1] = diag
    ab[2, :-1] = lower[:-1]
    interior = solve_banded((1, 1), ab, f[1:-1])
    psi = np.zeros(grid.M)
    psi[1:-1] = interior
    return psi
