"""Shared domain types and grid calculus on the interval [-1, 1].

Everything downstream works with uniform grids.  The public ``quadrature``
and ``derivative`` operations are the second-order building blocks
(trapezoid rule, centered differences); the ``*_4`` variants are the
fourth-order stencils used wherever a tolerance demands better than
O(h^2) (functional values, residual checks).

All container types freeze their arrays after construction and are safe
to share across threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

CLIP_EPS = 1e-12  # densities are clipped to [CLIP_EPS, 1-CLIP_EPS] before logits


class NumericsError(RuntimeError):
    """Base class for numerical failures (CLI exit code 3)."""


class DomainError(NumericsError):
    """Input outside the mathematical domain of an operation."""


class BracketNotFound(NumericsError):
    """Root bracketing failed (signals inadmissible parameters)."""


class EndpointMismatch(NumericsError):
    """Shooting/IVP solution missed the required boundary value."""


class NoConvergence(NumericsError):
    """Iteration exceeded its budget; carries the best residual seen."""

    def __init__(self, msg, residual=math.nan):
        super().__init__(msg)
        self.residual = residual


class MonotonicityLoss(NumericsError):
    """A potential profile lost the required slope bound."""


class DegenerateMobility(NumericsError):
    """Mobility vanished on a set where the elliptic solve needs it."""


# ---------------------------------------------------------------------------
# parameters


@dataclass(frozen=True)
class Params:
    """Physical parameters: external field E and reservoir densities.

    ``phi_minus``/``phi_plus`` are the reservoir chemical potentials
    log[rho/(1-rho)] and ``E0 = (phi_plus - phi_minus)/2`` is the field at
    which the bulk drift matches the boundary drive (reversible point).
    """

    E: float
    rho_minus: float
    rho_plus: float

    def __post_init__(self):
        if not (0.0 < self.rho_minus < self.rho_plus < 1.0):
            raise DomainError(
                f"need 0 < rho_minus < rho_plus < 1, got ({self.rho_minus}, {self.rho_plus})"
            )
        if not math.isfinite(self.E):
            raise DomainError("E must be finite")

    @property
    def phi_minus(self) -> float:
        return potential_of_density(self.rho_minus)

    @property
    def phi_plus(self) -> float:
        return potential_of_density(self.rho_plus)

    @property
    def E0(self) -> float:
        return 0.5 * (self.phi_plus - self.phi_minus)

    def require_subcritical(self, strict: bool = False):
        """Quasi-potential operations need E <= E0 (strictly below for some)."""
        if strict:
            if not self.E < self.E0 - 1e-14:
                raise DomainError(f"operation requires E < E0 = {self.E0:.6g}, got E = {self.E}")
        elif self.E > self.E0 + 1e-12:
            raise DomainError(f"operation requires E <= E0 = {self.E0:.6g}, got E = {self.E}")

    @property
    def at_reversible_point(self) -> bool:
        return abs(self.E - self.E0) <= 1e-12 * max(1.0, abs(self.E0))


# ---------------------------------------------------------------------------
# grid and profiles


@dataclass(frozen=True)
class Grid:
    """Uniform nodes u_0 = -1 < ... < u_{M-1} = 1."""

    M: int
    nodes: np.ndarray = field(repr=False, compare=False, default=None)

    def __post_init__(self):
        if self.M < 3:
            raise DomainError(f"grid needs M >= 3 nodes, got {self.M}")
        nodes = np.linspace(-1.0, 1.0, self.M)
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)

    @property
    def h(self) -> float:
        return 2.0 / (self.M - 1)

    def refined(self, factor: int) -> "Grid":
        return Grid((self.M - 1) * factor + 1)


def default_grid() -> Grid:
    return Grid(401)


def _frozen(values, M, lo=None, hi=None, what="profile"):
    values = np.asarray(values, dtype=float)
    if values.shape != (M,):
        raise DomainError(f"{what} values must have shape ({M},), got {values.shape}")
    if not np.all(np.isfinite(values)):
        raise DomainError(f"{what} values must be finite")
    if lo is not None:
        # tolerate roundoff from upstream arithmetic, reject real violations
        if values.min() < lo - 1e-12 or values.max() > hi + 1e-12:
            raise DomainError(f"{what} values must lie in [{lo}, {hi}]")
        values = np.clip(values, lo, hi)
    values = values.copy()
    values.setflags(write=False)
    return values


@dataclass(frozen=True)
class DensityProfile:
    """Grid function with values in [0, 1]."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(
            self, "values", _frozen(self.values, self.grid.M, 0.0, 1.0, "density")
        )

    @classmethod
    def from_callable(cls, grid: Grid, fn) -> "DensityProfile":
        return cls(grid, fn(grid.nodes))

    @classmethod
    def constant(cls, grid: Grid, value: float) -> "DensityProfile":
        return cls(grid, np.full(grid.M, value))


@dataclass(frozen=True)
class PotentialProfile:
    """Grid function for chemical-potential-like quantities (unconstrained values)."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(self.values, self.grid.M, what="potential"))

    def check_admissible(self, params: Params, tol: float = 1e-10):
        """Boundary values phi_- / phi_+ and forward differences > max(0, E)."""
        v = self.values
        if abs(v[0] - params.phi_minus) > tol or abs(v[-1] - params.phi_plus) > tol:
            raise DomainError("potential must attach to the reservoir chemical potentials")
        floor = max(0.0, params.E)
        if np.min(np.diff(v)) / self.grid.h <= floor:
            raise MonotonicityLoss("potential slope must exceed max(0, E) everywhere")


@dataclass(frozen=True)
class SpacetimePath:
    """Density profiles on a common grid at strictly increasing times."""

    grid: Grid
    times: np.ndarray
    values: np.ndarray  # shape (len(times), grid.M)

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if times.ndim != 1 or np.any(np.diff(times) <= 0):
            raise DomainError("times must be strictly increasing")
        if values.shape != (times.size, self.grid.M):
            raise DomainError(
                f"path values must have shape ({times.size}, {self.grid.M}), got {values.shape}"
            )
        times = times.copy()
        values = values.copy()
        times.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)

    @property
    def T(self) -> float:
        return float(self.times[-1] - self.times[0])

    def profile(self, k: int) -> DensityProfile:
        return DensityProfile(self.grid, self.values[k])

    def reversed(self) -> "SpacetimePath":
        t = self.times[-1] - self.times[::-1]
        return SpacetimePath(self.grid, t, self.values[::-1])


# ---------------------------------------------------------------------------
# scalar maps


def mobility(a):
    """chi(a) = a (1 - a) for a in [0, 1]."""
    arr = np.asarray(a, dtype=float)
    if np.any(arr < -1e-15) or np.any(arr > 1.0 + 1e-15):
        raise DomainError("mobility argument must lie in [0, 1]")
    out = arr * (1.0 - arr)
    return float(out) if np.isscalar(a) else out


def density_of_potential(phi):
    """Logistic map e^phi / (1 + e^phi)."""
    out = expit(np.asarray(phi, dtype=float))
    return float(out) if np.isscalar(phi) else out


def potential_of_density(rho):
    """Logit map log[rho/(1-rho)]; domain error at 0 and 1."""
    arr = np.asarray(rho, dtype=float)
    if np.any(arr <= 0.0) or np.any(arr >= 1.0):
        raise DomainError("logit requires densities strictly inside (0, 1)")
    out = np.log(arr) - np.log1p(-arr)
    return float(out) if np.isscalar(rho) else out


def clip_for_logit(rho):
    """Clip to [CLIP_EPS, 1-CLIP_EPS]; returns (clipped, number of clipped nodes)."""
    arr = np.asarray(rho, dtype=float)
    clipped = np.clip(arr, CLIP_EPS, 1.0 - CLIP_EPS)
    return clipped, int(np.count_nonzero(clipped != arr))


def xlogx(a):
    """a log a with the 0 log 0 = 0 convention."""
    arr = np.asarray(a, dtype=float)
    if np.any(arr < 0.0):
        raise DomainError("xlogx requires a >= 0")
    out = np.where(arr > 0.0, arr * np.log(np.maximum(arr, 1e-300)), 0.0)
    return float(out) if np.isscalar(a) else out


# ---------------------------------------------------------------------------
# quadrature and differentiation


def quadrature(values, grid: Grid) -> float:
    """Trapezoid rule on the grid; exact for affine integrands."""
    values = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(values)):
        raise DomainError("quadrature requires finite values")
    return float(np.trapezoid(values, dx=grid.h))


def derivative(values, grid: Grid) -> np.ndarray:
    """Second-order first derivative: centered interior, one-sided endpoints."""
    f = np.asarray(values, dtype=float)
    h = grid.h
    out = np.empty_like(f)
    out[1:-1] = (f[2:] - f[:-2]) / (2.0 * h)
    out[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * h)
    out[-1] = (3.0 * f[-1] - 4.0 * f[-2] + f[-3]) / (2.0 * h)
    return out


def derivative_4(values, grid_or_h) -> np.ndarray:
    """Fourth-order first derivative (5-point interior, biased near edges)."""
    f = np.asarray(values, dtype=float)
    h = grid_or_h.h if isinstance(grid_or_h, Grid) else float(grid_or_h)
    if f.size < 6:
        return derivative(f, Grid(max(f.size, 3))) * (2.0 / (f.size - 1)) / h  # pragma: no cover
    out = np.empty_like(f)
    out[2:-2] = (f[:-4] - 8.0 * f[1:-3] + 8.0 * f[3:-1] - f[4:]) / (12.0 * h)
    out[0] = (-25.0 * f[0] + 48.0 * f[1] - 36.0 * f[2] + 16.0 * f[3] - 3.0 * f[4]) / (12.0 * h)
    out[1] = (-3.0 * f[0] - 10.0 * f[1] + 18.0 * f[2] - 6.0 * f[3] + f[4]) / (12.0 * h)
    out[-2] = (3.0 * f[-1] + 10.0 * f[-2] - 18.0 * f[-3] + 6.0 * f[-4] - f[-5]) / (12.0 * h)
    out[-1] = (25.0 * f[-1] - 48.0 * f[-2] + 36.0 * f[-3] - 16.0 * f[-4] + 3.0 * f[-5]) / (12.0 * h)
    return out


def second_derivative_4(values, grid_or_h) -> np.ndarray:
    """Fourth-order second derivative (5-point interior, 6-point biased near edges)."""
    f = np.asarray(values, dtype=float)
    h = grid_or_h.h if isinstance(grid_or_h, Grid) else float(grid_or_h)
    h2 = 12.0 * h * h
    out = np.empty_like(f)
    out[2:-2] = (-f[:-4] + 16.0 * f[1:-3] - 30.0 * f[2:-2] + 16.0 * f[3:-1] - f[4:]) / h2
    out[0] = (45.0 * f[0] - 154.0 * f[1] + 214.0 * f[2] - 156.0 * f[3] + 61.0 * f[4] - 10.0 * f[5]) / h2
    out[1] = (10.0 * f[0] - 15.0 * f[1] - 4.0 * f[2] + 14.0 * f[3] - 6.0 * f[4] + f[5]) / h2
    out[-2] = (10.0 * f[-1] - 15.0 * f[-2] - 4.0 * f[-3] + 14.0 * f[-4] - 6.0 * f[-5] + f[-6]) / h2
    out[-1] = (45.0 * f[-1] - 154.0 * f[-2] + 214.0 * f[-3] - 156.0 * f[-4] + 61.0 * f[-5] - 10.0 * f[-6]) / h2
    return out


def cumulative_trapezoid(values, h: float) -> np.ndarray:
    """Cumulative trapezoid integral starting at 0."""
    f = np.asarray(values, dtype=float)
    out = np.empty_like(f)
    out[0] = 0.0
    np.cumsum(0.5 * h * (f[1:] + f[:-1]), out=out[1:])
    return out


def cumulative_integral_4(values, h: float) -> np.ndarray:
    """Fourth-order cumulative integral (integrated piecewise cubic) from node 0.

    Each cell integral uses the cubic through its four nearest nodes
    (Adams-Moulton-type weights at the two end cells), giving uniform
    O(h^4) accuracy at every node, unlike cumulative Simpson whose
    odd-node asymmetry accumulates an O(h^3) drift.
    """
    f = np.asarray(values, dtype=float)
    n = f.size
    if n < 4:
        return cumulative_trapezoid(f, h)
    cells = np.empty(n - 1)
    cells[1:-1] = (h / 24.0) * (-f[:-3] + 13.0 * f[1:-2] + 13.0 * f[2:-1] - f[3:])
    cells[0] = (h / 24.0) * (9.0 * f[0] + 19.0 * f[1] - 5.0 * f[2] + f[3])
    cells[-1] = (h / 24.0) * (f[-4] - 5.0 * f[-3] + 19.0 * f[-2] + 9.0 * f[-1])
    out = np.empty(n)
    out[0] = 0.0
    np.cumsum(cells, out=out[1:])
    return out
