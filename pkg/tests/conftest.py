import numpy as np
import pytest
from scipy.special import expit

from wasep.core import DensityProfile, Grid, Params, default_grid
from wasep.stationary import solve_stationary

E0_2080 = 2.0 * np.log(2.0)  # E0 for rho = 0.2/0.8 is log 4


@pytest.fixture(scope="session")
def grid():
    return default_grid()


@pytest.fixture(scope="session")
def params():
    return Params(-2.0, 0.2, 0.8)


@pytest.fixture(scope="session")
def stationary(params, grid):
    return solve_stationary(params, grid)


@pytest.fixture(scope="session", autouse=True)
def _warm_kernels(grid, params):
    """Compile the numba kernels once so timed checks don't pay the JIT."""
    from wasep.dynamics import PDEConfig, solve_burgers
    from wasep.microsim import SimParams, simulate

    gamma = DensityProfile.constant(Grid(11), 0.5)
    solve_burgers(gamma, params, PDEConfig(Grid(11), T=0.01, store_dt=0.01))
    simulate(SimParams(params, 2, horizon=0.5, seed=0, burn_in=0.1, n_blocks=2))


def smooth_density(grid, rng, scale=0.8, lo=0.15, hi=0.85, k_max=3):
    u = grid.nodes
    s = np.zeros_like(u)
    for k in range(1, k_max + 1):
        s += rng.normal(0, 1.0 / k**2) * np.sin(k * np.pi * (u + 1) / 2)
        s += rng.normal(0, 1.0 / k**2) * np.cos(k * np.pi * (u + 1) / 2)
    return DensityProfile(grid, lo + (hi - lo) * expit(scale * s))


def interior_density(grid, rng, params, base, amp=0.12):
    """Random smooth profile attaching to the reservoir densities."""
    u = grid.nodes
    s = np.zeros_like(u)
    for k in range(1, 4):
        s += rng.normal(0, 1.0 / k) * np.sin(k * np.pi * (u + 1) / 2)
    s *= amp / max(1.0, np.max(np.abs(s)))
    vals = np.clip(base + (1 - u**2) * s, 0.05, 0.95)
    vals[0], vals[-1] = params.rho_minus, params.rho_plus
    return DensityProfile(grid, vals)
