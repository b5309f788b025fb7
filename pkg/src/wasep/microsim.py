"""Microscopic boundary-driven lattice gas: event-driven simulation and exact solves.

Sites x in {-N+1, ..., N-1} carry at most one particle.  Particles exchange
with nearest neighbors at rates (N^2/2) e^{-E/(2N) [eta(x+1)-eta(x)]} and are
created/destroyed at the two boundary sites with reservoir rates

    c_+-(z) = rho_+- e^{-+E/(2N)} (1-z) + (1-rho_+-) e^{+-E/(2N)} z,

all sped up by N^2 (time is macroscopic/diffusive throughout).  At E = E0
the chain is reversible for an explicit product measure; away from it the
stationary state is computed exactly for small N by a sparse null-space
solve, and sampled by kinetic Monte Carlo for large N.

Randomness: one master seed feeds a ``SeedSequence``; each trajectory gets
a spawned child driving a Philox counter-based generator.  The event loop
consumes pre-drawn uniform batches, so the compiled and fallback kernels
see identical streams.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve

from . import _kernels
from .core import DomainError, Params

MAX_EXACT_SITES = 13  # 2^13 states; N <= 7


@dataclass(frozen=True)
class LatticeConfig:
    """Occupation state of the 2N-1 sites."""

    N: int
    occupations: np.ndarray

    def __post_init__(self):
        if self.N < 2:
            raise DomainError("need N >= 2")
        occ = np.asarray(self.occupations, dtype=np.int8)
        if occ.shape != (2 * self.N - 1,):
            raise DomainError(f"expected {2 * self.N - 1} sites, got shape {occ.shape}")
        if np.any((occ != 0) & (occ != 1)):
            raise DomainError("occupations must be 0/1")
        occ = occ.copy()
        occ.setflags(write=False)
        object.__setattr__(self, "occupations", occ)

    @property
    def sites(self) -> np.ndarray:
        return np.arange(-self.N + 1, self.N)


@dataclass(frozen=True)
class Transition:
    kind: str  # 'exchange' (bond at (site, site+1)) or 'flip'
    site: int  # lattice coordinate
    rate: float


@dataclass(frozen=True)
class EmpiricalDensity:
    """Block density profile: height per width-1/N block centered at x/N."""

    N: int
    values: np.ndarray

    @property
    def centers(self) -> np.ndarray:
        return np.arange(-self.N + 1, self.N) / self.N

    def integral(self) -> float:
        return float(np.sum(self.values)) / self.N


def empirical_density(config: LatticeConfig) -> EmpiricalDensity:
    """Block indicator profile of a configuration (particles / N per block)."""
    return EmpiricalDensity(config.N, config.occupations.astype(float))


def rate_constants(params: Params, N: int) -> dict:
    lam = params.E / (2.0 * N)
    s = N * N / 2.0
    return {
        "bulk_right": s * math.exp(lam),
        "bulk_left": s * math.exp(-lam),
        "create_minus": s * params.rho_minus * math.exp(lam),
        "kill_minus": s * (1.0 - params.rho_minus) * math.exp(-lam),
        "create_plus": s * params.rho_plus * math.exp(-lam),
        "kill_plus": s * (1.0 - params.rho_plus) * math.exp(lam),
    }


def jump_rates(config: LatticeConfig, params: Params) -> list[Transition]:
    """All enabled transitions of a configuration with their exact rates."""
    rc = rate_constants(params, config.N)
    occ = config.occupations
    n = occ.size
    out = []
    for b in range(n - 1):
        if occ[b] != occ[b + 1]:
            rate = rc["bulk_right"] if occ[b] == 1 else rc["bulk_left"]
            out.append(Transition("exchange", b - config.N + 1, rate))
    out.append(
        Transition("flip", -config.N + 1, rc["kill_minus"] if occ[0] else rc["create_minus"])
    )
    out.append(Transition("flip", config.N - 1, rc["kill_plus"] if occ[-1] else rc["create_plus"]))
    return out


def apply_transition(config: LatticeConfig, tr: Transition) -> LatticeConfig:
    occ = config.occupations.copy()
    i = tr.site + config.N - 1
    if tr.kind == "exchange":
        occ[i], occ[i + 1] = occ[i + 1], occ[i]
    else:
        occ[i] = 1 - occ[i]
    return LatticeConfig(config.N, occ)


# ---------------------------------------------------------------------------
# exact small systems


def _decode(state: int, n_sites: int) -> np.ndarray:
    return (state >> np.arange(n_sites)) & 1


def exact_stationary(params: Params, N: int) -> np.ndarray:
    """Stationary probability vector over all 2^(2N-1) configurations.

    Solves mu L = 0 with normalization by a sparse direct solve; entries
    are strictly positive by irreducibility.  Guarded to N <= 7.
    """
    n_sites = 2 * N - 1
    if n_sites > MAX_EXACT_SITES:
        raise DomainError(f"exact solve limited to N <= 7 (got N = {N})")
    n_states = 1 << n_sites
    rows, cols, vals = [], [], []
    for s in range(n_states):
        cfg = LatticeConfig(N, _decode(s, n_sites))
        total = 0.0
        for tr in jump_rates(cfg, params):
            target = apply_transition(cfg, tr)
            t = int(np.dot(target.occupations, 1 << np.arange(n_sites)))
            rows.append(s)
            cols.append(t)
            vals.append(tr.rate)
            total += tr.rate
        rows.append(s)
        cols.append(s)
        vals.append(-total)
    L = sp.coo_matrix((vals, (rows, cols)), shape=(n_states, n_states)).tocsr()
    A = L.T.tolil()
    A[-1, :] = 1.0
    b = np.zeros(n_states)
    b[-1] = 1.0
    mu = spsolve(A.tocsr(), b)
    if mu.min() <= 0.0:
        raise DomainError("stationary vector not strictly positive; generator corrupted")
    return mu / mu.sum()


def boundary_potentials(params: Params, N: int) -> np.ndarray:
    """Site potentials of the reversible product measure at E = E0."""
    x = np.arange(-N + 1, N)
    return params.phi_minus * (N - x) / (2.0 * N) + params.phi_plus * (N + x) / (2.0 * N)


def product_measure(params: Params, N: int) -> np.ndarray:
    """Product measure with the affine site potentials (stationary iff E = E0)."""
    n_sites = 2 * N - 1
    p = 1.0 / (1.0 + np.exp(-boundary_potentials(params, N)))
    mu = np.empty(1 << n_sites)
    for s in range(mu.size):
        occ = _decode(s, n_sites)
        mu[s] = np.prod(np.where(occ == 1, p, 1.0 - p))
    return mu


def product_fit_tv_distance(mu: np.ndarray, N: int) -> float:
    """Total-variation distance from the product of mu's own site marginals."""
    n_sites = 2 * N - 1
    states = np.arange(mu.size)
    marg = np.array(
        [mu[(states >> x) & 1 == 1].sum() for x in range(n_sites)]
    )
    fit = np.empty_like(mu)
    for s in range(mu.size):
        occ = _decode(s, n_sites)
        fit[s] = np.prod(np.where(occ == 1, marg, 1.0 - marg))
    return 0.5 * float(np.abs(mu - fit).sum())


def detailed_balance_violation(params: Params, N: int, measure: np.ndarray) -> float:
    """max |mu(c) r(c->c') - mu(c') r(c'->c)| over all enabled transitions."""
    n_sites = 2 * N - 1
    worst = 0.0
    for s in range(1 << n_sites):
        cfg = LatticeConfig(N, _decode(s, n_sites))
        for tr in jump_rates(cfg, params):
            target = apply_transition(cfg, tr)
            t = int(np.dot(target.occupations, 1 << np.arange(n_sites)))
            back = next(
                b
                for b in jump_rates(target, params)
                if b.kind == tr.kind and b.site == tr.site
            )
            worst = max(worst, abs(measure[s] * tr.rate - measure[t] * back.rate))
    return worst


# ---------------------------------------------------------------------------
# kinetic Monte Carlo


@dataclass(frozen=True)
class SimParams:
    """Simulation request; horizon is the measurement window after burn-in."""

    params: Params
    N: int
    horizon: float
    seed: int
    n_samples: int = 1
    burn_in: float = 10.0
    n_blocks: int = 20
    obs_times: tuple = ()

    def __post_init__(self):
        if self.horizon <= 0.0:
            raise DomainError("horizon must be positive")
        if self.N < 2:
            raise DomainError("need N >= 2")
        if self.n_blocks < 2:
            raise DomainError("need at least 2 averaging blocks")


@dataclass(frozen=True)
class TrajectorySample:
    """Per-trajectory occupation statistics in macroscopic time."""

    sim: SimParams
    snapshots: np.ndarray  # (n_samples, n_obs, sites) occupations at obs times
    block_means: np.ndarray  # (n_samples, n_blocks, sites)
    time_average: np.ndarray  # (n_samples, sites)
    n_events: np.ndarray  # per sample
    diagnostics: dict = field(default_factory=dict)

    @property
    def mean_profile(self) -> np.ndarray:
        return self.block_means.mean(axis=(0, 1))

    @property
    def stderr(self) -> np.ndarray:
        blocks = self.block_means.reshape(-1, self.block_means.shape[-1])
        return blocks.std(axis=0, ddof=1) / math.sqrt(blocks.shape[0])


_CHUNK = 1 << 16


def _run_one(sim: SimParams, seed_seq) -> tuple[np.ndarray, np.ndarray, int]:
    params = sim.params
    n_sites = 2 * sim.N - 1
    rc = rate_constants(params, sim.N)
    rng = np.random.Generator(np.random.Philox(seed_seq))

    # initial state: product with the affine interpolation of the reservoirs
    p0 = params.rho_minus + (np.arange(n_sites) / (n_sites - 1)) * (
        params.rho_plus - params.rho_minus
    )
    occ = (rng.random(n_sites) < p0).astype(np.int8)

    obs = np.asarray(sim.obs_times, dtype=float)
    if obs.size and (obs.min() < 0.0 or obs.max() > sim.horizon):
        raise DomainError("observation times must lie within [0, horizon]")
    block_edges = sim.burn_in + np.linspace(0.0, sim.horizon, sim.n_blocks + 1)
    checkpoints = np.unique(np.concatenate([[sim.burn_in], block_edges, sim.burn_in + obs]))

    u = rng.random(_CHUNK)
    iu = 0
    t = 0.0
    n_events = 0
    acc = np.zeros(n_sites)

    def advance(t, t_end, acc):
        nonlocal u, iu, n_events
        while True:
            t, iu, ne, status = _kernels.kmc_chunk(
                occ,
                t,
                t_end,
                u,
                iu,
                acc,
                rc["bulk_right"],
                rc["bulk_left"],
                rc["create_minus"],
                rc["kill_minus"],
                rc["create_plus"],
                rc["kill_plus"],
            )
            n_events += ne
            if status == 0:
                return t
            u = rng.random(_CHUNK)
            iu = 0

    # burn-in (accumulator discarded)
    t = advance(t, sim.burn_in, np.zeros(n_sites))

    block_means = np.zeros((sim.n_blocks, n_sites))
    snapshots = np.zeros((obs.size, n_sites), dtype=np.int8)
    obs_abs = sim.burn_in + obs
    block_len = sim.horizon / sim.n_blocks
    for a, b in zip(checkpoints[:-1], checkpoints[1:]):
        if b <= sim.burn_in:
            continue
        acc[:] = 0.0
        t = advance(t, b, acc)
        block_idx = min(int((a - sim.burn_in) / block_len + 1e-9), sim.n_blocks - 1)
        block_means[block_idx] += acc
        hits = np.nonzero(np.isclose(obs_abs, b, rtol=0.0, atol=1e-12))[0]
        for j in hits:
            snapshots[j] = occ
    block_means /= block_len
    return snapshots, block_means, n_events


def simulate(sim: SimParams) -> TrajectorySample:
    """Sample trajectories; reproducible given (seed, n_samples, backend-independent)."""
    children = np.random.SeedSequence(sim.seed).spawn(sim.n_samples)
    snaps, blocks, events = [], [], []
    for child in children:
        s, b, ne = _run_one(sim, child)
        snaps.append(s)
        blocks.append(b)
        events.append(ne)
    return TrajectorySample(
        sim,
        np.array(snaps),
        np.array(blocks),
        np.array([b.mean(axis=0) for b in blocks]),
        np.array(events),
        {"chunk": _CHUNK},
    )
