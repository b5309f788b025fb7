"""Hot numerical kernels, numba-compiled when the backend allows.

Two loops dominate the package runtime: the semi-implicit Burgers time
stepper (hundreds of thousands of tridiagonal solves) and the
kinetic-Monte-Carlo event loop of the lattice gas.  Both live here as
plain loop code decorated by ``maybe_njit``; pure-NumPy/SciPy fallback
paths are provided by the calling modules (see ``backend``).

Spatial discretization of the stepper: Numerov-type compact fourth-order
operator, diffusion theta-implicit, drift explicit with fourth-order
first-derivative stencils.  The implicit matrix is constant in time, so
its Thomas factorization is precomputed by the driver.
"""

import numpy as np

from .backend import maybe_njit


def burgers_factors(M: int, dt: float, h: float, theta: float):
    """Precompute the constant Thomas factorization of the implicit matrix."""
    lam = dt / (2.0 * h * h)
    off = 1.0 / 12.0 - lam * theta
    diag = 10.0 / 12.0 + 2.0 * lam * theta
    n = M - 2
    cp = np.empty(n)
    denom = np.empty(n)
    denom[0] = diag
    cp[0] = off / diag
    for j in range(1, n):
        denom[j] = diag - off * cp[j - 1]
        cp[j] = off / denom[j]
    return cp, denom, off, lam


@maybe_njit
def burgers_chunk(rho, rho_m, rho_p, E, h, dt, theta, n_steps, cp, denom, off):
    """Advance the density profile by ``n_steps`` time steps (in place)."""
    M = rho.shape[0]
    lam = dt / (2.0 * h * h)
    half_E = 0.5 * E
    c12 = 12.0 * h
    chi = np.empty(M)
    f = np.empty(M)
    rhs = np.empty(M - 2)
    for _ in range(n_steps):
        for i in range(M):
            chi[i] = rho[i] * (1.0 - rho[i])
        f[0] = half_E * (-25.0 * chi[0] + 48.0 * chi[1] - 36.0 * chi[2] + 16.0 * chi[3] - 3.0 * chi[4]) / c12
        f[1] = half_E * (-3.0 * chi[0] - 10.0 * chi[1] + 18.0 * chi[2] - 6.0 * chi[3] + chi[4]) / c12
        for i in range(2, M - 2):
            f[i] = half_E * (chi[i - 2] - 8.0 * chi[i - 1] + 8.0 * chi[i + 1] - chi[i + 2]) / c12
        f[M - 2] = half_E * (3.0 * chi[M - 1] + 10.0 * chi[M - 2] - 18.0 * chi[M - 3] + 6.0 * chi[M - 4] - chi[M - 5]) / c12
        f[M - 1] = half_E * (25.0 * chi[M - 1] - 48.0 * chi[M - 2] + 36.0 * chi[M - 3] - 16.0 * chi[M - 4] + 3.0 * chi[M - 5]) / c12
        for i in range(1, M - 1):
            a_rho = (rho[i - 1] + 10.0 * rho[i] + rho[i + 1]) / 12.0
            d2 = rho[i - 1] - 2.0 * rho[i] + rho[i + 1]
            a_f = (f[i - 1] + 10.0 * f[i] + f[i + 1]) / 12.0
            rhs[i - 1] = a_rho + lam * (1.0 - theta) * d2 - dt * a_f
        rhs[0] -= off * rho_m
        rhs[M - 3] -= off * rho_p
        rhs[0] = rhs[0] / denom[0]
        for j in range(1, M - 2):
            rhs[j] = (rhs[j] - off * rhs[j - 1]) / denom[j]
        for j in range(M - 4, -1, -1):
            rhs[j] = rhs[j] - cp[j] * rhs[j + 1]
        rho[0] = rho_m
        for j in range(M - 2):
            rho[j + 1] = rhs[j]
        rho[M - 1] = rho_p
    return rho


@maybe_njit
def kmc_chunk(occ, t, t_end, u_buf, iu, acc, r_right, r_left, cm0, cm1, cp0, cp1):
    """Event-driven simulation until ``t_end`` or the uniform buffer runs dry.

    ``occ`` is the 0/1 occupation array (modified in place); ``acc``
    accumulates site-wise occupation times.  Each event consumes exactly
    two uniforms (holding time and channel selection).  Returns
    ``(t, iu, n_events, status)`` with status 1 when a refill is needed.
    """
    n = occ.shape[0]
    n_events = 0
    rates = np.empty(n + 1)
    while True:
        total = 0.0
        for b in range(n - 1):
            a = occ[b]
            c = occ[b + 1]
            if a == c:
                r = 0.0
            elif a == 1:
                r = r_right
            else:
                r = r_left
            rates[b] = r
            total += r
        rl = cm1 if occ[0] == 1 else cm0
        rr = cp1 if occ[n - 1] == 1 else cp0
        rates[n - 1] = rl
        rates[n] = rr
        total += rl + rr
        if iu + 2 > u_buf.shape[0]:
            return t, iu, n_events, 1
        wait = -np.log1p(-u_buf[iu]) / total
        iu += 1
        if t + wait >= t_end:
            dt = t_end - t
            for x in range(n):
                acc[x] += occ[x] * dt
            return t_end, iu, n_events, 0
        for x in range(n):
            acc[x] += occ[x] * wait
        t += wait
        target = u_buf[iu] * total
        iu += 1
        csum = 0.0
        k = n
        for j in range(n + 1):
            csum += rates[j]
            if target < csum:
                k = j
                break
        if k <= n - 2:
            tmp = occ[k]
            occ[k] = occ[k + 1]
            occ[k + 1] = tmp
        elif k == n - 1:
            occ[0] = 1 - occ[0]
        else:
            occ[n - 1] = 1 - occ[n - 1]
        n_events += 1
