"""Command-line front end.

Subcommands map one-to-one onto the library modules:

    stationary        current, profile, and normalization constants
    phi               optimal potential of a density profile
    free-energy       nonequilibrium free energy S_E with maximizer
    free-energy-asym  strong-asymmetry free energy S_a with maximizer
    optimal-path      minimizing fluctuation path to a target profile
    path-cost         rate functional of a stored space-time path
    simulate          kinetic Monte Carlo of the lattice gas
    asym-limit        strong-field convergence sweeps
    verify            run the acceptance suite

Every run writes CSV data plus a JSON manifest (command, full config,
versions, seed, wall time, headline values).  CSVs start with a
``# manifest=<sha256>`` provenance line followed by a single header row;
the hash covers the reproducible part of the manifest (not wall time), so
identical configurations produce byte-identical data files.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
import time

import numpy as np

from . import __version__
from .core import DensityProfile, DomainError, Grid, NumericsError, Params, SpacetimePath

DEFAULTS = {
    "E": -2.0,
    "rho_minus": 0.2,
    "rho_plus": 0.8,
    "M": 401,
    "seed": 12061,
    "threads": 1,
}


class ConfigError(Exception):
    pass


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="wasep",
        description="boundary-driven weakly asymmetric exclusion process laboratory",
    )
    ap.add_argument("--config", help="JSON config file; explicit flags override its entries")
    ap.add_argument("--out-dir", help="output directory (default $WASEP_OUT_DIR or '.')")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, with_E=True):
        if with_E:
            p.add_argument("--E", type=float)
        p.add_argument("--rho-minus", type=float, dest="rho_minus")
        p.add_argument("--rho-plus", type=float, dest="rho_plus")
        p.add_argument("--M", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--threads", type=int)

    common(sub.add_parser("stationary", help="stationary current and profile"))

    p = sub.add_parser("phi", help="optimal potential of a profile")
    common(p)
    p.add_argument("--profile", help="CSV with columns u,rho (default: stationary profile)")

    p = sub.add_parser("free-energy", help="nonequilibrium free energy")
    common(p)
    p.add_argument("--profile", help="CSV with columns u,rho")

    p = sub.add_parser("free-energy-asym", help="strong-asymmetry free energy")
    common(p)
    p.add_argument("--profile", help="CSV with columns u,rho")

    p = sub.add_parser("optimal-path", help="minimizing fluctuation path")
    common(p)
    p.add_argument("--profile", help="CSV with columns u,rho (target)")
    p.add_argument("--T", type=float, default=8.0, help="relaxation horizon")
    p.add_argument("--dt", type=float)
    p.add_argument("--store-dt", type=float, default=0.02)

    p = sub.add_parser("path-cost", help="rate functional of a stored path")
    common(p)
    p.add_argument("--path", required=True, help="CSV with columns t,u,rho")

    p = sub.add_parser("simulate", help="kinetic Monte Carlo")
    common(p)
    p.add_argument("--N", type=int, default=16)
    p.add_argument("--horizon", type=float, default=100.0)
    p.add_argument("--samples", type=int, default=1)
    p.add_argument("--burn-in", type=float, default=10.0)
    p.add_argument("--blocks", type=int, default=20)

    p = sub.add_parser("asym-limit", help="strong-field sweeps")
    common(p, with_E=False)
    p.add_argument("--profile", help="CSV with columns u,rho")
    p.add_argument(
        "--E-list", default="-3,-10,-30,-100,-300", help="comma-separated negative fields"
    )

    p = sub.add_parser("verify", help="run the acceptance suite")
    common(p)
    p.add_argument("--criteria", help="comma-separated subset, e.g. 1,2,3")
    return ap


def _merge_config(args: argparse.Namespace) -> dict:
    cfg = dict(DEFAULTS)
    if args.config:
        with open(args.config) as fh:
            cfg.update(json.load(fh))
    for key, val in vars(args).items():
        if key in ("config",):
            continue
        if val is not None:
            cfg[key] = val
    return cfg


def _params_from(cfg: dict) -> Params:
    try:
        return Params(float(cfg["E"]), float(cfg["rho_minus"]), float(cfg["rho_plus"]))
    except DomainError as exc:
        raise ConfigError(str(exc)) from exc


def _require_subcritical(params: Params):
    if params.E > params.E0 + 1e-12:
        raise ConfigError(
            f"this command needs E <= E0 = {params.E0:.6g}; E = {params.E} is supercritical"
        )


def _read_profile(path: str, grid: Grid) -> DensityProfile:
    data = np.genfromtxt(path, delimiter=",", names=True, comments="#")
    u, rho = np.asarray(data["u"], dtype=float), np.asarray(data["rho"], dtype=float)
    order = np.argsort(u)
    return DensityProfile(grid, np.interp(grid.nodes, u[order], rho[order]))


def _read_path(path_file: str) -> SpacetimePath:
    data = np.genfromtxt(path_file, delimiter=",", names=True, comments="#")
    t = np.asarray(data["t"], dtype=float)
    u = np.asarray(data["u"], dtype=float)
    rho = np.asarray(data["rho"], dtype=float)
    times = np.unique(t)
    us = np.unique(u)
    grid = Grid(us.size)
    if not np.allclose(us, grid.nodes, atol=1e-9):
        raise ConfigError("path CSV must be sampled on a uniform grid over [-1, 1]")
    values = np.full((times.size, us.size), np.nan)
    ti = np.searchsorted(times, t)
    ui = np.searchsorted(us, u)
    values[ti, ui] = rho
    if np.any(np.isnan(values)):
        raise ConfigError("path CSV does not cover the full t x u product grid")
    return SpacetimePath(grid, times, values)


class Run:
    """Output bundle: manifest + provenance-stamped CSV files."""

    def __init__(self, command: str, cfg: dict, out_dir: str):
        self.command = command
        self.cfg = {k: v for k, v in cfg.items() if k not in ("command", "out_dir")}
        self.out_dir = out_dir
        self.headline: dict = {}
        self.t0 = time.perf_counter()
        os.makedirs(out_dir, exist_ok=True)

    @property
    def hash(self) -> str:
        payload = json.dumps(
            {"command": self.command, "config": self.cfg, "headline": self.headline},
            sort_keys=True,
            default=str,
        )
        return hashlib.sha256(payload.encode()).hexdigest()[:16]

    def write_csv(self, name: str, header: list[str], rows) -> str:
        path = os.path.join(self.out_dir, name)
        with open(path, "w", newline="") as fh:
            fh.write(f"# manifest={self.hash}\n")
            writer = csv.writer(fh, quoting=csv.QUOTE_MINIMAL)
            writer.writerow(header)
            for row in rows:
                writer.writerow([f"{x:.17g}" if isinstance(x, float) else x for x in row])
        return path

    def finish(self) -> str:
        manifest = {
            "command": self.command,
            "config": self.cfg,
            "headline": self.headline,
            "manifest_hash": self.hash,
            "seed": self.cfg.get("seed"),
            "versions": {
                "numpy": np.__version__,
                "wasep": __version__,
            },
            "wall_time_s": round(time.perf_counter() - self.t0, 6),
        }
        path = os.path.join(self.out_dir, f"{self.command.replace('-', '_')}_manifest.json")
        with open(path, "w") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")
        print(json.dumps({"command": self.command, "headline": self.headline,
                          "manifest": path}, sort_keys=True))
        return path


def _cmd_stationary(cfg, run: Run):
    from .stationary import asymmetric_constants, solve_stationary

    params = _params_from(cfg)
    _require_subcritical(params)
    grid = Grid(int(cfg["M"]))
    st = solve_stationary(params, grid)
    rho_a, A_a = asymmetric_constants(params)
    run.headline = {"J": st.J, "A_E": st.A_E, "A_a": A_a, "rho_bar_a": rho_a}
    run.write_csv(
        "stationary.csv",
        ["u", "rho_bar", "phi_bar"],
        zip(grid.nodes.tolist(), st.rho_bar.values.tolist(), st.phi_bar.values.tolist()),
    )


def _profile_or_stationary(cfg, params, grid):
    from .stationary import solve_stationary

    if cfg.get("profile"):
        return _read_profile(cfg["profile"], grid)
    return solve_stationary(params, grid).rho_bar


def _cmd_phi(cfg, run: Run):
    from .euler_lagrange import el_residual, solve_phi

    params = _params_from(cfg)
    _require_subcritical(params)
    grid = Grid(int(cfg["M"]))
    rho = _profile_or_stationary(cfg, params, grid)
    sol = solve_phi(rho, params)
    res_nodes = el_residual(rho.values, sol.phi.values, grid.h, params.E)
    run.headline = {
        "branch": sol.branch,
        "iterations": sol.iterations,
        "residual": sol.residual,
    }
    run.write_csv(
        "phi.csv",
        ["u", "rho", "phi", "residual"],
        zip(
            grid.nodes.tolist(),
            rho.values.tolist(),
            sol.phi.values.tolist(),
            [res_nodes] * grid.M,
        ),
    )


def _cmd_free_energy(cfg, run: Run):
    from .functionals import free_energy

    params = _params_from(cfg)
    _require_subcritical(params)
    grid = Grid(int(cfg["M"]))
    rho = _profile_or_stationary(cfg, params, grid)
    rep = free_energy(rho, params)
    run.headline = {"S_E": rep.value, **rep.diagnostics}
    run.write_csv(
        "free_energy_maximizer.csv",
        ["u", "rho", "phi"],
        zip(grid.nodes.tolist(), rho.values.tolist(), rep.maximizer.values.tolist()),
    )


def _cmd_free_energy_asym(cfg, run: Run):
    from .functionals import free_energy_asym

    params = _params_from(cfg)
    grid = Grid(int(cfg["M"]))
    rho = _profile_or_stationary(cfg, params, grid)
    rep = free_energy_asym(rho, params)
    run.headline = {"S_a": rep.value, **rep.diagnostics}
    run.write_csv(
        "free_energy_asym_maximizer.csv",
        ["u", "rho", "phi"],
        zip(grid.nodes.tolist(), rho.values.tolist(), rep.maximizer.values.tolist()),
    )


def _cmd_optimal_path(cfg, run: Run):
    from .dynamics import PDEConfig, optimal_path
    from .functionals import free_energy
    from .rate import path_cost

    params = _params_from(cfg)
    _require_subcritical(params)
    grid = Grid(int(cfg["M"]))
    rho = _profile_or_stationary(cfg, params, grid)
    pde = PDEConfig(grid, T=float(cfg["T"]), dt=cfg.get("dt"), store_dt=float(cfg["store_dt"]))
    result = optimal_path(rho, params, pde)
    cost = path_cost(result.path, result.path.profile(0), params)
    s_target = free_energy(rho, params).value
    run.headline = {
        "S_E": s_target,
        "path_cost": cost.cost,
        "energy": cost.energy,
        **result.diagnostics,
    }
    rows = (
        (float(t), float(u), float(v))
        for k, t in enumerate(result.path.times.tolist())
        for u, v in zip(grid.nodes.tolist(), result.path.values[k].tolist())
    )
    run.write_csv("optimal_path.csv", ["t", "u", "rho"], rows)


def _cmd_path_cost(cfg, run: Run):
    from .rate import path_cost

    params = _params_from(cfg)
    _require_subcritical(params)
    path = _read_path(cfg["path"])
    cost = path_cost(path, path.profile(0), params)
    run.headline = {
        "I_T": cost.cost,
        "Q": cost.energy,
        "K_norm_sq": cost.k_norm_sq,
        **cost.diagnostics,
    }
    run.write_csv(
        "path_cost_density.csv",
        ["t", "cost_density"],
        zip(path.times.tolist(), cost.cost_density.tolist()),
    )


def _cmd_simulate(cfg, run: Run):
    from .microsim import SimParams, simulate

    params = _params_from(cfg)  # any E is admissible for simulation
    N = int(cfg["N"])
    sim = SimParams(
        params,
        N,
        horizon=float(cfg["horizon"]),
        seed=int(cfg["seed"]),
        n_samples=int(cfg["samples"]),
        burn_in=float(cfg["burn_in"]),
        n_blocks=int(cfg["blocks"]),
    )
    res = simulate(sim)
    centers = np.arange(-N + 1, N) / N
    run.headline = {
        "n_events": int(res.n_events.sum()),
        "mean_density": float(res.mean_profile.mean()),
    }
    if abs(params.E - params.E0) <= 1e-9:
        from .microsim import boundary_potentials

        marg = 1.0 / (1.0 + np.exp(-boundary_potentials(params, N)))
        dev = np.abs(res.mean_profile - marg)
        ok = bool(np.all(dev <= 3.0 * res.stderr + 1e-12))
        run.headline["product_measure_check"] = "pass" if ok else "fail"
        run.headline["max_marginal_deviation"] = float(dev.max())
    run.write_csv(
        "simulate_profile.csv",
        ["u", "mean_occupation", "stderr"],
        zip(centers.tolist(), res.mean_profile.tolist(), res.stderr.tolist()),
    )


def _cmd_asym_limit(cfg, run: Run):
    from .asymptotic import maximizer_convergence, strong_field_sweep

    base = Params(-1.0, float(cfg["rho_minus"]), float(cfg["rho_plus"]))
    E_list = [float(x) for x in str(cfg["E_list"]).split(",")]
    if any(E >= 0 for E in E_list):
        raise ConfigError("asym-limit requires strictly negative fields")
    if cfg.get("profile"):
        ref = _read_profile(cfg["profile"], Grid(int(cfg["M"])))

        def rho_fn(u):
            return np.interp(u, ref.grid.nodes, ref.values)

    else:
        def rho_fn(u):
            return 0.5 - 0.25 * np.tanh(2.0 * u)

    rows = strong_field_sweep(rho_fn, base, E_list)
    mrows = maximizer_convergence(rho_fn, base, E_list)
    run.headline = {
        "final_gap": rows[-1].gap,
        "final_A_shift_error": rows[-1].A_shift_error,
        "final_weak_distance": mrows[-1].weak_dist,
    }
    run.write_csv(
        "asym_limit.csv",
        ["E", "M", "S_E", "S_a", "gap", "A_shift_error", "weak_dist", "mean_abs",
         "layer_left", "layer_right", "error"],
        (
            (r.E, r.M, r.S_E if r.S_E is not None else "", r.S_a,
             r.gap if r.gap is not None else "", r.A_shift_error,
             m.weak_dist, m.mean_abs, m.layer_left, m.layer_right, r.error or "")
            for r, m in zip(rows, mrows)
        ),
    )


def _cmd_verify(cfg, run: Run):
    from .acceptance import run_all

    subset = None
    if cfg.get("criteria"):
        subset = [int(x) for x in str(cfg["criteria"]).split(",")]
    results = run_all(subset)
    run.headline = {
        "passed": sum(1 for r in results if r.passed),
        "failed": sum(1 for r in results if not r.passed),
    }
    run.write_csv(
        "verify.csv",
        ["criterion", "name", "passed", "runtime_s", "detail"],
        ((r.index, r.name, int(r.passed), round(r.runtime, 3), r.detail) for r in results),
    )
    if run.headline["failed"]:
        raise NumericsError(f"{run.headline['failed']} acceptance criteria failed")


_COMMANDS = {
    "stationary": _cmd_stationary,
    "phi": _cmd_phi,
    "free-energy": _cmd_free_energy,
    "free-energy-asym": _cmd_free_energy_asym,
    "optimal-path": _cmd_optimal_path,
    "path-cost": _cmd_path_cost,
    "simulate": _cmd_simulate,
    "asym-limit": _cmd_asym_limit,
    "verify": _cmd_verify,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = _merge_config(args)
        out_dir = args.out_dir or os.environ.get("WASEP_OUT_DIR", ".")
        run = Run(args.command, cfg, out_dir)
        _COMMANDS[args.command](cfg, run)
    except (ConfigError, DomainError, OSError, ValueError, KeyError) as exc:
        print(json.dumps({"error": "config", "detail": str(exc)}), file=sys.stderr)
        return 2
    except NumericsError as exc:
        print(
            json.dumps({"error": type(exc).__name__, "detail": str(exc)}),
            file=sys.stderr,
        )
        return 3
    run.finish()
    return 0


if __name__ == "__main__":
    sys.exit(main())
