"""Config-driven experiment runner.

Each subcommand reads a TOML config, writes CSV outputs plus a manifest into
the output directory, and exits 0 on success, 2 on a config error, 3 on a
runtime explosion and 4 when an acceptance check requested with --assert
fails. Identical (config, seed) pairs produce byte-identical outputs.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from ._backend import USING_NUMBA
from .config import ConfigError, ExperimentConfig, load_config, write_csv, write_manifest
from .invariant import long_run
from .ito import ito_residuals, lyapunov_check, observable_registry
from .kernels import lift_measure
from .lifted import SimGrid, brownian_increments, simulate_ensemble
from .quadrature import kernel_approx_error
from .volterra import compare_paths, direct_euler
from .weights import (
    WeightFamily,
    default_dictionary,
    default_grid,
    semigroup_decay_fit,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3
EXIT_ASSERT = 4


class ExplosionError(RuntimeError):
    pass


class AssertionFailed(RuntimeError):
    pass


def _t_grid(cfg: ExperimentConfig, section: str, lo=1e-3, hi=10.0, n=100):
    sec = cfg.section(section, required=False)
    return np.geomspace(float(sec.get("t_min", lo)),
                        float(sec.get("t_max", hi)),
                        int(sec.get("n_points", n)))


def _run_kernel_info(cfg, out, seed, check):
    k = cfg.kernel()
    ts = _t_grid(cfg, "kernel_info")
    write_csv(out / "kernel.csv", ["t", "k_t"],
              ((t, float(k(t))) for t in ts))
    m = lift_measure(k)
    write_csv(out / "measure_info.csv", ["key", "value"], [
        ("density_id", m.density_id),
        ("is_atomic", m.is_atomic),
        ("support_lo", m.support[0]),
        ("support_hi", m.support[1]),
    ])


def _run_discretize(cfg, out, seed, check):
    k = cfg.kernel()
    atoms = cfg.atoms()
    write_csv(out / "atoms.csv", ["x_i", "c_i"],
              zip(atoms.nodes, atoms.masses))
    ts = _t_grid(cfg, "discretize", lo=1e-2, hi=10.0, n=200)
    approx = atoms.kernel_values(ts)
    exact = np.asarray(k(ts), dtype=float)
    write_csv(out / "error_report.csv", ["t", "k_t", "approx", "abs_err"],
              zip(ts, exact, approx, np.abs(exact - approx)))
    if check:
        _, rel = kernel_approx_error(k, atoms, ts)
        tol = float(cfg.section("discretize", required=False)
                    .get("rel_tol", 1e-3))
        if rel > tol:
            raise AssertionFailed(
                f"relative kernel error {rel:.3g} exceeds {tol:.3g}")


def _run_decay_fit(cfg, out, seed, check):
    sec = cfg.section("decay_fit", required=False)
    atoms = cfg.atoms()
    w = WeightFamily(eta=float(sec.get("eta", -0.05)))
    grid = default_grid(x_max=float(sec.get("x_max", 1e4)),
                        n=int(sec.get("grid_n", 4096)))
    dictionary = default_dictionary(
        grid, center_max=float(sec.get("center_max", 1e3)),
        n_centers=int(sec.get("n_centers", 26)))
    ts = np.geomspace(float(sec.get("t_min", 1e-6)),
                      float(sec.get("t_max", 1e-1)),
                      int(sec.get("n_points", 30)))
    fit = semigroup_decay_fit(atoms, w, ts, dictionary)
    # fitted line re-anchored through the last small-t point
    c0 = fit.dual_norms[0] * fit.t_used[0] ** fit.gamma_hat
    write_csv(out / "decay.csv", ["t", "dual_norm", "fit_line"],
              zip(fit.t_used, fit.dual_norms,
                  c0 * fit.t_used ** (-fit.gamma_hat)))
    theory = float(sec.get("gamma_theory", 0.0))
    diff = abs(fit.gamma_hat - theory)
    write_csv(out / "summary.csv", ["gamma_hat", "gamma_theory", "abs_diff"],
              [(fit.gamma_hat, theory, diff)])
    if check and diff > float(sec.get("tol", 0.1)):
        raise AssertionFailed(
            f"fitted exponent {fit.gamma_hat:.4f} misses {theory} by {diff:.4f}")


def _ensemble(cfg, seed):
    atoms_b = cfg.atoms("kernel_b" if "kernel_b" in cfg.data else "kernel")
    atoms_s = cfg.atoms("kernel_sigma" if "kernel_sigma" in cfg.data
                        else "kernel")
    g = cfg.grid()
    c = cfg.coefficients()
    dW = brownian_increments(seed, cfg.paths(), g)
    x0 = float(cfg.section("ensemble", required=False).get("x0", 0.0))
    return atoms_b, atoms_s, g, c, dW, x0


def _run_simulate(cfg, out, seed, check):
    seed = cfg.resolve_seed(seed)
    atoms_b, atoms_s, g, c, dW, x0 = _ensemble(cfg, seed)
    ens = simulate_ensemble(atoms_b, atoms_s, x0, c, g, dW)
    write_csv(out / "paths.csv", ["path_index", "t", "X"],
              ((p, t, x) for p in range(ens.X.shape[0])
               for t, x in zip(ens.times, ens.X[p])))
    if cfg.section("ensemble", required=False).get("save_factors", False):
        write_csv(out / "factors.csv", ["path_index", "channel", "atom", "y"],
                  [(p, ch, i, y)
                   for ch, block in (("b", ens.y_b), ("sigma", ens.y_sigma))
                   for p in range(block.shape[0])
                   for i, y in enumerate(block[p])])
    if ens.explosion is not None:
        raise ExplosionError(
            f"explosion at step {ens.explosion.step} "
            f"(t={ens.explosion.time:g}); partial paths in {out}")


def _run_compare(cfg, out, seed, check):
    seed = cfg.resolve_seed(seed)
    sec = cfg.section("compare", required=False)
    sweep = [int(n) for n in sec.get("N_sweep", [cfg.grid().N])]
    k_b = cfg.kernel("kernel_b" if "kernel_b" in cfg.data else "kernel")
    k_s = cfg.kernel("kernel_sigma" if "kernel_sigma" in cfg.data
                     else "kernel")
    c = cfg.coefficients()
    x0 = float(cfg.section("ensemble", required=False).get("x0", 0.0))
    T = cfg.grid().T
    atoms_b = cfg.atoms("kernel_b" if "kernel_b" in cfg.data else "kernel")
    atoms_s = cfg.atoms("kernel_sigma" if "kernel_sigma" in cfg.data
                        else "kernel")
    summary = []
    for N in sweep:
        g = SimGrid(T=T, N=N)
        dW = brownian_increments(seed, cfg.paths(), g)
        lift = simulate_ensemble(atoms_b, atoms_s, x0, c, g, dW)
        direct, expl = direct_euler(k_b, k_s, c, x0, g, dW)
        if lift.explosion is not None or expl is not None:
            raise ExplosionError(f"explosion during compare at N={N}")
        sups, rmss = zip(*(compare_paths(lift.X[p], direct[p])
                           for p in range(direct.shape[0])))
        summary.append((atoms_b.nodes.size, N,
                        float(np.mean(sups)), float(np.mean(rmss))))
        if N == sweep[-1]:
            write_csv(out / "compare.csv",
                      ["path_index", "t", "X_lift", "X_direct", "abs_diff"],
                      ((p, t, xl, xd, abs(xl - xd))
                       for p in range(direct.shape[0])
                       for t, xl, xd in zip(g.times, lift.X[p], direct[p])))
    write_csv(out / "summary.csv", ["n_atoms", "N", "mean_sup", "mean_rms"],
              summary)
    if check and len(summary) > 1:
        sups = [row[2] for row in summary]
        if not all(b < a for a, b in zip(sups[:-1], sups[1:])):
            raise AssertionFailed(
                f"mean_sup not decreasing across the refinement sweep: {sups}")


def _run_ito_check(cfg, out, seed, check):
    seed = cfg.resolve_seed(seed)
    atoms_b, atoms_s, g, c, dW, x0 = _ensemble(cfg, seed)
    name = cfg.section("ito", required=False).get("observable", "square")
    try:
        f = observable_registry(name)
    except KeyError as exc:
        raise ConfigError(str(exc)) from exc
    r = ito_residuals(f, atoms_b, atoms_s, x0, c, g, dW)
    write_csv(out / "residuals.csv", ["path_index", "residual"],
              enumerate(r))
    mean = float(np.mean(r))
    stderr = float(np.std(r, ddof=1) / np.sqrt(r.size)) if r.size > 1 else 0.0
    z = mean / stderr if stderr > 0 else 0.0
    write_csv(out / "summary.csv", ["mean", "stderr", "z_score"],
              [(mean, stderr, z)])
    if check and abs(z) >= 3.0:
        raise AssertionFailed(f"residual mean is {z:.2f} standard errors from 0")


def _run_lyapunov(cfg, out, seed, check):
    sec = cfg.section("lyapunov", required=False)
    name = sec.get("observable", "square")
    try:
        V = observable_registry(name)
    except KeyError as exc:
        raise ConfigError(str(exc)) from exc
    k_b = cfg.kernel("kernel_b" if "kernel_b" in cfg.data else "kernel")
    k_s = cfg.kernel("kernel_sigma" if "kernel_sigma" in cfg.data
                     else "kernel")
    rep = lyapunov_check(V, k_b, k_s, cfg.coefficients())
    witness = "pass" if rep.ok else f"x={rep.witness[0]:g}"
    write_csv(out / "lyapunov.csv", ["h_est", "d_est", "witness"],
              [(rep.h_est, rep.d_est, witness)])
    if check and not rep.ok:
        raise AssertionFailed(
            f"drift condition fails, worst point {witness}")


def _run_invariant(cfg, out, seed, check):
    seed = cfg.resolve_seed(seed)
    atoms_b, atoms_s, g, c, dW, x0 = _ensemble(cfg, seed)
    sec = cfg.section("invariant", required=False)
    cps = [float(t) for t in sec.get("checkpoints", [g.T / 2.0, g.T])]
    rep = long_run(atoms_b, atoms_s, x0, c, T_long=g.T, N=g.N,
                   checkpoints=cps, paths=cfg.paths(), seed=seed)
    write_csv(out / "moments.csv", ["t", "mean", "second_moment"],
              zip(rep.moment_times, rep.first_moments, rep.second_moments))
    write_csv(out / "ks.csv", ["t1", "t2", "ks_stat", "critical_value"],
              rep.ks_pairs)
    if sec.get("save_samples", False):
        write_csv(out / "samples.csv", ["checkpoint_t", "path_index", "X"],
                  ((t, p, x) for i, t in enumerate(rep.checkpoint_times)
                   for p, x in enumerate(rep.samples[i])))
    if rep.failed:
        raise ExplosionError("ensemble exploded before the horizon")
    if check and any(stat >= crit for _, _, stat, crit in rep.ks_pairs):
        raise AssertionFailed("KS statistic exceeds the critical value")


_SUBCOMMANDS = {
    "kernel-info": (_run_kernel_info, False),
    "discretize": (_run_discretize, False),
    "decay-fit": (_run_decay_fit, False),
    "simulate": (_run_simulate, True),
    "compare": (_run_compare, True),
    "ito-check": (_run_ito_check, True),
    "lyapunov": (_run_lyapunov, False),
    "invariant": (_run_invariant, True),
}


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(
        prog="volift",
        description="Simulate stochastic Volterra equations via Markovian lifts.")
    ap.add_argument("subcommand", choices=sorted(_SUBCOMMANDS))
    ap.add_argument("--config", required=True, help="TOML experiment config")
    ap.add_argument("--out", default=None, help="output directory")
    ap.add_argument("--seed", type=int, default=None,
                    help="master seed, overrides [ensemble].seed")
    ap.add_argument("--threads", type=int, default=None,
                    help="compute threads for the compiled backend")
    ap.add_argument("--assert", dest="check", action="store_true",
                    help="exit 4 when the subcommand's acceptance check fails")
    args = ap.parse_args(argv)

    if args.threads is not None and USING_NUMBA:
        import numba

        numba.set_num_threads(max(1, args.threads))

    fn, stochastic = _SUBCOMMANDS[args.subcommand]
    try:
        cfg = load_config(args.config)
        out = Path(args.out) if args.out else Path(
            cfg.section("output", required=False).get("dir", "out"))
        seed = cfg.resolve_seed(args.seed) if stochastic else None
        out.mkdir(parents=True, exist_ok=True)
        write_manifest(out, cfg, seed)
        fn(cfg, out, seed, args.check)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ExplosionError as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except AssertionFailed as exc:
        print(f"acceptance check failed: {exc}", file=sys.stderr)
        return EXIT_ASSERT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
