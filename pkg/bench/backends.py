"""Timing comparison of the compiled and pure-numpy simulation backends.

Runs the same lifted-ensemble workload in two subprocesses, one with
VOLIFT_DISABLE_NUMBA=1, and reports wall times plus agreement of the
terminal values. Usage:

    python bench/backends.py [--paths 200] [--n-steps 2000] [--n-atoms 100]
"""
from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys
import time


def run_workload(paths: int, n_steps: int, n_atoms: int, repeat: int) -> dict:
    import numpy as np

    from volift import backend_name
    from volift.coefficients import registry_coefficients
    from volift.kernels import GammaKernel, lift_measure
    from volift.lifted import SimGrid, brownian_increments, simulate_ensemble
    from volift.quadrature import PartitionSpec, discretize

    atoms = discretize(lift_measure(GammaKernel(alpha=0.3, beta=1.0)),
                       PartitionSpec(n_cells=n_atoms))
    c = registry_coefficients("mean_revert", {"kappa": 1.0},
                              "bounded_sin", {"a": 0.5})
    g = SimGrid(T=1.0, N=n_steps)
    dW = brownian_increments(2024, paths, g)
    simulate_ensemble(atoms, atoms, 1.0, c, g, dW)  # warm-up / jit compile
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        ens = simulate_ensemble(atoms, atoms, 1.0, c, g, dW)
        best = min(best, time.perf_counter() - t0)
    return {
        "backend": backend_name(),
        "seconds": best,
        "checksum": float(np.sum(ens.X[:, -1])),
    }


def run_child(disable: bool, args) -> dict:
    env = dict(os.environ, VOLIFT_BENCH_CHILD="1")
    if disable:
        env["VOLIFT_DISABLE_NUMBA"] = "1"
    else:
        env.pop("VOLIFT_DISABLE_NUMBA", None)
    out = subprocess.run(
        [sys.executable, os.path.abspath(__file__),
         "--paths", str(args.paths), "--n-steps", str(args.n_steps),
         "--n-atoms", str(args.n_atoms), "--repeat", str(args.repeat)],
        env=env, capture_output=True, text=True, check=True)
    return json.loads(out.stdout.splitlines()[-1])


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--paths", type=int, default=200)
    ap.add_argument("--n-steps", type=int, default=2000)
    ap.add_argument("--n-atoms", type=int, default=100)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if os.environ.get("VOLIFT_BENCH_CHILD"):
        print(json.dumps(run_workload(args.paths, args.n_steps, args.n_atoms,
                                      args.repeat)))
        return
    results = [run_child(disable, args) for disable in (False, True)]
    print(f"workload: paths={args.paths} steps={args.n_steps} "
          f"atoms={args.n_atoms} (best of {args.repeat})")
    for r in results:
        print(f"  {r['backend']:>5}: {r['seconds']:8.3f} s  "
              f"(terminal checksum {r['checksum']:.12g})")
    if results[0]["backend"] == results[1]["backend"]:
        print("note: numba unavailable; both runs used the numpy backend")
    else:
        speedup = results[1]["seconds"] / results[0]["seconds"]
        drift = abs(results[0]["checksum"] - results[1]["checksum"])
        print(f"  speedup {speedup:.1f}x, checksum difference {drift:.3g}")


if __name__ == "__main__":
    main()
