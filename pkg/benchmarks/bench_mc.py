"""Benchmark the coupled Monte Carlo kernels (compiled vs pure Python).

Usage: python benchmarks/bench_mc.py [replications]

Runs the same workload through both backends, checks the outputs are
bitwise identical, and prints timings.
"""

import sys
import time

import numpy as np

import mfg_kinetic as mk
from mfg_kinetic.nplayer_mc import _mc_speed


def run(backend, spec, sol, N, reps):
    t0 = time.perf_counter()
    stats = mk.simulate_coupled(
        spec, sol.policy, sol.m, N=N, replications=reps, seed=2024,
        checkpoints=[0.25, 0.5, 0.75, 1.0], backend=backend,
    )
    return stats, time.perf_counter() - t0


def main():
    reps = int(sys.argv[1]) if len(sys.argv) > 1 else 500
    spec = mk.presets.three_state_coupled()
    sol = mk.solve_mfg(spec, damping=0.5, tol=1e-7, max_iter=200)
    print(f"model: three_state_coupled, kernels available: "
          f"{'cython+python' if _mc_speed is not None else 'python only'}")
    print(f"{'N':>6} {'reps':>7} {'python [s]':>11} {'cython [s]':>11} {'speedup':>8}  identical")
    for N in (16, 64, 256):
        s_py, t_py = run("python", spec, sol, N, reps)
        if _mc_speed is None:
            print(f"{N:>6} {reps:>7} {t_py:>11.3f} {'-':>11} {'-':>8}")
            continue
        s_cy, t_cy = run("cython", spec, sol, N, reps)
        same = all(
            np.array_equal(getattr(s_py, f), getattr(s_cy, f))
            for f in ("mean_mu_err", "mean_x_err", "mismatch_prob", "x1_freq", "y1_freq")
        )
        print(f"{N:>6} {reps:>7} {t_py:>11.3f} {t_cy:>11.3f} {t_py / t_cy:>7.1f}x  {same}")


if __name__ == "__main__":
    main()
