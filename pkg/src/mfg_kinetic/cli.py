"""Batch front end: JSON scenario configs in, CSV/JSON artifacts out.

Exit codes: 0 success, 2 config/validation error (nothing written),
3 fixed-point iteration did not converge (artifacts still written with
converged=false in meta.json).  A single machine-readable JSON summary is
printed on stdout; human diagnostics go to stderr.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import __version__
from .errors import MFGKineticError
from .hjb import policy_from_csv, solve_hjb
from .mfg import compute_tstar, check_monotonicity, save_solution, solve_mfg
from .model import (
    MeasureFlow,
    ModelSpec,
    flow_from_csv,
    spec_from_dict,
    validate_model,
)
from .hjb import evaluate_cost
from .nplayer_exact import nash_gap_table
from .nplayer_mc import empirical_error_rate_fit, simulate_coupled

SUBCOMMANDS = ("solve-mfg", "nash-gap", "mc-converge", "check-mono", "tstar", "eval-cost")


def _log(args, msg):
    if not args.quiet:
        print(msg, file=sys.stderr)


def _load_scenario(path):
    with open(path) as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict) or doc.get("schema") != 1:
        raise ValueError("config must be a JSON object with \"schema\": 1")
    if "model" not in doc:
        raise ValueError("config lacks a \"model\" document")
    spec = validate_model(spec_from_dict(doc["model"]))
    run = doc.get("run", {})
    if not isinstance(run, dict):
        raise ValueError("\"run\" must be an object")
    return spec, run


def _threads(args):
    if args.threads is not None:
        return args.threads
    env = os.environ.get("MFG_KINETIC_THREADS")
    if env:
        return int(env)
    return os.cpu_count() or 1


def _load_solution(spec: ModelSpec, soldir):
    m = flow_from_csv(os.path.join(soldir, "m.csv"))
    policy = policy_from_csv(os.path.join(soldir, "policy.csv"))
    grid = spec.grid()
    for g in (m.grid, policy.grid):
        if g.size != grid.size or not np.allclose(g, grid, atol=1e-9):
            raise ValueError("solution grids do not match the model grid")
    if m.d != spec.d or policy.actions.shape[1] != spec.d or policy.family != spec.family:
        raise ValueError("solution dimensions/family do not match the model")
    return m, policy


def _solve_or_load(args, spec, run, outdir):
    """MFG solution from --solution <dir> or a fresh solve saved to outdir."""
    if args.solution:
        m, policy = args._preloaded_solution
        return m, policy, True
    _log(args, "solving mean field game ...")
    sol = solve_mfg(
        spec,
        damping=float(run.get("damping", 0.5)),
        tol=float(run.get("tol", 1e-6)),
        max_iter=int(run.get("max_iter", 200)),
    )
    save_solution(os.path.join(outdir, "solution"), sol)
    return sol.m, sol.policy, sol.converged


def cmd_solve_mfg(args, spec, run, outdir):
    sol = solve_mfg(
        spec,
        damping=float(run.get("damping", 0.5)),
        tol=float(run.get("tol", 1e-6)),
        max_iter=int(run.get("max_iter", 200)),
    )
    tstar = None
    if spec.family == "controlled_rate" and run.get("tstar", False):
        tstar = compute_tstar(spec)
    save_solution(outdir, sol, tstar=tstar)
    summary = {
        "command": "solve-mfg",
        "converged": sol.converged,
        "iterations": sol.iterations,
        "residual": sol.residual,
        "artifacts": ["m.csv", "value.csv", "policy.csv", "meta.json"],
    }
    return summary, 0 if sol.converged else 3


def cmd_tstar(args, spec, run, outdir):
    rep = compute_tstar(spec)
    with open(os.path.join(outdir, "tstar.json"), "w") as fh:
        json.dump(rep.as_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    summary = {"command": "tstar", **rep.as_dict(), "artifacts": ["tstar.json"]}
    return summary, 0


def cmd_check_mono(args, spec, run, outdir):
    rep = check_monotonicity(spec, n_pairs=int(run.get("n_pairs", 256)), seed=args.seed)
    doc = {
        "min_c1_pairing": rep.min_c1_pairing,
        "min_psi_pairing": rep.min_psi_pairing,
        "c1_eig_min": rep.c1_eig_min,
        "psi_eig_min": rep.psi_eig_min,
        "passed": rep.passed,
        "samples": rep.samples,
    }
    with open(os.path.join(outdir, "monotonicity.json"), "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return {"command": "check-mono", **doc, "artifacts": ["monotonicity.json"]}, 0


def cmd_eval_cost(args, spec, run, outdir):
    if args.solution:
        m, _ = args._preloaded_solution
    else:
        m = MeasureFlow.constant(spec.grid(), spec.m0)
    value, policy = solve_hjb(spec, m)
    cost = evaluate_cost(spec, m, policy)
    doc = {"cost_optimal_policy": cost, "m0_dot_W0": value.at_start(spec.m0)}
    with open(os.path.join(outdir, "eval.json"), "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return {"command": "eval-cost", **doc, "artifacts": ["eval.json"]}, 0


def cmd_nash_gap(args, spec, run, outdir):
    n_list = [int(n) for n in run.get("N_list", [2, 4, 8, 16, 32, 64])]
    m, policy, converged = _solve_or_load(args, spec, run, outdir)
    _log(args, f"computing exact Nash gaps for N = {n_list} ...")
    table = nash_gap_table(spec, policy, n_list, cap=int(run.get("cap", 2_000_000)))
    table.to_csv(os.path.join(outdir, "nash_gap.csv"))
    summary = {
        "command": "nash-gap",
        "N": n_list,
        "epsilons": [r.epsilon for r in table.rows],
        "slope": table.slope,
        "artifacts": ["nash_gap.csv"],
    }
    return summary, 0 if converged else 3


def cmd_mc_converge(args, spec, run, outdir):
    n_list = [int(n) for n in run.get("N_list", [16, 64, 256])]
    reps = int(run.get("replications", 200))
    checkpoints = [float(t) for t in run.get("checkpoints", [])] or [
        spec.T * f for f in (0.25, 0.5, 0.75, 1.0)
    ]
    m, policy, converged = _solve_or_load(args, spec, run, outdir)
    threads = _threads(args)
    stats = []
    for n in n_list:
        _log(args, f"simulating N={n} x {reps} replications ...")
        stats.append(
            simulate_coupled(
                spec, policy, m, N=n, replications=reps, seed=args.seed,
                checkpoints=checkpoints, threads=threads,
            )
        )
    _write_mc_rows(os.path.join(outdir, "mc_stats.csv"), stats)
    summary = {
        "command": "mc-converge",
        "N": n_list,
        "replications": reps,
        "max_mu_err": [s.max_mu_err for s in stats],
        "artifacts": ["mc_stats.csv"],
    }
    if len(set(n_list)) >= 3:
        fit = empirical_error_rate_fit(stats)
        fit.to_csv(os.path.join(outdir, "error_fit.csv"))
        summary["slope"] = fit.slope
        summary["artifacts"].append("error_fit.csv")
    return summary, 0 if converged else 3


def _write_mc_rows(path, stats):
    import csv as _csv

    with open(path, "w", newline="") as fh:
        w = _csv.writer(fh)
        w.writerow(
            ["t", "N", "reps", "mean_mu_err", "ci_mu_err", "mean_x_err", "ci_x_err", "mismatch_prob"]
        )
        for s in stats:
            for k, t in enumerate(s.checkpoints):
                w.writerow(
                    [
                        f"{t:.17g}",
                        s.N,
                        s.replications,
                        f"{s.mean_mu_err[k]:.17g}",
                        f"{s.ci_mu_err[k]:.17g}",
                        f"{s.mean_x_err[k]:.17g}",
                        f"{s.ci_x_err[k]:.17g}",
                        f"{s.mismatch_prob[k]:.17g}",
                    ]
                )


COMMANDS = {
    "solve-mfg": cmd_solve_mfg,
    "nash-gap": cmd_nash_gap,
    "mc-converge": cmd_mc_converge,
    "check-mono": cmd_check_mono,
    "tstar": cmd_tstar,
    "eval-cost": cmd_eval_cost,
}


def build_parser():
    p = argparse.ArgumentParser(prog="mfg-kinetic", description=__doc__)
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="scenario JSON path")
        sp.add_argument("--out", required=True, help="output directory for artifacts")
        sp.add_argument("--seed", type=int, default=0, help="base seed (u64)")
        sp.add_argument("--quiet", action="store_true", help="suppress progress output")
        sp.add_argument("--threads", type=int, default=None,
                        help="worker threads (default: MFG_KINETIC_THREADS or machine parallelism)")
        sp.add_argument("--solution", default=None,
                        help="directory with a precomputed solution (m.csv, policy.csv)")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    # validate everything before touching the output directory
    try:
        spec, run = _load_scenario(args.config)
        if "seed" in run and args.seed == 0:
            args.seed = int(run["seed"])
        if args.solution:
            args._preloaded_solution = _load_solution(spec, args.solution)
    except (OSError, ValueError, KeyError, TypeError, json.JSONDecodeError, MFGKineticError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    os.makedirs(args.out, exist_ok=True)
    try:
        summary, code = COMMANDS[args.command](args, spec, run, args.out)
    except (MFGKineticError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    print(json.dumps(summary, sort_keys=True))
    return code


if __name__ == "__main__":
    sys.exit(main())
