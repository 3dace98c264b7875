"""Event-driven Monte Carlo of the N-player system with the mean-field
coupling.

Each player carries an independent counter-based random stream; a Poisson
stream of total rate nu(U) = d*M delivers marks (target y, height u in
[0, M]) and the SAME mark stream drives both chains: X_i jumps to y iff
u < lambda(t, X_i, y, gamma(t, X_i), mu^N(t-)) and Y_i iff
u < lambda(t, Y_i, y, gamma(t, Y_i), m(t)).  Rates are bounded by M, so the
thinning is exact (no time discretization).  Replications are independent
and merge in replication order, so results do not depend on the thread
count; two kernels (compiled and pure Python) produce bitwise-identical
output.  Set MFG_KINETIC_PURE=1 to force the pure kernel.
"""

from __future__ import annotations

import csv
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import _mc_pure
from .errors import InsufficientData, RateExceedsBound
from .hjb import FeedbackPolicy
from .model import CONTROLLED_RATE, MeasureFlow, ModelSpec
from .rng import next_u01, stream_state

try:  # the compiled kernel is optional
    from . import _mc_speed
except ImportError:  # pragma: no cover - depends on the build environment
    _mc_speed = None


def kernel_backend() -> str:
    """Name of the kernel selected at import: 'cython' or 'python'."""
    if os.environ.get("MFG_KINETIC_PURE"):
        return "python"
    return "cython" if _mc_speed is not None else "python"


@dataclass(frozen=True)
class _SimTables:
    d: int
    T: float
    dt: float
    n_steps: int
    M: float
    total_rate: float
    m_vals: np.ndarray
    base: np.ndarray
    pcoef: Optional[np.ndarray]
    cb: np.ndarray
    cb_cum: np.ndarray
    cp: np.ndarray
    m0_cdf: np.ndarray


def _prepare_tables(spec: ModelSpec, policy: FeedbackPolicy, m: MeasureFlow) -> _SimTables:
    grid = spec.grid()
    n = grid.size - 1
    d = spec.d
    for g in (policy.grid, m.grid):
        if g.size != grid.size or not np.allclose(g, grid, atol=1e-12):
            raise ValueError("policy/flow grids must match the model grid")
    dt = float(spec.T) / n
    if spec.family == CONTROLLED_RATE:
        cr = spec.cr
        pol = np.asarray(policy.actions[:n], float)  # (n, d, d)
        base = pol + cr.kappa
        idx = np.arange(d)
        base[:, idx, idx] = 0.0
        if np.any(cr.zeta_w != 0.0):
            pcoef = np.broadcast_to(cr.zeta_w, (n, d, d, d)).copy()
        else:
            pcoef = None
        cb = cr.theta * np.einsum("kxy,kxy->kx", pol, pol)
        cp = np.asarray(cr.c1, float)
    else:
        fa = spec.fa
        aidx = np.asarray(policy.actions[:n])  # (n, d) ints
        xs = np.arange(d)
        base = fa.rate_base[aidx, xs[None, :], :].astype(float)  # (n, d, d)
        idx = np.arange(d)
        base[:, idx, idx] = 0.0
        if fa.rate_p is not None:
            pcoef = fa.rate_p[aidx, xs[None, :], :, :].astype(float)  # (n, d, d, d)
        else:
            pcoef = None
        cb = fa.c_base[aidx, xs[None, :]].astype(float)
        cp = fa.c_p.astype(float) if fa.c_p is not None else np.zeros((d, d))
    cb_cum = np.zeros((n + 1, d))
    cb_cum[1:] = np.cumsum(cb * dt, axis=0)
    m0_cdf = np.cumsum(spec.m0)
    m0_cdf[-1] = 1.0
    return _SimTables(
        d=d,
        T=float(spec.T),
        dt=dt,
        n_steps=n,
        M=float(spec.M),
        total_rate=float(d * spec.M),
        m_vals=np.array(m.values, dtype=float, order="C"),  # writable copy for memoryviews
        base=np.ascontiguousarray(base),
        pcoef=None if pcoef is None else np.ascontiguousarray(pcoef),
        cb=np.ascontiguousarray(cb),
        cb_cum=np.ascontiguousarray(cb_cum),
        cp=np.ascontiguousarray(cp),
        m0_cdf=m0_cdf,
    )


def _run_replications(tab, N, replications, seed, checkpoints, threads, backend, stream_ids):
    """Run all replications; outputs are indexed by replication, so the result
    is independent of the worker count."""
    use = backend or kernel_backend()
    K = len(checkpoints)
    counts = np.empty((replications, K, tab.d), dtype=np.int64)
    x1 = np.empty((replications, K), dtype=np.int64)
    y1 = np.empty((replications, K), dtype=np.int64)
    cost = np.empty(replications)
    events = np.empty(replications, dtype=np.int64)
    status_bad = []

    if use == "cython":
        if _mc_speed is None:
            raise RuntimeError("compiled kernel unavailable; build the extension or use backend='python'")
        chk = np.asarray(checkpoints, float)
        sid = np.asarray(stream_ids, dtype=np.int64)

        def one(rep):
            return _mc_speed.simulate_replication(
                seed, rep, N, tab.d, tab.T, tab.dt, tab.n_steps, tab.M,
                tab.total_rate, 1.0 / N, tab.m_vals, tab.base, tab.pcoef,
                tab.cb, tab.cb_cum, tab.cp, tab.m0_cdf, chk, sid,
            )

    else:
        m_vals_l = tab.m_vals.tolist()
        base_l = tab.base.tolist()
        pcoef_l = None if tab.pcoef is None else tab.pcoef.tolist()
        cb_l = tab.cb.tolist()
        cbc_l = tab.cb_cum.tolist()
        cp_l = tab.cp.tolist()
        cdf_l = tab.m0_cdf.tolist()
        chk_l = list(checkpoints)
        sid_l = list(stream_ids)

        def one(rep):
            return _mc_pure.simulate_replication(
                seed, rep, N, tab.d, tab.T, tab.dt, tab.n_steps, tab.M,
                tab.total_rate, 1.0 / N, m_vals_l, base_l, pcoef_l,
                cb_l, cbc_l, cp_l, cdf_l, chk_l, sid_l,
            )

    def store(rep, out):
        status, c, xc, yc, cost_r, n_ev = out
        if status != 0:
            status_bad.append(rep)
        counts[rep] = np.asarray(c)
        x1[rep] = np.asarray(xc)
        y1[rep] = np.asarray(yc)
        cost[rep] = cost_r
        events[rep] = n_ev

    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            for rep, out in enumerate(ex.map(one, range(replications))):
                store(rep, out)
    else:
        for rep in range(replications):
            store(rep, one(rep))
    if status_bad:
        raise RateExceedsBound(
            f"rate above M encountered in replications {status_bad[:5]} (model invariant violated)"
        )
    return counts, x1, y1, cost, events


@dataclass(frozen=True)
class CoupledPathStats:
    N: int
    replications: int
    seed: int
    checkpoints: np.ndarray  # (K,)
    mean_mu_err: np.ndarray  # E|mu^N(t) - m(t)|
    ci_mu_err: np.ndarray  # 1.96 * sample std / sqrt(reps)
    mean_x_err: np.ndarray  # E|X_1(t) - Y_1(t)|
    ci_x_err: np.ndarray
    mismatch_prob: np.ndarray  # P(X_1(t) != Y_1(t))
    ci_mismatch: np.ndarray
    x1_freq: np.ndarray  # (K, d) marginal of X_1 (interacting system)
    y1_freq: np.ndarray  # (K, d) marginal of Y_1 (mean-field system)
    mean_events: float

    @property
    def max_mu_err(self) -> float:
        return float(np.max(self.mean_mu_err))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(
                ["t", "N", "reps", "mean_mu_err", "ci_mu_err", "mean_x_err", "ci_x_err", "mismatch_prob"]
            )
            for k, t in enumerate(self.checkpoints):
                w.writerow(
                    [
                        f"{t:.17g}",
                        self.N,
                        self.replications,
                        f"{self.mean_mu_err[k]:.17g}",
                        f"{self.ci_mu_err[k]:.17g}",
                        f"{self.mean_x_err[k]:.17g}",
                        f"{self.ci_x_err[k]:.17g}",
                        f"{self.mismatch_prob[k]:.17g}",
                    ]
                )


def _ci(arr: np.ndarray) -> np.ndarray:
    reps = arr.shape[0]
    if reps < 2:
        return np.zeros(arr.shape[1])
    return 1.96 * np.std(arr, axis=0, ddof=1) / math.sqrt(reps)


def simulate_coupled(
    spec: ModelSpec,
    policy: FeedbackPolicy,
    m: MeasureFlow,
    N: int,
    replications: int,
    seed: int,
    checkpoints: Sequence[float],
    threads: Optional[int] = None,
    backend: Optional[str] = None,
    event_log_path=None,
    _stream_permutation: Optional[Sequence[int]] = None,
) -> CoupledPathStats:
    """Coupled propagation-of-chaos statistics at the given checkpoint times.

    The terminal time T is always included as the last checkpoint.  With
    event_log_path set, the mark streams are additionally dumped as JSON
    lines (debug aid; identical streams to the simulation itself).
    """
    if event_log_path is not None:
        write_event_log(spec, N, replications, seed, event_log_path)
    chk = sorted(float(c) for c in checkpoints)
    if any(c <= 0.0 or c > spec.T + 1e-12 for c in chk):
        raise ValueError("checkpoints must lie in (0, T]")
    if not chk or chk[-1] < spec.T - 1e-12:
        chk.append(float(spec.T))
    chk[-1] = float(spec.T)
    tab = _prepare_tables(spec, policy, m)
    stream_ids = list(range(N)) if _stream_permutation is None else list(_stream_permutation)
    counts, x1, y1, cost, events = _run_replications(
        tab, N, replications, seed, chk, threads, backend, stream_ids
    )
    m_at = np.stack([m.at(t) for t in chk])  # (K, d)
    mu = counts / float(N)
    mu_err = np.linalg.norm(mu - m_at[None, :, :], axis=2)  # (reps, K)
    x_err = np.abs(x1 - y1).astype(float)
    mismatch = (x1 != y1).astype(float)
    d = spec.d
    x1f = np.stack([(x1 == s).mean(axis=0) for s in range(d)], axis=1)
    y1f = np.stack([(y1 == s).mean(axis=0) for s in range(d)], axis=1)
    return CoupledPathStats(
        N=N,
        replications=replications,
        seed=seed,
        checkpoints=np.asarray(chk),
        mean_mu_err=mu_err.mean(axis=0),
        ci_mu_err=_ci(mu_err),
        mean_x_err=x_err.mean(axis=0),
        ci_x_err=_ci(x_err),
        mismatch_prob=mismatch.mean(axis=0),
        ci_mismatch=_ci(mismatch),
        x1_freq=x1f,
        y1_freq=y1f,
        mean_events=float(events.mean()),
    )


def mc_cost_estimate(
    spec: ModelSpec,
    policy: FeedbackPolicy,
    N: int,
    replications: int,
    seed: int,
    m: Optional[MeasureFlow] = None,
    threads: Optional[int] = None,
    backend: Optional[str] = None,
):
    """Monte Carlo estimate of player 1's cost under the symmetric profile.

    Running cost is integrated exactly between events; returns
    (estimate, ci_halfwidth) with the 1.96-sigma halfwidth.
    """
    if m is None:
        m = MeasureFlow.constant(spec.grid(), spec.m0)
    tab = _prepare_tables(spec, policy, m)
    chk = [float(spec.T)]
    counts, x1, _, cost, _ = _run_replications(
        tab, N, replications, seed, chk, threads, backend, list(range(N))
    )
    total = np.empty(replications)
    for rep in range(replications):
        total[rep] = cost[rep] + spec.terminal_cost(int(x1[rep, -1]), counts[rep, -1] / float(N))
    est = float(total.mean())
    ci = float(1.96 * np.std(total, ddof=1) / math.sqrt(replications)) if replications > 1 else 0.0
    return est, ci


def write_event_log(spec: ModelSpec, N: int, replications: int, seed: int, path) -> int:
    """Debug dump of the mark streams as JSON lines, one event per line.

    Replays exactly the per-(replication, player) streams the kernels
    consume: fields are the event time, player, target state (1-based), and
    the uniform height in [0, M].  Returns the number of events written.
    """
    d, T, M = spec.d, spec.T, spec.M
    total_rate = d * M
    written = 0
    with open(path, "w") as fh:
        for rep in range(replications):
            for i in range(N):
                st = stream_state(seed, rep, i)
                st, _ = next_u01(st)  # initial-state draw
                t = 0.0
                while True:
                    st, u = next_u01(st)
                    t += -math.log1p(-u) / total_rate
                    if t > T:
                        break
                    st, u = next_u01(st)
                    y = min(int(u * d), d - 1)
                    st, u = next_u01(st)
                    fh.write(
                        json.dumps(
                            {"rep": rep, "t": t, "player": i, "y": y + 1, "u": u * M}
                        )
                        + "\n"
                    )
                    written += 1
    return written


@dataclass(frozen=True)
class ErrorRateFit:
    n_values: tuple
    max_errors: tuple  # max over checkpoints of E|mu - m| per N
    cis: tuple  # CI halfwidth at the argmax checkpoint
    slope: float

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["N", "max_mu_err", "ci", "slope"])
            for n, e, c in zip(self.n_values, self.max_errors, self.cis):
                w.writerow([n, f"{e:.17g}", f"{c:.17g}", f"{self.slope:.17g}"])


def empirical_error_rate_fit(stats_list: Sequence[CoupledPathStats]) -> ErrorRateFit:
    """Least-squares slope of log(max-checkpoint E|mu - m|) against log N."""
    if len({s.N for s in stats_list}) < 3:
        raise InsufficientData("need at least 3 distinct N values")
    ns, errs, cis = [], [], []
    for s in sorted(stats_list, key=lambda s: s.N):
        k = int(np.argmax(s.mean_mu_err))
        ns.append(s.N)
        errs.append(float(s.mean_mu_err[k]))
        cis.append(float(s.ci_mu_err[k]))
    slope = float(np.polyfit(np.log(ns), np.log(errs), 1)[0])
    return ErrorRateFit(n_values=tuple(ns), max_errors=tuple(errs), cis=tuple(cis), slope=slope)
