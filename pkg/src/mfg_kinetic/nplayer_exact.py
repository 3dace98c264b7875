"""Exact N-player costs and best responses by dynamic programming.

The joint chain (X_1, n) is Markov when the other players follow the
decentralized symmetric feedback: player 1 jumps x1 -> y at rate
lambda(t, x1, y, a_1, mu) and each of the n_z players in state z jumps
z -> y at rate lambda(t, z, y, gamma(t, z), mu), with mu = (e_{x1} + n)/N
the pre-jump empirical measure.  Costs are evaluated backward by RK4 on
the same grid as the single-player solvers; the exact Nash gap is
epsilon_N = J_1(symmetric profile) - J_1(best response).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .counts import DEFAULT_CAP, CountEnumeration, enumerate_count_states
from .errors import NonFiniteValue
from .hjb import FeedbackPolicy
from .model import CONTROLLED_RATE, ModelSpec


@dataclass(frozen=True)
class NashGapReport:
    N: int
    cost_symmetric: float
    cost_best_response: float
    epsilon: float
    slope_fit: Optional[float] = None


@dataclass(frozen=True)
class NashGapTable:
    rows: tuple  # NashGapReport per N
    slope: Optional[float]  # least-squares slope of log eps vs log N

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["N", "cost_sym", "cost_br", "epsilon", "epsilon_sqrtN"])
            for r in self.rows:
                w.writerow(
                    [
                        r.N,
                        f"{r.cost_symmetric:.17g}",
                        f"{r.cost_best_response:.17g}",
                        f"{r.epsilon:.17g}",
                        f"{r.epsilon * math.sqrt(r.N):.17g}",
                    ]
                )


@dataclass(frozen=True)
class DeviationPolicy:
    """Best-response actions on (t, x1, n)."""

    grid: np.ndarray
    family: str
    actions: np.ndarray  # (n+1, R, d, d) rates or (n+1, R, d) indices


class _JointChain:
    """Precomputed geometry of the (x1, n) chain for one (spec, N)."""

    def __init__(self, spec: ModelSpec, N: int, cap: int = DEFAULT_CAP):
        self.spec = spec
        self.N = N
        self.enum: CountEnumeration = enumerate_count_states(spec.d, N, cap=cap)
        d = spec.d
        counts = self.enum.counts.astype(float)
        eye = np.eye(d)
        # mu[r, x1, :] = (n_r + e_{x1}) / N
        self.mu = (counts[:, None, :] + eye[None, :, :]) / float(N)
        self.countsf = counts
        if spec.family == CONTROLLED_RATE:
            cr = spec.cr
            self.zeta_mu = cr.kappa + np.einsum("j,rxj->rx", cr.zeta_w, self.mu)
            self.c1_mu = np.einsum("xj,rxj->rx", cr.c1, self.mu)
            self.psi_mu = np.einsum("xj,rxj->rx", cr.psi, self.mu)
            self.a_max = spec.action_bound() if spec.derived is None else spec.derived.a_max
        else:
            fa = spec.fa
            self.c_p_mu = (
                np.einsum("xj,rxj->rx", fa.c_p, self.mu) if fa.c_p is not None else 0.0
            )
            self.psi_mu = np.broadcast_to(fa.psi_base[None, :], self.mu.shape[:2]).copy()
            if fa.psi_p is not None:
                self.psi_mu += np.einsum("xj,rxj->rx", fa.psi_p, self.mu)

    # rates of one other player z -> y as seen from joint state (r, x1)
    def _other_rate(self, sym_actions, z: int, y: int) -> np.ndarray:
        spec = self.spec
        if spec.family == CONTROLLED_RATE:
            return sym_actions[z, y] + self.zeta_mu
        a = int(sym_actions[z])
        fa = spec.fa
        lam = fa.rate_base[a, z, y]
        if fa.rate_p is not None:
            return lam + np.einsum("j,rxj->rx", fa.rate_p[a, z, y], self.mu)
        return np.full(self.zeros_shape, lam)

    @property
    def zeros_shape(self):
        return (self.enum.size, self.spec.d)

    def others_drift(self, V: np.ndarray, sym_actions) -> np.ndarray:
        """Sum over moves of the other players: n_z lambda(z->y) (V(move) - V)."""
        d = self.spec.d
        out = np.zeros_like(V)
        move = self.enum.move_idx
        for z in range(d):
            nz = self.countsf[:, z]
            if not np.any(nz):
                continue
            for y in range(d):
                if y == z:
                    continue
                tgt = move[:, z, y]
                valid = tgt >= 0
                lam = self._other_rate(sym_actions, z, y)
                dv = np.where(valid[:, None], V[np.where(valid, tgt, 0)] - V, 0.0)
                out += nz[:, None] * lam * dv
        return out

    def own_eval_drift_cost(self, V: np.ndarray, sym_actions):
        """Player 1 follows the symmetric policy: (drift, running cost)."""
        spec = self.spec
        d = spec.d
        D = V[:, None, :] - V[:, :, None]  # D[r, x1, y] = V[r,y] - V[r,x1]
        if spec.family == CONTROLLED_RATE:
            a = np.asarray(sym_actions, float).copy()
            np.fill_diagonal(a, 0.0)
            drift = np.einsum("xy,rxy->rx", a, D) + self.zeta_mu * D.sum(axis=2)
            cost = spec.cr.theta * np.einsum("xy,xy->x", a, a)[None, :] + self.c1_mu
            return drift, cost
        fa = spec.fa
        drift = np.zeros(self.zeros_shape)
        cost = np.zeros(self.zeros_shape)
        for x1 in range(d):
            a = int(sym_actions[x1])
            lam = np.tile(fa.rate_base[a, x1], (self.enum.size, 1))
            if fa.rate_p is not None:
                lam = lam + np.einsum("yj,rj->ry", fa.rate_p[a, x1], self.mu[:, x1, :])
            lam[:, x1] = 0.0
            drift[:, x1] = np.einsum("ry,ry->r", lam, D[:, x1, :])
            cost[:, x1] = fa.c_base[a, x1]
        if fa.c_p is not None:
            cost = cost + self.c_p_mu
        return drift, cost

    def own_best_drift_cost(self, V: np.ndarray, want_actions: bool = False):
        """Player 1 minimizes: (min drift + own-cost, c1 part, argmin)."""
        spec = self.spec
        d = spec.d
        D = V[:, None, :] - V[:, :, None]
        if spec.family == CONTROLLED_RATE:
            theta = spec.cr.theta
            astar = np.clip(-D / (2.0 * theta), 0.0, self.a_max)
            idx = np.arange(d)
            astar[:, idx, idx] = 0.0
            hval = (
                np.einsum("rxy,rxy->rx", astar, D)
                + self.zeta_mu * D.sum(axis=2)
                + theta * np.einsum("rxy,rxy->rx", astar, astar)
            )
            return hval + self.c1_mu, (astar if want_actions else None)
        fa = spec.fa
        A = len(fa.actions)
        hs = np.empty((A, self.enum.size, d))
        for a in range(A):
            lam = fa.rate_base[a][None, :, :].repeat(self.enum.size, axis=0)
            if fa.rate_p is not None:
                lam = lam + np.einsum("xyj,rxj->rxy", fa.rate_p[a], self.mu)
            idx = np.arange(d)
            lam[:, idx, idx] = 0.0
            hs[a] = np.einsum("rxy,rxy->rx", lam, D) + fa.c_base[a][None, :]
        best = np.argmin(hs, axis=0)
        hval = np.take_along_axis(hs, best[None, :, :], axis=0)[0]
        if fa.c_p is not None:
            hval = hval + self.c_p_mu
        return hval, (best if want_actions else None)

    def initial_weights(self) -> np.ndarray:
        """Multinomial(N-1, m0) weight of each count vector."""
        m0 = self.spec.m0
        S = self.N - 1
        logs = np.where(m0 > 0.0, np.log(np.where(m0 > 0.0, m0, 1.0)), -math.inf)
        out = np.empty(self.enum.size)
        lg_s = math.lgamma(S + 1)
        for r in range(self.enum.size):
            n = self.enum.counts[r]
            if np.any((n > 0) & (m0 == 0.0)):
                out[r] = 0.0
                continue
            lw = lg_s
            for j in range(self.spec.d):
                nj = int(n[j])
                lw -= math.lgamma(nj + 1)
                if nj:
                    lw += nj * logs[j]
            out[r] = math.exp(lw)
        return out


def _sweep(spec: ModelSpec, policy: FeedbackPolicy, N: int, best_response: bool, cap: int):
    chain = _JointChain(spec, N, cap=cap)
    grid = spec.grid()
    n = grid.size - 1
    V = chain.psi_mu.copy()

    dev_actions = None
    if best_response:
        if spec.family == CONTROLLED_RATE:
            dev_actions = np.empty((n + 1, chain.enum.size, spec.d, spec.d))
        else:
            dev_actions = np.empty((n + 1, chain.enum.size, spec.d), dtype=np.int64)
        _, dev_actions[n] = chain.own_best_drift_cost(V, want_actions=True)

    def rhs(V_, sym_actions):
        others = chain.others_drift(V_, sym_actions)
        if best_response:
            own, _ = chain.own_best_drift_cost(V_)
            return others + own
        drift, cost = chain.own_eval_drift_cost(V_, sym_actions)
        return others + drift + cost

    for k in range(n - 1, -1, -1):
        h = grid[k + 1] - grid[k]
        sym = policy.actions[k]
        f1 = rhs(V, sym)
        f2 = rhs(V + 0.5 * h * f1, sym)
        f3 = rhs(V + 0.5 * h * f2, sym)
        f4 = rhs(V + h * f3, sym)
        V = V + (h / 6.0) * (f1 + 2.0 * f2 + 2.0 * f3 + f4)
        if not np.all(np.isfinite(V)):
            raise NonFiniteValue("non-finite value in N-player sweep")
        if best_response:
            _, dev_actions[k] = chain.own_best_drift_cost(V, want_actions=True)

    w = chain.initial_weights()
    cost0 = float(spec.m0 @ (w @ V))
    if best_response:
        dev = DeviationPolicy(grid=grid, family=spec.family, actions=dev_actions)
        return cost0, dev
    return cost0, None


def cost_under_symmetric_feedback(
    spec: ModelSpec, policy: FeedbackPolicy, N: int, cap: int = DEFAULT_CAP
) -> float:
    """Exact J^N_1 when every player applies gamma to their own state."""
    cost, _ = _sweep(spec, policy, N, best_response=False, cap=cap)
    return cost


def best_response(
    spec: ModelSpec, policy: FeedbackPolicy, N: int, cap: int = DEFAULT_CAP
):
    """Exact single-player best response against the symmetric profile.

    Markov deviations measurable in (t, x1, n) attain the optimum over all
    adapted open-loop deviations, so the returned cost is the exact infimum.
    """
    cost, dev = _sweep(spec, policy, N, best_response=True, cap=cap)
    return dev, cost


def nash_gap(spec: ModelSpec, policy: FeedbackPolicy, N: int, cap: int = DEFAULT_CAP) -> NashGapReport:
    cost_sym = cost_under_symmetric_feedback(spec, policy, N, cap=cap)
    _, cost_br = best_response(spec, policy, N, cap=cap)
    eps = max(cost_sym - cost_br, -1e-8)
    return NashGapReport(N=N, cost_symmetric=cost_sym, cost_best_response=cost_br, epsilon=eps)


GAP_FLOOR = 1e-8  # below this the gap is numerically zero and a slope is meaningless


def nash_gap_table(
    spec: ModelSpec, policy: FeedbackPolicy, N_list: Sequence[int], cap: int = DEFAULT_CAP
) -> NashGapTable:
    """Gaps for each N plus the log-log slope (None when a gap sits at the
    numerical floor, e.g. for decoupled models)."""
    rows = [nash_gap(spec, policy, N, cap=cap) for N in N_list]
    eps = np.array([r.epsilon for r in rows])
    slope = None
    if len(rows) >= 2 and np.all(eps > GAP_FLOOR):
        slope = float(np.polyfit(np.log([r.N for r in rows]), np.log(eps), 1)[0])
        rows = [
            NashGapReport(
                N=r.N,
                cost_symmetric=r.cost_symmetric,
                cost_best_response=r.cost_best_response,
                epsilon=r.epsilon,
                slope_fit=slope,
            )
            for r in rows
        ]
    return NashGapTable(rows=tuple(rows), slope=slope)
