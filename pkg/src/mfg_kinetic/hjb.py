"""Backward HJB solver, policy extraction, and policy cost evaluation.

The value function solves dW/dt = -F(t, W) backward from W(T) = Psi with
classical RK4 on the model grid, where F_x(t, w) = min_a H(t, x, a, m(t), w).
The minimizer is recomputed at every internal RK4 stage.  Policies are
stored at grid nodes and treated as piecewise constant on [t_k, t_{k+1}).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import NonFiniteValue
from .model import CONTROLLED_RATE, FINITE_ACTION, MeasureFlow, ModelSpec


@dataclass(frozen=True)
class ValueFunction:
    grid: np.ndarray  # (n+1,)
    W: np.ndarray  # (n+1, d)

    def __post_init__(self):
        g = np.asarray(self.grid, float)
        w = np.asarray(self.W, float)
        g.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "grid", g)
        object.__setattr__(self, "W", w)

    def at_start(self, m0) -> float:
        """m0-weighted value at time zero, E[W(0, xi)]."""
        return float(np.asarray(m0, float) @ self.W[0])


@dataclass(frozen=True)
class FeedbackPolicy:
    grid: np.ndarray
    family: str
    actions: np.ndarray  # controlled_rate: (n+1, d, d) rates; finite_action: (n+1, d) ints

    def __post_init__(self):
        g = np.asarray(self.grid, float)
        a = np.asarray(self.actions)
        g.setflags(write=False)
        a.setflags(write=False)
        object.__setattr__(self, "grid", g)
        object.__setattr__(self, "actions", a)

    def action(self, k: int, x: int):
        return self.actions[k, x]

    @staticmethod
    def constant(spec: ModelSpec, action) -> "FeedbackPolicy":
        g = spec.grid()
        if spec.family == CONTROLLED_RATE:
            a = np.tile(np.asarray(action, float), (g.size, spec.d, 1))
        else:
            a = np.full((g.size, spec.d), int(action), dtype=np.int64)
        return FeedbackPolicy(grid=g, family=spec.family, actions=a)


def hjb_rhs(spec: ModelSpec, p, w):
    """Vectorized F(t, w) at measure p; returns (F values, minimizing actions).

    Time enters only through p and the tables, which are time-homogeneous, so
    no explicit t argument is needed.
    """
    w = np.asarray(w, float)
    d = spec.d
    if spec.family == CONTROLLED_RATE:
        cr = spec.cr
        a_max = spec.action_bound() if spec.derived is None else spec.derived.a_max
        diff = w[None, :] - w[:, None]  # diff[x, y] = w_y - w_x
        a = np.clip(-diff / (2.0 * cr.theta), 0.0, a_max)
        np.fill_diagonal(a, 0.0)
        zeta = spec.zeta(p)
        lam = a + zeta
        lam[np.eye(d, dtype=bool)] = 0.0
        f = np.einsum("xy,xy->x", lam, diff)
        f += cr.theta * np.einsum("xy,xy->x", a, a)
        f += cr.c1 @ np.asarray(p, float)
        return f, a
    fa = spec.fa
    p = np.asarray(p, float)
    lam = fa.rate_base.copy()  # (A, d, d)
    if fa.rate_p is not None:
        lam = lam + fa.rate_p @ p
    off = ~np.eye(d, dtype=bool)
    lam = lam * off[None, :, :]
    diff = w[None, :] - w[:, None]
    h = np.einsum("axy,xy->ax", lam, diff) + fa.c_base
    if fa.c_p is not None:
        h = h + (fa.c_p @ p)[None, :]
    best = np.argmin(h, axis=0)  # lowest index wins ties
    return h[best, np.arange(d)], best


def rate_matrix(spec: ModelSpec, t: float, actions, p) -> np.ndarray:
    """Off-diagonal rate matrix under per-state actions; zero diagonal."""
    d = spec.d
    if spec.family == CONTROLLED_RATE:
        q = np.asarray(actions, float) + spec.zeta(p)
    else:
        idx = np.asarray(actions)
        q = spec.fa.rate_base[idx, np.arange(d), :].astype(float, copy=True)
        if spec.fa.rate_p is not None:
            q = q + spec.fa.rate_p[idx, np.arange(d), :, :] @ np.asarray(p, float)
    q = np.array(q, float)
    np.fill_diagonal(q, 0.0)
    return q


def run_cost_vector(spec: ModelSpec, t: float, actions, p) -> np.ndarray:
    """Running cost per state under per-state actions."""
    d = spec.d
    p = np.asarray(p, float)
    if spec.family == CONTROLLED_RATE:
        a = np.asarray(actions, float)
        return spec.cr.theta * np.einsum("xy,xy->x", a, a) + spec.cr.c1 @ p
    idx = np.asarray(actions)
    c = spec.fa.c_base[idx, np.arange(d)].astype(float, copy=True)
    if spec.fa.c_p is not None:
        c = c + spec.fa.c_p @ p
    return c


def _check_finite(w, where: str):
    if not np.all(np.isfinite(w)):
        raise NonFiniteValue(f"non-finite value during {where}")


def solve_hjb(spec: ModelSpec, m: MeasureFlow):
    """Solve the backward HJB ODE; returns (ValueFunction, FeedbackPolicy)."""
    grid = spec.grid()
    n = grid.size - 1
    d = spec.d
    W = np.empty((n + 1, d))
    W[n] = spec.terminal_vector(m.at(grid[n]))
    for k in range(n - 1, -1, -1):
        h = grid[k + 1] - grid[k]
        t1, tm, t0 = grid[k + 1], grid[k] + 0.5 * h, grid[k]
        p1, pm, p0 = m.at(t1), m.at(tm), m.at(t0)
        w1 = W[k + 1]
        f1, _ = hjb_rhs(spec, p1, w1)
        f2, _ = hjb_rhs(spec, pm, w1 + 0.5 * h * f1)
        f3, _ = hjb_rhs(spec, pm, w1 + 0.5 * h * f2)
        f4, _ = hjb_rhs(spec, p0, w1 + h * f3)
        W[k] = w1 + (h / 6.0) * (f1 + 2.0 * f2 + 2.0 * f3 + f4)
        _check_finite(W[k], "solve_hjb")
    if spec.family == CONTROLLED_RATE:
        actions = np.empty((n + 1, d, d))
    else:
        actions = np.empty((n + 1, d), dtype=np.int64)
    for k in range(n + 1):
        _, actions[k] = hjb_rhs(spec, m.at(grid[k]), W[k])
    return (
        ValueFunction(grid=grid, W=W),
        FeedbackPolicy(grid=grid, family=spec.family, actions=actions),
    )


def hjb_residual(spec: ModelSpec, m: MeasureFlow, value: ValueFunction) -> float:
    """Sup-norm defect of W(t) = Psi + int_t^T F(s, W(s)) ds (trapezoid)."""
    grid = value.grid
    n = grid.size - 1
    F = np.empty_like(value.W)
    for k in range(n + 1):
        F[k], _ = hjb_rhs(spec, m.at(grid[k]), value.W[k])
    psi = spec.terminal_vector(m.at(grid[n]))
    dt = np.diff(grid)[:, None]
    seg = 0.5 * dt * (F[:-1] + F[1:])
    tail = np.zeros_like(value.W)
    tail[:-1] = np.cumsum(seg[::-1], axis=0)[::-1]
    defect = value.W - psi[None, :] - tail
    return float(np.max(np.abs(defect)))


def evaluate_cost(spec: ModelSpec, m: MeasureFlow, policy: FeedbackPolicy) -> float:
    """Expected cost of a feedback policy against measure flow m.

    Integrates the linear backward evaluation ODE dJ/dt = -(Q J + c) with the
    node policy held constant on each interval, and returns m0 . J(0).
    """
    grid = spec.grid()
    n = grid.size - 1
    J = spec.terminal_vector(m.at(grid[n]))

    def rhs(t, j, acts):
        p = m.at(t)
        q = rate_matrix(spec, t, acts, p)
        c = run_cost_vector(spec, t, acts, p)
        return q @ j - q.sum(axis=1) * j + c

    for k in range(n - 1, -1, -1):
        h = grid[k + 1] - grid[k]
        acts = policy.actions[k]
        t1, tm, t0 = grid[k + 1], grid[k] + 0.5 * h, grid[k]
        f1 = rhs(t1, J, acts)
        f2 = rhs(tm, J + 0.5 * h * f1, acts)
        f3 = rhs(tm, J + 0.5 * h * f2, acts)
        f4 = rhs(t0, J + h * f3, acts)
        J = J + (h / 6.0) * (f1 + 2.0 * f2 + 2.0 * f3 + f4)
        _check_finite(J, "evaluate_cost")
    return float(spec.m0 @ J)


@dataclass(frozen=True)
class FLipschitzReport:
    n_samples: int
    max_ratio: float
    bound: float  # 2 nu(U)
    violations: int
    passed: bool


def f_lipschitz_probe(
    spec: ModelSpec, m: MeasureFlow, n_samples: int = 1000, seed: int = 0, tol: float = 1e-9
) -> FLipschitzReport:
    """Check |F(t,w) - F(t,z)|_inf <= 2 nu(U) |w - z|_inf on random pairs."""
    rng = np.random.default_rng(seed)
    bound = 2.0 * spec.nu_U
    max_ratio = 0.0
    violations = 0
    for _ in range(n_samples):
        t = float(rng.uniform(0.0, spec.T))
        p = m.at(t)
        w = rng.normal(scale=2.0, size=spec.d)
        z = rng.normal(scale=2.0, size=spec.d)
        fw, _ = hjb_rhs(spec, p, w)
        fz, _ = hjb_rhs(spec, p, z)
        dwz = float(np.max(np.abs(w - z)))
        if dwz == 0.0:
            continue
        lhs = float(np.max(np.abs(fw - fz)))
        max_ratio = max(max_ratio, lhs / dwz)
        if lhs > bound * dwz + tol:
            violations += 1
    return FLipschitzReport(
        n_samples=n_samples,
        max_ratio=max_ratio,
        bound=bound,
        violations=violations,
        passed=violations == 0,
    )


def value_to_csv(value: ValueFunction, path) -> None:
    d = value.W.shape[1]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + [f"W{j + 1}" for j in range(d)])
        for t, row in zip(value.grid, value.W):
            w.writerow([f"{t:.17g}"] + [f"{v:.17g}" for v in row])


def value_from_csv(path) -> ValueFunction:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    data = np.array([[float(v) for v in r] for r in rows[1:]])
    return ValueFunction(grid=data[:, 0], W=data[:, 1:])


def policy_from_csv(path) -> FeedbackPolicy:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header = rows[0]
    body = rows[1:]
    family = FINITE_ACTION if header[-1] == "a_index" else CONTROLLED_RATE
    grid = sorted({float(r[0]) for r in body})
    tidx = {t: k for k, t in enumerate(grid)}
    d = max(int(r[1]) for r in body)
    if family == CONTROLLED_RATE:
        acts = np.empty((len(grid), d, len(header) - 2))
        for r in body:
            acts[tidx[float(r[0])], int(r[1]) - 1] = [float(v) for v in r[2:]]
    else:
        acts = np.empty((len(grid), d), dtype=np.int64)
        for r in body:
            acts[tidx[float(r[0])], int(r[1]) - 1] = int(r[2])
    return FeedbackPolicy(grid=np.asarray(grid), family=family, actions=acts)


def policy_to_csv(policy: FeedbackPolicy, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        if policy.family == CONTROLLED_RATE:
            d = policy.actions.shape[1]
            w.writerow(["t", "x"] + [f"a{j + 1}" for j in range(policy.actions.shape[2])])
            for k, t in enumerate(policy.grid):
                for x in range(d):
                    w.writerow([f"{t:.17g}", x + 1] + [f"{v:.17g}" for v in policy.actions[k, x]])
        else:
            w.writerow(["t", "x", "a_index"])
            for k, t in enumerate(policy.grid):
                for x in range(policy.actions.shape[1]):
                    w.writerow([f"{t:.17g}", x + 1, int(policy.actions[k, x])])
