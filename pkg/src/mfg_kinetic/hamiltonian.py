"""Generator, pre-Hamiltonian, and its unique minimizer.

For the controlled-rate family the pre-Hamiltonian is strictly convex in a
with the closed-form minimizer a*_y = clamp(-(g_y - g_x) / (2 theta), 0,
a_max) for y != x and a*_x = 0 (the self component never moves the chain but
costs theta a^2, so 0 is cost-minimal).  Finite-action models are minimized
by exhaustive scan with lowest-index tie-breaking.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import FamilyUnsupported
from .model import CONTROLLED_RATE, ModelSpec


@dataclass(frozen=True)
class HamiltonianValue:
    minimizer: object  # (d,) rate vector or action index
    value: float


def generator_apply(spec: ModelSpec, t: float, x: int, a, p, g) -> float:
    """Apply the controlled generator: sum_{y != x} lambda(x,y) (g_y - g_x)."""
    g = np.asarray(g, float)
    row = spec.rate_row(t, x, a, p)
    return float(row @ (g - g[x]))


def pre_hamiltonian(spec: ModelSpec, t: float, x: int, a, p, g) -> float:
    return generator_apply(spec, t, x, a, p, g) + spec.run_cost(t, x, a, p)


def minimize_hamiltonian(spec: ModelSpec, t: float, x: int, p, g) -> HamiltonianValue:
    g = np.asarray(g, float)
    if spec.family == CONTROLLED_RATE:
        cr = spec.cr
        a_max = spec.action_bound() if spec.derived is None else spec.derived.a_max
        diff = g - g[x]
        a = np.clip(-diff / (2.0 * cr.theta), 0.0, a_max)
        a[x] = 0.0
        zeta = spec.zeta(p)
        value = float((a + zeta) @ diff)  # y = x term vanishes: a[x] = diff[x] = 0
        value += cr.theta * float(a @ a) + float(cr.c1[x] @ np.asarray(p, float))
        a.setflags(write=False)
        return HamiltonianValue(minimizer=a, value=value)
    values = [pre_hamiltonian(spec, t, x, a, p, g) for a in range(spec.n_actions)]
    best = int(np.argmin(values))  # argmin returns the lowest index on ties
    return HamiltonianValue(minimizer=best, value=float(values[best]))


def minimize_hamiltonian_grid(spec: ModelSpec, t: float, x: int, p, g) -> HamiltonianValue:
    """Grid-search fallback for the controlled-rate minimizer.

    Scans each action coordinate over numerics.action_grid points (the
    Hamiltonian separates across coordinates), useful as a cross-check of
    the closed form; accuracy is O(h^2) in the grid spacing.
    """
    if spec.family != CONTROLLED_RATE:
        raise FamilyUnsupported("grid fallback is for the controlled_rate family")
    cr = spec.cr
    g = np.asarray(g, float)
    a_max = spec.action_bound() if spec.derived is None else spec.derived.a_max
    grid = np.linspace(0.0, a_max, spec.numerics.action_grid)
    diff = g - g[x]
    a = np.zeros(spec.d)
    for y in range(spec.d):
        if y == x:
            continue
        vals = grid * diff[y] + cr.theta * grid * grid
        a[y] = grid[int(np.argmin(vals))]
    zeta = spec.zeta(p)
    value = float((a + zeta) @ diff) + cr.theta * float(a @ a)
    value += float(cr.c1[x] @ np.asarray(p, float))
    a.setflags(write=False)
    return HamiltonianValue(minimizer=a, value=value)


@dataclass(frozen=True)
class MinimizerLipschitzReport:
    n_samples: int
    max_p_ratio: float
    p_bound: float  # K_a / theta
    max_g_ratio: float
    g_bound: float  # 1 / theta
    violations: int
    passed: bool


def minimizer_lipschitz_probe(
    spec: ModelSpec, n_samples: int = 1000, seed: int = 0, tol: float = 1e-9
) -> MinimizerLipschitzReport:
    """Sample (p, q) and (g, h) pairs and compare the minimizer shifts
    against the Lipschitz bounds (K_a/theta in p, 1/theta in g)."""
    if spec.family != CONTROLLED_RATE:
        raise FamilyUnsupported("minimizer probe needs the controlled_rate family")
    rng = np.random.default_rng(seed)
    theta = spec.cr.theta
    k_a = spec.derived.K_a if spec.derived is not None else 0.0
    p_bound = k_a / theta
    g_bound = 1.0 / theta
    d = spec.d
    max_p = 0.0
    max_g = 0.0
    violations = 0
    for _ in range(n_samples):
        x = int(rng.integers(d))
        t = float(rng.uniform(0.0, spec.T))
        p = rng.dirichlet(np.ones(d))
        q = rng.dirichlet(np.ones(d))
        g = rng.normal(scale=2.0, size=d)
        h = rng.normal(scale=2.0, size=d)
        ap = minimize_hamiltonian(spec, t, x, p, g).minimizer
        aq = minimize_hamiltonian(spec, t, x, q, g).minimizer
        ah = minimize_hamiltonian(spec, t, x, p, h).minimizer
        dp = float(np.linalg.norm(p - q))
        dg = float(np.linalg.norm(g - h))
        if dp > 0:
            r = float(np.linalg.norm(ap - aq)) / dp
            max_p = max(max_p, r)
            if r > p_bound + tol:
                violations += 1
        if dg > 0:
            r = float(np.linalg.norm(ap - ah)) / dg
            max_g = max(max_g, r)
            if r > g_bound + tol:
                violations += 1
    return MinimizerLipschitzReport(
        n_samples=n_samples,
        max_p_ratio=max_p,
        p_bound=p_bound,
        max_g_ratio=max_g,
        g_bound=g_bound,
        violations=violations,
        passed=violations == 0,
    )
