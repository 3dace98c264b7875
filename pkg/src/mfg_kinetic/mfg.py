"""Mean field game fixed point: damped Picard iteration on Phi, the
small-horizon contraction bound T*, monotonicity checks, and uniqueness
probes.

Phi sends a flow m to the law of the chain controlled by the HJB-optimal
feedback computed against m.  A feedback MFG solution is a fixed point of
Phi (the mean field condition Law(X(t)) = m(t)).
"""

from __future__ import annotations

import json
import math
import os
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import FamilyUnsupported, NotConverged, RateDependsOnMeasure
from .forward import ForwardInput, solve_forward
from .hjb import (
    FeedbackPolicy,
    ValueFunction,
    policy_to_csv,
    solve_hjb,
    value_to_csv,
)
from .model import (
    CONTROLLED_RATE,
    MeasureFlow,
    ModelSpec,
    flow_to_csv,
    validate_model,
)


@dataclass(frozen=True)
class MFGSolution:
    m: MeasureFlow
    value: ValueFunction
    policy: FeedbackPolicy
    iterations: int
    residual: float  # sup-node |Phi(m) - m| at the returned m
    residual_history: tuple
    converged: bool


def flow_distance(a: MeasureFlow, b: MeasureFlow) -> float:
    """Sup over grid nodes of the Euclidean distance between the flows."""
    return float(np.max(np.linalg.norm(a.values - b.values, axis=1)))


def solve_mfg(
    spec: ModelSpec,
    damping: float = 1.0,
    tol: float = 1e-6,
    max_iter: int = 100,
    init: Optional[MeasureFlow] = None,
) -> MFGSolution:
    """Iterate m <- (1 - delta) m + delta Phi(m) until sup_t |Phi(m) - m| <= tol.

    The returned triple (m, value, policy) is mutually consistent: value and
    policy are the HJB solution computed at the returned m, and residual is
    the fixed-point defect measured at that m.  On max_iter the best iterate
    is returned with converged=False (the CLI maps this to exit code 3).
    """
    if not 0.0 < damping <= 1.0:
        raise ValueError("damping must lie in (0, 1]")
    grid = spec.grid()
    if init is not None and (
        init.grid.size != grid.size or not np.allclose(init.grid, grid, atol=1e-12)
    ):
        raise ValueError("init flow must live on the model grid")
    m = init if init is not None else MeasureFlow.constant(grid, spec.m0)
    history = []
    best = None
    for it in range(1, max_iter + 1):
        value, policy = solve_hjb(spec, m)
        phi = solve_forward(spec, ForwardInput(policy=policy, measure_arg=m))
        r = flow_distance(phi, m)
        history.append(r)
        if best is None or r < best[0]:
            best = (r, m, value, policy, it)
        if r <= tol:
            return MFGSolution(
                m=m,
                value=value,
                policy=policy,
                iterations=it,
                residual=r,
                residual_history=tuple(history),
                converged=True,
            )
        m = MeasureFlow(grid, (1.0 - damping) * m.values + damping * phi.values)
    r, m, value, policy, it = best
    return MFGSolution(
        m=m,
        value=value,
        policy=policy,
        iterations=max_iter,
        residual=r,
        residual_history=tuple(history),
        converged=False,
    )


# -- small-horizon contraction bound ----------------------------------------


@dataclass(frozen=True)
class TStarReport:
    C1: float
    C2: float
    C3: float
    C4: float
    C5: float
    M_V: float
    T_star: float
    lhs_at_tstar: float

    def as_dict(self) -> dict:
        return {
            "C1": self.C1,
            "C2": self.C2,
            "C3": self.C3,
            "C4": self.C4,
            "C5": self.C5,
            "M_V": self.M_V,
            "T_star": self.T_star,
            "lhs_at_tstar": self.lhs_at_tstar,
        }


def _tstar_constants(spec: ModelSpec, tau: float):
    der = spec.derived
    d = float(spec.d)
    sqd = math.sqrt(d)
    theta = spec.cr.theta
    M = spec.cr.M
    K2, Kz, Ka = der.K2, der.K_zeta, der.K_a
    # a priori value bound for horizon tau (conservative, computable pre-solve)
    M_V = tau * der.max_abs_c + der.max_abs_psi
    C1 = 2.0 * M * d * d + 2.0 * d * sqd * M**d
    C2 = 2.0 * d * sqd * Ka / theta + 2.0 * d * d * Kz
    C3 = 2.0 * d * d / theta
    C4 = K2 + 2.0 * d * M_V * Kz + 2.0 * sqd * M_V * Ka / theta + K2 * Ka / theta
    C5 = 2.0 * M_V * sqd / theta + K2 / theta + sqd * (der.M_zeta + M)
    return C1, C2, C3, C4, C5, M_V


def tstar_lhs(spec: ModelSpec, tau: float) -> float:
    """Contraction-factor bound at horizon tau; T* solves lhs = 1."""
    if spec.family != CONTROLLED_RATE:
        raise FamilyUnsupported("T* is defined for the controlled_rate family")
    if spec.derived is None:
        spec = validate_model(spec)
    if tau <= 0.0:
        return 0.0
    C1, C2, C3, C4, C5, _ = _tstar_constants(spec, tau)
    if tau * C1 > 700.0 or tau * C5 > 700.0:
        return math.inf
    sqd = math.sqrt(spec.d)
    return 2.0 * tau * sqd * math.exp(tau * C1) * (
        C2 + C3 * (spec.derived.K2 + tau * C4) * math.exp(tau * C5)
    )


def compute_tstar(spec: ModelSpec) -> TStarReport:
    """Solve the strictly increasing contraction equation for T* by bisection."""
    if spec.family != CONTROLLED_RATE:
        raise FamilyUnsupported("T* is defined for the controlled_rate family")
    if spec.derived is None:
        spec = validate_model(spec)
    hi = 1e-6
    while tstar_lhs(spec, hi) < 1.0:
        hi *= 2.0
        if hi > 1e9:
            raise ValueError("T* bracket search failed")
    lo = 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if tstar_lhs(spec, mid) < 1.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * max(1.0, hi):
            break
    t_star = 0.5 * (lo + hi)
    C1, C2, C3, C4, C5, M_V = _tstar_constants(spec, t_star)
    return TStarReport(
        C1=C1,
        C2=C2,
        C3=C3,
        C4=C4,
        C5=C5,
        M_V=M_V,
        T_star=t_star,
        lhs_at_tstar=tstar_lhs(spec, t_star),
    )


# -- monotonicity -------------------------------------------------------------


@dataclass(frozen=True)
class MonotonicityReport:
    min_c1_pairing: float
    min_psi_pairing: float
    passed: bool
    samples: int
    c1_eig_min: float  # symmetric part on the simplex tangent space
    psi_eig_min: float


def _pairing_tables(spec: ModelSpec):
    if spec.family == CONTROLLED_RATE:
        return spec.cr.c1, spec.cr.psi
    d = spec.d
    c1 = spec.fa.c_p if spec.fa.c_p is not None else np.zeros((d, d))
    psi = spec.fa.psi_p if spec.fa.psi_p is not None else np.zeros((d, d))
    return c1, psi


def _tangent_eig_min(table: np.ndarray) -> float:
    d = table.shape[0]
    # orthonormal basis of {v : sum v = 0}
    _, _, vt = np.linalg.svd(np.ones((1, d)))
    basis = vt[1:].T
    sym = 0.5 * (table + table.T)
    return float(np.min(np.linalg.eigvalsh(basis.T @ sym @ basis)))


def check_monotonicity(
    spec: ModelSpec, n_pairs: int = 256, seed: int = 0, tol: float = 1e-12
) -> MonotonicityReport:
    """Sampled Lasry-Lions pairings plus the exact eigen decision for the
    affine tables; rejects models whose rates depend on p."""
    if not spec.rates_p_independent():
        raise RateDependsOnMeasure("monotonicity theorem needs p-independent rates")
    c1, psi = _pairing_tables(spec)
    rng = np.random.default_rng(seed)
    d = spec.d
    min_c1 = math.inf
    min_psi = math.inf
    drawn = 0
    while drawn < n_pairs:
        p = rng.dirichlet(np.ones(d))
        q = rng.dirichlet(np.ones(d))
        v = p - q
        nv = float(np.linalg.norm(v))
        if nv < 1e-9:
            continue
        drawn += 1
        min_c1 = min(min_c1, float(v @ c1 @ v))
        min_psi = min(min_psi, float(v @ psi @ v))
    c1_eig = _tangent_eig_min(c1)
    psi_eig = _tangent_eig_min(psi)
    passed = (min_c1 > 0.0) and (min_psi >= -tol) and (c1_eig > 0.0) and (psi_eig >= -tol)
    return MonotonicityReport(
        min_c1_pairing=min_c1,
        min_psi_pairing=min_psi,
        passed=passed,
        samples=n_pairs,
        c1_eig_min=c1_eig,
        psi_eig_min=psi_eig,
    )


# -- uniqueness probe ---------------------------------------------------------


@dataclass(frozen=True)
class UniquenessReport:
    n_starts: int
    max_flow_distance: float
    max_value_distance: float
    converged_all: bool


def random_flow(spec: ModelSpec, seed: int = 0) -> MeasureFlow:
    """A random admissible flow: m0 moved toward a random target at a rate
    within the Lipschitz budget, so the result stays in the flow space."""
    rng = np.random.default_rng(seed)
    grid = spec.grid()
    q = rng.dirichlet(np.ones(spec.d))
    k_flow = 2.0 * spec.nu_U * math.sqrt(spec.d)
    speed = float(rng.uniform(0.1, 0.5)) * k_flow
    gap = float(np.linalg.norm(q - spec.m0))
    vals = np.empty((grid.size, spec.d))
    for k, t in enumerate(grid):
        s = 1.0 if gap == 0.0 else min(1.0, speed * t / gap)
        vals[k] = (1.0 - s) * spec.m0 + s * q
    return MeasureFlow(grid, vals)


def uniqueness_probe(
    spec: ModelSpec,
    n_starts: int = 5,
    seed: int = 0,
    tol: float = 1e-7,
    damping: float = 0.5,
    max_iter: int = 200,
) -> UniquenessReport:
    """Solve from several random initial flows; report max pairwise distances."""
    sols = []
    for j in range(n_starts):
        init = random_flow(spec, seed=seed + j)
        sol = solve_mfg(spec, damping=damping, tol=tol, max_iter=max_iter, init=init)
        if not sol.converged:
            raise NotConverged(f"start {j} did not converge (residual {sol.residual})", sol)
        sols.append(sol)
    max_flow = 0.0
    max_val = 0.0
    for i in range(n_starts):
        for j in range(i + 1, n_starts):
            max_flow = max(max_flow, flow_distance(sols[i].m, sols[j].m))
            max_val = max(max_val, float(np.max(np.abs(sols[i].value.W - sols[j].value.W))))
    return UniquenessReport(
        n_starts=n_starts,
        max_flow_distance=max_flow,
        max_value_distance=max_val,
        converged_all=True,
    )


# -- solution bundle ----------------------------------------------------------


def save_solution(
    outdir,
    solution: MFGSolution,
    tstar: Optional[TStarReport] = None,
    extra_meta: Optional[dict] = None,
) -> None:
    """Write m.csv, value.csv, policy.csv, meta.json into outdir."""
    os.makedirs(outdir, exist_ok=True)
    flow_to_csv(solution.m, os.path.join(outdir, "m.csv"))
    value_to_csv(solution.value, os.path.join(outdir, "value.csv"))
    policy_to_csv(solution.policy, os.path.join(outdir, "policy.csv"))
    meta = {
        "schema": 1,
        "iterations": solution.iterations,
        "residual": solution.residual,
        "residuals": list(solution.residual_history),
        "converged": solution.converged,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
    }
    if tstar is not None:
        meta["tstar"] = tstar.as_dict()
    if extra_meta:
        meta.update(extra_meta)
    with open(os.path.join(outdir, "meta.json"), "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
