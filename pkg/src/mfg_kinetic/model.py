"""Problem data, the probability simplex, measure flows, and validation.

A model is a finite state space {0, ..., d-1}, a horizon T, an initial law
m0, and one of two rate/cost families:

* ``controlled_rate``: rates lambda(t,x,y,a,p) = a_y + zeta(p) for y != x,
  zeta(p) = kappa + w.p, actions a in [0, a_max]^d with
  a_max = M - max_S zeta so that every rate stays in (0, M].  Running cost
  theta*|a|^2 + c1(x,p) and terminal cost psi(x,p) with c1, psi given as
  d x d tables read as row_x . p (affine in p; constants are rows of equal
  entries since p sums to one).
* ``finite_action``: a finite action list with explicit rate/cost tables,
  optionally affine in p.

The jump dynamics are realized by thinning a Poisson stream of marks
(y, u_y) with u_y uniform on [0, M], so nu(U) = d*M is the total event rate
and the flow Lipschitz constant is K = 2*nu(U)*sqrt(d).
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .errors import (
    DegenerateHorizon,
    NegativeRate,
    NonSimplexInitial,
    OutOfRange,
    RateExceedsBound,
)

SIMPLEX_TOL = 1e-12

CONTROLLED_RATE = "controlled_rate"
FINITE_ACTION = "finite_action"


def _ro(a, dtype=float):
    out = np.array(a, dtype=dtype)
    out.setflags(write=False)
    return out


def as_simplex(p, tol: float = SIMPLEX_TOL) -> np.ndarray:
    """Validate and freeze a probability vector (components >= 0, sum 1)."""
    q = np.asarray(p, dtype=float)
    if q.ndim != 1 or q.size < 2:
        raise NonSimplexInitial(f"expected a vector of >= 2 weights, got shape {q.shape}")
    if np.any(q < -tol) or not np.all(np.isfinite(q)):
        raise NonSimplexInitial(f"negative or non-finite weight in {q}")
    if abs(float(q.sum()) - 1.0) > tol:
        raise NonSimplexInitial(f"weights sum to {q.sum()!r}, not 1")
    q = np.where(q < 0.0, 0.0, q)
    q.setflags(write=False)
    return q


def simplex_distance(p, q) -> float:
    """Euclidean distance between two points of the simplex."""
    return float(np.linalg.norm(np.asarray(p, float) - np.asarray(q, float)))


@dataclass(frozen=True)
class ControlledRateParams:
    M: float
    kappa: float
    zeta_w: np.ndarray  # (d,)
    theta: float
    c1: np.ndarray  # (d, d), c1(x, p) = c1[x] . p
    psi: np.ndarray  # (d, d), psi(x, p) = psi[x] . p

    def __post_init__(self):
        object.__setattr__(self, "zeta_w", _ro(self.zeta_w))
        object.__setattr__(self, "c1", _ro(self.c1))
        object.__setattr__(self, "psi", _ro(self.psi))


@dataclass(frozen=True)
class FiniteActionParams:
    actions: tuple  # labels only; tables are indexed by position
    rate_base: np.ndarray  # (A, d, d), entry [a, x, y] for y != x
    c_base: np.ndarray  # (A, d)
    psi_base: np.ndarray  # (d,)
    M: float  # rate bound / thinning envelope
    rate_p: Optional[np.ndarray] = None  # (A, d, d, d) affine-in-p part
    c_p: Optional[np.ndarray] = None  # (d, d)
    psi_p: Optional[np.ndarray] = None  # (d, d)

    def __post_init__(self):
        object.__setattr__(self, "actions", tuple(self.actions))
        object.__setattr__(self, "rate_base", _ro(self.rate_base))
        object.__setattr__(self, "c_base", _ro(self.c_base))
        object.__setattr__(self, "psi_base", _ro(self.psi_base))
        for name in ("rate_p", "c_p", "psi_p"):
            v = getattr(self, name)
            if v is not None:
                object.__setattr__(self, name, _ro(v))


@dataclass(frozen=True)
class Numerics:
    n_steps: int = 400
    action_grid: int = 101  # per-coordinate fallback resolution


@dataclass(frozen=True)
class Derived:
    """Constants filled in by validate_model."""

    nu_U: float  # d * M
    K1: float  # 2 * nu_U * d
    K_flow: float  # 2 * nu_U * sqrt(d)
    K_zeta: float  # |w| (controlled_rate), else 0
    K_a: float  # Lipschitz constant of grad_a c in p (0 for theta|a|^2)
    K2: float  # sampled cost Lipschitz constant
    a_max: float  # controlled_rate action box edge, M for finite_action
    M_zeta: float  # max of zeta over the simplex
    zeta_min: float  # min of zeta over the simplex
    max_abs_c: float
    max_abs_psi: float


@dataclass(frozen=True)
class ModelSpec:
    d: int
    T: float
    m0: np.ndarray
    family: str
    cr: Optional[ControlledRateParams] = None
    fa: Optional[FiniteActionParams] = None
    numerics: Numerics = field(default_factory=Numerics)
    derived: Optional[Derived] = None

    def __post_init__(self):
        object.__setattr__(self, "m0", as_simplex(self.m0))
        if self.family not in (CONTROLLED_RATE, FINITE_ACTION):
            raise ValueError(f"unknown family {self.family!r}")
        if self.family == CONTROLLED_RATE and self.cr is None:
            raise ValueError("controlled_rate model without parameters")
        if self.family == FINITE_ACTION and self.fa is None:
            raise ValueError("finite_action model without parameters")

    # -- basic derived quantities usable before validation ------------------

    @property
    def M(self) -> float:
        return self.cr.M if self.family == CONTROLLED_RATE else self.fa.M

    @property
    def nu_U(self) -> float:
        return self.d * self.M

    @property
    def n_actions(self) -> int:
        if self.family != FINITE_ACTION:
            raise ValueError("n_actions only defined for finite_action models")
        return len(self.fa.actions)

    def zeta(self, p) -> float:
        cr = self.cr
        return cr.kappa + float(np.dot(cr.zeta_w, p))

    def action_bound(self) -> float:
        """Upper edge of the controlled-rate action box, M - max zeta."""
        cr = self.cr
        m_zeta = cr.kappa + (float(np.max(cr.zeta_w)) if self.d else 0.0)
        return cr.M - m_zeta

    def grid(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.numerics.n_steps + 1)

    def with_(self, **kw) -> "ModelSpec":
        """dataclasses.replace that drops stale derived constants."""
        kw.setdefault("derived", None)
        return replace(self, **kw)

    # -- rate and cost evaluation -------------------------------------------

    def rate(self, t: float, x: int, y: int, a, p) -> float:
        """Transition rate x -> y (y != x) under action a and measure p."""
        if self.family == CONTROLLED_RATE:
            return float(a[y]) + self.zeta(p)
        fa = self.fa
        lam = float(fa.rate_base[a, x, y])
        if fa.rate_p is not None:
            lam += float(np.dot(fa.rate_p[a, x, y], p))
        return lam

    def rate_row(self, t: float, x: int, a, p) -> np.ndarray:
        """Rates from x to every y, zero at y = x."""
        if self.family == CONTROLLED_RATE:
            row = np.asarray(a, float) + self.zeta(p)
        else:
            fa = self.fa
            row = fa.rate_base[a, x].astype(float, copy=True)
            if fa.rate_p is not None:
                row = row + fa.rate_p[a, x] @ np.asarray(p, float)
        row = row.copy()
        row[x] = 0.0
        return row

    def run_cost(self, t: float, x: int, a, p) -> float:
        if self.family == CONTROLLED_RATE:
            cr = self.cr
            aa = np.asarray(a, float)
            return cr.theta * float(aa @ aa) + float(cr.c1[x] @ np.asarray(p, float))
        fa = self.fa
        c = float(fa.c_base[a, x])
        if fa.c_p is not None:
            c += float(fa.c_p[x] @ np.asarray(p, float))
        return c

    def terminal_cost(self, x: int, p) -> float:
        if self.family == CONTROLLED_RATE:
            return float(self.cr.psi[x] @ np.asarray(p, float))
        fa = self.fa
        g = float(fa.psi_base[x])
        if fa.psi_p is not None:
            g += float(fa.psi_p[x] @ np.asarray(p, float))
        return g

    def terminal_vector(self, p) -> np.ndarray:
        return np.array([self.terminal_cost(x, p) for x in range(self.d)])

    def rates_p_independent(self) -> bool:
        if self.family == CONTROLLED_RATE:
            return not np.any(self.cr.zeta_w != 0.0)
        rp = self.fa.rate_p
        return rp is None or not np.any(rp != 0.0)


@dataclass(frozen=True)
class MeasureFlow:
    """Time-gridded flow t -> m(t), linear interpolation between nodes."""

    grid: np.ndarray  # (n+1,), strictly increasing, grid[0] = 0
    values: np.ndarray  # (n+1, d), each row a simplex point

    def __post_init__(self):
        g = _ro(self.grid)
        v = np.array(self.values, dtype=float)
        if g.ndim != 1 or v.ndim != 2 or v.shape[0] != g.size:
            raise ValueError("grid/values shape mismatch")
        if np.any(np.diff(g) <= 0):
            raise ValueError("grid times must be strictly increasing")
        for k in range(v.shape[0]):
            v[k] = as_simplex(v[k])
        v.setflags(write=False)
        object.__setattr__(self, "grid", g)
        object.__setattr__(self, "values", v)

    @property
    def T(self) -> float:
        return float(self.grid[-1])

    @property
    def d(self) -> int:
        return self.values.shape[1]

    def at(self, t: float) -> np.ndarray:
        return flow_interpolate(self, t)

    @staticmethod
    def constant(grid, p) -> "MeasureFlow":
        g = np.asarray(grid, float)
        return MeasureFlow(g, np.tile(as_simplex(p), (g.size, 1)))


@dataclass(frozen=True)
class LipschitzReport:
    max_ratio: float
    bound: float
    passed: bool
    tol: float


def flow_interpolate(flow: MeasureFlow, t: float) -> np.ndarray:
    """Linear interpolation; exact at nodes; OutOfRange outside [0, T]."""
    g = flow.grid
    if t < g[0] - 1e-12 or t > g[-1] + 1e-12:
        raise OutOfRange(f"t={t} outside [0, {g[-1]}]")
    t = min(max(t, float(g[0])), float(g[-1]))
    k = int(np.searchsorted(g, t, side="right")) - 1
    k = min(max(k, 0), g.size - 2)
    h = g[k + 1] - g[k]
    w = (t - g[k]) / h
    return as_simplex((1.0 - w) * flow.values[k] + w * flow.values[k + 1], tol=1e-9)


def flow_lipschitz_check(flow: MeasureFlow, K: float, tol: float = 1e-9) -> LipschitzReport:
    """Max |m(t_{k+1}) - m(t_k)| / dt over adjacent nodes, against K."""
    dm = np.linalg.norm(np.diff(flow.values, axis=0), axis=1)
    dt = np.diff(flow.grid)
    ratio = float(np.max(dm / dt)) if dm.size else 0.0
    return LipschitzReport(max_ratio=ratio, bound=K, passed=ratio <= K + tol, tol=tol)


def _vertices(d: int) -> np.ndarray:
    return np.eye(d)


def _affine_abs_max(table: np.ndarray) -> float:
    # |row_x . p| over the simplex peaks at the vertices.
    return float(np.max(np.abs(table))) if table.size else 0.0


def _estimate_k2(spec: ModelSpec, n_samples: int = 4096, seed: int = 0) -> float:
    """Sampled Lipschitz constant of (c, psi) in (x, p), per assumption (B')."""
    rng = np.random.default_rng(seed)
    d = spec.d
    best = 0.0
    verts = _vertices(d)
    # vertex pairs catch the affine extremes; Dirichlet pairs fill the interior
    pairs = [(verts[i], verts[j]) for i in range(d) for j in range(i + 1, d)]
    while len(pairs) < n_samples:
        pairs.append((rng.dirichlet(np.ones(d)), rng.dirichlet(np.ones(d))))
    if spec.family == CONTROLLED_RATE:
        a0 = np.zeros(d)
        actions = [a0]
    else:
        actions = list(range(spec.n_actions))
    for p, q in pairs:
        dpq = simplex_distance(p, q)
        for x in range(d):
            for y in range(d):
                den = abs(x - y) + dpq
                if den <= 0.0:
                    continue
                for a in actions:
                    num = abs(spec.run_cost(0.0, x, a, p) - spec.run_cost(0.0, y, a, q)) + abs(
                        spec.terminal_cost(x, p) - spec.terminal_cost(y, q)
                    )
                    best = max(best, num / den)
    return best


def validate_model(spec: ModelSpec) -> ModelSpec:
    """Check the standing assumptions and fill in derived constants.

    Raises NonSimplexInitial / NegativeRate / RateExceedsBound /
    DegenerateHorizon; on success returns a copy with ``derived`` set.
    """
    if not (spec.T > 0.0):
        raise DegenerateHorizon(f"T = {spec.T}")
    if spec.d < 2:
        raise NonSimplexInitial(f"need d >= 2 states, got {spec.d}")
    as_simplex(spec.m0)  # NonSimplexInitial on failure
    if spec.numerics.n_steps < 1:
        raise ValueError("n_steps must be >= 1")

    d = spec.d
    if spec.family == CONTROLLED_RATE:
        cr = spec.cr
        if cr.theta <= 0.0:
            raise NegativeRate(f"theta = {cr.theta} must be > 0")
        if cr.kappa <= 0.0:
            raise NegativeRate(f"kappa = {cr.kappa} must be > 0")
        if np.any(cr.zeta_w < 0.0):
            raise NegativeRate("zeta weights must be nonnegative so zeta >= kappa on S")
        if cr.M <= 0.0:
            raise NegativeRate(f"M = {cr.M} must be > 0")
        m_zeta = cr.kappa + float(np.max(cr.zeta_w))
        zeta_min = cr.kappa + float(np.min(cr.zeta_w)) if np.any(cr.zeta_w) else cr.kappa
        a_max = cr.M - m_zeta
        if a_max <= 0.0:
            raise RateExceedsBound(
                f"max zeta = {m_zeta} leaves no action room below the rate bound M = {cr.M}"
            )
        k_zeta = float(np.linalg.norm(cr.zeta_w))
        k_a = 0.0  # grad_a (theta |a|^2) = 2 theta a does not depend on p
        max_c = cr.theta * d * a_max * a_max + _affine_abs_max(cr.c1)
        max_psi = _affine_abs_max(cr.psi)
    else:
        fa = spec.fa
        if len(fa.actions) < 1:
            raise ValueError("finite_action model needs at least one action")
        if fa.M <= 0.0:
            raise NegativeRate(f"M = {fa.M} must be > 0")
        lo, hi = _finite_action_rate_range(spec)
        if lo < -1e-12:
            raise NegativeRate(f"rate table reaches {lo} < 0")
        if hi > fa.M + 1e-12:
            raise RateExceedsBound(f"rate table reaches {hi} > M = {fa.M}")
        m_zeta, zeta_min, a_max, k_zeta, k_a = 0.0, 0.0, fa.M, 0.0, 0.0
        max_c = float(np.max(np.abs(fa.c_base))) + (
            _affine_abs_max(fa.c_p) if fa.c_p is not None else 0.0
        )
        max_psi = float(np.max(np.abs(fa.psi_base))) + (
            _affine_abs_max(fa.psi_p) if fa.psi_p is not None else 0.0
        )

    nu = spec.nu_U
    derived = Derived(
        nu_U=nu,
        K1=2.0 * nu * d,
        K_flow=2.0 * nu * math.sqrt(d),
        K_zeta=k_zeta,
        K_a=k_a,
        K2=_estimate_k2(spec),
        a_max=a_max,
        M_zeta=m_zeta,
        zeta_min=zeta_min,
        max_abs_c=max_c,
        max_abs_psi=max_psi,
    )
    return replace(spec, derived=derived)


def _finite_action_rate_range(spec: ModelSpec):
    """Exact [min, max] of the off-diagonal rates (affine-in-p -> vertices)."""
    fa = spec.fa
    d = spec.d
    off = ~np.eye(d, dtype=bool)
    base = fa.rate_base[:, off]
    lo, hi = float(np.min(base)), float(np.max(base))
    if fa.rate_p is not None:
        pv = fa.rate_p[:, off, :]  # (A, d*(d-1), d) vertex values are the coefficients
        lo = float(np.min(base[..., None] + pv))
        hi = float(np.max(base[..., None] + pv))
    return lo, hi


# -- serialization -----------------------------------------------------------

SCHEMA_VERSION = 1


def spec_to_dict(spec: ModelSpec) -> dict:
    doc = {
        "schema": SCHEMA_VERSION,
        "family": spec.family,
        "d": spec.d,
        "T": spec.T,
        "m0": spec.m0.tolist(),
        "numerics": {"n_steps": spec.numerics.n_steps, "action_grid": spec.numerics.action_grid},
    }
    if spec.family == CONTROLLED_RATE:
        cr = spec.cr
        doc["controlled_rate"] = {
            "M": cr.M,
            "kappa": cr.kappa,
            "zeta_w": cr.zeta_w.tolist(),
            "theta": cr.theta,
            "c1": cr.c1.tolist(),
            "psi": cr.psi.tolist(),
        }
    else:
        fa = spec.fa
        doc["finite_action"] = {
            "actions": list(fa.actions),
            "M": fa.M,
            "rate_base": fa.rate_base.tolist(),
            "c_base": fa.c_base.tolist(),
            "psi_base": fa.psi_base.tolist(),
            "rate_p": None if fa.rate_p is None else fa.rate_p.tolist(),
            "c_p": None if fa.c_p is None else fa.c_p.tolist(),
            "psi_p": None if fa.psi_p is None else fa.psi_p.tolist(),
        }
    return doc


def spec_from_dict(doc: dict) -> ModelSpec:
    if doc.get("schema") != SCHEMA_VERSION:
        raise ValueError(f"unsupported schema {doc.get('schema')!r}")
    num = doc.get("numerics", {})
    numerics = Numerics(
        n_steps=int(num.get("n_steps", Numerics.n_steps)),
        action_grid=int(num.get("action_grid", Numerics.action_grid)),
    )
    family = doc["family"]
    common = dict(d=int(doc["d"]), T=float(doc["T"]), m0=doc["m0"], numerics=numerics)
    if family == CONTROLLED_RATE:
        c = doc["controlled_rate"]
        cr = ControlledRateParams(
            M=float(c["M"]),
            kappa=float(c["kappa"]),
            zeta_w=c["zeta_w"],
            theta=float(c["theta"]),
            c1=c["c1"],
            psi=c["psi"],
        )
        return ModelSpec(family=CONTROLLED_RATE, cr=cr, **common)
    if family == FINITE_ACTION:
        f = doc["finite_action"]
        fa = FiniteActionParams(
            actions=tuple(f["actions"]),
            M=float(f["M"]),
            rate_base=f["rate_base"],
            c_base=f["c_base"],
            psi_base=f["psi_base"],
            rate_p=None if f.get("rate_p") is None else f["rate_p"],
            c_p=None if f.get("c_p") is None else f["c_p"],
            psi_p=None if f.get("psi_p") is None else f["psi_p"],
        )
        return ModelSpec(family=FINITE_ACTION, fa=fa, **common)
    raise ValueError(f"unknown family {family!r}")


def spec_to_json(spec: ModelSpec, path) -> None:
    with open(path, "w") as fh:
        json.dump(spec_to_dict(spec), fh, indent=2, sort_keys=True)
        fh.write("\n")


def spec_from_json(path) -> ModelSpec:
    with open(path) as fh:
        return spec_from_dict(json.load(fh))


def flow_to_csv(flow: MeasureFlow, path) -> None:
    d = flow.d
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + [f"p{j + 1}" for j in range(d)])
        for t, row in zip(flow.grid, flow.values):
            w.writerow([f"{t:.17g}"] + [f"{v:.17g}" for v in row])


def flow_from_csv(path) -> MeasureFlow:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    data = np.array([[float(v) for v in r] for r in rows[1:]])
    return MeasureFlow(data[:, 0], data[:, 1:])
