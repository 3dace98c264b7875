"""Built-in example models used by the test-suite, CLI configs, and docs."""

from __future__ import annotations

import numpy as np

from .mfg import compute_tstar
from .model import (
    CONTROLLED_RATE,
    FINITE_ACTION,
    ControlledRateParams,
    FiniteActionParams,
    ModelSpec,
    Numerics,
    validate_model,
)


def two_state_symmetric_rate(n_steps: int = 2000, q: float = 1.0) -> ModelSpec:
    """Single-action d=2 chain jumping both ways at rate q; zero costs.

    Closed form from m0 = (1, 0): pi_1(t) = (1 + exp(-2 q t)) / 2.
    """
    fa = FiniteActionParams(
        actions=(0,),
        M=q,
        rate_base=np.array([[[0.0, q], [q, 0.0]]]),
        c_base=np.zeros((1, 2)),
        psi_base=np.zeros(2),
    )
    spec = ModelSpec(
        d=2,
        T=1.0,
        m0=[1.0, 0.0],
        family=FINITE_ACTION,
        fa=fa,
        numerics=Numerics(n_steps=n_steps),
    )
    return validate_model(spec)


def finite_action_two_state(n_steps: int = 2000) -> ModelSpec:
    """Two actions {0, 1}: rate to the other state = a, cost 0.5 a, psi = (0, 1).

    W_1 is identically 0 and W_2 solves dW_2/dt = W_2 - 1/2 backward from 1,
    so W_2(0) = 1/2 + exp(-1)/2.
    """
    rate = np.zeros((2, 2, 2))
    rate[1] = np.array([[0.0, 1.0], [1.0, 0.0]])
    fa = FiniteActionParams(
        actions=(0, 1),
        M=1.0,
        rate_base=rate,
        c_base=np.array([[0.0, 0.0], [0.5, 0.5]]),
        psi_base=np.array([0.0, 1.0]),
    )
    spec = ModelSpec(
        d=2,
        T=1.0,
        m0=[0.5, 0.5],
        family=FINITE_ACTION,
        fa=fa,
        numerics=Numerics(n_steps=n_steps),
    )
    return validate_model(spec)


def two_state_decoupled(n_steps: int = 800) -> ModelSpec:
    """Controlled rates with constant zeta and p-independent costs.

    Rows of c1/psi are constant, so row_x . p does not depend on p; the
    fixed-point map is constant and the mean-field coupling vanishes.
    """
    cr = ControlledRateParams(
        M=1.5,
        kappa=0.4,
        zeta_w=np.zeros(2),
        theta=0.5,
        c1=np.array([[0.4, 0.4], [0.0, 0.0]]),
        psi=np.array([[0.6, 0.6], [0.0, 0.0]]),
    )
    spec = ModelSpec(
        d=2,
        T=1.0,
        m0=[0.7, 0.3],
        family=CONTROLLED_RATE,
        cr=cr,
        numerics=Numerics(n_steps=n_steps),
    )
    return validate_model(spec)


def two_state_monotone(n_steps: int = 800) -> ModelSpec:
    """Crowd-averse two-state model satisfying the monotonicity pairings.

    Rates are p-independent (zeta constant) and c1 = psi-like diagonal
    tables, so the Lasry-Lions conditions hold and the MFG solution is
    unique for every horizon.
    """
    cr = ControlledRateParams(
        M=2.0,
        kappa=0.3,
        zeta_w=np.zeros(2),
        theta=0.5,
        c1=np.array([[0.8, 0.0], [0.0, 0.8]]),
        psi=np.array([[0.5, 0.0], [0.0, 0.5]]),
    )
    spec = ModelSpec(
        d=2,
        T=1.0,
        m0=[0.8, 0.2],
        family=CONTROLLED_RATE,
        cr=cr,
        numerics=Numerics(n_steps=n_steps),
    )
    return validate_model(spec)


def three_state_coupled(n_steps: int = 800) -> ModelSpec:
    """Three states with measure-dependent rates (zeta weights != 0)."""
    cr = ControlledRateParams(
        M=1.0,
        kappa=0.1,
        zeta_w=np.array([0.15, 0.05, 0.1]),
        theta=0.6,
        c1=np.array([[0.5, 0.0, 0.0], [0.0, 0.4, 0.0], [0.0, 0.0, 0.45]]),
        psi=np.array([[0.3, 0.0, 0.0], [0.0, 0.3, 0.0], [0.0, 0.0, 0.3]]),
    )
    spec = ModelSpec(
        d=3,
        T=1.0,
        m0=[0.5, 0.3, 0.2],
        family=CONTROLLED_RATE,
        cr=cr,
        numerics=Numerics(n_steps=n_steps),
    )
    return validate_model(spec)


def two_state_contraction(n_steps: int = 1000, fraction: float = 0.8) -> ModelSpec:
    """d=2 controlled-rate model with horizon set to fraction * T*.

    T* depends only on the rate/cost tables (the value bound is evaluated
    self-consistently at the candidate horizon), so it can be computed on a
    template and the horizon fixed afterwards.
    """
    cr = ControlledRateParams(
        M=1.0,
        kappa=0.1,
        zeta_w=np.zeros(2),
        theta=0.5,
        c1=np.array([[0.25, 0.0], [0.0, 0.25]]),
        psi=np.array([[0.15, 0.0], [0.0, 0.15]]),
    )
    template = validate_model(
        ModelSpec(
            d=2,
            T=1.0,
            m0=[0.85, 0.15],
            family=CONTROLLED_RATE,
            cr=cr,
            numerics=Numerics(n_steps=n_steps),
        )
    )
    t_star = compute_tstar(template).T_star
    return validate_model(template.with_(T=fraction * t_star))


def anti_monotone_two_state(n_steps: int = 800) -> ModelSpec:
    """c1(x, p) = -p_x: the monotonicity pairing is negative (herding)."""
    cr = ControlledRateParams(
        M=2.0,
        kappa=0.3,
        zeta_w=np.zeros(2),
        theta=0.5,
        c1=np.array([[-0.8, 0.0], [0.0, -0.8]]),
        psi=np.array([[0.0, 0.0], [0.0, 0.0]]),
    )
    spec = ModelSpec(
        d=2,
        T=1.0,
        m0=[0.8, 0.2],
        family=CONTROLLED_RATE,
        cr=cr,
        numerics=Numerics(n_steps=n_steps),
    )
    return validate_model(spec)


PRESETS = {
    "two_state_symmetric_rate": two_state_symmetric_rate,
    "finite_action_two_state": finite_action_two_state,
    "two_state_decoupled": two_state_decoupled,
    "two_state_monotone": two_state_monotone,
    "three_state_coupled": three_state_coupled,
    "two_state_contraction": two_state_contraction,
    "anti_monotone_two_state": anti_monotone_two_state,
}


def get(name: str, **kw) -> ModelSpec:
    return PRESETS[name](**kw)
