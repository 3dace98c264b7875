import pytest

import mfg_kinetic as mk


@pytest.fixture(scope="session")
def monotone_spec():
    return mk.presets.two_state_monotone()


@pytest.fixture(scope="session")
def monotone_sol(monotone_spec):
    sol = mk.solve_mfg(monotone_spec, damping=0.5, tol=1e-8, max_iter=200)
    assert sol.converged
    return sol


@pytest.fixture(scope="session")
def coupled_spec():
    return mk.presets.three_state_coupled()


@pytest.fixture(scope="session")
def coupled_sol(coupled_spec):
    sol = mk.solve_mfg(coupled_spec, damping=0.5, tol=1e-8, max_iter=200)
    assert sol.converged
    return sol


@pytest.fixture(scope="session")
def decoupled_spec():
    return mk.presets.two_state_decoupled()


@pytest.fixture(scope="session")
def decoupled_sol(decoupled_spec):
    sol = mk.solve_mfg(decoupled_spec, damping=0.5, tol=1e-9, max_iter=200)
    assert sol.converged
    return sol


def constant_flow(spec):
    return mk.MeasureFlow.constant(spec.grid(), spec.m0)
