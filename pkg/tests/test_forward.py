import numpy as np
import pytest

import mfg_kinetic as mk
from mfg_kinetic.forward import ForwardInput, mass_conservation_check, solve_forward
from mfg_kinetic.hjb import FeedbackPolicy
from mfg_kinetic.model import (
    ControlledRateParams,
    FiniteActionParams,
    MeasureFlow,
    ModelSpec,
    Numerics,
)

from conftest import constant_flow


class TestClosedForms:
    def test_symmetric_two_state(self):
        spec = mk.presets.two_state_symmetric_rate(n_steps=2000)
        pol = FeedbackPolicy.constant(spec, 0)
        flow = solve_forward(spec, ForwardInput(policy=pol, measure_arg=constant_flow(spec)))
        exact = 0.5 * (1.0 + np.exp(-2.0 * flow.grid))
        assert np.max(np.abs(flow.values[:, 0] - exact)) <= 1e-8
        assert flow.values[-1, 0] == pytest.approx(0.5676676416183064, abs=1e-8)

    def test_zero_rates_keep_initial_law(self):
        fa = FiniteActionParams(
            actions=(0,), M=1.0, rate_base=np.zeros((1, 2, 2)),
            c_base=np.zeros((1, 2)), psi_base=np.zeros(2),
        )
        spec = ModelSpec(d=2, T=1.0, m0=[0.7, 0.3], family="finite_action", fa=fa,
                         numerics=Numerics(n_steps=200))
        pol = FeedbackPolicy.constant(spec, 0)
        flow = solve_forward(spec, ForwardInput(policy=pol, measure_arg=constant_flow(spec)))
        assert np.allclose(flow.values, np.tile([0.7, 0.3], (201, 1)), atol=1e-15)


class TestInvariants:
    def test_mass_conservation_of_solver_output(self, coupled_spec, coupled_sol):
        flow = solve_forward(
            coupled_spec, ForwardInput(policy=coupled_sol.policy, measure_arg=coupled_sol.m)
        )
        rep = mass_conservation_check(flow)
        assert rep.passed and rep.max_deviation <= 1e-10

    def test_mass_check_flags_bad_rows(self):
        bad = np.array([[0.5, 0.5], [0.51, 0.5]])
        rep = mass_conservation_check(bad)
        assert not rep.passed and rep.max_deviation == pytest.approx(0.01)

    def test_constant_flow_zero_deviation(self, decoupled_spec):
        rep = mass_conservation_check(constant_flow(decoupled_spec))
        assert rep.max_deviation <= 1e-15

    def test_lipschitz_bound_on_solver_output(self, monotone_spec, monotone_sol):
        flow = solve_forward(
            monotone_spec, ForwardInput(policy=monotone_sol.policy, measure_arg=monotone_sol.m)
        )
        rep = mk.flow_lipschitz_check(flow, monotone_spec.derived.K_flow)
        assert rep.passed

    def test_nonnegativity(self, coupled_sol):
        assert np.min(coupled_sol.m.values) >= 0.0

    def test_grid_mismatch_rejected(self, monotone_spec, monotone_sol):
        other = MeasureFlow.constant(np.linspace(0, 1, 11), monotone_spec.m0)
        with pytest.raises(ValueError):
            solve_forward(
                monotone_spec, ForwardInput(policy=monotone_sol.policy, measure_arg=other)
            )


class TestDuality:
    def _zero_cost_clone(self, spec, g):
        cr = spec.cr
        return spec.with_(
            cr=ControlledRateParams(
                M=cr.M, kappa=cr.kappa, zeta_w=cr.zeta_w, theta=0.0,
                c1=np.zeros((spec.d, spec.d)),
                psi=np.tile(np.asarray(g, float)[:, None], (1, spec.d)),
            )
        )

    @pytest.mark.parametrize("gvec", [[1.0, 0.0, 0.0], [0.7, -0.2, 1.1]])
    def test_backward_forward_adjoint(self, coupled_spec, coupled_sol, gvec):
        spec0 = self._zero_cost_clone(coupled_spec, gvec)
        cost = mk.evaluate_cost(spec0, coupled_sol.m, coupled_sol.policy)
        flow = solve_forward(
            spec0, ForwardInput(policy=coupled_sol.policy, measure_arg=coupled_sol.m)
        )
        assert abs(cost - float(np.asarray(gvec) @ flow.values[-1])) <= 1e-8


class TestMonteCarloOracle:
    def test_single_player_marginals(self, coupled_spec, coupled_sol):
        """The mean-field chain marginal from 100k exact simulations matches
        the forward ODE within 3 binomial standard errors."""
        flow = solve_forward(
            coupled_spec, ForwardInput(policy=coupled_sol.policy, measure_arg=coupled_sol.m)
        )
        reps = 100_000
        stats = mk.simulate_coupled(
            coupled_spec, coupled_sol.policy, coupled_sol.m,
            N=1, replications=reps, seed=5, checkpoints=[0.5, 1.0],
        )
        for k, t in enumerate(stats.checkpoints):
            ode = flow.at(t)
            se = np.sqrt(ode * (1.0 - ode) / reps)
            assert np.all(np.abs(stats.y1_freq[k] - ode) <= 3.0 * se + 1e-12)
