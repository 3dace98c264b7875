import json
import math

import numpy as np
import pytest

import mfg_kinetic as mk
from mfg_kinetic.errors import FamilyUnsupported, RateDependsOnMeasure
from mfg_kinetic.mfg import (
    check_monotonicity,
    compute_tstar,
    flow_distance,
    random_flow,
    save_solution,
    solve_mfg,
    tstar_lhs,
    uniqueness_probe,
)
from mfg_kinetic.model import ControlledRateParams, ModelSpec, Numerics, validate_model

# frozen after the first computation of compute_tstar on the d=2 template
# (M=1, kappa=0.1, w=0, theta=0.5, c1=0.25 I, psi=0.15 I, sampled K2)
TSTAR_REGRESSION = 0.03170192813408047


class TestSolveMFG:
    def test_decoupled_phi_is_constant(self, decoupled_spec):
        sol_a = solve_mfg(decoupled_spec, damping=1.0, tol=1e-10, max_iter=10)
        init = random_flow(decoupled_spec, seed=4)
        sol_b = solve_mfg(decoupled_spec, damping=1.0, tol=1e-10, max_iter=10, init=init)
        # one Picard update lands on the fixed point from any start
        assert sol_a.converged and sol_a.iterations <= 2
        assert sol_b.converged and sol_b.iterations <= 2
        assert flow_distance(sol_a.m, sol_b.m) <= 1e-12

    def test_fixed_point_certificate(self, monotone_spec, monotone_sol):
        value, policy = mk.solve_hjb(monotone_spec, monotone_sol.m)
        phi = mk.solve_forward(
            monotone_spec, mk.ForwardInput(policy=policy, measure_arg=monotone_sol.m)
        )
        assert flow_distance(phi, monotone_sol.m) <= 2e-8  # 2 * tol

    def test_not_converged_returns_best_iterate(self, monotone_spec):
        sol = solve_mfg(monotone_spec, damping=0.5, tol=1e-12, max_iter=2)
        assert not sol.converged
        assert sol.residual > 1e-12
        assert len(sol.residual_history) == 2

    def test_solution_flow_stays_admissible(self, coupled_spec, coupled_sol):
        rep = mk.flow_lipschitz_check(coupled_sol.m, coupled_spec.derived.K_flow)
        assert rep.passed
        assert np.allclose(coupled_sol.m.values[0], coupled_spec.m0)


class TestContraction:
    def test_undamped_ratios_below_tstar_bound(self):
        spec = mk.presets.two_state_contraction()
        lhs = tstar_lhs(spec, spec.T)
        assert lhs < 1.0
        sol = solve_mfg(spec, damping=1.0, tol=1e-6, max_iter=50)
        assert sol.converged and sol.iterations <= 50
        hist = sol.residual_history
        ratios = [hist[i + 1] / hist[i] for i in range(len(hist) - 1) if hist[i] > 0]
        assert ratios, "need at least one contraction ratio"
        assert all(r <= lhs for r in ratios)
        assert all(b < a for a, b in zip(hist, hist[1:]))  # strictly decreasing


class TestTStar:
    def test_root_property_and_regression(self):
        spec = mk.presets.two_state_contraction()
        rep = compute_tstar(spec)
        assert abs(rep.lhs_at_tstar - 1.0) <= 1e-10
        assert rep.T_star == pytest.approx(TSTAR_REGRESSION, rel=1e-9)
        assert tstar_lhs(spec, 0.0) == 0.0
        # strictly increasing on a sample of horizons
        taus = np.linspace(1e-4, 2 * rep.T_star, 20)
        vals = [tstar_lhs(spec, t) for t in taus]
        assert all(b > a for a, b in zip(vals, vals[1:]))

    def test_doubling_m_decreases_tstar(self):
        spec = mk.presets.two_state_contraction()
        t1 = compute_tstar(spec).T_star
        cr = spec.cr
        spec2 = validate_model(
            spec.with_(cr=ControlledRateParams(M=2 * cr.M, kappa=cr.kappa, zeta_w=cr.zeta_w,
                                               theta=cr.theta, c1=cr.c1, psi=cr.psi))
        )
        t2 = compute_tstar(spec2).T_star
        assert t2 < t1

    def test_family_unsupported(self):
        spec = mk.presets.finite_action_two_state(n_steps=50)
        with pytest.raises(FamilyUnsupported):
            compute_tstar(spec)


class TestMonotonicity:
    def test_identity_table_passes(self, monotone_spec):
        rep = check_monotonicity(monotone_spec, n_pairs=256, seed=0)
        assert rep.passed
        assert rep.min_c1_pairing > 0.0
        assert rep.min_psi_pairing >= -1e-12

    def test_negative_identity_fails(self):
        rep = check_monotonicity(mk.presets.anti_monotone_two_state(), n_pairs=256, seed=0)
        assert not rep.passed
        assert rep.min_c1_pairing < 0.0
        assert rep.c1_eig_min < 0.0

    def test_random_psd_table_passes_by_eigen(self):
        rng = np.random.default_rng(8)
        B = rng.normal(size=(3, 3))
        table = B @ B.T + 0.1 * np.eye(3)  # symmetric PD
        cr = ControlledRateParams(
            M=1.0, kappa=0.2, zeta_w=np.zeros(3), theta=0.5,
            c1=table, psi=table,
        )
        spec = validate_model(
            ModelSpec(d=3, T=1.0, m0=np.ones(3) / 3, family="controlled_rate", cr=cr,
                      numerics=Numerics(n_steps=50))
        )
        rep = check_monotonicity(spec, n_pairs=128, seed=1)
        assert rep.passed
        eig_min = float(np.min(np.linalg.eigvalsh(0.5 * (table + table.T))))
        assert rep.c1_eig_min >= eig_min - 1e-12

    def test_measure_dependent_rates_rejected(self, coupled_spec):
        with pytest.raises(RateDependsOnMeasure):
            check_monotonicity(coupled_spec)


class TestUniqueness:
    def test_monotone_model_unique_solution(self):
        spec = mk.presets.two_state_monotone(n_steps=400)
        rep = uniqueness_probe(spec, n_starts=5, seed=3, tol=1e-7, damping=0.5, max_iter=300)
        assert rep.converged_all
        assert rep.max_flow_distance <= 1e-5
        assert rep.max_value_distance <= 1e-5

    def test_decoupled_trivially_unique(self, decoupled_spec):
        rep = uniqueness_probe(decoupled_spec, n_starts=3, seed=0, tol=1e-8, damping=1.0,
                               max_iter=50)
        assert rep.max_flow_distance <= 1e-8

    def test_anti_monotone_reported_not_asserted(self):
        spec = mk.presets.anti_monotone_two_state(n_steps=200)
        sols = []
        for j in range(2):
            sol = solve_mfg(spec, damping=0.5, tol=1e-7, max_iter=300,
                            init=random_flow(spec, seed=40 + j))
            sols.append(sol)
        # herding model: report the spread, no uniqueness claim
        dist = flow_distance(sols[0].m, sols[1].m)
        assert math.isfinite(dist)


class TestRandomFlow:
    def test_random_flows_are_admissible(self, monotone_spec):
        for seed in range(5):
            fl = random_flow(monotone_spec, seed=seed)
            assert np.allclose(fl.values[0], monotone_spec.m0)
            assert mk.flow_lipschitz_check(fl, monotone_spec.derived.K_flow).passed


class TestBundle:
    def test_save_solution_artifacts(self, tmp_path, monotone_spec, monotone_sol):
        out = tmp_path / "bundle"
        save_solution(out, monotone_sol, tstar=None, extra_meta={"note": "test"})
        for name in ("m.csv", "value.csv", "policy.csv", "meta.json"):
            assert (out / name).exists()
        meta = json.loads((out / "meta.json").read_text())
        assert meta["converged"] is True
        assert meta["iterations"] == monotone_sol.iterations
        assert meta["note"] == "test"
        back = mk.flow_from_csv(out / "m.csv")
        assert np.array_equal(back.values, monotone_sol.m.values)
