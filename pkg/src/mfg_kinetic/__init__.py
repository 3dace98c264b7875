"""Finite-state mean field games: coupled HJB/Kolmogorov solver and an
exact + Monte Carlo N-player verification lab."""

from . import errors, presets
from .counts import CountEnumeration, enumerate_count_states
from .forward import ForwardInput, mass_conservation_check, solve_forward
from .hamiltonian import (
    HamiltonianValue,
    generator_apply,
    minimize_hamiltonian,
    minimizer_lipschitz_probe,
    pre_hamiltonian,
)
from .hjb import (
    FeedbackPolicy,
    ValueFunction,
    evaluate_cost,
    f_lipschitz_probe,
    hjb_residual,
    solve_hjb,
)
from .mfg import (
    MFGSolution,
    MonotonicityReport,
    TStarReport,
    check_monotonicity,
    compute_tstar,
    flow_distance,
    random_flow,
    save_solution,
    solve_mfg,
    tstar_lhs,
    uniqueness_probe,
)
from .model import (
    CONTROLLED_RATE,
    FINITE_ACTION,
    ControlledRateParams,
    FiniteActionParams,
    LipschitzReport,
    MeasureFlow,
    ModelSpec,
    Numerics,
    as_simplex,
    flow_from_csv,
    flow_interpolate,
    flow_lipschitz_check,
    flow_to_csv,
    simplex_distance,
    spec_from_dict,
    spec_from_json,
    spec_to_dict,
    spec_to_json,
    validate_model,
)
from .nplayer_exact import (
    NashGapReport,
    NashGapTable,
    best_response,
    cost_under_symmetric_feedback,
    nash_gap,
    nash_gap_table,
)
from .nplayer_mc import (
    CoupledPathStats,
    empirical_error_rate_fit,
    kernel_backend,
    mc_cost_estimate,
    simulate_coupled,
    write_event_log,
)

__version__ = "0.1.0"
