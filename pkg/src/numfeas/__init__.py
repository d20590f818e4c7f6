"""Network utility maximization toolkit: feasible-at-all-times iterates,
proportional-fair subproblem solvers, and benchmark fluid dynamics."""

from .model import (
    RoutingNetwork,
    Scenario,
    ScenarioError,
    UtilityProfile,
    UtilitySpec,
    feasibility_slack,
    link_loads,
    load_scenario,
    prices,
    welfare,
)
from .pf_solver import (
    AscendingInstance,
    PFSolution,
    SolverError,
    concave_cover,
    dual_bound_P,
    pf_kkt_residual,
    solve_pf_dual,
    string_solve,
)
from .iterate import (
    AlgorithmConfig,
    AlgorithmTrace,
    algorithm1_step,
    detect_flow_aggregating,
    lexicographic_max_point,
    run_algorithm1,
    step_size,
)
from .dynamics import (
    KMTConfig,
    StateTrace,
    integrate_kmt,
    integrate_scaled_di,
    kmt_vector_field,
    penalty_psi,
)
from .diagnostics import (
    KKTReport,
    ReferenceOptimum,
    appendix_discontinuity_demo,
    brute_force_best_welfare,
    descent_inner_product,
    lyapunov_V,
    reference_optimum,
    system_kkt_residual,
)

__version__ = "0.1.0"
