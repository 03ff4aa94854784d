"""AoI-driven scheduling over a capacity-constrained erasure channel, with
the mean-field LQ consensus game layer on top.

Public surface: scenario loading, threshold/price solvers, the randomized
relaxed policy with its max-age-first projection, Riccati tracking gains and
the mean-field fixed point, simulation experiments, and the analytic bounds.
"""

from .analysis import (
    BoundReport,
    aux_penalty,
    bound_report,
    gap_bound,
    kl_divergence,
    p0_aoi_cap,
    tail_threshold,
)
from .errors import (
    AoiMfgError,
    AssumptionViolationError,
    ConfigError,
    DimensionMismatchError,
    DomainError,
    InfeasibleCapacityError,
    MissingKeyError,
    NoConvergenceError,
    NonPositiveDefiniteError,
    RankDeficientError,
    UnstableClosedLoopError,
)
from .estimator import DecoderState, WeightTable, decoder_update, error_weight, running_cost
from .mfg import (
    MeanFieldSolution,
    TrackingGains,
    contraction_constant,
    control_action,
    cost_upper_bound,
    g_trajectory,
    mf_operator,
    solve_mfe,
    solve_riccati,
)
from .model import (
    AgentType,
    Population,
    ScenarioConfig,
    assign_types,
    load_scenario,
    population_for,
)
from .presets import default_types, game_scenario, scheduling_scenario
from .scheduler import (
    RelaxedPolicy,
    ScheduleDecision,
    aggregate_rate,
    bisection_lambda,
    matb_select,
    randomization_q,
    relaxed_decision,
    relaxed_decisions,
)
from .sim import (
    Metrics,
    make_streams,
    run_estimator_experiment,
    run_game_experiment,
    run_scheduling_experiment,
    step_channel,
    update_aoi,
)
from .threshold import (
    AoIChain,
    ThresholdSolution,
    f_tail,
    return_rate_approx,
    solve_kappa,
    stationary_distribution,
    transmission_rate,
    value_iteration_oracle,
)

__version__ = "0.1.0"
