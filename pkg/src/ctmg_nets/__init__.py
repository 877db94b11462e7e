"""Time-bounded reachability for continuous-time Markov games and MDPs.

Level-k nets approximate the optimal value function on intervals of width
epsilon with global error ``c_k * eps**k * T`` and extract timed positional
strategies whose quality is within ``(c_k + d_k) * eps**k * T``.
"""

from .model import (
    REACH,
    SAFE,
    MarkovGame,
    ModelError,
    NormedGame,
    build_chain_game,
    build_erlang,
    build_running_example,
    normalise,
    uniformise,
    validate,
)
from .nets import (
    BudgetExceeded,
    NetLevel,
    NumericFailure,
    SolveResult,
    SolverConfig,
    choose_epsilon,
    solve,
    step_budget_table,
    step_level,
    step_single,
)
from .oracle import convergence_study, fine_single_net, transient_fixed
from .strategy import (
    TimedPositionalStrategy,
    count_switch_points,
    evaluate_best_response,
    extract_strategy,
    simulate,
)

__all__ = [
    "REACH",
    "SAFE",
    "MarkovGame",
    "ModelError",
    "NormedGame",
    "build_chain_game",
    "build_erlang",
    "build_running_example",
    "normalise",
    "uniformise",
    "validate",
    "BudgetExceeded",
    "NetLevel",
    "NumericFailure",
    "SolveResult",
    "SolverConfig",
    "choose_epsilon",
    "solve",
    "step_budget_table",
    "step_level",
    "step_single",
    "convergence_study",
    "fine_single_net",
    "transient_fixed",
    "TimedPositionalStrategy",
    "count_switch_points",
    "evaluate_best_response",
    "extract_strategy",
    "simulate",
]
