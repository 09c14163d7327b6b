"""Sequential trust-region policy optimization with a shared KL budget.

Two exactly analyzable games (an N-agent binary coordination game and a
2-player continuous game with a local and a global optimum), per-agent
closed-form trust-region steps, and three budget allocation strategies:
uniform split, greedy gain-per-KL ordering, and water-filling via KKT.
"""

from .games import (
    MatrixGameSpec,
    DifferentialGameSpec,
    matrix_reward,
    differential_reward,
    enumerate_profiles,
)
from .policies import (
    BernoulliPolicy,
    GaussianPolicy,
    JointPolicy,
    kl_divergence,
    sample_action,
    grad_log_prob,
)
from .advantage import (
    CriticBaseline,
    AdvantageEstimate,
    exact_state_value,
    exact_agent_advantage,
    mc_advantage,
    update_critic,
    utility,
)
from .trust_step import StepResult, bernoulli_kl_interval, bernoulli_step, gaussian_step
from .allocation import (
    KLAllocation,
    LambdaSolve,
    NoPositiveUtilityError,
    SolverFailureError,
    allocate_uniform,
    delta_of_lambda,
    solve_lambda_bisection,
    solve_lambda_multiplicative,
    allocate_waterfill,
    allocate_greedy,
)
from .trainer import RunConfig, IterationRecord, RunHistory, run_iteration, train, evaluate
from .experiment_io import (
    ConfigError,
    MetricTable,
    steps_to_threshold,
    export_run_csv,
    adv_kl_pairs,
    parse_config,
)

__version__ = "0.1.0"
