"""Training loop: per iteration, estimate advantages and utilities, allocate
the shared KL budget (uniform, greedy, or water-filling), then update agents
sequentially, each conditioning on the already-updated predecessors."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .advantage import (
    CriticBaseline,
    draw_joint_actions,
    exact_agent_advantage,
    exact_state_value,
    mc_advantage,
    update_critic,
    utility,
)
from .allocation import (
    KLAllocation,
    allocate_greedy,
    allocate_uniform,
    allocate_waterfill,
)
from .games import DifferentialGameSpec, MatrixGameSpec
from .policies import BernoulliPolicy, GaussianPolicy, JointPolicy
from .trust_step import StepResult, bernoulli_step, gaussian_step

GameSpec = Union[MatrixGameSpec, DifferentialGameSpec]

STRATEGIES = ("uniform", "greedy", "waterfill")

# step_gain scores each agent by the surrogate gain of its own candidate step
# at the full budget; the other modes are advantage expectations under the
# current policy.
TRAINER_UTILITY_MODES = ("step_gain", "mean", "positive_mean", "abs_mean")


@dataclass
class RunConfig:
    env: GameSpec
    strategy: str = "uniform"
    delta_total: float = 4e-3
    iterations: int = 1000
    batch_size: int = 20
    eval_episodes: int = 100
    seed: int = 0
    utility_mode: str = "step_gain"
    init_p1: float = 0.01
    init_means: tuple[float, float] = (1.0, 1.0)
    sigma: float = 1.15
    greedy_epsilon: float = 1e-4
    waterfill_tol: float = 0.01
    waterfill_solver: str = "bisection"
    critic_lr: float = 0.2
    critic_init: float = 0.0
    exact_eval: bool = True
    uniform_per_agent_delta: bool = False
    gamma: float = 0.99  # accepted for completeness; single-state games ignore it

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}")
        if self.utility_mode not in TRAINER_UTILITY_MODES:
            raise ValueError(f"unknown utility mode {self.utility_mode!r}")
        if self.delta_total < 0:
            raise ValueError("delta_total must be >= 0")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.eval_episodes < 1:
            raise ValueError("eval_episodes must be >= 1")

    @property
    def n_agents(self) -> int:
        return self.env.n_agents

    def initial_policy(self) -> JointPolicy:
        if isinstance(self.env, MatrixGameSpec):
            return JointPolicy(
                tuple(BernoulliPolicy(self.init_p1) for _ in range(self.env.n_agents))
            )
        return JointPolicy(
            tuple(GaussianPolicy(mu, self.sigma) for mu in self.init_means)
        )


def matrix_config(n_agents: int = 4, **overrides) -> RunConfig:
    """Matrix-game defaults: 1000 iterations, batch 20, 100 eval episodes,
    initial action probability 0.01."""
    base = dict(
        env=MatrixGameSpec(n_agents=n_agents),
        iterations=1000,
        batch_size=20,
        eval_episodes=100,
        init_p1=0.01,
        delta_total=4e-3,
        exact_eval=True,
    )
    base.update(overrides)
    return RunConfig(**base)


def differential_config(**overrides) -> RunConfig:
    """Differential-game defaults: 4000 iterations, batch 20, 1000 eval
    episodes, initial means (1, 1), sigma 1.15, critic lr 0.2."""
    base = dict(
        env=DifferentialGameSpec(),
        iterations=4000,
        batch_size=20,
        eval_episodes=1000,
        init_means=(1.0, 1.0),
        sigma=1.15,
        delta_total=0.12,
        critic_lr=0.2,
        exact_eval=False,
    )
    base.update(overrides)
    return RunConfig(**base)


@dataclass
class IterationRecord:
    iteration: int
    allocation: KLAllocation
    realized_kl: list[float]
    utilities: list[float]
    surrogate_gains: list[float]
    policy_snapshot: JointPolicy
    eval_reward: float
    critic_value: float


@dataclass
class RunHistory:
    config: RunConfig
    records: list[IterationRecord] = field(default_factory=list)


def evaluate(
    game: GameSpec,
    joint: JointPolicy,
    episodes: int,
    rng: Optional[np.random.Generator] = None,
    exact: bool = False,
) -> float:
    """Mean reward over sampled joint actions, or the exact expectation for
    the matrix game when exact mode is enabled."""
    if exact:
        if not isinstance(game, MatrixGameSpec):
            raise ValueError("exact evaluation requires the matrix game")
        return exact_state_value(game, joint)
    if episodes < 1:
        raise ValueError("episodes must be >= 1")
    if rng is None:
        raise ValueError("sampled evaluation needs a random generator")
    _, rewards = draw_joint_actions(game, joint, {}, episodes, rng)
    return float(rewards.mean())


def _gaussian_grads(game, joint, updated, batch, critic, rng):
    """Score-function gradient estimate for every agent from one shared batch."""
    raw, rewards = draw_joint_actions(game, joint, updated, batch, rng)
    adv = rewards - critic.b
    means = np.array([a.mu for a in joint.agents])
    sigmas = np.array([a.sigma for a in joint.agents])
    for j, params in updated.items():
        means[j] = params.mu
    grads = (adv[:, None] * (raw - means) / sigmas**2).mean(axis=0)
    return grads, float(rewards.mean())


def _candidate_step(config, joint, agent, signal, cap) -> StepResult:
    params = joint.agents[agent]
    if isinstance(params, BernoulliPolicy):
        return bernoulli_step(params.p1, signal, cap)
    return gaussian_step(
        params.mu, params.sigma, signal, cap, bounds=config.env.action_bounds
    )


def run_iteration(
    joint: JointPolicy,
    config: RunConfig,
    critic: CriticBaseline,
    rng: np.random.Generator,
    eval_rng: Optional[np.random.Generator] = None,
    iteration: int = 1,
) -> tuple[JointPolicy, CriticBaseline, IterationRecord]:
    """One full iteration: estimates, allocation, sequential trust-region
    updates, one pooled critic update, and an evaluation pass."""
    env = config.env
    m = config.n_agents
    is_matrix = isinstance(env, MatrixGameSpec)
    pooled_rewards: list[float] = []

    # Phase 1: per-agent signals under the current joint policy.
    # Bernoulli agents use exact enumeration; Gaussian agents share one batch.
    if is_matrix:
        ests = [exact_agent_advantage(env, joint, {}, i) for i in range(m)]
        signals = [e.per_action[1] - e.per_action[0] for e in ests]
        pooled_rewards.append(exact_state_value(env, joint))
    else:
        grads, rbar = _gaussian_grads(env, joint, {}, config.batch_size, critic, rng)
        signals = [float(g) for g in grads]
        ests = None
        pooled_rewards.append(rbar)

    if config.utility_mode == "step_gain":
        utilities = [
            _candidate_step(config, joint, i, signals[i], config.delta_total).surrogate_gain
            for i in range(m)
        ]
    else:
        if is_matrix:
            utilities = [utility(e, config.utility_mode) for e in ests]
        else:
            utilities = []
            for i in range(m):
                est = mc_advantage(env, joint, {}, i, config.batch_size, critic, rng)
                pooled_rewards.append(est.surrogate_value + critic.b)
                utilities.append(utility(est, config.utility_mode))

    # Phase 2: allocation of the shared budget.
    if config.strategy == "uniform":
        if config.uniform_per_agent_delta:
            allocation = KLAllocation(
                order=list(range(m)),
                deltas=[config.delta_total] * m,
                total_budget=config.delta_total * m,
                strategy="uniform",
            )
        else:
            allocation = allocate_uniform(m, config.delta_total)
    elif config.strategy == "waterfill":
        # the configured tolerance is absolute; cap it relative to the budget
        # so tiny budgets cannot be over-allocated by a loose lambda solve
        tol = min(config.waterfill_tol, 0.1 * config.delta_total)
        allocation = allocate_waterfill(
            utilities,
            config.delta_total,
            tol=tol,
            solver=config.waterfill_solver,
        )
    else:  # greedy
        if is_matrix:

            def evaluator(agent, cap, committed):
                est = exact_agent_advantage(env, joint, committed, agent)
                gap = est.per_action[1] - est.per_action[0]
                return _candidate_step(config, joint, agent, gap, cap)

        else:
            round_grads = {0: np.asarray(signals)}

            def evaluator(agent, cap, committed):
                key = len(committed)
                if key not in round_grads:
                    g, rbar_round = _gaussian_grads(
                        env, joint, committed, config.batch_size, critic, rng
                    )
                    round_grads[key] = g
                    pooled_rewards.append(rbar_round)
                return _candidate_step(
                    config, joint, agent, float(round_grads[key][agent]), cap
                )

        allocation = allocate_greedy(
            evaluator, m, config.delta_total, epsilon=config.greedy_epsilon
        )

    # Phase 3: sequential updates conditioned on committed predecessors.
    committed: dict[int, object] = {}
    realized = [0.0] * m
    gains = [0.0] * m
    for agent in allocation.order:
        d = allocation.deltas[agent]
        if d <= 0.0:
            continue
        if is_matrix:
            est = exact_agent_advantage(env, joint, committed, agent)
            signal = est.per_action[1] - est.per_action[0]
        else:
            grads, rbar = _gaussian_grads(
                env, joint, committed, config.batch_size, critic, rng
            )
            pooled_rewards.append(rbar)
            signal = float(grads[agent])
        step = _candidate_step(config, joint, agent, signal, d)
        committed[agent] = step.new_params
        realized[agent] = step.realized_kl
        gains[agent] = step.surrogate_gain
    new_joint = joint.replace(committed) if committed else joint

    # Phase 4: one pooled critic update per iteration.
    critic = update_critic(critic, float(np.mean(pooled_rewards)))

    # Phase 5: evaluation of the updated joint policy.
    if is_matrix and config.exact_eval:
        eval_reward = evaluate(env, new_joint, 1, exact=True)
    else:
        eval_reward = evaluate(
            env, new_joint, config.eval_episodes, eval_rng if eval_rng is not None else rng
        )

    record = IterationRecord(
        iteration=iteration,
        allocation=allocation,
        realized_kl=realized,
        utilities=[float(u) for u in utilities],
        surrogate_gains=gains,
        policy_snapshot=new_joint,
        eval_reward=eval_reward,
        critic_value=critic.b,
    )
    return new_joint, critic, record


def train(config: RunConfig) -> RunHistory:
    """Run the configured number of iterations from the initial policy.

    Fully deterministic given (config, seed): training draws come from one
    seeded stream and evaluation draws from a second, so evaluation noise
    never perturbs the training trajectory.
    """
    joint = config.initial_policy()
    critic = CriticBaseline(b=config.critic_init, lr=config.critic_lr)
    rng = np.random.default_rng([config.seed, 0])
    eval_rng = np.random.default_rng([config.seed, 1])
    history = RunHistory(config=config)
    for t in range(1, config.iterations + 1):
        joint, critic, record = run_iteration(
            joint, config, critic, rng, eval_rng, iteration=t
        )
        history.records.append(record)
    return history
