"""Advantage estimation: exact enumeration for the matrix game, Monte-Carlo
with a running critic baseline for the differential game, and the scalar
utility scores that drive budget allocation."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Optional

import numpy as np

from .games import (
    DifferentialGameSpec,
    MatrixGameSpec,
    differential_reward_array,
    profile_matrix,
    reward_vector,
)
from .policies import BernoulliPolicy, GaussianPolicy, JointPolicy, PolicyParams

UTILITY_MODES = ("mean", "positive_mean", "abs_mean")


@dataclass(frozen=True)
class CriticBaseline:
    """Running estimate of expected reward, relaxed toward each batch mean."""

    b: float = 0.0
    lr: float = 0.2

    def __post_init__(self):
        if not (0.0 < self.lr <= 1.0):
            raise ValueError(f"critic lr must be in (0, 1], got {self.lr}")


def update_critic(critic: CriticBaseline, batch_mean_reward: float) -> CriticBaseline:
    return CriticBaseline(
        b=critic.b + critic.lr * (batch_mean_reward - critic.b), lr=critic.lr
    )


@dataclass
class AdvantageEstimate:
    """Per-agent advantage information.

    Exactly one of per_action / samples is populated: exact Bernoulli agents
    carry a per-action advantage map plus the action probabilities used for
    expectations; sampled Gaussian agents carry (action, advantage) pairs and
    a score-function gradient estimate.
    """

    agent: int
    per_action: Optional[dict[int, float]] = None
    action_probs: Optional[dict[int, float]] = None
    samples: Optional[list[tuple[float, float]]] = None
    grad_estimate: Optional[float] = None
    surrogate_value: float = 0.0
    utility: Optional[float] = None

    def __post_init__(self):
        if (self.per_action is None) == (self.samples is None):
            raise ValueError("exactly one of per_action / samples must be set")


def _effective_probs(
    joint: JointPolicy, updated_prefix: Mapping[int, PolicyParams]
) -> np.ndarray:
    probs = np.array([a.p1 for a in joint.agents])
    for j, params in updated_prefix.items():
        probs[j] = params.p1
    return probs


def exact_state_value(game: MatrixGameSpec, joint: JointPolicy) -> float:
    """V = sum over all profiles of the joint probability times the reward."""
    if not isinstance(game, MatrixGameSpec):
        raise ValueError("exact enumeration requires the matrix game")
    if len(joint) != game.n_agents:
        raise ValueError(f"joint policy has {len(joint)} agents, game has {game.n_agents}")
    M = profile_matrix(game.n_agents)
    R = reward_vector(game)
    probs = np.array([a.p1 for a in joint.agents])
    w = (M * probs + (1.0 - M) * (1.0 - probs)).prod(axis=1)
    return float(w @ R)


def exact_agent_advantage(
    game: MatrixGameSpec,
    joint: JointPolicy,
    updated_prefix: Mapping[int, PolicyParams],
    agent: int,
) -> AdvantageEstimate:
    """Per-action advantage of one agent, marginalizing the others: agents in
    updated_prefix use their new policies, the rest their current ones. The
    baseline V uses the agent's own current policy, so the advantages are
    exactly centered under it."""
    if not (0 <= agent < game.n_agents):
        raise IndexError(f"agent {agent} out of range for {game.n_agents} agents")
    M = profile_matrix(game.n_agents)
    R = reward_vector(game)
    probs = _effective_probs(joint, updated_prefix)
    W = M * probs + (1.0 - M) * (1.0 - probs)
    # exclude the agent's own column; probabilities are clipped away from 0
    w_others = W.prod(axis=1) / W[:, agent]
    mask = M[:, agent]
    q1 = float((w_others * mask) @ R)
    q0 = float((w_others * (1.0 - mask)) @ R)
    p = joint.agents[agent].p1
    v = p * q1 + (1.0 - p) * q0
    return AdvantageEstimate(
        agent=agent,
        per_action={0: q0 - v, 1: q1 - v},
        action_probs={0: 1.0 - p, 1: p},
        surrogate_value=0.0,
    )


def draw_joint_actions(
    game,
    joint: JointPolicy,
    updated_prefix: Mapping[int, PolicyParams],
    batch: int,
    rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray]:
    """Sample a batch of joint actions (prefix agents from their new policies)
    and the corresponding rewards.

    For Gaussian agents returns the raw draws; rewards are evaluated on the
    draws clipped into the action bounds. The raw draws keep the score
    estimator unbiased for the clipped objective.
    """
    m = len(joint)
    first = joint.agents[0]
    if isinstance(first, BernoulliPolicy):
        probs = _effective_probs(joint, updated_prefix)
        actions = (rng.random((batch, m)) < probs).astype(np.float64)
        R = reward_vector(game)
        shifts = np.arange(m - 1, -1, -1)
        idx = (actions.astype(np.int64) << shifts).sum(axis=1)
        rewards = R[idx]
        return actions, rewards
    means = np.array([a.mu for a in joint.agents])
    sigmas = np.array([a.sigma for a in joint.agents])
    for j, params in updated_prefix.items():
        means[j] = params.mu
    raw = rng.normal(means, sigmas, size=(batch, m))
    lo, hi = game.action_bounds
    clipped = np.clip(raw, lo, hi)
    rewards = differential_reward_array(clipped[:, 0], clipped[:, 1], game)
    return raw, rewards


def mc_advantage(
    game,
    joint: JointPolicy,
    updated_prefix: Mapping[int, PolicyParams],
    agent: int,
    batch: int,
    critic: CriticBaseline,
    rng: np.random.Generator,
) -> AdvantageEstimate:
    """Monte-Carlo advantage estimate from `batch` joint draws against the
    critic baseline. Does not mutate the critic."""
    if batch < 1:
        raise ValueError(f"batch must be >= 1, got {batch}")
    if not (0 <= agent < len(joint)):
        raise IndexError(f"agent {agent} out of range")
    actions, rewards = draw_joint_actions(game, joint, updated_prefix, batch, rng)
    adv = rewards - critic.b
    own = actions[:, agent]
    params = joint.agents[agent]
    if isinstance(params, GaussianPolicy):
        grad = float((adv * (own - params.mu)).mean() / params.sigma**2)
        lo, hi = game.action_bounds
        env_actions = np.clip(own, lo, hi)
        samples = list(zip(env_actions.tolist(), adv.tolist()))
        return AdvantageEstimate(
            agent=agent,
            samples=samples,
            grad_estimate=grad,
            surrogate_value=float(adv.mean()),
        )
    samples = list(zip(own.tolist(), adv.tolist()))
    return AdvantageEstimate(
        agent=agent, samples=samples, surrogate_value=float(adv.mean())
    )


def utility(est: AdvantageEstimate, mode: str = "positive_mean") -> float:
    """Scalar utility score: an expectation of the advantage under the agent's
    current policy (exact agents) or over its samples (Gaussian agents)."""
    if mode not in UTILITY_MODES:
        raise ValueError(f"unknown utility mode {mode!r}")
    if est.per_action is not None:
        items = [
            (est.action_probs[a], adv) for a, adv in sorted(est.per_action.items())
        ]
    else:
        if not est.samples:
            raise ValueError("cannot compute a utility from an empty sample list")
        w = 1.0 / len(est.samples)
        items = [(w, adv) for _, adv in est.samples]
    if mode == "mean":
        return float(sum(p * adv for p, adv in items))
    if mode == "positive_mean":
        return float(sum(p * max(adv, 0.0) for p, adv in items))
    return float(sum(p * abs(adv) for p, adv in items))
