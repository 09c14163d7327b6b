"""Per-agent policies: Bernoulli over {0, 1} and fixed-variance Gaussian,
with exact KL divergence, sampling, and the Gaussian score function."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .games import ACTION_LO, ACTION_HI

P_MIN = 1e-6
P_MAX = 1.0 - 1e-6


class FamilyMismatchError(ValueError):
    pass


def clip_probability(p: float) -> float:
    return min(max(float(p), P_MIN), P_MAX)


@dataclass(frozen=True)
class BernoulliPolicy:
    """P(action = 1) = p1, kept inside [P_MIN, P_MAX] so KL stays finite."""

    p1: float

    def __post_init__(self):
        object.__setattr__(self, "p1", clip_probability(self.p1))


@dataclass(frozen=True)
class GaussianPolicy:
    """Normal(mu, sigma) over the action line; sigma is fixed during training."""

    mu: float
    sigma: float = 1.15

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError(f"sigma must be > 0, got {self.sigma}")


PolicyParams = Union[BernoulliPolicy, GaussianPolicy]


@dataclass(frozen=True)
class JointPolicy:
    """One policy per agent; all agents share a single family."""

    agents: tuple[PolicyParams, ...]

    def __post_init__(self):
        if not self.agents:
            raise ValueError("joint policy needs at least one agent")
        fam = type(self.agents[0])
        if any(type(a) is not fam for a in self.agents):
            raise FamilyMismatchError("all agents must share one policy family")

    def __len__(self) -> int:
        return len(self.agents)

    def replace(self, updates: dict[int, PolicyParams]) -> "JointPolicy":
        agents = list(self.agents)
        for i, params in updates.items():
            agents[i] = params
        return JointPolicy(tuple(agents))


def kl_divergence(old: PolicyParams, new: PolicyParams) -> float:
    """KL(old || new); families must match and Gaussian sigmas must be equal."""
    if isinstance(old, BernoulliPolicy) and isinstance(new, BernoulliPolicy):
        p, q = old.p1, new.p1
        kl = p * math.log(p / q) + (1.0 - p) * math.log((1.0 - p) / (1.0 - q))
        # float rounding can dip a hair below zero for q within an ulp of p
        return max(0.0, kl)
    if isinstance(old, GaussianPolicy) and isinstance(new, GaussianPolicy):
        if old.sigma != new.sigma:
            raise FamilyMismatchError(
                f"equal-sigma KL requires matching sigma, got {old.sigma} vs {new.sigma}"
            )
        return (old.mu - new.mu) ** 2 / (2.0 * old.sigma**2)
    raise FamilyMismatchError(
        f"cannot compare {type(old).__name__} with {type(new).__name__}"
    )


def sample_action(policy: PolicyParams, rng: np.random.Generator):
    """One action draw; Gaussian draws are clipped into the action bounds."""
    if isinstance(policy, BernoulliPolicy):
        return int(rng.random() < policy.p1)
    if isinstance(policy, GaussianPolicy):
        return float(np.clip(rng.normal(policy.mu, policy.sigma), ACTION_LO, ACTION_HI))
    raise FamilyMismatchError(f"unknown policy type {type(policy).__name__}")


def grad_log_prob(policy: PolicyParams, action: float) -> float:
    """d/d mu of log N(action; mu, sigma). Bernoulli agents use exact
    advantages instead of score-function gradients."""
    if isinstance(policy, GaussianPolicy):
        return (float(action) - policy.mu) / policy.sigma**2
    raise FamilyMismatchError("score function is only defined for Gaussian policies")
