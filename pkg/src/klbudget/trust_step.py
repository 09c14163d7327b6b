"""Closed-form solution of the per-agent trust-region step for both policy
families: the surrogate is linear in the new parameter, so the constrained
optimum sits on the KL ball boundary (or at a parameter bound)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .games import ACTION_LO, ACTION_HI
from .policies import (
    BernoulliPolicy,
    GaussianPolicy,
    PolicyParams,
    P_MIN,
    P_MAX,
    kl_divergence,
)

KL_BISECT_TOL = 1e-10


@dataclass(frozen=True)
class StepResult:
    new_params: PolicyParams
    realized_kl: float
    surrogate_gain: float


def _bernoulli_kl(p: float, q: float) -> float:
    return kl_divergence(BernoulliPolicy(p), BernoulliPolicy(q))


def _endpoint(p: float, delta: float, upper: bool) -> float:
    """Farthest q on one side of p with KL(p||q) <= delta.

    Bisection keeps the feasible side, so the returned endpoint never exceeds
    the budget and sits within KL_BISECT_TOL of it unless clipped at the
    probability box.
    """
    bound = P_MAX if upper else P_MIN
    if _bernoulli_kl(p, bound) <= delta:
        return bound
    feasible, infeasible = p, bound
    for _ in range(200):
        mid = 0.5 * (feasible + infeasible)
        if _bernoulli_kl(p, mid) <= delta:
            feasible = mid
        else:
            infeasible = mid
        if delta - _bernoulli_kl(p, feasible) <= KL_BISECT_TOL:
            break
    return feasible


def bernoulli_kl_interval(p: float, delta: float) -> tuple[float, float]:
    """Maximal interval [q_lo, q_hi] around p with KL(p||q) <= delta inside,
    clipped at the probability box [P_MIN, P_MAX]."""
    if not (P_MIN <= p <= P_MAX):
        raise ValueError(f"p={p} outside [{P_MIN}, {P_MAX}]")
    if delta < 0:
        raise ValueError(f"delta must be >= 0, got {delta}")
    if delta == 0.0:
        return (p, p)
    return (_endpoint(p, delta, upper=False), _endpoint(p, delta, upper=True))


def bernoulli_step(p: float, advantage_gap: float, delta: float) -> StepResult:
    """Move p toward the KL-ball endpoint selected by the sign of
    advantage_gap = A(1) - A(0)."""
    q_lo, q_hi = bernoulli_kl_interval(p, delta)
    if advantage_gap > 0:
        q = q_hi
    elif advantage_gap < 0:
        q = q_lo
    else:
        q = p
    return StepResult(
        new_params=BernoulliPolicy(q),
        realized_kl=_bernoulli_kl(p, q),
        surrogate_gain=advantage_gap * (q - p),
    )


def gaussian_step(
    mu: float,
    sigma: float,
    grad_estimate: float,
    delta: float,
    bounds: tuple[float, float] = (ACTION_LO, ACTION_HI),
) -> StepResult:
    """Equal-sigma KL ball is |mu' - mu| <= sigma * sqrt(2 delta); the linear
    surrogate saturates it in the gradient's sign direction. The mean is
    clipped into bounds afterwards and the post-clip KL is what counts."""
    if sigma <= 0:
        raise ValueError(f"sigma must be > 0, got {sigma}")
    if delta < 0:
        raise ValueError(f"delta must be >= 0, got {delta}")
    if grad_estimate == 0.0 or delta == 0.0:
        new_mu = mu
    else:
        step = np.sign(grad_estimate) * sigma * np.sqrt(2.0 * delta)
        new_mu = float(np.clip(mu + step, bounds[0], bounds[1]))
    realized = (new_mu - mu) ** 2 / (2.0 * sigma**2)
    return StepResult(
        new_params=GaussianPolicy(new_mu, sigma),
        realized_kl=realized,
        surrogate_gain=grad_estimate * (new_mu - mu),
    )
