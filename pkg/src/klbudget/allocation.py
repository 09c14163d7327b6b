"""Per-iteration KL budget allocation: uniform split, water-filling via the
KKT condition (lambda solved by bisection or the literal multiplicative
update), and greedy gain-per-KL ordering with sequential commitment."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .policies import PolicyParams
from .trust_step import StepResult

MAX_SOLVER_ITERATIONS = 10_000


class NoPositiveUtilityError(ValueError):
    pass


class SolverFailureError(RuntimeError):
    pass


@dataclass
class KLAllocation:
    """Update order plus per-agent thresholds.

    deltas is indexed by agent, not by position in the order; agents absent
    from the order always carry a zero threshold.
    """

    order: list[int]
    deltas: list[float]
    total_budget: float
    strategy: str
    fallback_uniform: bool = False

    def __post_init__(self):
        if len(set(self.order)) != len(self.order):
            raise ValueError("order contains duplicate agents")
        if any(d < 0 for d in self.deltas):
            raise ValueError("thresholds must be nonnegative")


@dataclass(frozen=True)
class LambdaSolve:
    lambda_: float
    achieved_total: float
    iterations: int
    converged: bool


def allocate_uniform(m: int, delta_total: float) -> KLAllocation:
    """Identity order, equal per-agent share of the budget."""
    if m < 1:
        raise ValueError("need at least one agent")
    if delta_total < 0:
        raise ValueError("delta_total must be >= 0")
    return KLAllocation(
        order=list(range(m)),
        deltas=[delta_total / m] * m,
        total_budget=delta_total,
        strategy="uniform",
    )


def delta_of_lambda(
    utilities: Sequence[float], lam: float
) -> tuple[list[float], float]:
    """Tentative per-agent thresholds max(0, U_i / lambda - 1) and their sum;
    the sum is non-increasing in lambda."""
    if lam <= 0:
        raise ValueError(f"lambda must be > 0, got {lam}")
    u = np.asarray(utilities, dtype=np.float64)
    d = np.maximum(0.0, u / lam - 1.0)
    return d.tolist(), float(d.sum())


def solve_lambda_bisection(
    utilities: Sequence[float],
    delta_total: float,
    tol: float = 0.01,
    max_iter: int = MAX_SOLVER_ITERATIONS,
) -> LambdaSolve:
    """Bisect lambda until the allocated total matches the budget within tol.

    The total is 0 at lambda = max(U) and grows without bound as lambda drops,
    so a bracket always exists when some utility is positive.
    """
    u = np.asarray(utilities, dtype=np.float64)
    if delta_total <= 0:
        raise ValueError("delta_total must be > 0")
    if u.size == 0 or u.max() <= 0:
        raise NoPositiveUtilityError("water-filling needs at least one positive utility")
    iterations = 0
    lam_hi = float(u.max())
    lam_lo = lam_hi
    while True:
        lam_lo *= 0.5
        iterations += 1
        _, total = delta_of_lambda(u, lam_lo)
        if total >= delta_total:
            break
        if iterations > max_iter or lam_lo < 1e-300:
            raise SolverFailureError("failed to bracket lambda from below")
    lam = lam_lo
    total = delta_total + 2 * tol
    while abs(total - delta_total) >= tol:
        iterations += 1
        if iterations > max_iter:
            raise SolverFailureError(f"no convergence after {max_iter} iterations")
        lam = 0.5 * (lam_lo + lam_hi)
        _, total = delta_of_lambda(u, lam)
        if total >= delta_total:
            lam_lo = lam
        else:
            lam_hi = lam
    return LambdaSolve(lambda_=lam, achieved_total=total, iterations=iterations, converged=True)


def solve_lambda_multiplicative(
    utilities: Sequence[float],
    delta_total: float,
    tol: float = 0.01,
    lambda0: float | None = None,
    max_iter: int = MAX_SOLVER_ITERATIONS,
) -> LambdaSolve:
    """Literal fixed-point rule lambda <- lambda * (total / delta_total), with
    a halving guard for iterates whose total is zero (the literal rule would
    set lambda to 0 there). May fail to converge; the flag reports it."""
    u = np.asarray(utilities, dtype=np.float64)
    if delta_total <= 0:
        raise ValueError("delta_total must be > 0")
    if u.size == 0 or u.max() <= 0:
        raise NoPositiveUtilityError("water-filling needs at least one positive utility")
    lam = float(lambda0) if lambda0 is not None else 10.0 * float(u.max())
    if lam <= 0:
        raise ValueError("lambda0 must be > 0")
    total = 0.0
    for it in range(1, max_iter + 1):
        _, total = delta_of_lambda(u, lam)
        if abs(total - delta_total) < tol:
            return LambdaSolve(lambda_=lam, achieved_total=total, iterations=it, converged=True)
        if total == 0.0:
            lam *= 0.5
        else:
            lam *= total / delta_total
    return LambdaSolve(lambda_=lam, achieved_total=total, iterations=max_iter, converged=False)


def allocate_waterfill(
    utilities: Sequence[float],
    delta_total: float,
    tol: float = 0.01,
    solver: str = "bisection",
    lambda0: float | None = None,
    fallback: bool = True,
) -> KLAllocation:
    """Order agents by decreasing utility (ties by index) and assign each the
    threshold max(0, U_i / lambda - 1) at the solved multiplier. Falls back to
    a uniform split when no utility is positive."""
    u = list(map(float, utilities))
    m = len(u)
    if m < 1:
        raise ValueError("need at least one agent")
    if delta_total == 0.0:
        order = sorted(range(m), key=lambda i: (-u[i], i))
        return KLAllocation(
            order=order, deltas=[0.0] * m, total_budget=0.0, strategy="waterfill"
        )
    if max(u, default=0.0) <= 0.0:
        if not fallback:
            raise NoPositiveUtilityError("water-filling needs at least one positive utility")
        alloc = allocate_uniform(m, delta_total)
        alloc.strategy = "waterfill"
        alloc.fallback_uniform = True
        return alloc
    if solver == "bisection":
        solve = solve_lambda_bisection(u, delta_total, tol=tol)
    elif solver == "multiplicative":
        solve = solve_lambda_multiplicative(u, delta_total, tol=tol, lambda0=lambda0)
    else:
        raise ValueError(f"unknown solver {solver!r}")
    deltas, _ = delta_of_lambda(u, solve.lambda_)
    order = sorted(range(m), key=lambda i: (-u[i], i))
    return KLAllocation(
        order=order, deltas=deltas, total_budget=delta_total, strategy="waterfill"
    )


CandidateEvaluator = Callable[[int, float, Mapping[int, PolicyParams]], StepResult]


def allocate_greedy(
    candidate_evaluator: CandidateEvaluator,
    m: int,
    delta_total: float,
    epsilon: float = 1e-4,
) -> KLAllocation:
    """Rank remaining agents by surrogate gain per unit of realized KL, commit
    the best candidate at its realized KL, and repeat on the shrunken budget.

    The evaluator receives (agent, cap, committed new policies) and must
    return that agent's candidate step solved against the cap. Because linear
    surrogates saturate the cap, the first committed agent typically consumes
    the whole remaining budget unless a parameter bound clips its step.
    """
    if m < 1:
        raise ValueError("need at least one agent")
    if epsilon <= 0:
        raise ValueError("epsilon must be > 0")
    order: list[int] = []
    deltas = [0.0] * m
    committed: dict[int, PolicyParams] = {}
    remaining = list(range(m))
    budget = float(delta_total)
    while remaining and budget > 0.0:
        best_score = None
        best = None
        for i in remaining:
            cand = candidate_evaluator(i, budget, committed)
            score = cand.surrogate_gain / (cand.realized_kl + epsilon)
            if best_score is None or score > best_score:
                best_score = score
                best = (i, cand)
        i_star, cand = best
        order.append(i_star)
        deltas[i_star] = cand.realized_kl
        committed[i_star] = cand.new_params
        remaining.remove(i_star)
        budget = max(0.0, budget - cand.realized_kl)
    return KLAllocation(
        order=order, deltas=deltas, total_budget=delta_total, strategy="greedy"
    )
