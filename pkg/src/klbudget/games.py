"""The two benchmark games: an N-agent binary matrix game and a 2-player
differential game on [0, 7]^2 with one local and one global optimum."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

ACTION_LO = 0.0
ACTION_HI = 7.0

REWARD_VARIANTS = ("literal_suffix", "prefix_ones")

ENUMERATION_LIMIT = 20


class EnumerationLimitError(ValueError):
    pass


@dataclass(frozen=True)
class MatrixGameSpec:
    """Binary-action coordination game. All agents choosing 1 pays 1.5.

    reward_variant selects the secondary reward rule:
      - literal_suffix: 1 whenever the last agent plays 0,
      - prefix_ones: 1 for a (possibly empty) prefix of 1s followed by 0s.
    """

    n_agents: int
    reward_variant: str = "literal_suffix"

    def __post_init__(self):
        if self.n_agents < 2:
            raise ValueError(f"n_agents must be >= 2, got {self.n_agents}")
        if self.reward_variant not in REWARD_VARIANTS:
            raise ValueError(f"unknown reward_variant {self.reward_variant!r}")

    @property
    def max_reward(self) -> float:
        return 1.5


@dataclass(frozen=True)
class DifferentialGameSpec:
    """Two-player continuous game: sum of unnormalized Gaussian bumps plus a
    linear tilt in the first coordinate. Bump heights equal their weights, so
    the (5, 5) bump dominates the (1, 1) bump."""

    bumps: tuple = (
        (10.0, (5.0, 5.0), (1.0, 3.0)),
        (5.3, (1.0, 1.0), (1.0, 1.0)),
    )
    linear_coef: float = 0.1
    action_bounds: tuple = (ACTION_LO, ACTION_HI)

    def __post_init__(self):
        for weight, mean, std in self.bumps:
            if std[0] <= 0 or std[1] <= 0:
                raise ValueError(f"bump std components must be > 0, got {std}")

    @property
    def n_agents(self) -> int:
        return 2


def matrix_reward(profile: Sequence[int], spec: MatrixGameSpec) -> float:
    """Joint reward of one action profile."""
    if len(profile) != spec.n_agents:
        raise ValueError(
            f"profile length {len(profile)} != n_agents {spec.n_agents}"
        )
    for a in profile:
        if a not in (0, 1):
            raise ValueError(f"actions must be 0 or 1, got {a!r}")
    if all(a == 1 for a in profile):
        return 1.5
    if spec.reward_variant == "literal_suffix":
        return 1.0 if profile[-1] == 0 else 0.0
    # prefix_ones: monotone non-increasing profiles only
    seen_zero = False
    for a in profile:
        if a == 0:
            seen_zero = True
        elif seen_zero:
            return 0.0
    return 1.0


def differential_reward(a: Sequence[float], spec: DifferentialGameSpec) -> float:
    """Reward at one joint action; actions must already lie in bounds."""
    a1, a2 = float(a[0]), float(a[1])
    lo, hi = spec.action_bounds
    if not (lo <= a1 <= hi and lo <= a2 <= hi):
        raise ValueError(f"action ({a1}, {a2}) outside bounds [{lo}, {hi}]")
    r = spec.linear_coef * a1
    for weight, (m1, m2), (s1, s2) in spec.bumps:
        r += weight * math.exp(
            -((a1 - m1) ** 2) / (2 * s1**2) - ((a2 - m2) ** 2) / (2 * s2**2)
        )
    return r


def differential_reward_array(
    a1: np.ndarray, a2: np.ndarray, spec: DifferentialGameSpec
) -> np.ndarray:
    """Vectorized reward; callers are responsible for clipping into bounds."""
    r = spec.linear_coef * a1
    for weight, (m1, m2), (s1, s2) in spec.bumps:
        r = r + weight * np.exp(
            -((a1 - m1) ** 2) / (2 * s1**2) - ((a2 - m2) ** 2) / (2 * s2**2)
        )
    return r


def enumerate_profiles(n: int) -> list[tuple[int, ...]]:
    """All 2^n binary profiles in lexicographic (binary counting) order."""
    if n > ENUMERATION_LIMIT:
        raise EnumerationLimitError(f"n={n} exceeds enumeration limit {ENUMERATION_LIMIT}")
    if n < 1:
        raise ValueError("n must be >= 1")
    M = profile_matrix(n)
    return [tuple(int(b) for b in row) for row in M]


@lru_cache(maxsize=None)
def profile_matrix(n: int) -> np.ndarray:
    """(2^n, n) float matrix of action bits, agent 0 in the leading column."""
    if n > ENUMERATION_LIMIT:
        raise EnumerationLimitError(f"n={n} exceeds enumeration limit {ENUMERATION_LIMIT}")
    idx = np.arange(2**n, dtype=np.int64)
    shifts = np.arange(n - 1, -1, -1, dtype=np.int64)
    return ((idx[:, None] >> shifts[None, :]) & 1).astype(np.float64)


@lru_cache(maxsize=None)
def reward_vector(spec: MatrixGameSpec) -> np.ndarray:
    """Reward of every enumerated profile, aligned with profile_matrix order."""
    M = profile_matrix(spec.n_agents)
    out = np.empty(M.shape[0])
    for k, row in enumerate(M):
        out[k] = matrix_reward(tuple(int(b) for b in row), spec)
    return out


def surface_grid(
    spec: DifferentialGameSpec, resolution: int = 141
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Reward sampled on a regular grid over the action square.

    Returns flat arrays (a1, a2, reward) of length resolution**2, row-major
    in a1 then a2, for CSV export and heatmap rendering.
    """
    if resolution < 2:
        raise ValueError("resolution must be >= 2")
    lo, hi = spec.action_bounds
    axis = np.linspace(lo, hi, resolution)
    g1, g2 = np.meshgrid(axis, axis, indexing="ij")
    r = differential_reward_array(g1, g2, spec)
    return g1.ravel(), g2.ravel(), r.ravel()
