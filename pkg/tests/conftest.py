"""Session fixtures: the two acceptance training grids, run once and shared
by the convergence, escape, and constraint-audit criteria."""

import time

import pytest

from klbudget.games import MatrixGameSpec
from klbudget.trainer import differential_config, matrix_config, train

MATRIX_DELTAS = (4e-4, 4e-3)
MATRIX_SEEDS = range(10)
DIFFERENTIAL_DELTA = 0.12
DIFFERENTIAL_SEEDS = range(10)
STRATEGIES = ("uniform", "greedy", "waterfill")


@pytest.fixture(scope="session")
def matrix_suite():
    """Coordination-game grid: 2 budgets x 3 strategies x 10 seeds, 1000
    iterations each, exact advantages and exact evaluation.

    Uses the staircase (prefix_ones) reward variant, whose one-frontier-agent
    structure is what concentrating allocations exploit.
    """
    env = MatrixGameSpec(4, "prefix_ones")
    histories = {}
    t0 = time.perf_counter()
    for delta in MATRIX_DELTAS:
        for strategy in STRATEGIES:
            for seed in MATRIX_SEEDS:
                cfg = matrix_config(
                    n_agents=4,
                    env=env,
                    strategy=strategy,
                    delta_total=delta,
                    iterations=1000,
                    batch_size=20,
                    init_p1=0.01,
                    seed=seed,
                )
                histories[(delta, strategy, seed)] = train(cfg)
    elapsed = time.perf_counter() - t0
    return {"histories": histories, "elapsed": elapsed}


@pytest.fixture(scope="session")
def differential_suite():
    """Continuous-game grid: 3 strategies x 10 seeds at one matched budget,
    4000 iterations, batch 20, initial means (1, 1)."""
    histories = {}
    t0 = time.perf_counter()
    for strategy in STRATEGIES:
        for seed in DIFFERENTIAL_SEEDS:
            cfg = differential_config(
                strategy=strategy,
                delta_total=DIFFERENTIAL_DELTA,
                iterations=4000,
                batch_size=20,
                seed=seed,
            )
            histories[(strategy, seed)] = train(cfg)
    elapsed = time.perf_counter() - t0
    return {"histories": histories, "elapsed": elapsed}
