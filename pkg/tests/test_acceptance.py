"""Acceptance suite: one test per primary criterion, each printing a pass line
with its measured numbers. Budgets, tolerances, and seed counts are pinned."""

import itertools
import math
import time

import numpy as np
import pytest

from klbudget.advantage import (
    CriticBaseline,
    exact_agent_advantage,
    exact_state_value,
    mc_advantage,
)
from klbudget.allocation import allocate_waterfill, delta_of_lambda, solve_lambda_bisection
from klbudget.experiment_io import export_run_csv, steps_to_threshold
from klbudget.games import MatrixGameSpec
from klbudget.policies import BernoulliPolicy, GaussianPolicy, JointPolicy
from klbudget.trainer import differential_config, matrix_config, train

from conftest import (
    DIFFERENTIAL_DELTA,
    DIFFERENTIAL_SEEDS,
    MATRIX_DELTAS,
    MATRIX_SEEDS,
    STRATEGIES,
)


def grid_oracle_deltas(u, delta_total, points=1_000_000):
    """Brute-force lambda search on a uniform grid over (1e-9, max U].

    Prefix sums over the utilities sorted in decreasing order turn each total
    evaluation into a table lookup, which keeps the million-point grid cheap.
    """
    u = np.asarray(u, dtype=np.float64)
    su = np.sort(u)[::-1]
    prefix = np.concatenate([[0.0], np.cumsum(su)])
    grid = np.linspace(1e-9, float(u.max()), points)
    k = np.searchsorted(-su, -grid, side="left")
    totals = prefix[k] / grid - k
    lam = float(grid[int(np.argmin(np.abs(totals - delta_total)))])
    deltas, _ = delta_of_lambda(u, lam)
    return deltas


class TestWaterfillOracleEquivalence:
    def test_bisection_matches_grid_oracle(self):
        rng = np.random.default_rng(2024)
        t0 = time.perf_counter()
        checked = 0
        worst = 0.0
        while checked < 100:
            m = int(rng.integers(2, 17))
            u = rng.uniform(-1.0, 5.0, size=m)
            if u.max() <= 0:
                continue
            delta_total = float(rng.uniform(0.1, 10.0))
            solve = solve_lambda_bisection(u, delta_total, tol=1e-4)
            d_solve, total = delta_of_lambda(u, solve.lambda_)
            d_grid = grid_oracle_deltas(u, delta_total)
            err = max(abs(a - b) for a, b in zip(d_solve, d_grid))
            worst = max(worst, err)
            assert err <= 1e-3
            assert abs(total - delta_total) < 0.01
            checked += 1
        elapsed = time.perf_counter() - t0
        assert elapsed < 5.0
        print(
            f"[PASS] water-filling oracle equivalence: 100 instances, "
            f"worst per-agent error {worst:.2e}, {elapsed:.2f}s"
        )


class TestAnalyticAllocationCases:
    def test_single_active_agent(self):
        alloc = allocate_waterfill([3.0, 1.0, 0.5], 2.0, tol=1e-6)
        assert alloc.deltas == pytest.approx([2.0, 0.0, 0.0], abs=1e-3)

    def test_two_active_agents(self):
        alloc = allocate_waterfill([4.0, 2.0, 1.0], 3.0, tol=1e-6)
        assert alloc.deltas == pytest.approx([2.3333, 0.6667, 0.0], abs=1e-3)

    def test_scaling_invariance(self):
        base = allocate_waterfill([3.0, 1.0, 0.5], 2.0, tol=1e-9)
        for c in (0.5, 2.0, 10.0):
            scaled = allocate_waterfill(
                [3.0 * c, 1.0 * c, 0.5 * c], 2.0, tol=1e-9
            )
            assert scaled.order == base.order
            for a, b in zip(scaled.deltas, base.deltas):
                assert abs(a - b) <= 1e-6

    def test_monotone_in_budget_random_instances(self):
        rng = np.random.default_rng(7)
        checked = 0
        while checked < 100:
            m = int(rng.integers(2, 17))
            u = rng.uniform(-1.0, 5.0, size=m)
            if u.max() <= 0:
                continue
            d1 = float(rng.uniform(0.1, 5.0))
            d2 = d1 * float(rng.uniform(1.01, 3.0))
            small = allocate_waterfill(u, d1, tol=1e-6)
            large = allocate_waterfill(u, d2, tol=1e-6)
            for a, b in zip(small.deltas, large.deltas):
                assert b >= a - 1e-5
            checked += 1
        print(
            "[PASS] analytic allocation cases: [2,0,0] and [2.3333,0.6667,0] "
            "within 1e-3, scaling invariant within 1e-6, monotone on 100 instances"
        )


class TestAdvantageOracle:
    def test_mc_matches_enumeration_within_3se(self):
        game = MatrixGameSpec(4)
        joint = JointPolicy(tuple(BernoulliPolicy(p) for p in (0.3, 0.6, 0.5, 0.4)))
        critic = CriticBaseline(b=exact_state_value(game, joint), lr=0.2)
        worst_z = 0.0
        for agent in range(4):
            est = mc_advantage(
                game, joint, {}, agent, 100_000, critic, np.random.default_rng(100 + agent)
            )
            exact = exact_agent_advantage(game, joint, {}, agent)
            for action in (0, 1):
                vals = np.array([adv for a, adv in est.samples if a == action])
                se = vals.std(ddof=1) / math.sqrt(len(vals))
                diff = abs(vals.mean() - exact.per_action[action])
                if se == 0.0:
                    # constant-reward bucket: the sample mean is exact
                    assert diff <= 1e-12
                    continue
                z = diff / se
                worst_z = max(worst_z, z)
                assert z <= 3.0
        print(f"[PASS] advantage oracle: batch 1e5 within 3 SE (worst z {worst_z:.2f})")

    def test_exact_advantages_centered(self):
        rng = np.random.default_rng(3)
        game = MatrixGameSpec(4)
        worst = 0.0
        for _ in range(200):
            probs = rng.uniform(0.01, 0.99, size=4)
            joint = JointPolicy(tuple(BernoulliPolicy(p) for p in probs))
            for agent in range(4):
                est = exact_agent_advantage(game, joint, {}, agent)
                p = joint.agents[agent].p1
                centered = abs(p * est.per_action[1] + (1 - p) * est.per_action[0])
                worst = max(worst, centered)
                assert centered <= 1e-12
        print(f"[PASS] exact advantages centered to 1e-12 (worst {worst:.2e})")


class TestHardConstraintAudit:
    def test_every_logged_iteration(self, matrix_suite, differential_suite):
        n_records = 0
        saturated_checked = 0
        for history in itertools.chain(
            matrix_suite["histories"].values(), differential_suite["histories"].values()
        ):
            dtot = history.config.delta_total
            gaussian = not isinstance(history.config.env, MatrixGameSpec)
            lo, hi = (0.0, 7.0)
            for rec in history.records:
                n_records += 1
                assert sum(rec.realized_kl) <= dtot + 0.01
                for agent, (d, k) in enumerate(
                    zip(rec.allocation.deltas, rec.realized_kl)
                ):
                    assert k <= d + 1e-9
                    if gaussian and k > 0.0:
                        mu = rec.policy_snapshot.agents[agent].mu
                        if lo < mu < hi:
                            # unclipped saturating step must use its budget
                            assert abs(k - d) <= 1e-9
                            saturated_checked += 1
        print(
            f"[PASS] hard-constraint audit: {n_records} iterations, "
            f"{saturated_checked} unclipped saturating steps exact"
        )


class TestMatrixConvergenceOrdering:
    def test_adaptive_beats_uniform(self, matrix_suite):
        histories = matrix_suite["histories"]
        steps = {
            key: steps_to_threshold(history, 0.99, 1.5)
            for key, history in histories.items()
        }
        medians = {}
        for delta in MATRIX_DELTAS:
            for strategy in STRATEGIES:
                per_seed = [steps[(delta, strategy, s)] for s in MATRIX_SEEDS]
                assert all(v is not None for v in per_seed), (
                    f"{strategy} at {delta} missed the threshold in 1000 iterations"
                )
                medians[(delta, strategy)] = float(np.median(per_seed))
            for adaptive in ("greedy", "waterfill"):
                wins = sum(
                    steps[(delta, adaptive, s)] < steps[(delta, "uniform", s)]
                    for s in MATRIX_SEEDS
                )
                assert wins >= 7, f"{adaptive} beat uniform in only {wins}/10 seeds at {delta}"
                ratio = medians[(delta, adaptive)] / medians[(delta, "uniform")]
                assert ratio <= 0.9, f"{adaptive} median ratio {ratio:.3f} at {delta}"
        small, large = min(MATRIX_DELTAS), max(MATRIX_DELTAS)
        for strategy in STRATEGIES:
            assert medians[(large, strategy)] <= medians[(small, strategy)]
        assert matrix_suite["elapsed"] < 120.0
        summary = ", ".join(
            f"{s}@{d:g}={medians[(d, s)]:.0f}" for d in MATRIX_DELTAS for s in STRATEGIES
        )
        print(
            f"[PASS] matrix convergence ordering: {summary}; "
            f"runtime {matrix_suite['elapsed']:.0f}s"
        )


class TestDifferentialEscape:
    def test_adaptive_escapes_uniform_trapped(self, differential_suite):
        histories = differential_suite["histories"]

        def final_mean(strategy, seed):
            snap = histories[(strategy, seed)].records[-1].policy_snapshot
            return np.array([a.mu for a in snap.agents])

        counts = {}
        medians = {}
        for strategy in STRATEGIES:
            near_global = near_local = 0
            finals = []
            for seed in DIFFERENTIAL_SEEDS:
                mu = final_mean(strategy, seed)
                near_global += float(np.hypot(mu[0] - 5, mu[1] - 5)) <= 1.5
                near_local += float(np.hypot(mu[0] - 1, mu[1] - 1)) <= 1.5
                finals.append(histories[(strategy, seed)].records[-1].eval_reward)
            counts[strategy] = (near_global, near_local)
            medians[strategy] = float(np.median(finals))

        assert counts["greedy"][0] >= 6, f"greedy escaped in {counts['greedy'][0]}/10"
        assert counts["waterfill"][0] >= 6, f"waterfill escaped in {counts['waterfill'][0]}/10"
        assert counts["uniform"][1] >= 6, f"uniform trapped in {counts['uniform'][1]}/10"
        assert medians["greedy"] > medians["uniform"]
        assert medians["waterfill"] > medians["uniform"]
        assert differential_suite["elapsed"] < 300.0
        print(
            f"[PASS] differential escape: greedy {counts['greedy'][0]}/10, "
            f"waterfill {counts['waterfill'][0]}/10 near (5,5); uniform "
            f"{counts['uniform'][1]}/10 near (1,1); medians "
            f"{medians['greedy']:.2f}/{medians['waterfill']:.2f} vs {medians['uniform']:.2f}; "
            f"runtime {differential_suite['elapsed']:.0f}s"
        )


class TestDeterminism:
    def _export_bytes(self, history, directory):
        export_run_csv(history, directory)
        return {
            name: (directory / name).read_bytes()
            for name in ("rewards.csv", "kl.csv", "policy.csv", "config.json")
        }

    def test_matrix_run_byte_identical(self, tmp_path):
        env = MatrixGameSpec(4, "prefix_ones")
        cfg = matrix_config(
            n_agents=4, env=env, strategy="greedy", delta_total=4e-3,
            iterations=1000, seed=3,
        )
        a = self._export_bytes(train(cfg), tmp_path / "a")
        b = self._export_bytes(train(cfg), tmp_path / "b")
        assert a == b

    def test_differential_run_byte_identical(self, tmp_path):
        cfg = differential_config(
            strategy="waterfill", delta_total=DIFFERENTIAL_DELTA,
            iterations=4000, seed=3,
        )
        a = self._export_bytes(train(cfg), tmp_path / "a")
        b = self._export_bytes(train(cfg), tmp_path / "b")
        assert a == b
        print("[PASS] determinism: repeated runs export byte-identical CSVs")


class TestMonotonicImprovement:
    def test_uniform_exact_small_steps(self):
        worst = 0
        for seed in range(10):
            cfg = matrix_config(
                n_agents=4, strategy="uniform", delta_total=4e-3,
                iterations=1000, seed=seed,
            )
            history = train(cfg)
            rewards = [r.eval_reward for r in history.records]
            decreases = sum(
                1 for a, b in zip(rewards, rewards[1:]) if b < a - 1e-12
            )
            worst = max(worst, decreases)
            assert decreases <= 1
        print(
            f"[PASS] approximate monotonic improvement: at most {worst} "
            f"decreasing iteration(s) out of 1000 across 10 seeds"
        )
