#!/usr/bin/env python3
"""Desk-scale coordination-game comparison: all three allocation strategies
on the 4-agent staircase game across 10 seeds and two budgets, with per-run
CSV logs and a steps-to-99% summary.

Usage: python scripts/run_matrix_compare.py [--out results/matrix]
"""

import argparse
from pathlib import Path

import numpy as np

from klbudget.experiment_io import export_run_csv, steps_to_threshold
from klbudget.games import MatrixGameSpec
from klbudget.trainer import matrix_config, train


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--out", default="results/matrix")
    parser.add_argument("--seeds", type=int, default=10)
    parser.add_argument("--variant", default="prefix_ones",
                        choices=["prefix_ones", "literal_suffix"])
    args = parser.parse_args()

    out = Path(args.out)
    env = MatrixGameSpec(4, args.variant)
    for delta in (4e-4, 4e-3):
        table = {}
        for strategy in ("uniform", "greedy", "waterfill"):
            steps = []
            for seed in range(args.seeds):
                cfg = matrix_config(n_agents=4, env=env, strategy=strategy,
                                    delta_total=delta, seed=seed)
                history = train(cfg)
                export_run_csv(history, out / f"{strategy}_d{delta:g}_s{seed}")
                steps.append(steps_to_threshold(history, 0.99, 1.5))
            table[strategy] = steps
        print(f"delta_total = {delta:g} (steps to 99% of max reward)")
        for strategy, steps in table.items():
            med = np.median([s for s in steps if s is not None]) if any(steps) else None
            print(f"  {strategy:10s} median {med}  per-seed {steps}")


if __name__ == "__main__":
    main()
