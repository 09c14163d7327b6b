#!/usr/bin/env python3
"""Produce the CSV inputs the figure renderer consumes: one coordination-game
run, one continuous-game run, a budget sweep, and the reward-surface dump.

Usage: python scripts/make_figure_data.py [--out results/figure_data]
"""

import argparse
from pathlib import Path

from klbudget.cli import main as cli_main
from klbudget.experiment_io import export_run_csv
from klbudget.games import MatrixGameSpec
from klbudget.trainer import differential_config, matrix_config, train


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--out", default="results/figure_data")
    args = parser.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    env = MatrixGameSpec(4, "prefix_ones")
    history = train(matrix_config(n_agents=4, env=env, strategy="waterfill", seed=0))
    export_run_csv(history, out / "matrix_run")

    history = train(differential_config(strategy="waterfill", seed=4))
    export_run_csv(history, out / "differential_run")

    cli_main(["surface", "--out", str(out / "differential_run" / "surface.csv")])

    cfg = out / "sweep.cfg"
    cfg.write_text(
        "env.kind = matrix\nenv.reward_variant = prefix_ones\ntrain.iterations = 1000\n"
    )
    cli_main([
        "sweep", "--config", str(cfg), "--deltas", "0.0004,0.001,0.004",
        "--seeds", "3", "--out", str(out / "sweep"),
    ])
    print(f"figure data written under {out}")


if __name__ == "__main__":
    main()
