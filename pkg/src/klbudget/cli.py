"""Command-line entry points for single runs, sweeps, strategy comparisons,
reward-surface dumps, and a quick self-test.

Exit codes: 0 success, 1 config error, 2 runtime error, 3 selftest failure.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .advantage import CriticBaseline, exact_agent_advantage, mc_advantage
from .allocation import delta_of_lambda, solve_lambda_bisection
from .experiment_io import (
    ConfigError,
    export_run_csv,
    metric_table_to_csv,
    parse_config,
    steps_to_threshold,
    _fmt,
)
from .games import DifferentialGameSpec, MatrixGameSpec, surface_grid
from .policies import BernoulliPolicy, JointPolicy
from .trainer import STRATEGIES, train

DEFAULT_SWEEP_DELTAS = (1e-4, 3e-4, 1e-3, 3e-3, 1e-2)


def _load_config(args):
    text = Path(args.config).read_text() if args.config else ""
    config = parse_config(text, env=getattr(args, "env", None))
    if getattr(args, "seed", None) is not None:
        config = replace(config, seed=args.seed)
    return config


def _delta_tag(delta: float) -> str:
    return f"{delta:g}".replace("-", "m").replace("+", "")


def cmd_run(args) -> int:
    config = _load_config(args)
    history = train(config)
    out = Path(args.out)
    export_run_csv(history, out)
    final = history.records[-1].eval_reward
    line = f"run complete: {config.strategy}, {config.iterations} iterations, final eval reward {final:.4f}"
    if isinstance(config.env, MatrixGameSpec):
        steps = steps_to_threshold(history, 0.99, config.env.max_reward)
        line += f", steps to 99% of max: {steps if steps is not None else 'not reached'}"
    print(line)
    print(f"wrote CSV logs to {out}")
    return 0


def cmd_sweep(args) -> int:
    config = _load_config(args)
    deltas = (
        [float(x) for x in args.deltas.split(",")] if args.deltas else list(DEFAULT_SWEEP_DELTAS)
    )
    strategies = args.strategies.split(",") if args.strategies else list(STRATEGIES)
    for s in strategies:
        if s not in STRATEGIES:
            raise ConfigError(f"unknown strategy {s!r}")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for delta in deltas:
        for strategy in strategies:
            for seed in range(args.seeds):
                cfg = replace(config, strategy=strategy, delta_total=delta, seed=seed)
                history = train(cfg)
                run_dir = out / f"{strategy}_d{_delta_tag(delta)}_s{seed}"
                export_run_csv(history, run_dir)
                steps = steps_to_threshold(history, 0.99, args.max_reward)
                rows.append((strategy, delta, seed, steps))
    summary = out / "steps_vs_delta.csv"
    with summary.open("w") as f:
        f.write("strategy,delta_total,seed,steps_to_99pct\n")
        for strategy, delta, seed, steps in rows:
            steps_txt = "" if steps is None else str(steps)
            f.write(f"{strategy},{_fmt(delta)},{seed},{steps_txt}\n")
    print(f"sweep complete: {len(rows)} runs, summary at {summary}")
    return 0


def cmd_compare(args) -> int:
    config = _load_config(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    finals: dict[str, list[float]] = {s: [] for s in STRATEGIES}
    for strategy in STRATEGIES:
        for seed in range(args.seeds):
            cfg = replace(config, strategy=strategy, seed=seed)
            history = train(cfg)
            export_run_csv(history, out / f"{strategy}_s{seed}")
            finals[strategy].append(history.records[-1].eval_reward)
    with (out / "final_rewards.csv").open("w") as f:
        f.write("strategy,seed,final_eval_reward\n")
        for strategy in STRATEGIES:
            for seed, r in enumerate(finals[strategy]):
                f.write(f"{strategy},{seed},{_fmt(r)}\n")
    with (out / "medians.csv").open("w") as f:
        f.write("strategy,median_final_reward\n")
        for strategy in STRATEGIES:
            f.write(f"{strategy},{_fmt(float(np.median(finals[strategy])))}\n")
    for strategy in STRATEGIES:
        print(f"{strategy}: median final reward {np.median(finals[strategy]):.4f}")
    return 0


def cmd_surface(args) -> int:
    spec = DifferentialGameSpec()
    a1, a2, r = surface_grid(spec, resolution=args.resolution)
    out = Path(args.out)
    if out.parent != Path(""):
        out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w") as f:
        f.write("a1,a2,reward\n")
        for x, y, v in zip(a1, a2, r):
            f.write(f"{_fmt(x)},{_fmt(y)},{_fmt(v)}\n")
    print(f"wrote {args.resolution}x{args.resolution} reward surface to {out}")
    return 0


def cmd_selftest(args) -> int:
    failures = []

    rng = np.random.default_rng(7)
    for trial in range(20):
        m = int(rng.integers(2, 9))
        u = rng.uniform(-1.0, 5.0, size=m)
        if u.max() <= 0:
            continue
        dtot = float(rng.uniform(0.1, 10.0))
        solve = solve_lambda_bisection(u, dtot, tol=1e-4)
        grid = np.linspace(1e-9, u.max(), 200_000)
        totals = np.maximum(0.0, u[:, None] / grid[None, :] - 1.0).sum(axis=0)
        lam_star = grid[int(np.argmin(np.abs(totals - dtot)))]
        d_solve, _ = delta_of_lambda(u, solve.lambda_)
        d_grid, _ = delta_of_lambda(u, lam_star)
        err = max(abs(a - b) for a, b in zip(d_solve, d_grid))
        if err > 1e-3:
            failures.append(f"water-filling trial {trial}: max delta error {err:.2e}")

    game = MatrixGameSpec(n_agents=4)
    joint = JointPolicy(tuple(BernoulliPolicy(p) for p in (0.3, 0.6, 0.5, 0.4)))
    from .advantage import exact_state_value

    critic = CriticBaseline(b=exact_state_value(game, joint), lr=0.2)
    est = mc_advantage(game, joint, {}, 1, 20_000, critic, np.random.default_rng(11))
    exact = exact_agent_advantage(game, joint, {}, 1)
    for action in (0, 1):
        vals = [adv for a, adv in est.samples if a == action]
        mean = float(np.mean(vals))
        se = float(np.std(vals, ddof=1) / np.sqrt(len(vals)))
        if abs(mean - exact.per_action[action]) > 4 * se:
            failures.append(
                f"MC advantage action {action}: {mean:.4f} vs exact {exact.per_action[action]:.4f} (se {se:.2e})"
            )

    if failures:
        for msg in failures:
            print(f"SELFTEST FAIL: {msg}", file=sys.stderr)
        return 3
    print("selftest passed: water-filling matches the grid oracle; MC advantages match enumeration")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="klbudget")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="single training run with full CSV export")
    p.add_argument("--config", required=True)
    p.add_argument("--env", choices=["matrix", "differential"], default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default="run_out")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="steps-to-threshold grid over budgets and strategies")
    p.add_argument("--config", required=True)
    p.add_argument("--env", choices=["matrix", "differential"], default=None)
    p.add_argument("--deltas", default=None, help="comma list of total budgets")
    p.add_argument("--strategies", default=None, help="comma list (default: all three)")
    p.add_argument("--seeds", type=int, default=1)
    p.add_argument("--max-reward", type=float, default=1.5)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("compare", help="all three strategies on identical seeds")
    p.add_argument("--config", required=True)
    p.add_argument("--env", choices=["matrix", "differential"], default=None)
    p.add_argument("--seeds", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("surface", help="differential-game reward grid dump")
    p.add_argument("--out", required=True)
    p.add_argument("--resolution", type=int, default=141)
    p.set_defaults(func=cmd_surface)

    p = sub.add_parser("selftest", help="quick oracle checks")
    p.set_defaults(func=cmd_selftest)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
