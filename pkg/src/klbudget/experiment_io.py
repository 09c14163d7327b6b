"""Run logging, derived metrics, CSV export, and config parsing.

Config files are flat `key = value` lines with dotted section prefixes
(env.*, alloc.*, train.*), or a JSON object with the same keys (optionally
nested by section). Unknown keys are rejected.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from .games import DifferentialGameSpec, MatrixGameSpec, REWARD_VARIANTS
from .policies import BernoulliPolicy
from .trainer import (
    RunConfig,
    RunHistory,
    STRATEGIES,
    TRAINER_UTILITY_MODES,
    differential_config,
    matrix_config,
)


class ConfigError(ValueError):
    pass


class ExportError(OSError):
    pass


@dataclass
class MetricTable:
    kind: str
    columns: list[str]
    rows: list[list[float]]

    def __post_init__(self):
        for row in self.rows:
            if len(row) != len(self.columns):
                raise ValueError(
                    f"row width {len(row)} != column count {len(self.columns)}"
                )


def _fmt(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, int):
        return str(x)
    return format(float(x), ".17g")


def steps_to_threshold(
    history: RunHistory, fraction: float, max_reward: float
) -> Optional[int]:
    """1-based count of iterations until eval reward first reaches
    fraction * max_reward, or None if it never does."""
    if not history.records:
        raise ValueError("history has no records")
    if not (0 <= fraction <= 1):
        raise ValueError(f"fraction must be in [0, 1], got {fraction}")
    threshold = fraction * max_reward
    for i, rec in enumerate(history.records):
        if rec.eval_reward >= threshold:
            return i + 1
    return None


def _policy_columns(history: RunHistory) -> tuple[str, list[list[float]]]:
    first = history.records[0].policy_snapshot.agents[0]
    param = "p1" if isinstance(first, BernoulliPolicy) else "mu"
    rows = []
    for rec in history.records:
        vals = [
            (a.p1 if param == "p1" else a.mu) for a in rec.policy_snapshot.agents
        ]
        rows.append(vals)
    return param, rows


def export_run_csv(history: RunHistory, directory) -> list[Path]:
    """Write rewards.csv, kl.csv, policy.csv, and config.json into directory.

    Floats carry 17 significant digits so a parse/re-export round trip is
    byte-identical.
    """
    out = Path(directory)
    try:
        out.mkdir(parents=True, exist_ok=True)
        m = history.config.n_agents
        written = []

        path = out / "rewards.csv"
        with path.open("w") as f:
            f.write("iteration,eval_reward,critic_value\n")
            for rec in history.records:
                f.write(
                    f"{rec.iteration},{_fmt(rec.eval_reward)},{_fmt(rec.critic_value)}\n"
                )
        written.append(path)

        path = out / "kl.csv"
        with path.open("w") as f:
            head = (
                ["iteration"]
                + [f"delta_{i+1}" for i in range(m)]
                + [f"realized_kl_{i+1}" for i in range(m)]
                + [f"utility_{i+1}" for i in range(m)]
            )
            f.write(",".join(head) + "\n")
            for rec in history.records:
                row = (
                    [str(rec.iteration)]
                    + [_fmt(d) for d in rec.allocation.deltas]
                    + [_fmt(k) for k in rec.realized_kl]
                    + [_fmt(u) for u in rec.utilities]
                )
                f.write(",".join(row) + "\n")
        written.append(path)

        path = out / "policy.csv"
        param, rows = _policy_columns(history)
        with path.open("w") as f:
            head = ["iteration"] + [f"{param}_{i+1}" for i in range(m)]
            f.write(",".join(head) + "\n")
            for rec, vals in zip(history.records, rows):
                f.write(
                    ",".join([str(rec.iteration)] + [_fmt(v) for v in vals]) + "\n"
                )
        written.append(path)

        path = out / "config.json"
        path.write_text(json.dumps(config_to_dict(history.config), indent=2, sort_keys=True) + "\n")
        written.append(path)
        return written
    except OSError as exc:
        raise ExportError(f"export to {out} failed: {exc}") from exc


def adv_kl_pairs(history: RunHistory) -> MetricTable:
    """One row per (iteration, agent): utility normalized by the iteration's
    max absolute utility (0 when all utilities are 0), with realized KL."""
    rows = []
    for rec in history.records:
        scale = max(abs(u) for u in rec.utilities) if rec.utilities else 0.0
        for i, (u, k) in enumerate(zip(rec.utilities, rec.realized_kl)):
            norm = u / scale if scale > 0 else 0.0
            rows.append([float(rec.iteration), float(i + 1), norm, k])
    return MetricTable(
        kind="adv_kl_pairs",
        columns=["iteration", "agent", "normalized_utility", "realized_kl"],
        rows=rows,
    )


def metric_table_to_csv(table: MetricTable, path) -> Path:
    p = Path(path)
    with p.open("w") as f:
        f.write(",".join(table.columns) + "\n")
        for row in table.rows:
            f.write(",".join(_fmt(v) for v in row) + "\n")
    return p


# --- configuration parsing -------------------------------------------------

_ENV_KEYS = {"env.kind", "env.n_agents", "env.reward_variant"}
_ALLOC_KEYS = {
    "alloc.strategy",
    "alloc.delta_total",
    "alloc.utility_mode",
    "alloc.greedy_epsilon",
    "alloc.waterfill_tol",
    "alloc.waterfill_solver",
    "alloc.uniform_per_agent_delta",
}
_TRAIN_KEYS = {
    "train.iterations",
    "train.batch_size",
    "train.eval_episodes",
    "train.seed",
    "train.init_p1",
    "train.init_mean1",
    "train.init_mean2",
    "train.sigma",
    "train.critic_lr",
    "train.critic_init",
    "train.exact_eval",
    "train.gamma",
}
_ALL_KEYS = _ENV_KEYS | _ALLOC_KEYS | _TRAIN_KEYS


def _parse_scalar(raw: str):
    text = raw.strip()
    low = text.lower()
    if low in ("true", "false"):
        return low == "true"
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        pass
    return text


def _flatten_json(obj: dict) -> dict:
    flat = {}
    for key, value in obj.items():
        if isinstance(value, dict):
            for sub, v in value.items():
                flat[f"{key}.{sub}"] = v
        else:
            flat[key] = value
    return flat


def _read_pairs(text: str) -> dict:
    stripped = text.lstrip()
    if stripped.startswith("{"):
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON config: {exc}") from exc
        if not isinstance(obj, dict):
            raise ConfigError("JSON config must be an object")
        return _flatten_json(obj)
    pairs = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, raw = body.split("=", 1)
        key = key.strip()
        if key not in _ALL_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in pairs:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        pairs[key] = _parse_scalar(raw)
    return pairs


def _require(condition: bool, message: str):
    if not condition:
        raise ConfigError(message)


def parse_config(text: str, env: Optional[str] = None) -> RunConfig:
    """Build a RunConfig from config text, filling unspecified keys with the
    environment's defaults. `env` supplies the environment kind when the text
    does not set env.kind."""
    pairs = _read_pairs(text)
    for key in pairs:
        if key not in _ALL_KEYS:
            raise ConfigError(f"unknown key {key!r}")

    kind = pairs.pop("env.kind", env)
    _require(kind is not None, "config must set env.kind (or pass an env hint)")
    _require(kind in ("matrix", "differential"), f"unknown env.kind {kind!r}")

    overrides = {}
    if kind == "matrix":
        n_agents = pairs.pop("env.n_agents", 4)
        _require(isinstance(n_agents, int), "env.n_agents must be an integer")
        _require(2 <= n_agents <= 20, f"env.n_agents must be in [2, 20], got {n_agents}")
        variant = pairs.pop("env.reward_variant", "literal_suffix")
        _require(
            variant in REWARD_VARIANTS, f"unknown env.reward_variant {variant!r}"
        )
        env_spec = MatrixGameSpec(n_agents=n_agents, reward_variant=variant)
        factory = lambda: matrix_config(n_agents=n_agents, env=env_spec, **overrides)
    else:
        _require(
            "env.n_agents" not in pairs and "env.reward_variant" not in pairs,
            "matrix-only keys set for the differential environment",
        )
        factory = lambda: differential_config(**overrides)

    mean1 = pairs.pop("train.init_mean1", None)
    mean2 = pairs.pop("train.init_mean2", None)
    if mean1 is not None or mean2 is not None:
        _require(kind == "differential", "init means apply to the differential game only")
        overrides["init_means"] = (
            float(mean1) if mean1 is not None else 1.0,
            float(mean2) if mean2 is not None else 1.0,
        )

    renames = {
        "alloc.strategy": "strategy",
        "alloc.delta_total": "delta_total",
        "alloc.utility_mode": "utility_mode",
        "alloc.greedy_epsilon": "greedy_epsilon",
        "alloc.waterfill_tol": "waterfill_tol",
        "alloc.waterfill_solver": "waterfill_solver",
        "alloc.uniform_per_agent_delta": "uniform_per_agent_delta",
        "train.iterations": "iterations",
        "train.batch_size": "batch_size",
        "train.eval_episodes": "eval_episodes",
        "train.seed": "seed",
        "train.init_p1": "init_p1",
        "train.sigma": "sigma",
        "train.critic_lr": "critic_lr",
        "train.critic_init": "critic_init",
        "train.exact_eval": "exact_eval",
        "train.gamma": "gamma",
    }
    int_fields = {"iterations", "batch_size", "eval_episodes", "seed"}
    bool_fields = {"exact_eval", "uniform_per_agent_delta"}
    for key, value in pairs.items():
        name = renames[key]
        if name in int_fields:
            _require(isinstance(value, int) and not isinstance(value, bool),
                     f"{key} must be an integer, got {value!r}")
        elif name in bool_fields:
            _require(isinstance(value, bool), f"{key} must be true or false")
        elif name in ("strategy", "utility_mode", "waterfill_solver"):
            _require(isinstance(value, str), f"{key} must be a string")
        else:
            _require(
                isinstance(value, (int, float)) and not isinstance(value, bool),
                f"{key} must be numeric, got {value!r}",
            )
            value = float(value)
        overrides[name] = value

    _require(overrides.get("strategy", "uniform") in STRATEGIES,
             f"unknown alloc.strategy {overrides.get('strategy')!r}")
    _require(overrides.get("utility_mode", "step_gain") in TRAINER_UTILITY_MODES,
             f"unknown alloc.utility_mode {overrides.get('utility_mode')!r}")
    _require(overrides.get("delta_total", 1.0) > 0, "alloc.delta_total must be > 0")
    _require(overrides.get("iterations", 1) >= 1, "train.iterations must be >= 1")
    _require(overrides.get("batch_size", 1) >= 1, "train.batch_size must be >= 1")
    _require(overrides.get("eval_episodes", 1) >= 1, "train.eval_episodes must be >= 1")
    _require(overrides.get("sigma", 1.0) > 0, "train.sigma must be > 0")
    p1 = overrides.get("init_p1", 0.5)
    _require(0.0 < p1 < 1.0, "train.init_p1 must lie strictly inside (0, 1)")

    try:
        return factory()
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def config_to_dict(config: RunConfig) -> dict:
    """Echo of the configurable surface; parse_config accepts the JSON form,
    so exported config.json files reproduce the run."""
    env = config.env
    matrix = isinstance(env, MatrixGameSpec)
    if matrix:
        env_dict = {
            "kind": "matrix",
            "n_agents": env.n_agents,
            "reward_variant": env.reward_variant,
        }
    else:
        env_dict = {"kind": "differential"}
    train_dict = {
        "iterations": config.iterations,
        "batch_size": config.batch_size,
        "eval_episodes": config.eval_episodes,
        "seed": config.seed,
        "critic_lr": config.critic_lr,
        "critic_init": config.critic_init,
        "exact_eval": config.exact_eval,
        "gamma": config.gamma,
    }
    if matrix:
        train_dict["init_p1"] = config.init_p1
    else:
        train_dict["init_mean1"] = config.init_means[0]
        train_dict["init_mean2"] = config.init_means[1]
        train_dict["sigma"] = config.sigma
    return {
        "env": env_dict,
        "alloc": {
            "strategy": config.strategy,
            "delta_total": config.delta_total,
            "utility_mode": config.utility_mode,
            "greedy_epsilon": config.greedy_epsilon,
            "waterfill_tol": config.waterfill_tol,
            "waterfill_solver": config.waterfill_solver,
            "uniform_per_agent_delta": config.uniform_per_agent_delta,
        },
        "train": train_dict,
    }
