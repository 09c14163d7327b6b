"""Renderers for each figure kind and the directory-level driver."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .schemas import SchemaError, is_run_dir, prefix_columns, read_config, read_table

ALL_KINDS = ("reward", "kl_heatmap", "trajectory", "adv_kl", "steps", "surface")

STRATEGY_COLORS = {"uniform": "tab:red", "greedy": "tab:blue", "waterfill": "tab:green"}

_SAVE_OPTS = dict(dpi=120, metadata={"Software": "figkit"})


def _save(fig, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, **_SAVE_OPTS)
    plt.close(fig)
    return path


def render_reward_curve(run_dir: Path, out_path: Path) -> Path:
    t = read_table(run_dir / "rewards.csv", required=("iteration", "eval_reward"))
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(t["iteration"], t["eval_reward"], lw=1.2, label="eval reward")
    if "critic_value" in t:
        ax.plot(t["iteration"], t["critic_value"], lw=0.9, ls="--", label="critic")
    ax.set_xlabel("iteration")
    ax.set_ylabel("mean reward")
    ax.legend(loc="lower right")
    ax.set_title(run_dir.name or "run")
    return _save(fig, out_path)


def render_grouped_reward_curves(run_dirs: list[Path], out_path: Path) -> Path:
    """Median curve with a min-max band per strategy across seed runs."""
    groups: dict[str, list[np.ndarray]] = {}
    for d in run_dirs:
        cfg = read_config(d)
        strategy = cfg.get("alloc", {}).get("strategy", d.name)
        t = read_table(d / "rewards.csv", required=("iteration", "eval_reward"))
        groups.setdefault(strategy, []).append(t["eval_reward"])
    fig, ax = plt.subplots(figsize=(6, 4))
    for strategy in sorted(groups):
        curves = np.vstack([c[: min(map(len, groups[strategy]))] for c in groups[strategy]])
        x = np.arange(1, curves.shape[1] + 1)
        color = STRATEGY_COLORS.get(strategy)
        ax.plot(x, np.median(curves, axis=0), lw=1.4, label=strategy, color=color)
        ax.fill_between(
            x, curves.min(axis=0), curves.max(axis=0), alpha=0.2, color=color, lw=0
        )
    ax.set_xlabel("iteration")
    ax.set_ylabel("mean reward")
    ax.legend(loc="lower right")
    return _save(fig, out_path)


def render_kl_heatmap(run_dir: Path, out_path: Path) -> Path:
    t = read_table(run_dir / "kl.csv", required=("iteration",))
    realized = prefix_columns(t, "realized_kl_", "kl.csv")
    floor = 1e-12
    fig, ax = plt.subplots(figsize=(7, 2.5))
    img = ax.imshow(
        np.log10(realized + floor),
        aspect="auto",
        interpolation="nearest",
        cmap="viridis",
        extent=(1, realized.shape[1], realized.shape[0] + 0.5, 0.5),
    )
    ax.set_yticks(np.arange(1, realized.shape[0] + 1))
    ax.set_xlabel("iteration")
    ax.set_ylabel("agent")
    fig.colorbar(img, ax=ax, label="log10 realized KL")
    return _save(fig, out_path)


def render_trajectory(run_dir: Path, out_path: Path, surface_csv: Path | None = None) -> Path:
    t = read_table(run_dir / "policy.csv", required=("iteration",))
    if "mu_1" in t:
        means = prefix_columns(t, "mu_", "policy.csv")
        fig, ax = plt.subplots(figsize=(5.5, 5))
        if surface_csv is not None and Path(surface_csv).exists():
            _draw_surface(ax, surface_csv)
        pts = ax.scatter(
            means[0], means[1], c=np.arange(means.shape[1]), cmap="plasma", s=6
        )
        fig.colorbar(pts, ax=ax, label="iteration")
        ax.set_xlabel("agent 1 mean")
        ax.set_ylabel("agent 2 mean")
    else:
        probs = prefix_columns(t, "p1_", "policy.csv")
        fig, ax = plt.subplots(figsize=(6, 4))
        for i, row in enumerate(probs, start=1):
            ax.plot(t["iteration"], row, lw=1.2, label=f"agent {i}")
        ax.set_xlabel("iteration")
        ax.set_ylabel("P(action = 1)")
        ax.set_ylim(-0.02, 1.02)
        ax.legend(loc="center right", fontsize=8)
    return _save(fig, out_path)


def _draw_surface(ax, surface_csv: Path):
    t = read_table(surface_csv, required=("a1", "a2", "reward"))
    a1 = np.unique(t["a1"])
    a2 = np.unique(t["a2"])
    grid = t["reward"].reshape(len(a1), len(a2))
    ax.pcolormesh(a1, a2, grid.T, shading="auto", cmap="viridis")


def render_surface(surface_csv: Path, out_path: Path) -> Path:
    fig, ax = plt.subplots(figsize=(5.5, 5))
    _draw_surface(ax, surface_csv)
    ax.set_xlabel("a1")
    ax.set_ylabel("a2")
    return _save(fig, out_path)


def render_adv_kl(run_dir: Path, out_path: Path) -> Path:
    t = read_table(run_dir / "kl.csv", required=("iteration",))
    utilities = prefix_columns(t, "utility_", "kl.csv")
    realized = prefix_columns(t, "realized_kl_", "kl.csv")
    fig, ax = plt.subplots(figsize=(5.5, 4))
    for i in range(utilities.shape[0]):
        ax.scatter(realized[i], utilities[i], s=5, alpha=0.4, label=f"agent {i + 1}")
    ax.set_xlabel("realized KL")
    ax.set_ylabel("utility")
    ax.legend(loc="upper left", fontsize=8, markerscale=2)
    return _save(fig, out_path)


def render_steps_vs_delta(summary_csv: Path, out_path: Path) -> Path:
    import csv as _csv

    path = Path(summary_csv)
    with path.open(newline="") as f:
        reader = _csv.DictReader(f)
        if reader.fieldnames is None:
            raise SchemaError(f"{path.name}: empty file")
        for col in ("strategy", "delta_total", "seed", "steps_to_99pct"):
            if col not in reader.fieldnames:
                raise SchemaError(f"{path.name}: missing column {col!r}")
        rows = list(reader)
    by_strategy: dict[str, dict[float, list[float]]] = {}
    for row in rows:
        steps = row["steps_to_99pct"]
        if steps == "":
            continue
        by_strategy.setdefault(row["strategy"], {}).setdefault(
            float(row["delta_total"]), []
        ).append(float(steps))
    fig, ax = plt.subplots(figsize=(5.5, 4))
    for strategy in sorted(by_strategy):
        deltas = sorted(by_strategy[strategy])
        medians = [float(np.median(by_strategy[strategy][d])) for d in deltas]
        ax.plot(
            deltas, medians, marker="o", lw=1.3,
            label=strategy, color=STRATEGY_COLORS.get(strategy),
        )
    ax.set_xscale("log")
    ax.set_xlabel("total KL budget")
    ax.set_ylabel("median steps to 99% of max reward")
    ax.legend()
    return _save(fig, out_path)


def render_all(
    in_dir, out_dir, kinds: tuple[str, ...] | list[str] | None = None
) -> dict[str, Path]:
    """Render every applicable figure kind found under in_dir.

    A run directory (holding rewards.csv) yields the single-run set; a
    collection directory yields grouped curves, the sweep figure, and the
    surface heatmap, whichever inputs exist. Absent inputs are skipped.
    """
    in_dir = Path(in_dir)
    out_dir = Path(out_dir)
    selected = set(ALL_KINDS if kinds is None else kinds)
    unknown = selected - set(ALL_KINDS)
    if unknown:
        raise ValueError(f"unknown figure kinds: {sorted(unknown)}")
    written: dict[str, Path] = {}

    if is_run_dir(in_dir):
        surface = in_dir / "surface.csv"
        if "reward" in selected:
            written["reward"] = render_reward_curve(in_dir, out_dir / "reward_curve.png")
        if "kl_heatmap" in selected and (in_dir / "kl.csv").exists():
            written["kl_heatmap"] = render_kl_heatmap(in_dir, out_dir / "kl_heatmap.png")
        if "trajectory" in selected and (in_dir / "policy.csv").exists():
            written["trajectory"] = render_trajectory(
                in_dir, out_dir / "trajectory.png",
                surface if surface.exists() else None,
            )
        if "adv_kl" in selected and (in_dir / "kl.csv").exists():
            written["adv_kl"] = render_adv_kl(in_dir, out_dir / "adv_kl.png")
        if "surface" in selected and surface.exists():
            written["surface"] = render_surface(surface, out_dir / "surface.png")
        return written

    summary = in_dir / "steps_vs_delta.csv"
    if "steps" in selected and summary.exists():
        written["steps"] = render_steps_vs_delta(summary, out_dir / "steps_vs_delta.png")
    children = [d for d in sorted(in_dir.iterdir()) if d.is_dir() and is_run_dir(d)]
    if children and "reward" in selected:
        written["reward"] = render_grouped_reward_curves(
            children, out_dir / "reward_curves.png"
        )
    if "surface" in selected and (in_dir / "surface.csv").exists():
        written["surface"] = render_surface(in_dir / "surface.csv", out_dir / "surface.png")
    if not written and not children and not summary.exists():
        raise SchemaError(f"{in_dir}: no renderable inputs found")
    return written
