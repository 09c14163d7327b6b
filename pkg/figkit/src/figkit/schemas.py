"""CSV schema contracts for run directories and sweep summaries."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np


class SchemaError(ValueError):
    """A required file or column is missing or malformed."""


RUN_FILES = ("rewards.csv", "kl.csv", "policy.csv", "config.json")


def read_table(path: Path, required: tuple[str, ...] = ()) -> dict[str, np.ndarray]:
    """Load a CSV into named float columns; unknown extra columns are kept."""
    path = Path(path)
    if not path.exists():
        raise SchemaError(f"{path}: file not found")
    with path.open(newline="") as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path.name}: empty file") from None
        for col in required:
            if col not in header:
                raise SchemaError(f"{path.name}: missing column {col!r}")
        rows = list(reader)
    table: dict[str, np.ndarray] = {}
    for j, col in enumerate(header):
        vals = []
        for row in rows:
            cell = row[j] if j < len(row) else ""
            vals.append(float(cell) if cell != "" else np.nan)
        table[col] = np.asarray(vals)
    return table


def prefix_columns(table: dict[str, np.ndarray], prefix: str, source: str) -> np.ndarray:
    """Stack columns named '<prefix>1', '<prefix>2', ... into (agents, rows)."""
    cols = []
    i = 1
    while f"{prefix}{i}" in table:
        cols.append(table[f"{prefix}{i}"])
        i += 1
    if not cols:
        raise SchemaError(f"{source}: missing column {prefix + '1'!r}")
    return np.vstack(cols)


def read_config(run_dir: Path) -> dict:
    path = Path(run_dir) / "config.json"
    if not path.exists():
        raise SchemaError(f"{path}: file not found")
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path.name}: invalid JSON ({exc})") from exc


def is_run_dir(path: Path) -> bool:
    return (Path(path) / "rewards.csv").exists()
