"""Trajectory CSV export.

Every number is written with 17 significant digits so that a float64
round-trips exactly; output is byte-for-byte deterministic.
"""

from __future__ import annotations

import csv
import os
from pathlib import Path
from typing import Dict, Sequence

import numpy as np

from .core import Trajectory


def _fmt(v) -> str:
    return format(float(v), ".17g")


def trajectory_columns(traj: Trajectory) -> Dict[str, np.ndarray]:
    """Ordered mapping column name -> values, in the standard export order."""
    N = len(traj)
    cols = {"t": traj.times}
    for i in range(traj.states.shape[1]):
        cols[f"x[{i}]"] = traj.states[:, i]
    for label, arr in (("u1", traj.u1), ("u2", traj.u2), ("y1", traj.y1), ("y2", traj.y2)):
        for i in range(arr.shape[1]):
            cols[f"{label}[{i}]"] = arr[:, i]
    cols["s1"] = traj.s1
    cols["s2"] = traj.s2
    cols["H"] = traj.h
    cols["Hstar"] = np.full(N, np.nan) if traj.h_star is None else traj.h_star
    return cols


def _write(path, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    return path


def write_trajectory_csv(traj: Trajectory, path) -> Path:
    """Write all standard columns (t, x, u1, u2, y1, y2, s1, s2, H, Hstar)."""
    cols = trajectory_columns(traj)
    return emit_plotdata(traj, list(cols), path)


def emit_plotdata(traj: Trajectory, which_columns: Sequence[str], path) -> Path:
    """Write a subset of the standard columns; an empty selection gives a header-only file."""
    cols = trajectory_columns(traj)
    missing = [c for c in which_columns if c not in cols]
    if missing:
        raise KeyError(f"unknown columns {missing}; available: {list(cols)}")
    which = list(which_columns)
    if not which:
        return _write(path, [], [])
    data = np.column_stack([cols[c] for c in which])
    return _write(path, which, ([_fmt(v) for v in row] for row in data))


def read_trajectory_csv(path) -> Dict[str, np.ndarray]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        return {}
    header, body = rows[0], rows[1:]
    data = np.array(body, dtype=float).reshape(len(body), len(header))
    return {h: data[:, i] for i, h in enumerate(header)}
