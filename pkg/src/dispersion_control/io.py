"""CSV / JSON emission for trajectory logs.

Floats are written with 17 significant digits, which round-trips IEEE
doubles exactly; ``nan`` marks fields that do not apply (estimator columns
in centralized mode, metrics of dead agents).
"""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .sim import STATUS_NAMES, TrajectoryLog

__all__ = [
    "TRAJECTORY_COLUMNS",
    "METRICS_COLUMNS",
    "fmt",
    "write_trajectory_csv",
    "write_metrics_csv",
    "read_metrics_csv",
    "read_trajectory_csv",
    "write_json",
]

TRAJECTORY_COLUMNS = (
    "step", "t", "agent", "status", "x", "y", "phat_x", "phat_y",
    "chat_1", "chat_2", "chat_3", "lam1_i", "lam2_i", "err_y", "err_D",
)
METRICS_COLUMNS = (
    "t", "e_norm", "min_dist", "centroid_x", "centroid_y",
    "true_lam1", "true_lam2", "est_err_max", "e_agent_max",
)


def fmt(x) -> str:
    x = float(x)
    if math.isnan(x):
        return "nan"
    return f"{x:.17g}"


def write_trajectory_csv(log: TrajectoryLog, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRAJECTORY_COLUMNS)
        n = log.positions.shape[1]
        for k in range(len(log)):
            step, t = int(log.steps[k]), fmt(log.t[k])
            P, Ph, Ch, lam = log.positions[k], log.p_hat[k], log.c_hat[k], log.lam_agents[k]
            for i in range(n):
                w.writerow(
                    (
                        step, t, i + 1, STATUS_NAMES[int(log.status[k, i])],
                        fmt(P[i, 0]), fmt(P[i, 1]), fmt(Ph[i, 0]), fmt(Ph[i, 1]),
                        fmt(Ch[i, 0]), fmt(Ch[i, 1]), fmt(Ch[i, 2]),
                        fmt(lam[i, 0]), fmt(lam[i, 1]), fmt(log.err_y[k, i]), fmt(log.err_D[k, i]),
                    )
                )


def write_metrics_csv(log: TrajectoryLog, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(METRICS_COLUMNS)
        for k in range(len(log)):
            w.writerow(
                (
                    fmt(log.t[k]), fmt(log.e_norm[k]), fmt(log.min_dist[k]),
                    fmt(log.centroid[k, 0]), fmt(log.centroid[k, 1]),
                    fmt(log.true_lam[k, 0]), fmt(log.true_lam[k, 1]),
                    fmt(log.est_err_max[k]), fmt(log.e_agent_max[k]),
                )
            )


def read_metrics_csv(path) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    if tuple(header) != METRICS_COLUMNS:
        raise ValueError(f"unexpected metrics header {header}")
    cols = list(zip(*body)) if body else [()] * len(header)
    return {name: np.array([float(v) for v in col]) for name, col in zip(header, cols)}


def read_trajectory_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        out = []
        for row in reader:
            rec = {k: float(v) for k, v in row.items() if k not in ("status",)}
            rec["step"] = int(row["step"])
            rec["agent"] = int(row["agent"])
            rec["status"] = row["status"]
            out.append(rec)
        return out


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return None if math.isnan(x) or math.isinf(x) else x
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, Path):
        return str(obj)
    return obj


def write_json(obj, path) -> None:
    with open(path, "w") as fh:
        json.dump(_jsonable(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")
