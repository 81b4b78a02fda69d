"""CSV and JSON artifacts of a simulation run."""
from __future__ import annotations

import csv
import json
import math
import os
import platform
from pathlib import Path

import numpy as np

from .loop import SimLog

TRAJECTORY_COLUMNS = ("t", "s", "y", "psi", "Vx", "Vy", "omega", "delta", "tau", "u1", "u2", "min_obs_dist")
TIMING_COLUMNS = ("cycle", "t", "solve_ms", "best_cost", "n_gen")


def machine_descriptor() -> dict:
    cpu = platform.processor() or platform.machine()
    try:
        for line in Path("/proc/cpuinfo").read_text().splitlines():
            if line.startswith("model name"):
                cpu = line.split(":", 1)[1].strip()
                break
    except OSError:
        pass
    return {"cpu": cpu, "cores": os.cpu_count(), "python": platform.python_version(),
            "platform": platform.platform()}


def _num(v) -> float | None:
    v = float(v)
    return v if math.isfinite(v) else None


def summarize(log: SimLog) -> dict:
    """Run summary; ``status`` is ``"no data"`` for an empty log."""
    out = {
        "status": "no data" if len(log) == 0 else ("failed" if log.failed else "ok"),
        "termination": log.termination,
        "message": log.message,
        "plant_steps": len(log),
        "planner_cycles": len(log.solve_ms),
        "collision": log.collision,
        "bound_violation": log.bound_violation,
    }
    if len(log):
        X = log.state_array()
        d = log.min_obstacle_distance()
        ms = np.asarray(log.solve_ms)
        out.update({
            "duration_s": float(log.t[-1] - log.t[0]) if len(log) > 1 else 0.0,
            "max_abs_y": log.max_abs_y,
            "mean_vx": float(X[:, 3].mean()),
            "distance_traveled": float(X[-1, 0] - X[0, 0]),
            "min_obs_dist": _num(d.min()),
            "solve_ms_mean": float(ms.mean()),
            "solve_ms_p95": float(np.percentile(ms, 95)),
            "solve_ms_max": float(ms.max()),
        })
    return out


def _write_csv(path: Path, header, rows) -> None:
    try:
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            w.writerows(rows)
    except OSError as e:
        raise OSError(f"cannot write {path}: {e.strerror}") from e


def _fmt(v) -> str:
    return repr(float(v))


def emit_outputs(log: SimLog, out_dir, prefix: str = "run", extra: dict | None = None) -> dict[str, Path]:
    """Write ``<prefix>_trajectory.csv``, ``<prefix>_timing.csv`` and ``<prefix>_summary.json``."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise OSError(f"cannot create output directory {out}: {e.strerror}") from e
    paths = {"trajectory": out / f"{prefix}_trajectory.csv",
             "timing": out / f"{prefix}_timing.csv",
             "summary": out / f"{prefix}_summary.json"}
    X = log.state_array()
    U = log.input_array()
    d = log.min_obstacle_distance()
    traj = ([_fmt(log.t[i]), *map(_fmt, X[i]), _fmt(U[i, 0]), _fmt(U[i, 1]),
             _fmt(d[i]) if math.isfinite(d[i]) else ""] for i in range(len(log)))
    _write_csv(paths["trajectory"], TRAJECTORY_COLUMNS, traj)
    timing = ([i, _fmt(log.cycle_t[i]), f"{log.solve_ms[i]:.3f}", _fmt(log.best_cost[i]), log.n_gen[i]]
              for i in range(len(log.solve_ms)))
    _write_csv(paths["timing"], TIMING_COLUMNS, timing)
    summary = summarize(log)
    if extra:
        summary.update(extra)
    try:
        paths["summary"].write_text(json.dumps(summary, indent=2) + "\n")
    except OSError as e:
        raise OSError(f"cannot write {paths['summary']}: {e.strerror}") from e
    return paths
