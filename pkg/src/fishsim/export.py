"""Persistence and figure rendering for runs, sweeps, and reports.

Time series and tables are written as RFC-4180 CSV with a header row and
full double precision (17 significant digits, so re-reading reproduces the
binary values exactly). Metrics and reports are JSON. Figures are rendered
with matplotlib to SVG files alongside the delimited output.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .harness import Trajectory


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_trajectory_csv(traj: Trajectory, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    matrix = traj.to_matrix()
    try:
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(traj.column_names())
            for row in matrix:
                writer.writerow([_fmt(v) for v in row])
    except OSError as exc:
        raise OSError(f"cannot write trajectory to {path}: {exc}") from exc
    return path


def read_trajectory_csv(path):
    """(column names, sample matrix) re-read bit-exactly from CSV."""
    path = Path(path)
    try:
        with path.open("r", newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            rows = [[float(v) for v in row] for row in reader]
    except OSError as exc:
        raise OSError(f"cannot read trajectory from {path}: {exc}") from exc
    return header, np.array(rows)


def write_json(payload: dict, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    try:
        path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write JSON to {path}: {exc}") from exc
    return path


def write_table_csv(header: list, rows: list, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    try:
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for row in rows:
                writer.writerow([_fmt(v) if isinstance(v, (int, float)) else str(v)
                                 for v in row])
    except OSError as exc:
        raise OSError(f"cannot write table to {path}: {exc}") from exc
    return path


# ---------------------------------------------------------------------------
# figures

def plot_speed(traj: Trajectory, path, v_ref: float | None = None) -> Path:
    path = Path(path)
    fig, ax = plt.subplots(figsize=(7, 3.2), constrained_layout=True)
    ax.plot(traj.times, traj.v_inst, lw=0.8, alpha=0.6, label="instantaneous")
    ax.plot(traj.times, traj.v_filt, lw=1.6, label="filtered")
    if v_ref is not None:
        ax.axhline(v_ref, color="k", ls="--", lw=1.0, label="reference")
    ax.set_xlabel("time (s)")
    ax.set_ylabel("forward speed (m/s)")
    ax.legend(frameon=False, fontsize=8)
    fig.savefig(path)
    plt.close(fig)
    return path


def body_polyline(q_row: np.ndarray, model, stations: int = 40):
    """Inertial (x, y) polyline of head COM, joint, and body backbone."""
    from .quadrature import tables_for_positions
    from .kinematics import field_nodes

    s = np.linspace(1e-6, model.config.body_length, stations)
    tables = tables_for_positions(s, model.basis)
    qd = np.zeros_like(q_row)
    nodes = field_nodes(q_row, qd, tables, model.config.head.joint_offset)
    theta = q_row[2]
    length = model.config.head.joint_offset
    jx = q_row[0] - length * np.cos(theta)
    jy = q_row[1] - length * np.sin(theta)
    x = np.concatenate([[q_row[0], jx], nodes.r_x])
    y = np.concatenate([[q_row[1], jy], nodes.r_y])
    return x, y


def plot_timelapse(traj: Trajectory, model, path, window: float = 1.0,
                   snapshots: int = 6) -> Path:
    """Body-shape time lapse over the final `window` seconds of the run."""
    path = Path(path)
    times = traj.times
    t0 = max(times[0], times[-1] - window)
    idx = np.linspace(np.searchsorted(times, t0), len(times) - 1, snapshots)
    cmap = plt.get_cmap("viridis")
    fig, ax = plt.subplots(figsize=(7, 3.2), constrained_layout=True)
    for rank, i in enumerate(idx.astype(int)):
        x, y = body_polyline(traj.q[i], model)
        color = cmap(rank / max(snapshots - 1, 1))
        ax.plot(x, y, color=color, lw=1.4)
        ax.plot(x[0], y[0], "o", color=color, ms=4)
    ax.set_aspect("equal", adjustable="datalim")
    ax.set_xlabel("X (m)")
    ax.set_ylabel("Y (m)")
    ax.set_title(f"body shapes, t = {times[idx[0].astype(int)]:.2f} s to {times[-1]:.2f} s")
    fig.savefig(path)
    plt.close(fig)
    return path


def plot_sweep(values, speeds, cots, parameter: str, path) -> Path:
    path = Path(path)
    fig, ax1 = plt.subplots(figsize=(6, 3.6), constrained_layout=True)
    ax1.plot(values, speeds, "o-", color="tab:blue")
    ax1.set_xlabel(parameter)
    ax1.set_ylabel("steady speed (m/s)", color="tab:blue")
    ax2 = ax1.twinx()
    ax2.plot(values, cots, "s--", color="tab:red")
    ax2.set_ylabel("cost of transport", color="tab:red")
    fig.savefig(path)
    plt.close(fig)
    return path


def plot_convergence(n_values, deviations, wall_times, path) -> Path:
    path = Path(path)
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(8, 3.2), constrained_layout=True)
    ax1.semilogy(n_values, np.maximum(deviations, 1e-16), "o-")
    ax1.set_xlabel("Ritz modes")
    ax1.set_ylabel("max head-COM deviation (m)")
    ax2.plot(n_values, wall_times, "s-")
    ax2.set_xlabel("Ritz modes")
    ax2.set_ylabel("wall time (s)")
    fig.savefig(path)
    plt.close(fig)
    return path


def plot_tracking(traj: Trajectory, v_ref: float, path) -> Path:
    path = Path(path)
    fig, (ax1, ax2) = plt.subplots(2, 1, sharex=True, figsize=(7, 4.6),
                                   constrained_layout=True)
    ax1.plot(traj.times, traj.v_inst, lw=0.7, alpha=0.5, label="instantaneous")
    ax1.plot(traj.times, traj.v_filt, lw=1.6, label="filtered")
    ax1.axhline(v_ref, color="k", ls="--", lw=1.0, label="reference")
    ax1.set_ylabel("speed (m/s)")
    ax1.legend(frameon=False, fontsize=8)
    ax2.plot(traj.times, traj.f_cmd, lw=1.2, color="tab:green")
    ax2.set_ylabel("commanded frequency (Hz)")
    ax2.set_xlabel("time (s)")
    fig.savefig(path)
    plt.close(fig)
    return path
