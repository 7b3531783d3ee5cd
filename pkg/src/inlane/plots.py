"""Figure rendering for CLI reports (headless, files only)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
from numpy.typing import NDArray

from .frenet import kappa_at_many, points_at_many
from .smoother import GuideLine
from .speed_optimizer import DynamicLimits, Trajectory
from .st_graph import FreeRegionProfile


def save_smoothing_figure(raw_points: NDArray, line: GuideLine, path) -> None:
    """Overview panel: smoothed path vs raw points, heading and curvature."""
    s = np.linspace(0.0, line.total_length, 400)
    x, y, theta, _ = points_at_many(line, s)
    kap, _ = kappa_at_many(line, s)

    fig, axes = plt.subplots(1, 3, figsize=(15, 4.5))
    ax = axes[0]
    ax.plot(x, y, "-", color="tab:blue", label="smoothed")
    ax.plot(raw_points[:, 0], raw_points[:, 1], "x", color="tab:red",
            label="raw points")
    ax.plot(line.knots[:, 0], line.knots[:, 1], ".", color="tab:blue",
            label="knots")
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    ax.set_aspect("equal", adjustable="datalim")
    ax.legend(loc="best", fontsize=8)
    ax.set_title("guide line")

    axes[1].plot(s, theta, color="tab:green")
    axes[1].set_xlabel("s [m]")
    axes[1].set_ylabel("heading [rad]")
    axes[1].set_title("heading")

    axes[2].plot(s, kap, color="tab:purple")
    axes[2].set_xlabel("s [m]")
    axes[2].set_ylabel("curvature [1/m]")
    axes[2].set_title("curvature")

    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)


def save_trajectory_figures(
    trajectory: Trajectory,
    corridor: FreeRegionProfile,
    limits: DynamicLimits,
    line: GuideLine,
    out_dir,
) -> list:
    """Three report figures: position-time (with the free corridor), speed
    (with the hard cap and the curvature-implied ceiling) and acceleration
    (with its bounds). Returns the written paths."""
    out = Path(out_dir)
    t = trajectory.times
    written = []

    fig, ax = plt.subplots(figsize=(7, 4.5))
    upper = np.minimum(corridor.s_max, float(trajectory.s[-1]) * 1.15 + 10.0)
    ax.fill_between(t, corridor.s_min, upper, color="tab:green", alpha=0.15,
                    label="free region")
    ax.plot(t, trajectory.s, color="tab:blue", label="s(t)")
    ax.set_xlabel("t [s]")
    ax.set_ylabel("s [m]")
    ax.legend(loc="best", fontsize=8)
    ax.set_title("position")
    fig.tight_layout()
    p = out / "position_time.png"
    fig.savefig(p, dpi=110)
    plt.close(fig)
    written.append(p)

    kap, _ = kappa_at_many(line, trajectory.s)
    ceiling = np.sqrt(limits.centripetal_max / np.maximum(np.abs(kap), 1e-9))
    fig, ax = plt.subplots(figsize=(7, 4.5))
    ax.plot(t, trajectory.v, color="tab:blue", label="v(t)")
    ax.axhline(limits.v_max, color="tab:red", linestyle="--", linewidth=1,
               label="v_max")
    ax.plot(t, np.minimum(ceiling, limits.v_max), color="tab:orange",
            linestyle=":", linewidth=1, label="curvature ceiling")
    ax.set_xlabel("t [s]")
    ax.set_ylabel("v [m/s]")
    ax.legend(loc="best", fontsize=8)
    ax.set_title("speed")
    fig.tight_layout()
    p = out / "velocity_time.png"
    fig.savefig(p, dpi=110)
    plt.close(fig)
    written.append(p)

    fig, ax = plt.subplots(figsize=(7, 4.5))
    ax.plot(t, trajectory.a, color="tab:blue", label="a(t)")
    ax.axhline(limits.a_max, color="tab:red", linestyle="--", linewidth=1)
    ax.axhline(limits.a_min, color="tab:red", linestyle="--", linewidth=1,
               label="bounds")
    ax.set_xlabel("t [s]")
    ax.set_ylabel("a [m/s²]")
    ax.legend(loc="best", fontsize=8)
    ax.set_title("acceleration")
    fig.tight_layout()
    p = out / "acceleration_time.png"
    fig.savefig(p, dpi=110)
    plt.close(fig)
    written.append(p)

    return written
