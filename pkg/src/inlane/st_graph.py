"""Path-time obstacle handling.

Predicted obstacle footprints are projected onto the guide line once per
time step, yielding blocked arc-length intervals. A drivable corridor
(one [s_min, s_max] per step) is then carved out of the free gaps with a
constant-velocity predictor choosing between them; on ambiguity the gap
below the obstacle is preferred (yield rather than overtake).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .frenet import LongitudinalState, project_with_distance
from .smoother import GuideLine


class InfeasibleCorridor(RuntimeError):
    """Every reachable gap is blocked at some time step."""

    def __init__(self, time_index: int, t: float, detail: str = ""):
        msg = f"no drivable corridor at time step {time_index} (t={t:.2f} s)"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)
        self.time_index = time_index
        self.t = t


@dataclass(frozen=True)
class ObstaclePrediction:
    """Rectangular footprint moving along a predicted trajectory.

    ``trajectory`` rows are (t, x, y, heading); times must be
    non-decreasing. Outside the predicted time span the obstacle is
    treated as absent.
    """

    obstacle_id: str
    length: float
    width: float
    trajectory: NDArray

    def __post_init__(self):
        traj = np.asarray(self.trajectory, dtype=float)
        if traj.ndim != 2 or traj.shape[1] != 4 or traj.shape[0] < 1:
            raise ValueError(
                f"obstacle {self.obstacle_id}: trajectory must be (k, 4) with k >= 1"
            )
        if np.any(np.diff(traj[:, 0]) < 0.0):
            raise ValueError(f"obstacle {self.obstacle_id}: times must be non-decreasing")
        if self.length <= 0.0 or self.width <= 0.0:
            raise ValueError(f"obstacle {self.obstacle_id}: footprint must be positive")
        object.__setattr__(self, "trajectory", traj)


@dataclass(frozen=True)
class STObstacle:
    """Blocked arc-length interval per discrete time step."""

    obstacle_id: str
    samples: tuple  # (time_index, t, s_lo, s_hi) per step where present

    def blocked_at(self, time_index: int):
        for idx, _, lo, hi in self.samples:
            if idx == time_index:
                return (lo, hi)
        return None


@dataclass(frozen=True)
class FreeRegionProfile:
    """Chosen corridor: arrays of s_min/s_max, one entry per time step."""

    dt: float
    s_min: NDArray
    s_max: NDArray

    def __post_init__(self):
        if self.s_min.shape != self.s_max.shape:
            raise ValueError("corridor bound arrays must match in shape")
        if np.any(self.s_min > self.s_max + 1e-12):
            raise ValueError("corridor lower bound exceeds upper bound")

    def __len__(self) -> int:
        return len(self.s_min)


def _interpolate_pose(traj: NDArray, t: float):
    """Linear pose interpolation; None outside the predicted span."""
    times = traj[:, 0]
    eps = 1e-9
    if t < times[0] - eps or t > times[-1] + eps:
        return None
    if len(times) == 1:
        return traj[0, 1], traj[0, 2], traj[0, 3]
    j = int(np.clip(np.searchsorted(times, t, side="right") - 1, 0, len(times) - 2))
    t0, t1 = times[j], times[j + 1]
    frac = 0.0 if t1 <= t0 else float(np.clip((t - t0) / (t1 - t0), 0.0, 1.0))
    x = traj[j, 1] + frac * (traj[j + 1, 1] - traj[j, 1])
    y = traj[j, 2] + frac * (traj[j + 1, 2] - traj[j, 2])
    dh = (traj[j + 1, 3] - traj[j, 3] + math.pi) % (2.0 * math.pi) - math.pi
    return x, y, traj[j, 3] + frac * dh


def footprint_corners(x: float, y: float, heading: float,
                      length: float, width: float) -> NDArray:
    c, s = math.cos(heading), math.sin(heading)
    hl, hw = 0.5 * length, 0.5 * width
    out = np.empty((4, 2))
    for k, (dx, dy) in enumerate(((hl, hw), (hl, -hw), (-hl, -hw), (-hl, hw))):
        out[k, 0] = x + c * dx - s * dy
        out[k, 1] = y + s * dx + c * dy
    return out


def project_obstacle(
    line: GuideLine,
    obstacle: ObstaclePrediction,
    dt: float,
    horizon: float,
    lateral_threshold: float,
    ego_half_length: float,
) -> STObstacle:
    """Blocked [s_lo, s_hi] per time step for one obstacle.

    Per step the footprint corners are projected onto the line; corners
    farther than ``lateral_threshold`` laterally are ignored. If any
    corner is relevant, the interval spans the projected corners inflated
    by the ego half-length on both sides. Steps where the obstacle is
    absent or entirely too far laterally produce no sample.
    """
    n = int(round(horizon / dt)) + 1
    samples = []
    for i in range(n):
        t = i * dt
        pose = _interpolate_pose(obstacle.trajectory, t)
        if pose is None:
            continue
        corners = footprint_corners(pose[0], pose[1], pose[2],
                                    obstacle.length, obstacle.width)
        proj = []
        for cx, cy in corners:
            s_c, dist = project_with_distance(line, cx, cy)
            if dist <= lateral_threshold:
                proj.append(s_c)
        if proj:
            samples.append((i, t, min(proj) - ego_half_length,
                            max(proj) + ego_half_length))
    return STObstacle(obstacle_id=obstacle.obstacle_id, samples=tuple(samples))


def reach_envelope(init: LongitudinalState, v_max: float, dt: float, n: int) -> NDArray:
    """Farthest reachable arc length per step under the speed limit alone."""
    return init.s + v_max * dt * np.arange(n)


def _merge(intervals):
    merged = []
    for lo, hi in sorted(intervals):
        if merged and lo <= merged[-1][1]:
            merged[-1] = (merged[-1][0], max(merged[-1][1], hi))
        else:
            merged.append((lo, hi))
    return merged


def select_free_region(
    st_obstacles,
    init: LongitudinalState,
    v_max: float,
    dt: float,
    n: int,
    margin: float,
    extended_length: float,
) -> FreeRegionProfile:
    """Pick one free gap per time step and shrink it by the safety margin.

    Gaps at each step are first restricted to those connected to the
    previous step's corridor row: the vehicle moves forward at most
    v_max*dt per step and never backward, so a gap it cannot have
    reached (for example the far side of a lead vehicle) is not a valid
    continuation even when a constant-velocity prediction lands there.
    Among the connected gaps, the prediction s0 + v0*t (clamped to the
    reachability envelope) selects one; when the prediction is blocked
    the gap below is preferred. The margin is applied only on gap edges
    that face an obstacle; if the margins cross, the corridor collapses
    to the yield boundary. Raises :class:`InfeasibleCorridor` when no
    gap is left.
    """
    obstacles = sorted(st_obstacles, key=lambda o: o.obstacle_id)
    reach = reach_envelope(init, v_max, dt, n)
    s_min = np.empty(n)
    s_max = np.empty(n)
    for i in range(n):
        t = i * dt
        blocked = _merge(
            [
                (max(0.0, lo), min(hi, extended_length))
                for obs in obstacles
                for sample in obs.samples
                if sample[0] == i
                for lo, hi in [(sample[2], sample[3])]
                if hi > 0.0 and lo < extended_length
            ]
        )
        # Free gaps within [0, extended_length]; remember which edges abut
        # an obstacle (only those get the margin).
        gaps = []
        cursor = 0.0
        lo_is_obstacle = False
        for lo, hi in blocked:
            if lo > cursor:
                gaps.append((cursor, lo, lo_is_obstacle, True))
            cursor = max(cursor, hi)
            lo_is_obstacle = True
        if cursor < extended_length:
            gaps.append((cursor, extended_length, lo_is_obstacle, False))

        candidates = [g for g in gaps if g[0] <= reach[i] + 1e-9 and g[1] > g[0]]
        if i:
            candidates = [
                g for g in candidates
                if g[0] <= s_max[i - 1] + v_max * dt + 1e-9
                and g[1] >= s_min[i - 1] - 1e-9
            ]
        if not candidates:
            raise InfeasibleCorridor(i, t, "all reachable gaps blocked")

        s_hat = min(max(init.s + init.v * t, 0.0), reach[i])
        chosen = None
        for g in candidates:
            if g[0] - 1e-9 <= s_hat <= g[1] + 1e-9:
                chosen = g
                break
        if chosen is None:
            below = [g for g in candidates if g[1] < s_hat]
            chosen = below[-1] if below else candidates[0]

        lo, hi, lo_obs, hi_obs = chosen
        lo_m = lo + margin if lo_obs else lo
        hi_m = hi - margin if hi_obs else hi
        if lo_m > hi_m:
            # Margins cross: sit at the yield boundary (respect the front
            # obstacle's margin, clamped into the raw gap).
            lo_m = hi_m = max(lo, hi_m)
        s_min[i] = lo_m
        s_max[i] = hi_m
    return FreeRegionProfile(dt=dt, s_min=s_min, s_max=s_max)
