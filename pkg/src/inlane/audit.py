"""Post-hoc constraint auditing.

Recomputes every constraint family from the raw (s, v, a) triples of a
trajectory, never trusting residuals reported by the optimizer: jerks are
re-differenced from accelerations, centripetal acceleration is recomputed
from the guide line, continuity is re-checked by propagating each point
to its successor, and the follow gap is measured against the blocked
intervals themselves rather than the chosen corridor.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .frenet import kappa_at_many
from .smoother import GuideLine
from .speed_optimizer import DynamicLimits, Trajectory, propagate
from .st_graph import FreeRegionProfile


@dataclass(frozen=True)
class AuditRow:
    family: str
    max_residual: float


@dataclass
class ConstraintAudit:
    rows: list[AuditRow]
    min_gap: Optional[float] = None

    def residual(self, family: str) -> float:
        for row in self.rows:
            if row.family == family:
                return row.max_residual
        raise KeyError(family)

    @property
    def max_residual(self) -> float:
        return max(row.max_residual for row in self.rows)

    def to_csv(self) -> str:
        lines = ["family,max_residual"]
        for row in self.rows:
            lines.append(f"{row.family},{row.max_residual:.9g}")
        if self.min_gap is not None:
            lines.append(f"min_gap,{self.min_gap:.9g}")
        return "\n".join(lines) + "\n"


def audit_trajectory(
    trajectory: Trajectory,
    line: GuideLine,
    limits: DynamicLimits,
    corridor: Optional[FreeRegionProfile] = None,
    st_obstacles=(),
) -> ConstraintAudit:
    """Maximum violation per constraint family, all recomputed from raw data.

    When ``st_obstacles`` is given, ``min_gap`` is the smallest clearance
    between the ego position and any blocked interval over all time steps
    where one exists (positive means clear).
    """
    s, v, a, dt = trajectory.s, trajectory.v, trajectory.a, trajectory.dt
    n = len(s)

    vel = float(np.max(np.maximum(-v, v - limits.v_max), initial=0.0))
    acc = float(np.max(np.maximum(limits.a_min - a, a - limits.a_max), initial=0.0))

    jerks = np.diff(a) / dt
    jrk = float(np.max(np.maximum(limits.jerk_min - jerks, jerks - limits.jerk_max),
                       initial=0.0))

    kap, _ = kappa_at_many(line, s)
    ac = v * v * kap
    cen = float(np.max(np.abs(ac) - limits.centripetal_max, initial=0.0))
    cen = max(cen, 0.0)

    cont = 0.0
    for i in range(n - 1):
        nxt = propagate(trajectory.state_at(i), float(jerks[i]), dt)
        cont = max(cont,
                   abs(nxt.s - s[i + 1]),
                   abs(nxt.v - v[i + 1]),
                   abs(nxt.a - a[i + 1]))

    rows = [
        AuditRow("velocity", vel),
        AuditRow("acceleration", acc),
        AuditRow("jerk", jrk),
        AuditRow("centripetal", cen),
        AuditRow("continuity", cont),
    ]
    if corridor is not None:
        cor = float(np.max(np.maximum(corridor.s_min - s, s - corridor.s_max),
                           initial=0.0))
        rows.append(AuditRow("corridor", cor))

    min_gap = None
    for obs in st_obstacles:
        for idx, _, lo, hi in obs.samples:
            if idx >= n:
                continue
            pos = s[idx]
            gap = lo - pos if pos < lo else (pos - hi if pos > hi else -min(pos - lo, hi - pos))
            min_gap = gap if min_gap is None else min(min_gap, gap)
    return ConstraintAudit(rows=rows, min_gap=min_gap)
