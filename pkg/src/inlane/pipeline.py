"""End-to-end composition: smooth, build the corridor, plan.

Kept separate from the CLI so library users and tests can run the same
pipeline without touching argv handling.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from numpy.typing import NDArray

from .audit import ConstraintAudit, audit_trajectory
from .scenario_io import Scenario
from .smoother import GuideLine, SmoothResult, smooth_guideline
from .speed_optimizer import PlanResult, plan
from .st_graph import FreeRegionProfile, project_obstacle, select_free_region


@dataclass
class SmoothOutcome:
    raw_points: NDArray
    result: SmoothResult

    @property
    def line(self) -> GuideLine:
        return self.result.line


@dataclass
class PlanOutcome:
    raw_points: NDArray
    smooth: SmoothResult
    st_obstacles: tuple
    corridor: FreeRegionProfile
    plan: PlanResult
    audit: ConstraintAudit

    @property
    def line(self) -> GuideLine:
        return self.smooth.line


def corridor_extent(line: GuideLine, limits_v_max: float, horizon: float) -> float:
    """Upper position bound for the corridor: the smoothed length plus the
    farthest overrun onto the straight extension the speed limit allows."""
    return line.total_length + limits_v_max * horizon


def build_corridor(scenario: Scenario, line: GuideLine):
    """Project every obstacle and select one free region per time step."""
    n = scenario.n_steps()
    st_obstacles = tuple(
        project_obstacle(
            line, ob, scenario.dt, scenario.horizon,
            scenario.lateral_threshold, 0.5 * scenario.ego_length,
        )
        for ob in scenario.obstacles
    )
    corridor = select_free_region(
        st_obstacles, scenario.init, scenario.limits.v_max, scenario.dt, n,
        scenario.safety_margin,
        corridor_extent(line, scenario.limits.v_max, scenario.horizon),
    )
    return st_obstacles, corridor


def run_smooth(scenario: Scenario) -> SmoothOutcome:
    raw = scenario.raw_points()
    result = smooth_guideline(raw, scenario.smoother)
    return SmoothOutcome(raw_points=raw, result=result)


def run_plan(scenario: Scenario) -> PlanOutcome:
    smooth = run_smooth(scenario)
    st_obstacles, corridor = build_corridor(scenario, smooth.line)
    planned = plan(
        smooth.line, corridor, scenario.init, scenario.task, scenario.limits,
        scenario.dt,
    )
    audit = audit_trajectory(
        planned.trajectory, smooth.line, scenario.limits,
        corridor=corridor, st_obstacles=st_obstacles,
    )
    return PlanOutcome(
        raw_points=smooth.raw_points,
        smooth=smooth.result,
        st_obstacles=st_obstacles,
        corridor=corridor,
        plan=planned,
        audit=audit,
    )
