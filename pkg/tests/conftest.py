"""Shared fixtures: scenario files, smoothed lines, planned trajectories.

Smoothing the U-turn and solving the three planning tasks are the
expensive parts of the suite, so each runs once per session and the
results are shared across test modules. The cruise and stop scenarios use
the same seeded U-turn generator, so they share one smoothed line.
"""

from __future__ import annotations

import dataclasses
from pathlib import Path

import numpy as np
import pytest

from inlane.audit import ConstraintAudit, audit_trajectory
from inlane.pipeline import build_corridor
from inlane.scenario_io import Scenario, load_scenario
from inlane.smoother import GuideLine, SmoothResult, smooth_guideline
from inlane.speed_optimizer import WEIGHT_PRESETS, PlanResult, Trajectory, plan
from inlane.st_graph import FreeRegionProfile

SCENARIO_DIR = Path(__file__).resolve().parent.parent / "scenarios"


@dataclasses.dataclass
class SolvedScenario:
    """A planned scenario bundled with everything the tests inspect."""

    scenario: Scenario
    line: GuideLine
    st_obstacles: tuple
    corridor: FreeRegionProfile
    result: PlanResult
    audit: ConstraintAudit

    @property
    def trajectory(self) -> Trajectory:
        return self.result.trajectory


def solve_scenario(scenario: Scenario, line: GuideLine) -> SolvedScenario:
    st_obstacles, corridor = build_corridor(scenario, line)
    result = plan(line, corridor, scenario.init, scenario.task,
                  scenario.limits, scenario.dt)
    report = audit_trajectory(result.trajectory, line, scenario.limits,
                              corridor=corridor, st_obstacles=st_obstacles)
    return SolvedScenario(scenario=scenario, line=line,
                          st_obstacles=st_obstacles, corridor=corridor,
                          result=result, audit=report)


@pytest.fixture(scope="session")
def cruise_scenario() -> Scenario:
    return load_scenario(SCENARIO_DIR / "uturn_cruise.yaml")


@pytest.fixture(scope="session")
def stop_scenario() -> Scenario:
    return load_scenario(SCENARIO_DIR / "uturn_stop.yaml")


@pytest.fixture(scope="session")
def follow_scenario() -> Scenario:
    return load_scenario(SCENARIO_DIR / "straight_follow.yaml")


@pytest.fixture(scope="session")
def uturn_raw(cruise_scenario) -> np.ndarray:
    return cruise_scenario.raw_points()


@pytest.fixture(scope="session")
def uturn_smooth(cruise_scenario, uturn_raw) -> SmoothResult:
    return smooth_guideline(uturn_raw, cruise_scenario.smoother)


@pytest.fixture(scope="session")
def uturn_line(uturn_smooth) -> GuideLine:
    return uturn_smooth.line


@pytest.fixture(scope="session")
def straight_smooth(follow_scenario) -> SmoothResult:
    return smooth_guideline(follow_scenario.raw_points(),
                            follow_scenario.smoother)


@pytest.fixture(scope="session")
def smoothed_straight_line(straight_smooth) -> GuideLine:
    return straight_smooth.line


@pytest.fixture(scope="session")
def cruise_solved(cruise_scenario, uturn_line) -> SolvedScenario:
    return solve_scenario(cruise_scenario, uturn_line)


@pytest.fixture(scope="session")
def sporty_solved(cruise_scenario, uturn_line) -> SolvedScenario:
    task = dataclasses.replace(cruise_scenario.task,
                               weights=WEIGHT_PRESETS["sporty"])
    scenario = dataclasses.replace(cruise_scenario, name="uturn_sporty",
                                   task=task)
    return solve_scenario(scenario, uturn_line)


@pytest.fixture(scope="session")
def stop_solved(stop_scenario, uturn_line) -> SolvedScenario:
    return solve_scenario(stop_scenario, uturn_line)


@pytest.fixture(scope="session")
def follow_solved(follow_scenario, smoothed_straight_line) -> SolvedScenario:
    return solve_scenario(follow_scenario, smoothed_straight_line)
