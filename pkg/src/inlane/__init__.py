"""Two-phase in-lane trajectory optimization.

Phase I smooths noisy lane waypoints into a guide line built from quintic
spiral pieces with continuous heading, curvature and curvature rate.
Phase II plans a longitudinal trajectory along that line on a fixed time
grid, subject to speed, acceleration, jerk, centripetal and path-time
corridor constraints.
"""

__version__ = "0.1.0"

from .audit import ConstraintAudit, audit_trajectory
from .frenet import (
    CartesianState,
    LongitudinalState,
    ProjectionError,
    kappa_at,
    point_at,
    project,
    to_cartesian,
)
from .geometry import SpiralCurve, fit_quintic_spiral, integrate_position
from .nlp_solver import (
    NlpProblem,
    SolveFailure,
    SolveOptions,
    SolveReport,
    check_gradient,
    solve,
)
from .pipeline import PlanOutcome, SmoothOutcome, run_plan, run_smooth
from .scenario_io import Scenario, ScenarioError, generate_uturn, load_scenario
from .smoother import (
    GuideLine,
    SmootherConfig,
    SmoothingFailed,
    SmoothResult,
    smooth_guideline,
)
from .speed_optimizer import (
    DynamicLimits,
    PlanResult,
    TaskSpec,
    Trajectory,
    WEIGHT_PRESETS,
    Weights,
    plan,
    propagate,
)
from .st_graph import (
    FreeRegionProfile,
    InfeasibleCorridor,
    ObstaclePrediction,
    STObstacle,
    project_obstacle,
    select_free_region,
)

__all__ = [
    "CartesianState",
    "ConstraintAudit",
    "DynamicLimits",
    "FreeRegionProfile",
    "GuideLine",
    "InfeasibleCorridor",
    "LongitudinalState",
    "NlpProblem",
    "ObstaclePrediction",
    "PlanOutcome",
    "PlanResult",
    "ProjectionError",
    "STObstacle",
    "Scenario",
    "ScenarioError",
    "SmoothResult",
    "SmootherConfig",
    "SmoothingFailed",
    "SolveFailure",
    "SolveOptions",
    "SolveReport",
    "SpiralCurve",
    "TaskSpec",
    "Trajectory",
    "WEIGHT_PRESETS",
    "Weights",
    "audit_trajectory",
    "check_gradient",
    "fit_quintic_spiral",
    "generate_uturn",
    "integrate_position",
    "kappa_at",
    "load_scenario",
    "plan",
    "point_at",
    "project",
    "project_obstacle",
    "propagate",
    "run_plan",
    "run_smooth",
    "select_free_region",
    "smooth_guideline",
    "solve",
    "to_cartesian",
]
