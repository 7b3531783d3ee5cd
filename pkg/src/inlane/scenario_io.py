"""Scenario files and delimited outputs.

Scenarios are versioned YAML documents validated strictly: unknown keys
are rejected and every error names the offending field path. A scenario
carries the raw guide line (either literal points or a U-turn generator
block resolved with the scenario seed), the smoothing config, obstacle
predictions, the initial state, the task, dynamic limits and the time
grid.

CSV output is deterministic: fixed headers, 9 significant digits,
trailing newline, so re-serializing a parsed file reproduces it byte for
byte.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import yaml
from numpy.typing import NDArray

from .frenet import LongitudinalState, kappa_at_many, points_at_many
from .smoother import GuideLine, SmootherConfig
from .speed_optimizer import (
    DynamicLimits,
    TaskSpec,
    Trajectory,
    WEIGHT_PRESETS,
    Weights,
)
from .st_graph import ObstaclePrediction

SCENARIO_VERSION = 1

TRAJECTORY_HEADER = "t,s,v,a,jerk,x,y,theta,kappa,a_c"
GUIDELINE_HEADER = "s,x,y,theta,kappa,dkappa"


class ScenarioError(ValueError):
    """Malformed scenario content; ``field`` is the dotted path."""

    def __init__(self, field_path: str, message: str):
        super().__init__(f"{field_path}: {message}")
        self.field = field_path


@dataclass(frozen=True)
class UturnSpec:
    """Generator block: straight lead-in, circular arc, straight lead-out."""

    radius: float
    sweep_deg: float
    n_points: int
    noise_radius: float
    total_length: float = 150.0


@dataclass(frozen=True)
class PointsSpec:
    points: tuple


@dataclass
class Scenario:
    name: str
    dt: float
    horizon: float
    seed: int
    guideline: object
    smoother: SmootherConfig
    init: LongitudinalState
    task: TaskSpec
    limits: DynamicLimits
    obstacles: tuple
    ego_length: float
    ego_width: float
    safety_margin: float
    lateral_threshold: float

    def raw_points(self) -> NDArray:
        if isinstance(self.guideline, PointsSpec):
            return np.asarray(self.guideline.points, dtype=float)
        g = self.guideline
        return generate_uturn(
            g.radius, g.sweep_deg, g.n_points, g.noise_radius,
            seed=self.seed, total_length=g.total_length,
        )

    def n_steps(self) -> int:
        return int(round(self.horizon / self.dt)) + 1

    def __eq__(self, other):
        if not isinstance(other, Scenario):
            return NotImplemented
        return scenario_to_dict(self) == scenario_to_dict(other)


def generate_uturn(
    radius: float,
    sweep_deg: float,
    n_points: int,
    noise_radius: float,
    seed: int = 0,
    total_length: float = 150.0,
) -> NDArray:
    """Equally spaced points along lead-in + arc + lead-out, perturbed.

    The arc turns left through ``sweep_deg`` at the given radius; straight
    segments before and after split the remaining length evenly. Each
    point is displaced uniformly within a disk of ``noise_radius``
    (deterministic for a given seed).
    """
    if radius <= 0.0 or n_points < 2:
        raise ValueError("radius must be positive and n_points >= 2")
    sweep = math.radians(sweep_deg)
    arc_len = radius * sweep
    if arc_len >= total_length:
        raise ValueError("arc longer than the requested total length")
    lead = 0.5 * (total_length - arc_len)

    u = np.linspace(0.0, total_length, n_points)
    pts = np.empty((n_points, 2))
    for k, uk in enumerate(u):
        if uk <= lead:
            pts[k] = (uk, 0.0)
        elif uk <= lead + arc_len:
            phi = (uk - lead) / radius
            pts[k] = (lead + radius * math.sin(phi), radius * (1.0 - math.cos(phi)))
        else:
            suffix = uk - lead - arc_len
            end_x = lead + radius * math.sin(sweep)
            end_y = radius * (1.0 - math.cos(sweep))
            pts[k] = (end_x + suffix * math.cos(sweep),
                      end_y + suffix * math.sin(sweep))
    if noise_radius > 0.0:
        rng = np.random.default_rng(seed)
        r = noise_radius * np.sqrt(rng.uniform(size=n_points))
        ang = rng.uniform(0.0, 2.0 * math.pi, size=n_points)
        pts[:, 0] += r * np.cos(ang)
        pts[:, 1] += r * np.sin(ang)
    return pts


# --- strict schema walking -------------------------------------------------

def _check_keys(d: dict, allowed: set, path: str) -> None:
    for key in d:
        if key not in allowed:
            raise ScenarioError(f"{path}.{key}" if path else str(key),
                                "unknown key")


def _get_number(d: dict, key: str, path: str, default=None, minimum=None,
                maximum=None, strict_min=False, required=False) -> Optional[float]:
    if key not in d:
        if required:
            raise ScenarioError(f"{path}.{key}" if path else key, "missing required field")
        return default
    val = d[key]
    where = f"{path}.{key}" if path else key
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ScenarioError(where, f"expected a number, got {val!r}")
    val = float(val)
    if minimum is not None:
        if strict_min and val <= minimum:
            raise ScenarioError(where, f"must be > {minimum}, got {val}")
        if not strict_min and val < minimum:
            raise ScenarioError(where, f"must be >= {minimum}, got {val}")
    if maximum is not None and val > maximum:
        raise ScenarioError(where, f"must be <= {maximum}, got {val}")
    return val


def _get_int(d: dict, key: str, path: str, default=None, minimum=None,
             required=False) -> Optional[int]:
    if key not in d:
        if required:
            raise ScenarioError(f"{path}.{key}" if path else key, "missing required field")
        return default
    val = d[key]
    where = f"{path}.{key}" if path else key
    if isinstance(val, bool) or not isinstance(val, int):
        raise ScenarioError(where, f"expected an integer, got {val!r}")
    if minimum is not None and val < minimum:
        raise ScenarioError(where, f"must be >= {minimum}, got {val}")
    return val


def _parse_guideline(d: dict) -> object:
    if not isinstance(d, dict):
        raise ScenarioError("guideline", "expected a mapping")
    _check_keys(d, {"points", "uturn"}, "guideline")
    if ("points" in d) == ("uturn" in d):
        raise ScenarioError("guideline", "give exactly one of 'points' or 'uturn'")
    if "points" in d:
        pts = d["points"]
        if not isinstance(pts, list) or len(pts) < 2:
            raise ScenarioError("guideline.points", "need a list of at least 2 points")
        out = []
        for i, p in enumerate(pts):
            if (not isinstance(p, list)) or len(p) != 2 or any(
                    isinstance(c, bool) or not isinstance(c, (int, float)) for c in p):
                raise ScenarioError(f"guideline.points[{i}]", f"expected [x, y], got {p!r}")
            out.append((float(p[0]), float(p[1])))
        return PointsSpec(points=tuple(out))
    u = d["uturn"]
    if not isinstance(u, dict):
        raise ScenarioError("guideline.uturn", "expected a mapping")
    _check_keys(u, {"radius", "sweep_deg", "n_points", "noise_radius", "total_length"},
                "guideline.uturn")
    return UturnSpec(
        radius=_get_number(u, "radius", "guideline.uturn", required=True, minimum=0.0,
                           strict_min=True),
        sweep_deg=_get_number(u, "sweep_deg", "guideline.uturn", required=True,
                              minimum=0.0, strict_min=True),
        n_points=_get_int(u, "n_points", "guideline.uturn", required=True, minimum=2),
        noise_radius=_get_number(u, "noise_radius", "guideline.uturn", default=0.0,
                                 minimum=0.0),
        total_length=_get_number(u, "total_length", "guideline.uturn", default=150.0,
                                 minimum=0.0, strict_min=True),
    )


def _parse_weights(d: Optional[dict], path: str) -> Weights:
    base = WEIGHT_PRESETS["comfortable"]
    if d is None:
        return base
    if not isinstance(d, dict):
        raise ScenarioError(path, "expected a mapping")
    names = {"accel", "jerk", "centripetal", "ref_speed",
             "target_s", "target_v", "target_a"}
    _check_keys(d, names, path)
    kwargs = {}
    for name in names:
        val = _get_number(d, name, path, default=None, minimum=0.0)
        if val is not None:
            kwargs[name] = val
    return Weights(**{**base.__dict__, **kwargs})


def _parse_task(d: dict, horizon: float) -> TaskSpec:
    if not isinstance(d, dict):
        raise ScenarioError("task", "expected a mapping")
    _check_keys(d, {"kind", "ref_speed", "target_s", "target_v", "target_a",
                    "weights", "hard_terminal", "centripetal_form"}, "task")
    kind = d.get("kind")
    if kind not in ("cruise", "stop", "follow"):
        raise ScenarioError("task.kind", f"must be cruise, stop or follow, got {kind!r}")
    hard = d.get("hard_terminal", False)
    if not isinstance(hard, bool):
        raise ScenarioError("task.hard_terminal", f"expected a boolean, got {hard!r}")
    form = d.get("centripetal_form", "squared")
    if form not in ("squared", "literal"):
        raise ScenarioError("task.centripetal_form",
                            f"must be squared or literal, got {form!r}")
    return TaskSpec(
        kind=kind,
        ref_speed=_get_number(d, "ref_speed", "task", required=True, minimum=0.0),
        horizon=horizon,
        target_s=_get_number(d, "target_s", "task"),
        target_v=_get_number(d, "target_v", "task"),
        target_a=_get_number(d, "target_a", "task"),
        weights=_parse_weights(d.get("weights"), "task.weights"),
        hard_terminal=hard,
        centripetal_form=form,
    )


def _parse_obstacles(items, path: str) -> tuple:
    if items is None:
        return ()
    if not isinstance(items, list):
        raise ScenarioError(path, "expected a list")
    out = []
    for i, ob in enumerate(items):
        p = f"{path}[{i}]"
        if not isinstance(ob, dict):
            raise ScenarioError(p, "expected a mapping")
        _check_keys(ob, {"id", "length", "width", "trajectory"}, p)
        oid = ob.get("id")
        if not isinstance(oid, str) or not oid:
            raise ScenarioError(f"{p}.id", "expected a non-empty string")
        traj = ob.get("trajectory")
        if not isinstance(traj, list) or not traj:
            raise ScenarioError(f"{p}.trajectory", "expected a non-empty list")
        rows = []
        for j, row in enumerate(traj):
            if (not isinstance(row, list)) or len(row) != 4 or any(
                    isinstance(c, bool) or not isinstance(c, (int, float)) for c in row):
                raise ScenarioError(f"{p}.trajectory[{j}]",
                                    f"expected [t, x, y, heading], got {row!r}")
            rows.append([float(c) for c in row])
        try:
            out.append(ObstaclePrediction(
                obstacle_id=oid,
                length=_get_number(ob, "length", p, required=True, minimum=0.0,
                                   strict_min=True),
                width=_get_number(ob, "width", p, required=True, minimum=0.0,
                                  strict_min=True),
                trajectory=np.array(rows),
            ))
        except ValueError as err:
            raise ScenarioError(p, str(err)) from err
    return tuple(out)


def scenario_from_dict(data: dict, name: str = "scenario") -> Scenario:
    """Validate a parsed document and build the Scenario."""
    if not isinstance(data, dict):
        raise ScenarioError("", "scenario document must be a mapping")
    top = {"version", "name", "seed", "dt", "horizon", "guideline", "smoother",
           "init", "task", "limits", "ego", "obstacles", "safety_margin",
           "lateral_threshold"}
    _check_keys(data, top, "")
    version = _get_int(data, "version", "", required=True)
    if version != SCENARIO_VERSION:
        raise ScenarioError("version",
                            f"unsupported version {version} (expected {SCENARIO_VERSION})")
    if "name" in data:
        if not isinstance(data["name"], str):
            raise ScenarioError("name", "expected a string")
        name = data["name"]

    dt = _get_number(data, "dt", "", required=True)
    if dt is None or dt <= 0.0:
        raise ScenarioError("dt", f"must be > 0, got {dt}")
    horizon = _get_number(data, "horizon", "", required=True, minimum=0.0,
                          strict_min=True)
    seed = _get_int(data, "seed", "", default=0, minimum=0)

    for req in ("guideline", "init", "task", "limits"):
        if req not in data:
            raise ScenarioError(req, "missing required section")

    guideline = _parse_guideline(data["guideline"])

    sm = data.get("smoother") or {}
    if not isinstance(sm, dict):
        raise ScenarioError("smoother", "expected a mapping")
    _check_keys(sm, {"max_deviation", "internal_points", "weight_length",
                     "weight_kappa", "weight_dkappa"}, "smoother")
    smoother = SmootherConfig(
        max_deviation=_get_number(sm, "max_deviation", "smoother", default=0.1,
                                  minimum=0.0, strict_min=True),
        internal_points=_get_int(sm, "internal_points", "smoother", default=8,
                                 minimum=1),
        weight_length=_get_number(sm, "weight_length", "smoother", default=1.0,
                                  minimum=0.0),
        weight_kappa=_get_number(sm, "weight_kappa", "smoother", default=100.0,
                                 minimum=0.0),
        weight_dkappa=_get_number(sm, "weight_dkappa", "smoother", default=1000.0,
                                  minimum=0.0),
    )

    ini = data["init"]
    if not isinstance(ini, dict):
        raise ScenarioError("init", "expected a mapping")
    _check_keys(ini, {"s", "v", "a"}, "init")
    try:
        init = LongitudinalState(
            s=_get_number(ini, "s", "init", default=0.0),
            v=_get_number(ini, "v", "init", required=True, minimum=0.0),
            a=_get_number(ini, "a", "init", default=0.0),
        )
    except ValueError as err:
        raise ScenarioError("init", str(err)) from err

    task = _parse_task(data["task"], horizon)

    lim = data["limits"]
    if not isinstance(lim, dict):
        raise ScenarioError("limits", "expected a mapping")
    _check_keys(lim, {"v_max", "a_min", "a_max", "jerk_min", "jerk_max",
                      "centripetal_max"}, "limits")
    try:
        limits = DynamicLimits(
            v_max=_get_number(lim, "v_max", "limits", default=30.0),
            a_min=_get_number(lim, "a_min", "limits", default=-4.0),
            a_max=_get_number(lim, "a_max", "limits", default=2.0),
            jerk_min=_get_number(lim, "jerk_min", "limits", default=-4.0),
            jerk_max=_get_number(lim, "jerk_max", "limits", default=4.0),
            centripetal_max=_get_number(lim, "centripetal_max", "limits", default=2.0),
        )
    except ValueError as err:
        raise ScenarioError("limits", str(err)) from err

    ego = data.get("ego") or {}
    if not isinstance(ego, dict):
        raise ScenarioError("ego", "expected a mapping")
    _check_keys(ego, {"length", "width"}, "ego")
    ego_length = _get_number(ego, "length", "ego", default=5.0, minimum=0.0,
                             strict_min=True)
    ego_width = _get_number(ego, "width", "ego", default=2.0, minimum=0.0,
                            strict_min=True)

    obstacles = _parse_obstacles(data.get("obstacles"), "obstacles")
    margin = _get_number(data, "safety_margin", "", default=5.0, minimum=0.0)
    lateral = _get_number(data, "lateral_threshold", "", default=None, minimum=0.0,
                          strict_min=True)
    if lateral is None:
        lateral = 1.75 + 0.5 * ego_width

    return Scenario(
        name=name, dt=dt, horizon=horizon, seed=seed, guideline=guideline,
        smoother=smoother, init=init, task=task, limits=limits,
        obstacles=obstacles, ego_length=ego_length, ego_width=ego_width,
        safety_margin=margin, lateral_threshold=lateral,
    )


def scenario_to_dict(sc: Scenario) -> dict:
    """Canonical dictionary form (what :func:`save_scenario` writes)."""
    d: dict = {"version": SCENARIO_VERSION, "name": sc.name, "seed": sc.seed,
               "dt": sc.dt, "horizon": sc.horizon}
    if isinstance(sc.guideline, PointsSpec):
        d["guideline"] = {"points": [[p[0], p[1]] for p in sc.guideline.points]}
    else:
        g = sc.guideline
        d["guideline"] = {"uturn": {
            "radius": g.radius, "sweep_deg": g.sweep_deg, "n_points": g.n_points,
            "noise_radius": g.noise_radius, "total_length": g.total_length}}
    d["smoother"] = {
        "max_deviation": sc.smoother.max_deviation,
        "internal_points": sc.smoother.internal_points,
        "weight_length": sc.smoother.weight_length,
        "weight_kappa": sc.smoother.weight_kappa,
        "weight_dkappa": sc.smoother.weight_dkappa,
    }
    d["init"] = {"s": sc.init.s, "v": sc.init.v, "a": sc.init.a}
    task: dict = {"kind": sc.task.kind, "ref_speed": sc.task.ref_speed}
    for key, val in (("target_s", sc.task.target_s), ("target_v", sc.task.target_v),
                     ("target_a", sc.task.target_a)):
        if val is not None:
            task[key] = val
    if sc.task.hard_terminal:
        task["hard_terminal"] = True
    if sc.task.centripetal_form != "squared":
        task["centripetal_form"] = sc.task.centripetal_form
    task["weights"] = dict(sc.task.weights.__dict__)
    d["task"] = task
    d["limits"] = {
        "v_max": sc.limits.v_max, "a_min": sc.limits.a_min, "a_max": sc.limits.a_max,
        "jerk_min": sc.limits.jerk_min, "jerk_max": sc.limits.jerk_max,
        "centripetal_max": sc.limits.centripetal_max,
    }
    d["ego"] = {"length": sc.ego_length, "width": sc.ego_width}
    if sc.obstacles:
        d["obstacles"] = [
            {"id": ob.obstacle_id, "length": ob.length, "width": ob.width,
             "trajectory": [[float(c) for c in row] for row in ob.trajectory]}
            for ob in sc.obstacles
        ]
    d["safety_margin"] = sc.safety_margin
    d["lateral_threshold"] = sc.lateral_threshold
    return d


def load_scenario(path) -> Scenario:
    """Load and strictly validate a scenario file."""
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as err:
        raise ScenarioError("", f"cannot read {p}: {err}") from err
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as err:
        raise ScenarioError("", f"invalid YAML in {p}: {err}") from err
    return scenario_from_dict(data, name=p.stem)


def save_scenario(sc: Scenario, path) -> None:
    Path(path).write_text(
        yaml.safe_dump(scenario_to_dict(sc), sort_keys=False, default_flow_style=None)
    )


# --- delimited outputs -----------------------------------------------------

def _fmt(value: float) -> str:
    return f"{value:.9g}"


def format_trajectory_csv(columns: dict) -> str:
    """Canonical CSV text for trajectory columns (deterministic bytes)."""
    names = TRAJECTORY_HEADER.split(",")
    n = len(columns[names[0]])
    lines = [TRAJECTORY_HEADER]
    for i in range(n):
        lines.append(",".join(_fmt(float(columns[name][i])) for name in names))
    return "\n".join(lines) + "\n"


def trajectory_columns(trajectory: Trajectory, line: GuideLine) -> dict:
    n = len(trajectory)
    jerk = np.zeros(n)
    jerk[: n - 1] = trajectory.jerks
    kap, _ = kappa_at_many(line, trajectory.s)
    return {
        "t": trajectory.times,
        "s": trajectory.s,
        "v": trajectory.v,
        "a": trajectory.a,
        "jerk": jerk,
        "x": np.array([st.x for st in trajectory.states]),
        "y": np.array([st.y for st in trajectory.states]),
        "theta": np.array([st.theta for st in trajectory.states]),
        "kappa": kap,
        "a_c": trajectory.v**2 * kap,
    }


def write_trajectory_csv(trajectory: Trajectory, line: GuideLine, path) -> None:
    Path(path).write_text(format_trajectory_csv(trajectory_columns(trajectory, line)))


def read_trajectory_csv(path) -> dict:
    """Parse a trajectory CSV back into column arrays (header checked)."""
    text = Path(path).read_text()
    lines = text.splitlines()
    if not lines or lines[0] != TRAJECTORY_HEADER:
        raise ValueError(f"unexpected trajectory header in {path}")
    names = TRAJECTORY_HEADER.split(",")
    rows = [[float(cell) for cell in ln.split(",")] for ln in lines[1:] if ln]
    data = np.array(rows) if rows else np.zeros((0, len(names)))
    return {name: data[:, k] for k, name in enumerate(names)}


def write_guideline_csv(line: GuideLine, path, step: float = 0.5) -> None:
    """Sampled guide line: arc length, pose, curvature and curvature rate."""
    s = np.arange(0.0, line.total_length, step)
    s = np.append(s, line.total_length)
    x, y, theta, _ = points_at_many(line, s)
    kap, dkap = kappa_at_many(line, s)
    lines = [GUIDELINE_HEADER]
    for i in range(len(s)):
        lines.append(",".join(_fmt(v) for v in
                              (s[i], x[i], y[i], theta[i], kap[i], dkap[i])))
    Path(path).write_text("\n".join(lines) + "\n")


def write_deviations_csv(raw_points: NDArray, line: GuideLine, path) -> None:
    """Knot-by-knot deviation report for a smoothing run."""
    dev = np.linalg.norm(line.knots - raw_points, axis=1)
    lines = ["knot,x_raw,y_raw,x_smoothed,y_smoothed,deviation"]
    for i in range(len(dev)):
        lines.append(",".join([str(i)] + [_fmt(v) for v in (
            raw_points[i, 0], raw_points[i, 1],
            line.knots[i, 0], line.knots[i, 1], dev[i])]))
    Path(path).write_text("\n".join(lines) + "\n")
