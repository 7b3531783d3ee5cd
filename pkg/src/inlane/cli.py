"""Command-line front end: smooth guide lines, plan trajectories, benchmark.

Exit codes are a stable contract: 0 success, 1 input problem, 2 solver
failure, 3 infeasible corridor. Verbosity comes from the INLANE_LOG
environment variable (debug/info/warning, default warning). All outputs
land under --out; the directory is probed for writability before any
work so failures leave no partial files.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import platform
import statistics
import sys
import time
from pathlib import Path

import numpy as np
import scipy
import yaml

from . import __version__
from .frenet import kappa_at_many
from .nlp_solver import SolveFailure
from .pipeline import build_corridor, run_plan, run_smooth
from .plots import save_smoothing_figure, save_trajectory_figures
from .scenario_io import (
    ScenarioError,
    scenario_from_dict,
    write_deviations_csv,
    write_guideline_csv,
    write_trajectory_csv,
)
from .smoother import SmoothingFailed, smooth_guideline
from .speed_optimizer import WEIGHT_PRESETS, plan
from .st_graph import InfeasibleCorridor

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_SOLVER = 2
EXIT_INFEASIBLE = 3

log = logging.getLogger("inlane")


class InputError(ValueError):
    pass


def _configure_logging() -> None:
    level_name = os.environ.get("INLANE_LOG", "warning").upper()
    level = getattr(logging, level_name, None)
    if not isinstance(level, int):
        level = logging.WARNING
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


def _parse_args(argv):
    parser = argparse.ArgumentParser(
        prog="inlane",
        description="Guide-line smoothing and speed planning for in-lane driving.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_out: bool):
        p.add_argument("--scenario", required=True, help="scenario YAML file")
        if needs_out:
            p.add_argument("--out", required=True, help="output directory")
        else:
            p.add_argument("--out", default=None, help="output directory (optional)")
        p.add_argument("--preset", default=None,
                       help=f"weight preset ({', '.join(sorted(WEIGHT_PRESETS))})")
        p.add_argument("--override", action="append", default=[], metavar="K=V",
                       help="override a scenario field by dotted path, repeatable")
        p.add_argument("--seed", type=int, default=None,
                       help="replace the scenario seed")

    common(sub.add_parser("smooth", help="run guide-line smoothing only"), True)
    common(sub.add_parser("plan", help="run the full planning pipeline"), True)
    bench = sub.add_parser("bench", help="time the pipeline phases")
    common(bench, False)
    bench.add_argument("--repetitions", type=int, default=5,
                       help="number of timed repetitions (default 5)")
    return parser.parse_args(argv)


def _apply_override(data: dict, spec: str) -> None:
    if "=" not in spec:
        raise InputError(f"override {spec!r} is not of the form key=value")
    key, _, raw = spec.partition("=")
    try:
        value = yaml.safe_load(raw)
    except yaml.YAMLError as err:
        raise InputError(f"override {spec!r}: unparseable value: {err}") from err
    parts = key.split(".")
    node = data
    for part in parts[:-1]:
        if isinstance(node, list):
            try:
                node = node[int(part)]
            except (ValueError, IndexError) as err:
                raise InputError(f"override {key!r}: bad list index {part!r}") from err
        elif isinstance(node, dict):
            node = node.setdefault(part, {})
        else:
            raise InputError(f"override {key!r}: {part!r} is not a section")
    last = parts[-1]
    if isinstance(node, list):
        try:
            node[int(last)] = value
        except (ValueError, IndexError) as err:
            raise InputError(f"override {key!r}: bad list index {last!r}") from err
    elif isinstance(node, dict):
        node[last] = value
    else:
        raise InputError(f"override {key!r}: cannot assign into a scalar")


def _load_scenario(args):
    path = Path(args.scenario)
    try:
        data = yaml.safe_load(path.read_text())
    except OSError as err:
        raise InputError(f"cannot read scenario: {err}") from err
    except yaml.YAMLError as err:
        raise InputError(f"invalid YAML: {err}") from err
    for spec in args.override:
        _apply_override(data, spec)
    if args.seed is not None:
        data["seed"] = args.seed
    scenario = scenario_from_dict(data, name=path.stem)
    if args.preset is not None:
        if args.preset not in WEIGHT_PRESETS:
            raise InputError(
                f"unknown preset {args.preset!r}; "
                f"choose from {', '.join(sorted(WEIGHT_PRESETS))}"
            )
        scenario.task = dataclasses.replace(
            scenario.task, weights=WEIGHT_PRESETS[args.preset]
        )
    return scenario


def _ensure_out_dir(out) -> Path:
    path = Path(out)
    try:
        path.mkdir(parents=True, exist_ok=True)
        probe = path / ".writable_probe"
        probe.write_text("")
        probe.unlink()
    except OSError as err:
        raise InputError(f"output directory {path} is not writable: {err}") from err
    return path


def _write_manifest(out: Path, args) -> None:
    manifest = {
        "subcommand": args.command,
        "scenario": str(Path(args.scenario).resolve()),
        "out_dir": str(out.resolve()),
        "preset": args.preset,
        "overrides": list(args.override),
        "seed": args.seed,
        "version": __version__,
    }
    (out / "run_manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")


def _max_curvature(line) -> float:
    s = np.linspace(0.0, line.total_length, max(int(line.total_length * 4), 50))
    kap, _ = kappa_at_many(line, s)
    return float(np.max(np.abs(kap)))


def _cmd_smooth(args) -> int:
    out = _ensure_out_dir(args.out)
    scenario = _load_scenario(args)
    outcome = run_smooth(scenario)
    line, result = outcome.line, outcome.result

    write_guideline_csv(line, out / "guideline.csv")
    write_deviations_csv(outcome.raw_points, line, out / "deviations.csv")
    save_smoothing_figure(outcome.raw_points, line, out / "smoothing.png")
    _write_manifest(out, args)

    print(f"smoothing converged in {result.report.iterations} outer iterations "
          f"(objective {result.report.objective:.6g})")
    print(f"max knot deviation: {result.deviations.max():.6f} m "
          f"(budget {scenario.smoother.max_deviation:g} m)")
    print(f"max |curvature|: {_max_curvature(line):.6f} 1/m")
    print(f"total length: {line.total_length:.3f} m")
    print(f"outputs in {out}")
    return EXIT_OK


def _cmd_plan(args) -> int:
    out = _ensure_out_dir(args.out)
    scenario = _load_scenario(args)
    outcome = run_plan(scenario)
    line = outcome.line
    trajectory = outcome.plan.trajectory

    write_guideline_csv(line, out / "guideline.csv")
    write_deviations_csv(outcome.raw_points, line, out / "deviations.csv")
    write_trajectory_csv(trajectory, line, out / "trajectory.csv")
    (out / "audit.csv").write_text(outcome.audit.to_csv())
    save_smoothing_figure(outcome.raw_points, line, out / "smoothing.png")
    save_trajectory_figures(trajectory, outcome.corridor, scenario.limits, line, out)
    _write_manifest(out, args)

    report = outcome.plan.report
    print(f"smoothing: max knot deviation {outcome.smooth.deviations.max():.6f} m")
    print(f"plan converged in {report.iterations} outer iterations "
          f"(objective {report.objective:.6g})")
    final = trajectory.state_at(len(trajectory) - 1)
    print(f"final state: s={final.s:.3f} m, v={final.v:.3f} m/s, a={final.a:.3f} m/s^2")
    for row in outcome.audit.rows:
        print(f"audit {row.family}: max residual {row.max_residual:.3g}")
    if outcome.audit.min_gap is not None:
        print(f"audit min gap to obstacles: {outcome.audit.min_gap:.3f} m")
    print(f"outputs in {out}")
    return EXIT_OK


def _cmd_bench(args) -> int:
    out = _ensure_out_dir(args.out) if args.out else None
    if args.repetitions < 1:
        raise InputError("--repetitions must be at least 1")
    scenario = _load_scenario(args)

    raw = scenario.raw_points()
    times: dict[str, list[float]] = {"smooth": [], "corridor": [], "plan": []}
    for _ in range(args.repetitions):
        t0 = time.perf_counter()
        result = smooth_guideline(raw, scenario.smoother)
        t1 = time.perf_counter()
        st_obstacles, corridor = build_corridor(scenario, result.line)
        t2 = time.perf_counter()
        plan(result.line, corridor, scenario.init, scenario.task,
             scenario.limits, scenario.dt)
        t3 = time.perf_counter()
        times["smooth"].append(t1 - t0)
        times["corridor"].append(t2 - t1)
        times["plan"].append(t3 - t2)

    phases = {
        name: {
            "median_s": statistics.median(vals),
            "min_s": min(vals),
            "max_s": max(vals),
        }
        for name, vals in times.items()
    }
    payload = {
        "scenario": str(Path(args.scenario).resolve()),
        "repetitions": args.repetitions,
        "phases": phases,
        "machine": {
            "platform": platform.platform(),
            "processor": platform.processor() or platform.machine(),
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
    }
    text = json.dumps(payload, indent=2) + "\n"
    if out is not None:
        (out / "bench.json").write_text(text)
        _write_manifest(out, args)
    for name in ("smooth", "corridor", "plan"):
        p = phases[name]
        print(f"{name}: median {p['median_s'] * 1e3:.1f} ms "
              f"(min {p['min_s'] * 1e3:.1f}, max {p['max_s'] * 1e3:.1f}, "
              f"n={args.repetitions})")
    if out is not None:
        print(f"outputs in {out}")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def main(argv=None) -> int:
    _configure_logging()
    args = _parse_args(argv)
    handlers = {"smooth": _cmd_smooth, "plan": _cmd_plan, "bench": _cmd_bench}
    try:
        return handlers[args.command](args)
    except (InputError, ScenarioError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INPUT
    except InfeasibleCorridor as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (SmoothingFailed, SolveFailure) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
