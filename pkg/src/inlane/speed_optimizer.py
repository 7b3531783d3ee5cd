"""Longitudinal trajectory optimization along a smoothed guide line.

The profile lives on a uniform time grid with (arc position, speed,
acceleration) triples per step. Piecewise-constant jerk gives the exact
propagation

    a+ = a + j*dt
    v+ = v + a*dt + j*dt^2/2
    s+ = s + v*dt + a*dt^2/2 + j*dt^3/6

The objective penalizes acceleration, jerk, centripetal acceleration,
deviation from a reference speed, and optionally distance from terminal
targets.

Two equivalent problem statements are provided. The triple form keeps
(s, v, a) as decision variables and enforces the propagation identities
as linear equality constraints; it is the natural statement for
derivative checks and for inspecting the constraint system. The reduced
form, which :func:`plan` solves, treats the per-step jerks as the only
decision variables and reconstructs the triples by running the
propagation forward. That satisfies the continuity equations by
construction (the chained propagation operator is so stiff that driving
its residual to tolerance through penalties is far more expensive than
eliminating it), turns the jerk bounds into plain box bounds, and leaves
only well-scaled inequality constraints for the solver.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp
from numpy.typing import NDArray

from .frenet import CartesianState, LongitudinalState, kappa_at_many, to_cartesian
from .nlp_solver import NlpProblem, SolveFailure, SolveOptions, SolveReport, solve
from .smoother import GuideLine
from .st_graph import FreeRegionProfile, InfeasibleCorridor


@dataclass(frozen=True)
class DynamicLimits:
    """Box limits on speed, acceleration, jerk and centripetal acceleration."""

    v_max: float = 30.0
    a_min: float = -4.0
    a_max: float = 2.0
    jerk_min: float = -4.0
    jerk_max: float = 4.0
    centripetal_max: float = 2.0

    def __post_init__(self):
        if self.v_max <= 0.0:
            raise ValueError("v_max must be positive")
        if self.a_min >= self.a_max:
            raise ValueError("a_min must be below a_max")
        if self.jerk_min >= self.jerk_max:
            raise ValueError("jerk_min must be below jerk_max")
        if self.centripetal_max <= 0.0:
            raise ValueError("centripetal_max must be positive")


@dataclass(frozen=True)
class Weights:
    accel: float
    jerk: float
    centripetal: float
    ref_speed: float
    target_s: float = 200.0
    target_v: float = 200.0
    target_a: float = 20.0


WEIGHT_PRESETS: dict[str, Weights] = {
    "comfortable": Weights(accel=4.0, jerk=10.0, centripetal=1.0, ref_speed=0.15),
    "sporty": Weights(accel=0.2, jerk=0.5, centripetal=0.1, ref_speed=4.0),
}


@dataclass(frozen=True)
class TaskSpec:
    """What the speed profile should accomplish over the horizon."""

    kind: str
    ref_speed: float
    horizon: float
    target_s: Optional[float] = None
    target_v: Optional[float] = None
    target_a: Optional[float] = None
    weights: Weights = field(default_factory=lambda: WEIGHT_PRESETS["comfortable"])
    hard_terminal: bool = False
    centripetal_form: str = "squared"

    def __post_init__(self):
        if self.kind not in ("cruise", "stop", "follow"):
            raise ValueError(f"unknown task kind {self.kind!r}")
        if self.centripetal_form not in ("squared", "literal"):
            raise ValueError(f"unknown centripetal form {self.centripetal_form!r}")
        if self.ref_speed < 0.0:
            raise ValueError("ref_speed must be >= 0")
        if self.horizon <= 0.0:
            raise ValueError("horizon must be positive")
        if self.kind == "stop" and self.target_s is None:
            raise ValueError("stop task requires target_s")


def steps_for_horizon(horizon: float, dt: float) -> int:
    """Number of grid points: horizon / dt + 1."""
    return int(round(horizon / dt)) + 1


def jerk_between(a0: float, a1: float, dt: float) -> float:
    """Constant jerk implied by two consecutive accelerations."""
    return (a1 - a0) / dt


def propagate(state: LongitudinalState, jerk: float, dt: float) -> LongitudinalState:
    """One exact step under piecewise-constant jerk."""
    a1 = state.a + jerk * dt
    v1 = state.v + state.a * dt + 0.5 * jerk * dt * dt
    s1 = state.s + state.v * dt + 0.5 * state.a * dt * dt + jerk * dt**3 / 6.0
    return LongitudinalState(s=s1, v=v1, a=a1)


def _propagate_arrays(init: LongitudinalState, jerks: NDArray, dt: float):
    """Vectorized forward propagation of a jerk sequence.

    Returns (s, v, a) arrays of length len(jerks) + 1. Matches the
    per-step :func:`propagate` up to summation-order rounding.
    """
    n = len(jerks) + 1
    a = np.empty(n)
    v = np.empty(n)
    s = np.empty(n)
    a[0], v[0], s[0] = init.a, init.v, init.s
    a[1:] = init.a + dt * np.cumsum(jerks)
    v[1:] = init.v + np.cumsum(a[:-1] * dt + 0.5 * jerks * dt * dt)
    s[1:] = init.s + np.cumsum(
        v[:-1] * dt + 0.5 * a[:-1] * dt * dt + jerks * dt**3 / 6.0)
    return s, v, a


def _jerk_chain_gradient(gs: NDArray, gv: NDArray, ga: NDArray, dt: float) -> NDArray:
    """Pull per-point (s, v, a) gradients back to the jerk sequence.

    One reverse sweep over the propagation recurrences: the running sums
    Ps, Pv, Pa accumulate the total sensitivity of everything downstream
    of each grid point, and jerk k feeds point k+1 with weights
    (dt^3/6, dt^2/2, dt).
    """

    def tail_sums(x):
        return np.cumsum(x[::-1])[::-1]

    def shifted(p):
        return np.concatenate([p[1:], [0.0]])

    ps = tail_sums(gs)
    pv = tail_sums(gv + dt * shifted(ps))
    pa = tail_sums(ga + dt * shifted(pv) + 0.5 * dt * dt * shifted(ps))
    return dt * pa[1:] + 0.5 * dt * dt * pv[1:] + dt**3 / 6.0 * ps[1:]


def _jerk_sensitivities(dt: float, n: int):
    """Dense d(s, v, a)/d(jerk) matrices of the forward propagation.

    Shapes (n, n-1); entry [i, k] is the derivative of the i-th state
    component with respect to jerk k (zero for k >= i).
    """
    i = np.arange(n, dtype=float)[:, None]
    k = np.arange(n - 1, dtype=float)[None, :]
    act = k < i
    j_a = np.where(act, dt, 0.0)
    j_v = np.where(act, (i - k - 0.5) * dt * dt, 0.0)
    m = np.maximum(i - 1.0 - k, 0.0)
    j_s = np.where(act, (0.5 * m * (m + 1.0) + 1.0 / 6.0) * dt**3, 0.0)
    return j_s, j_v, j_a


@dataclass(frozen=True)
class Trajectory:
    """Optimized profile: per-step triples plus derived jerks and poses."""

    dt: float
    s: NDArray
    v: NDArray
    a: NDArray
    jerks: NDArray
    states: tuple[CartesianState, ...]

    def __post_init__(self):
        n = len(self.s)
        if not (len(self.v) == len(self.a) == n and len(self.jerks) == n - 1
                and len(self.states) == n):
            raise ValueError("trajectory arrays have inconsistent lengths")
        if np.any(np.diff(self.s) < -1e-6):
            raise ValueError("arc position must be non-decreasing")

    def __len__(self) -> int:
        return len(self.s)

    def state_at(self, i: int) -> LongitudinalState:
        return LongitudinalState(s=float(self.s[i]), v=float(self.v[i]),
                                 a=float(self.a[i]))

    @property
    def times(self) -> NDArray:
        return self.dt * np.arange(len(self.s))


@dataclass
class PlanResult:
    trajectory: Trajectory
    report: SolveReport


def _equality_system(init: LongitudinalState, task: TaskSpec, dt: float, n: int):
    """Constant matrix/vector of the (linear) equality constraints."""
    rows, cols, vals, rhs = [], [], [], []

    def add(r, c, v):
        rows.append(r)
        cols.append(c)
        vals.append(v)

    add(0, 0, 1.0)
    rhs.append(init.s)
    add(1, n, 1.0)
    rhs.append(init.v)
    add(2, 2 * n, 1.0)
    rhs.append(init.a)
    r = 3
    for i in range(n - 1):
        add(r, n + i + 1, 1.0)
        add(r, n + i, -1.0)
        add(r, 2 * n + i, -0.5 * dt)
        add(r, 2 * n + i + 1, -0.5 * dt)
        rhs.append(0.0)
        r += 1
        add(r, i + 1, 1.0)
        add(r, i, -1.0)
        add(r, n + i, -dt)
        add(r, 2 * n + i, -dt * dt / 3.0)
        add(r, 2 * n + i + 1, -dt * dt / 6.0)
        rhs.append(0.0)
        r += 1
    if task.hard_terminal:
        for col, target in ((n - 1, task.target_s), (2 * n - 1, task.target_v),
                            (3 * n - 1, task.target_a)):
            if target is not None:
                add(r, col, 1.0)
                rhs.append(float(target))
                r += 1
    mat = sp.csr_matrix((vals, (rows, cols)), shape=(r, 3 * n))
    return mat, np.array(rhs)


def _smooth_objective(task: TaskSpec, s: NDArray, v: NDArray, a: NDArray,
                      kap: NDArray, dkap: NDArray):
    """Objective terms other than jerk, with per-point gradients.

    The jerk term is representation-dependent (acceleration differences
    in the triple form, the decision variables themselves in the reduced
    form) so the callers add it. Returns (obj, gs, gv, ga, ac).
    """
    w = task.weights
    n = len(s)
    ac = v * v * kap

    obj = w.accel * float(a @ a)
    if task.centripetal_form == "squared":
        obj += w.centripetal * float(ac @ ac)
    else:
        obj += w.centripetal * float(ac.sum())
    dv_ref = v - task.ref_speed
    obj += w.ref_speed * float(dv_ref @ dv_ref)

    gs = np.zeros(n)
    gv = np.zeros(n)
    ga = 2.0 * w.accel * a
    if task.centripetal_form == "squared":
        gv += w.centripetal * 4.0 * ac * v * kap
        gs += w.centripetal * 2.0 * ac * v * v * dkap
    else:
        gv += w.centripetal * 2.0 * v * kap
        gs += w.centripetal * v * v * dkap
    gv += 2.0 * w.ref_speed * dv_ref

    for target, weight, arr, grad_arr in (
        (task.target_s, w.target_s, s, gs),
        (task.target_v, w.target_v, v, gv),
        (task.target_a, w.target_a, a, ga),
    ):
        if target is not None:
            diff = arr[n - 1] - target
            obj += weight * diff * diff
            grad_arr[n - 1] += 2.0 * weight * diff
    return obj, gs, gv, ga, ac


class _Workspace:
    """Memoized evaluation core for the triple-form trajectory NLP."""

    def __init__(self, line: GuideLine, init: LongitudinalState, task: TaskSpec,
                 limits: DynamicLimits, dt: float, n: int):
        self.line = line
        self.task = task
        self.limits = limits
        self.dt = dt
        self.n = n
        self.eq_mat, self.eq_rhs = _equality_system(init, task, dt, n)

        m = n - 1
        rows, cols, vals = [], [], []
        for i in range(m):
            rows += [2 * i, 2 * i, 2 * i + 1, 2 * i + 1]
            cols += [2 * n + i + 1, 2 * n + i, 2 * n + i + 1, 2 * n + i]
            vals += [1.0 / dt, -1.0 / dt, -1.0 / dt, 1.0 / dt]
        self.jerk_jac = sp.csr_matrix((vals, (rows, cols)), shape=(2 * m, 3 * n))

        idx = np.arange(n)
        self.cent_rows = np.repeat(2 * idx, 2).tolist() + np.repeat(2 * idx + 1, 2).tolist()
        self.cent_cols = np.tile(np.stack([idx, n + idx], axis=1).ravel(), 2).tolist()
        self._key = None
        self._val = None

    def compute(self, x: NDArray) -> dict:
        key = x.tobytes()
        if key == self._key:
            return self._val
        n, dt = self.n, self.dt
        lim, task = self.limits, self.task
        w = task.weights
        s, v, a = x[:n], x[n : 2 * n], x[2 * n :]
        kap, dkap = kappa_at_many(self.line, s)

        obj, gs, gv, ga, ac = _smooth_objective(task, s, v, a, kap, dkap)
        jerks = np.diff(a) / dt
        obj += w.jerk * float(jerks @ jerks)
        ga[:-1] += -2.0 * w.jerk * jerks / dt
        ga[1:] += 2.0 * w.jerk * jerks / dt

        grad = np.concatenate([gs, gv, ga])

        g_jerk = np.empty(2 * (n - 1))
        g_jerk[0::2] = jerks - lim.jerk_max
        g_jerk[1::2] = lim.jerk_min - jerks
        g_cent = np.empty(2 * n)
        g_cent[0::2] = ac - lim.centripetal_max
        g_cent[1::2] = -ac - lim.centripetal_max
        gcon = np.concatenate([g_jerk, g_cent])

        d_ds = v * v * dkap
        d_dv = 2.0 * v * kap
        data = np.concatenate([
            np.stack([d_ds, d_dv], axis=1).ravel(),
            np.stack([-d_ds, -d_dv], axis=1).ravel(),
        ])
        cent_jac = sp.csr_matrix(
            (data, (self.cent_rows, self.cent_cols)), shape=(2 * n, 3 * n)
        )
        jcon = sp.vstack([self.jerk_jac, cent_jac], format="csr")

        val = dict(obj=obj, grad=grad, gcon=gcon, jcon=jcon)
        self._key = key
        self._val = val
        return val


def build_trajectory_nlp(
    line: GuideLine,
    corridor: FreeRegionProfile,
    init: LongitudinalState,
    task: TaskSpec,
    limits: DynamicLimits,
    dt: float,
) -> NlpProblem:
    """Assemble the trajectory NLP over the corridor's time grid."""
    n = len(corridor)
    if n < 2:
        raise ValueError("corridor must cover at least 2 time steps")
    ws = _Workspace(line, init, task, limits, dt, n)
    lower = np.concatenate([
        corridor.s_min, np.zeros(n), np.full(n, limits.a_min)])
    upper = np.concatenate([
        corridor.s_max, np.full(n, limits.v_max), np.full(n, limits.a_max)])
    return NlpProblem(
        dim=3 * n,
        objective=lambda x: ws.compute(x)["obj"],
        gradient=lambda x: ws.compute(x)["grad"],
        eq=lambda x: ws.eq_mat @ x - ws.eq_rhs,
        eq_jac=lambda x: ws.eq_mat,
        ineq=lambda x: ws.compute(x)["gcon"],
        ineq_jac=lambda x: ws.compute(x)["jcon"],
        lower=lower,
        upper=upper,
    )


class _ReducedWorkspace:
    """Memoized evaluation core for the jerk-variable form.

    The triples are functions of the jerk vector; their sensitivities are
    the constant lower-triangular matrices from :func:`_jerk_sensitivities`.
    The inequality Jacobian is kept in one preallocated buffer whose
    affine blocks never change; only the two centripetal blocks are
    rewritten per evaluation.
    """

    def __init__(self, line: GuideLine, corridor: FreeRegionProfile,
                 init: LongitudinalState, task: TaskSpec,
                 limits: DynamicLimits, dt: float, n: int):
        self.line = line
        self.init = init
        self.task = task
        self.limits = limits
        self.dt = dt
        self.n = n
        self.s_min = np.asarray(corridor.s_min, dtype=float)
        self.s_max = np.asarray(corridor.s_max, dtype=float)
        self.j_s, self.j_v, self.j_a = _jerk_sensitivities(dt, n)
        self._csq_v = np.einsum("ik,ik->k", self.j_v, self.j_v)
        self._csq_a = np.einsum("ik,ik->k", self.j_a, self.j_a)

        dim = n - 1
        jac = np.zeros((8 * n, dim))
        jac[0 * n : 1 * n] = self.j_s
        jac[1 * n : 2 * n] = -self.j_s
        jac[2 * n : 3 * n] = self.j_v
        jac[3 * n : 4 * n] = -self.j_v
        jac[4 * n : 5 * n] = self.j_a
        jac[5 * n : 6 * n] = -self.j_a
        self._jac = jac

        rows = []
        rhs = []
        for sens, target in ((self.j_s, task.target_s),
                             (self.j_v, task.target_v),
                             (self.j_a, task.target_a)):
            if task.hard_terminal and target is not None:
                rows.append(sens[n - 1])
                rhs.append(float(target))
        self.eq_jac = np.array(rows) if rows else None
        self.eq_rhs = np.array(rhs) if rows else None

        self._key = None
        self._val = None

    def compute(self, j: NDArray) -> dict:
        key = j.tobytes()
        if key == self._key:
            return self._val
        n, lim = self.n, self.limits
        s, v, a = _propagate_arrays(self.init, j, self.dt)
        kap, dkap = kappa_at_many(self.line, s)

        obj, gs, gv, ga, ac = _smooth_objective(self.task, s, v, a, kap, dkap)
        w = self.task.weights
        obj += w.jerk * float(j @ j)
        grad = _jerk_chain_gradient(gs, gv, ga, self.dt)
        grad += 2.0 * w.jerk * j

        gcon = np.empty(8 * n)
        gcon[0 * n : 1 * n] = s - self.s_max
        gcon[1 * n : 2 * n] = self.s_min - s
        gcon[2 * n : 3 * n] = v - lim.v_max
        gcon[3 * n : 4 * n] = -v
        gcon[4 * n : 5 * n] = a - lim.a_max
        gcon[5 * n : 6 * n] = lim.a_min - a
        gcon[6 * n : 7 * n] = ac - lim.centripetal_max
        gcon[7 * n : 8 * n] = -ac - lim.centripetal_max

        d_ds = (v * v * dkap)[:, None]
        d_dv = (2.0 * v * kap)[:, None]
        cent = self._jac[6 * n : 7 * n]
        np.multiply(d_dv, self.j_v, out=cent)
        cent += d_ds * self.j_s
        np.negative(cent, out=self._jac[7 * n : 8 * n])

        eqv = None
        if self.eq_jac is not None:
            ends = [arr[n - 1] for arr, target in
                    ((s, self.task.target_s), (v, self.task.target_v),
                     (a, self.task.target_a)) if target is not None]
            eqv = np.array(ends) - self.eq_rhs

        val = dict(obj=obj, grad=grad, gcon=gcon, jcon=self._jac, eq=eqv)
        self._key = key
        self._val = val
        return val

    def hess_diag(self, j: NDArray) -> NDArray:
        """Gauss-Newton diagonal of the objective in jerk coordinates.

        The quadratic terms act on (s, v, a), so their curvature along
        jerk k is the weight times the squared column of the matching
        sensitivity matrix. Feeding this to the solver's diagonal
        preconditioner tames the long-range coupling the integrator
        chain induces (condition growing with the square of the step
        count).
        """
        d = self.compute(j)
        n, w = self.n, self.task.weights
        diag = np.full(n - 1, 2.0 * w.jerk)
        diag += 2.0 * w.accel * self._csq_a
        diag += 2.0 * w.ref_speed * self._csq_v
        if self.task.centripetal_form == "squared":
            ac = d["gcon"][6 * n : 7 * n] + self.limits.centripetal_max
            cent = self._jac[6 * n : 7 * n]
            diag += 2.0 * w.centripetal * np.einsum(
                "i,ik,ik->k", (2.0 * ac) ** 2, cent, cent)
        if not self.task.hard_terminal:
            for target, weight, sens in (
                (self.task.target_s, w.target_s, self.j_s),
                (self.task.target_v, w.target_v, self.j_v),
                (self.task.target_a, w.target_a, self.j_a),
            ):
                if target is not None:
                    diag += 2.0 * weight * sens[n - 1] ** 2
        return diag

    def gn_jac(self, j: NDArray) -> NDArray:
        """Least-squares factor of the objective in jerk coordinates.

        Stacks the weighted sensitivity rows whose squares make up the
        objective, giving restoration the metric the objective induces:
        a repair step that sags the speed profile far downstream costs
        what the reference-speed term would charge for it, not nothing.
        The linear centripetal form carries no curvature and is omitted.
        """
        self.compute(j)
        n, w = self.n, self.task.weights
        blocks = [
            np.sqrt(w.jerk) * np.eye(n - 1),
            np.sqrt(w.accel) * self.j_a,
            np.sqrt(w.ref_speed) * self.j_v,
        ]
        if self.task.centripetal_form == "squared":
            blocks.append(np.sqrt(w.centripetal) * self._jac[6 * n : 7 * n])
        if not self.task.hard_terminal:
            for target, weight, sens in (
                (self.task.target_s, w.target_s, self.j_s),
                (self.task.target_v, w.target_v, self.j_v),
                (self.task.target_a, w.target_a, self.j_a),
            ):
                if target is not None:
                    blocks.append(np.sqrt(weight) * sens[n - 1 : n])
        return np.vstack(blocks)


def build_reduced_trajectory_nlp(
    line: GuideLine,
    corridor: FreeRegionProfile,
    init: LongitudinalState,
    task: TaskSpec,
    limits: DynamicLimits,
    dt: float,
) -> NlpProblem:
    """Assemble the jerk-variable form of the trajectory NLP.

    The n-1 decision variables are the per-step jerks; (s, v, a) follow
    by forward propagation, so the continuity equations cannot be
    violated. Jerk bounds become the variable box; corridor, speed,
    acceleration and centripetal limits become inequality rows.
    """
    n = len(corridor)
    if n < 2:
        raise ValueError("corridor must cover at least 2 time steps")
    ws = _ReducedWorkspace(line, corridor, init, task, limits, dt, n)
    kwargs = {}
    if ws.eq_jac is not None:
        kwargs["eq"] = lambda x: ws.compute(x)["eq"]
        kwargs["eq_jac"] = lambda x: ws.eq_jac
    return NlpProblem(
        dim=n - 1,
        objective=lambda x: ws.compute(x)["obj"],
        gradient=lambda x: ws.compute(x)["grad"],
        ineq=lambda x: ws.compute(x)["gcon"],
        ineq_jac=lambda x: ws.compute(x)["jcon"],
        lower=np.full(n - 1, limits.jerk_min),
        upper=np.full(n - 1, limits.jerk_max),
        hess_diag=ws.hess_diag,
        gn_jac=ws.gn_jac,
        **kwargs,
    )


def ramp_jerk_profile(
    line: GuideLine,
    corridor: FreeRegionProfile,
    init: LongitudinalState,
    task: TaskSpec,
    limits: DynamicLimits,
    dt: float,
) -> NDArray:
    """Jerk-limited ramp seed for the reduced form.

    Tracks the same target speed as :func:`warm_start` (reference speed
    capped by the curvature ceiling sampled along the constant-speed
    position prediction), with two braking envelopes evaluated at the
    live position: one toward the corridor's upper wall, and for stop
    tasks one toward the stop target. Comfort deceleration is half the
    acceleration floor.
    """
    n = len(corridor)
    t = dt * np.arange(n)
    s_pred = np.clip(init.s + init.v * t, 0.0, line.total_length)
    kap, _ = kappa_at_many(line, s_pred)
    ceiling = np.sqrt(limits.centripetal_max / np.maximum(np.abs(kap), 1e-9))
    cap = np.minimum(ceiling, limits.v_max)
    if task.kind != "stop":
        cap = np.minimum(cap, task.ref_speed)
    dec = 0.5 * abs(limits.a_min)
    ramp_time = 1.0

    jerks = np.empty(n - 1)
    s_i, v_i, a_i = init.s, init.v, init.a
    for i in range(n - 1):
        v_cap = cap[i + 1]
        if task.kind == "stop" and task.target_s is not None:
            v_cap = min(v_cap, math.sqrt(
                2.0 * dec * max(task.target_s - s_i, 0.0)))
        room = float(corridor.s_max[i + 1]) - s_i
        if math.isfinite(room):
            v_cap = min(v_cap, math.sqrt(2.0 * dec * max(room, 0.0)))
        a_des = (v_cap - v_i) / ramp_time
        a_des = min(max(a_des, limits.a_min), limits.a_max)
        jerk = (a_des - a_i) / dt
        jerk = min(max(jerk, limits.jerk_min), limits.jerk_max)
        v_next = v_i + a_i * dt + 0.5 * jerk * dt * dt
        if v_next < 0.0:
            jerk = -(v_i + a_i * dt) * 2.0 / (dt * dt)
            jerk = min(max(jerk, limits.jerk_min), limits.jerk_max)
        jerks[i] = jerk
        s_i = s_i + v_i * dt + 0.5 * a_i * dt * dt + jerk * dt**3 / 6.0
        v_i = v_i + a_i * dt + 0.5 * jerk * dt * dt
        a_i = a_i + jerk * dt
    return jerks


def warm_start(
    line: GuideLine,
    corridor: FreeRegionProfile,
    init: LongitudinalState,
    task: TaskSpec,
    limits: DynamicLimits,
    dt: float,
) -> NDArray:
    """Constant-acceleration ramp toward the slowest speed the curvature
    allows along the constant-speed position prediction, clipped into the
    corridor (midpoint substitution when outside)."""
    n = len(corridor)
    t = dt * np.arange(n)
    s_pred = init.s + init.v * t
    kap, _ = kappa_at_many(line, s_pred)
    ceiling = np.sqrt(limits.centripetal_max / np.maximum(np.abs(kap), 1e-9))
    target = min(task.ref_speed, limits.v_max, float(ceiling.min()))

    dv = target - init.v
    ramp_time = max(0.3 * task.horizon, dt)
    a_ws = dv / ramp_time
    a_ws = min(max(a_ws, 0.5 * limits.a_min), 0.5 * limits.a_max)

    v_ramp = init.v + a_ws * t
    v = np.minimum(v_ramp, target) if dv >= 0 else np.maximum(v_ramp, target)
    v = np.clip(v, 0.0, limits.v_max)
    a = np.where(np.abs(v - target) > 1e-12, a_ws, 0.0)
    a[0] = init.a
    s = np.empty(n)
    s[0] = init.s
    s[1:] = init.s + np.cumsum(0.5 * (v[:-1] + v[1:]) * dt)
    mid = 0.5 * (corridor.s_min + corridor.s_max)
    outside = (s < corridor.s_min) | (s > corridor.s_max)
    s = np.where(outside, mid, s)
    return np.concatenate([s, v, a])


def default_plan_options() -> SolveOptions:
    """Solver tolerances for trajectory planning.

    Continuity is exact in the reduced form, so the feasibility tolerance
    only governs the inequality families; 5e-7 keeps a 2x margin under
    the audited 1e-6 residual bound. The stationarity tolerance is looser
    than the engine default: past the point where every constraint
    family is deep inside its audit band, extra penalty growth only
    inflates the merit curvature until double precision cannot resolve
    further progress. Inequality preconditioning pays off here because
    the corridor, speed and acceleration rows are constant and dense.
    """
    return SolveOptions(tol_opt=3e-6, tol_feas=5e-7, max_outer=60,
                        inner_maxiter=4000, precondition_ineq=True)


def plan(
    line: GuideLine,
    corridor: FreeRegionProfile,
    init: LongitudinalState,
    task: TaskSpec,
    limits: DynamicLimits,
    dt: float,
    solve_options: Optional[SolveOptions] = None,
) -> PlanResult:
    """Solve for the speed profile; returns the trajectory plus the report.

    Raises :class:`InfeasibleCorridor` before solving when the corridor
    excludes the initial position, and :class:`SolveFailure` when the NLP
    does not converge.
    """
    n = len(corridor)
    if not (corridor.s_min[0] - 1e-9 <= init.s <= corridor.s_max[0] + 1e-9):
        raise InfeasibleCorridor(
            0, 0.0,
            f"initial position {init.s:.2f} outside corridor "
            f"[{corridor.s_min[0]:.2f}, {corridor.s_max[0]:.2f}]",
        )
    problem = build_reduced_trajectory_nlp(line, corridor, init, task,
                                           limits, dt)
    x0 = ramp_jerk_profile(line, corridor, init, task, limits, dt)
    report = solve(problem, x0, solve_options or default_plan_options())
    if report.status != "converged":
        raise SolveFailure(
            f"trajectory optimization failed: status={report.status}", report
        )

    # Rebuild the triples step by step so the continuity oracle sees the
    # exact propagation arithmetic, then derive jerks by differencing.
    points = [init]
    for k in range(n - 1):
        points.append(propagate(points[-1], float(report.x[k]), dt))
    s = np.array([p.s for p in points])
    v = np.array([p.v for p in points])
    a = np.array([p.a for p in points])
    jerks = np.diff(a) / dt
    states = tuple(to_cartesian(line, p) for p in points)
    trajectory = Trajectory(dt=dt, s=s, v=v, a=a, jerks=jerks, states=states)
    return PlanResult(trajectory=trajectory, report=report)
