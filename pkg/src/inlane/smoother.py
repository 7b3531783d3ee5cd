"""Guide-line smoothing.

Turns an ordered polyline of noisy waypoints into a chain of quintic
spiral pieces whose heading, curvature and curvature rate are continuous
at every joint. Knot headings, curvatures, curvature rates and piece
lengths are the decision variables of a bound-constrained NLP:

* objective: total length plus curvature and curvature-rate energy,
  sampled at ``internal_points`` equally spaced interior points per piece
  (midpoint rule, weight length/m);
* constraints: each knot after the first must stay within
  ``max_deviation`` of its input point (squared-distance form). Knot 0 is
  anchored exactly at input point 0, so the chained positions carry no
  gauge freedom and knot 0 needs no constraint;
* bounds: piece lengths within [0.5, 3] times the input chord, curvature
  rate at the two terminal knots within +-0.1.

All derivatives are analytic; positions flow through the same fixed-order
Gauss-Legendre quadrature used for evaluation, so the solved line and the
constraint model agree exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from .geometry import (
    SpiralCurve,
    fit_quintic_spiral,
    gauss_legendre_nodes,
    integrate_position,
)
from .nlp_solver import NlpProblem, SolveOptions, SolveReport, solve


class SmoothingFailed(RuntimeError):
    """Solver did not converge; carries the report with the last iterate."""

    def __init__(self, report: SolveReport):
        super().__init__(f"guide-line smoothing failed: status={report.status}")
        self.report = report


@dataclass
class SmootherConfig:
    max_deviation: float = 0.1
    internal_points: int = 8
    weight_length: float = 1.0
    weight_kappa: float = 100.0
    weight_dkappa: float = 1000.0
    length_lower_factor: float = 0.5
    length_upper_factor: float = 3.0
    terminal_dkappa_bound: float = 0.1
    solve_options: SolveOptions = field(
        default_factory=lambda: SolveOptions(tol_feas=1e-8, max_outer=80)
    )


@dataclass(frozen=True)
class GuideLine:
    """Smoothed guide line: spiral pieces chained through shared knots.

    ``knot_theta`` / ``knot_kappa`` / ``knot_dkappa`` hold the boundary
    values shared bit-for-bit by adjacent pieces. ``cumulative_lengths``
    has one entry per knot, starting at 0.
    """

    pieces: tuple[SpiralCurve, ...]
    knots: NDArray
    cumulative_lengths: NDArray
    knot_theta: NDArray
    knot_kappa: NDArray
    knot_dkappa: NDArray

    def __post_init__(self):
        if len(self.pieces) < 1:
            raise ValueError("guide line needs at least one piece")
        if np.any(np.diff(self.cumulative_lengths) <= 0.0):
            raise ValueError("cumulative lengths must be strictly increasing")

    @property
    def total_length(self) -> float:
        return float(self.cumulative_lengths[-1])


@dataclass
class SmoothResult:
    line: GuideLine
    report: SolveReport
    deviations: NDArray
    initial_objective: float
    final_objective: float


def _as_points(raw) -> NDArray:
    pts = np.asarray(raw, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError(f"raw guide line must be (n, 2), got {pts.shape}")
    if pts.shape[0] < 2:
        raise ValueError("raw guide line needs at least 2 points")
    if not np.all(np.isfinite(pts)):
        raise ValueError("raw guide line contains non-finite coordinates")
    return pts


def _chords(pts: NDArray) -> tuple[NDArray, NDArray]:
    deltas = np.diff(pts, axis=0)
    lengths = np.hypot(deltas[:, 0], deltas[:, 1])
    if np.any(lengths < 1e-9):
        bad = int(np.argmax(lengths < 1e-9))
        raise ValueError(f"duplicate consecutive points at index {bad}")
    headings = np.unwrap(np.arctan2(deltas[:, 1], deltas[:, 0]))
    return lengths, headings


def initial_guess(raw) -> NDArray:
    """Chord-based starting point for the smoothing NLP.

    Knot headings take the chord heading (interior knots average their two
    adjacent chords after unwrapping), curvature and curvature rate start
    at zero, piece lengths start at the chord lengths.
    """
    pts = _as_points(raw)
    n = pts.shape[0]
    lengths, headings = _chords(pts)
    theta = np.empty(n)
    theta[0] = headings[0]
    theta[-1] = headings[-1]
    theta[1:-1] = 0.5 * (headings[:-1] + headings[1:])
    x0 = np.zeros(3 * n + (n - 1))
    x0[0 : 3 * n : 3] = theta
    x0[3 * n :] = lengths
    return x0


def _coeff_partials(th0, k0, dk0, th1, k1, dk1, t):
    """Spiral coefficients and their partials, vectorized over pieces.

    Returns ``C`` (p, 6), ``dC_db`` (p, 6, 6) with boundary order
    (theta0, kappa0, dkappa0, theta1, kappa1, dkappa1), and ``dC_dT``
    (p, 6).
    """
    p = t.shape[0]
    t2, t3, t4, t5 = t * t, t**3, t**4, t**5

    dth = th1 - th0 - k0 * t - 0.5 * dk0 * t2
    dka = k1 - k0 - dk0 * t
    ddk = dk1 - dk0

    C = np.empty((p, 6))
    C[:, 0] = th0
    C[:, 1] = k0
    C[:, 2] = 0.5 * dk0
    C[:, 3] = 10.0 * dth / t3 - 4.0 * dka / t2 + 0.5 * ddk / t
    C[:, 4] = -15.0 * dth / t4 + 7.0 * dka / t3 - ddk / t2
    C[:, 5] = 6.0 * dth / t5 - 3.0 * dka / t4 + 0.5 * ddk / t3

    # Partials of the boundary residuals.
    d_dth = np.zeros((p, 6))
    d_dth[:, 0] = -1.0
    d_dth[:, 1] = -t
    d_dth[:, 2] = -0.5 * t2
    d_dth[:, 3] = 1.0
    d_dka = np.zeros((p, 6))
    d_dka[:, 1] = -1.0
    d_dka[:, 2] = -t
    d_dka[:, 4] = 1.0
    d_ddk = np.zeros((p, 6))
    d_ddk[:, 2] = -1.0
    d_ddk[:, 5] = 1.0

    dC_db = np.zeros((p, 6, 6))
    dC_db[:, 0, 0] = 1.0
    dC_db[:, 1, 1] = 1.0
    dC_db[:, 2, 2] = 0.5
    dC_db[:, 3, :] = (10.0 / t3)[:, None] * d_dth - (4.0 / t2)[:, None] * d_dka \
        + (0.5 / t)[:, None] * d_ddk
    dC_db[:, 4, :] = (-15.0 / t4)[:, None] * d_dth + (7.0 / t3)[:, None] * d_dka \
        - (1.0 / t2)[:, None] * d_ddk
    dC_db[:, 5, :] = (6.0 / t5)[:, None] * d_dth - (3.0 / t4)[:, None] * d_dka \
        + (0.5 / t3)[:, None] * d_ddk

    dth_t = -k0 - dk0 * t
    dka_t = -dk0
    dC_dT = np.zeros((p, 6))
    dC_dT[:, 3] = 10.0 * dth_t / t3 - 30.0 * dth / t4 \
        - 4.0 * dka_t / t2 + 8.0 * dka / t3 - 0.5 * ddk / t2
    dC_dT[:, 4] = -15.0 * dth_t / t4 + 60.0 * dth / t5 \
        + 7.0 * dka_t / t3 - 21.0 * dka / t4 + 2.0 * ddk / t3
    dC_dT[:, 5] = 6.0 * dth_t / t5 - 30.0 * dth / (t5 * t) \
        - 3.0 * dka_t / t4 + 12.0 * dka / t5 - 1.5 * ddk / t4
    return C, dC_db, dC_dT


class _Workspace:
    """Shared, memoized evaluation core for the smoothing NLP."""

    def __init__(self, pts: NDArray, config: SmootherConfig):
        self.pts = pts
        self.cfg = config
        n = pts.shape[0]
        self.n = n
        self.npieces = n - 1
        self.dim = 3 * n + self.npieces
        m = config.internal_points
        self.tau_obj = (np.arange(1, m + 1) - 0.5) / m
        nodes, weights = gauss_legendre_nodes()
        self.tau_quad = 0.5 * (nodes + 1.0)
        self.w_quad = weights
        self.cols6 = 3 * np.arange(self.npieces)[:, None] + np.arange(6)[None, :]
        self.len_cols = 3 * n + np.arange(self.npieces)
        self._key = None
        self._val = None

    def _basis(self, s):
        """Powers of s and derivative bases for kappa, dkappa, d3theta."""
        pw = s[..., None] ** np.arange(6)
        k1 = np.zeros_like(pw)
        k1[..., 1:] = pw[..., :5] * np.arange(1, 6)
        k2 = np.zeros_like(pw)
        k2[..., 2:] = pw[..., :4] * np.array([2.0, 6.0, 12.0, 20.0])
        k3 = np.zeros_like(pw)
        k3[..., 3:] = pw[..., :3] * np.array([6.0, 24.0, 60.0])
        return pw, k1, k2, k3

    def compute(self, x: NDArray) -> dict:
        key = x.tobytes()
        if key == self._key:
            return self._val
        cfg = self.cfg
        n, npc, m = self.n, self.npieces, cfg.internal_points
        knot = x[: 3 * n].reshape(n, 3)
        th, ka, dk = knot[:, 0], knot[:, 1], knot[:, 2]
        t = x[3 * n :]

        C, dC_db, dC_dT = _coeff_partials(
            th[:-1], ka[:-1], dk[:-1], th[1:], ka[1:], dk[1:], t
        )

        # --- objective: length + curvature energy at interior midpoints
        s_obj = t[:, None] * self.tau_obj[None, :]
        _, k1, k2, k3 = self._basis(s_obj)
        kap = np.einsum("pj,pmj->pm", C, k1)
        dkap = np.einsum("pj,pmj->pm", C, k2)
        d3 = np.einsum("pj,pmj->pm", C, k3)

        wl, wk, wd = cfg.weight_length, cfg.weight_kappa, cfg.weight_dkappa
        per_point = wk * kap**2 + wd * dkap**2
        obj = wl * float(t.sum()) + float((t / m * per_point.sum(axis=1)).sum())

        dkap_db = np.einsum("pjb,pmj->pmb", dC_db, k1)
        ddkap_db = np.einsum("pjb,pmj->pmb", dC_db, k2)
        dkap_dt = np.einsum("pj,pmj->pm", dC_dT, k1) + dkap * self.tau_obj[None, :]
        ddkap_dt = np.einsum("pj,pmj->pm", dC_dT, k2) + d3 * self.tau_obj[None, :]

        gb = (t[:, None] / m) * (
            2.0 * wk * np.einsum("pm,pmb->pb", kap, dkap_db)
            + 2.0 * wd * np.einsum("pm,pmb->pb", dkap, ddkap_db)
        )
        gt = (
            wl
            + per_point.sum(axis=1) / m
            + (t / m)
            * (
                2.0 * wk * (kap * dkap_dt).sum(axis=1)
                + 2.0 * wd * (dkap * ddkap_dt).sum(axis=1)
            )
        )
        grad = np.zeros(self.dim)
        np.add.at(grad, self.cols6, gb)
        grad[self.len_cols] += gt

        # --- chained positions and squared-deviation constraints
        u = t[:, None] * self.tau_quad[None, :]
        pw, k1q, _, _ = self._basis(u)
        thq = np.einsum("pj,pqj->pq", C, pw)
        kq = np.einsum("pj,pqj->pq", C, k1q)
        cosq, sinq = np.cos(thq), np.sin(thq)
        ix = 0.5 * t * (cosq @ self.w_quad)
        iy = 0.5 * t * (sinq @ self.w_quad)

        dth_db = np.einsum("pjb,pqj->pqb", dC_db, pw)
        dth_dt = np.einsum("pj,pqj->pq", dC_dT, pw) + kq * self.tau_quad[None, :]
        dix_db = 0.5 * t[:, None] * np.einsum("q,pqb->pb", self.w_quad, -sinq[..., None] * dth_db)
        diy_db = 0.5 * t[:, None] * np.einsum("q,pqb->pb", self.w_quad, cosq[..., None] * dth_db)
        dix_dt = 0.5 * (cosq @ self.w_quad) + 0.5 * t * ((self.w_quad * -sinq * dth_dt).sum(axis=1))
        diy_dt = 0.5 * (sinq @ self.w_quad) + 0.5 * t * ((self.w_quad * cosq * dth_dt).sum(axis=1))

        pos = self.pts[0] + np.cumsum(np.stack([ix, iy], axis=1), axis=0)
        dev_vec = pos - self.pts[1:]
        gcon = (dev_vec**2).sum(axis=1) - cfg.max_deviation**2

        a = np.zeros((npc, 2, self.dim))
        rows = np.arange(npc)[:, None]
        a[rows, 0, self.cols6] = dix_db
        a[rows, 1, self.cols6] = diy_db
        a[np.arange(npc), 0, self.len_cols] = dix_dt
        a[np.arange(npc), 1, self.len_cols] = diy_dt
        cum = np.cumsum(a, axis=0)
        jcon = 2.0 * np.einsum("pc,pcd->pd", dev_vec, cum)

        val = dict(obj=obj, grad=grad, gcon=gcon, jcon=jcon, pos=pos, x=x.copy())
        self._key = key
        self._val = val
        return val


def build_smoother_nlp(raw, config: SmootherConfig | None = None) -> NlpProblem:
    """Assemble the smoothing NLP for an ordered point list."""
    cfg = config or SmootherConfig()
    pts = _as_points(raw)
    n = pts.shape[0]
    chords, _ = _chords(pts)
    ws = _Workspace(pts, cfg)

    lower = np.full(ws.dim, -np.inf)
    upper = np.full(ws.dim, np.inf)
    lower[3 * n :] = cfg.length_lower_factor * chords
    upper[3 * n :] = cfg.length_upper_factor * chords
    for knot_idx in (0, n - 1):
        lower[3 * knot_idx + 2] = -cfg.terminal_dkappa_bound
        upper[3 * knot_idx + 2] = cfg.terminal_dkappa_bound

    return NlpProblem(
        dim=ws.dim,
        objective=lambda x: ws.compute(x)["obj"],
        gradient=lambda x: ws.compute(x)["grad"],
        ineq=lambda x: ws.compute(x)["gcon"],
        ineq_jac=lambda x: ws.compute(x)["jcon"],
        lower=lower,
        upper=upper,
    )


def guideline_from_variables(raw, x: NDArray) -> GuideLine:
    """Build the GuideLine artifact from a solved variable vector."""
    pts = _as_points(raw)
    n = pts.shape[0]
    knot = x[: 3 * n].reshape(n, 3)
    t = x[3 * n :]
    pieces = []
    knots = np.empty((n, 2))
    knots[0] = pts[0]
    for i in range(n - 1):
        piece = fit_quintic_spiral(
            knot[i, 0], knot[i, 1], knot[i, 2],
            knot[i + 1, 0], knot[i + 1, 1], knot[i + 1, 2],
            t[i],
        )
        pieces.append(piece)
        knots[i + 1] = integrate_position(piece, t[i], origin=tuple(knots[i]))
    cum = np.concatenate([[0.0], np.cumsum(t)])
    return GuideLine(
        pieces=tuple(pieces),
        knots=knots,
        cumulative_lengths=cum,
        knot_theta=knot[:, 0].copy(),
        knot_kappa=knot[:, 1].copy(),
        knot_dkappa=knot[:, 2].copy(),
    )


def smooth_guideline(raw, config: SmootherConfig | None = None,
                     x0: NDArray | None = None) -> SmoothResult:
    """Smooth noisy waypoints into a spiral guide line.

    Raises :class:`SmoothingFailed` (carrying the solver report with the
    last iterate) when the NLP does not converge.
    """
    cfg = config or SmootherConfig()
    pts = _as_points(raw)
    problem = build_smoother_nlp(pts, cfg)
    start = initial_guess(pts) if x0 is None else np.asarray(x0, dtype=float)
    f0 = float(problem.objective(start))
    report = solve(problem, start, cfg.solve_options)
    if report.status != "converged":
        raise SmoothingFailed(report)
    line = guideline_from_variables(pts, report.x)
    deviations = np.linalg.norm(line.knots - pts, axis=1)
    return SmoothResult(
        line=line,
        report=report,
        deviations=deviations,
        initial_objective=f0,
        final_objective=report.objective,
    )
