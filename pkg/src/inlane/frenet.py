"""Guide-line queries in the Frenet sense, with lateral offset held at zero.

The planner never leaves the guide line, so a longitudinal state
(arc position, speed, tangential acceleration) plus the line fully
determines the Cartesian state. Centripetal acceleration is a derived
channel, speed squared times curvature, and is reported separately from
the tangential acceleration rather than folded into it.

Query semantics outside the line:

* s beyond the total length extends the line straight ahead (curvature 0,
  final heading);
* position queries below s=0 clamp to the start; curvature queries
  marginally below 0 evaluate the first piece's polynomial so the
  analytic d(kappa)/ds stays consistent with finite differences at the
  corridor floor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .smoother import GuideLine

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


class ProjectionError(ValueError):
    """Point is too far from the guide line to project meaningfully."""


@dataclass(frozen=True)
class LongitudinalState:
    """Arc position s, speed along the line, tangential acceleration."""

    s: float
    v: float
    a: float

    def __post_init__(self):
        # Speeds inside the audited feasibility band count as non-negative.
        if self.v < -1e-6:
            raise ValueError(f"speed along the line must be >= 0, got {self.v}")


@dataclass(frozen=True)
class CartesianState:
    x: float
    y: float
    theta: float
    kappa: float
    v: float
    a: float


def _coeff_matrix(line: GuideLine) -> NDArray:
    return np.array([p.coeffs for p in line.pieces])


def _piece_index(line: GuideLine, s) -> NDArray:
    cum = line.cumulative_lengths
    return np.clip(np.searchsorted(cum, s, side="right") - 1, 0, len(line.pieces) - 1)


def kappa_at_many(line: GuideLine, s) -> tuple[NDArray, NDArray]:
    """Vectorized curvature and curvature rate at arc lengths ``s``."""
    s = np.atleast_1d(np.asarray(s, dtype=float))
    cum = line.cumulative_lengths
    idx = _piece_index(line, s)
    u = s - cum[idx]
    coeffs = _coeff_matrix(line)[idx]

    jj = np.arange(6)
    d1 = coeffs[:, 1:] * jj[1:]                     # kappa coefficients
    d2 = d1[:, 1:] * np.arange(1, 5)                # dkappa coefficients
    kap = np.zeros(len(s))
    for j in range(d1.shape[1] - 1, -1, -1):
        kap = kap * u + d1[:, j]
    dkap = np.zeros(len(s))
    for j in range(d2.shape[1] - 1, -1, -1):
        dkap = dkap * u + d2[:, j]

    beyond = s > line.total_length
    kap[beyond] = 0.0
    dkap[beyond] = 0.0
    return kap, dkap


def kappa_at(line: GuideLine, s: float) -> tuple[float, float]:
    """Curvature and curvature rate at arc length ``s``."""
    kap, dkap = kappa_at_many(line, [s])
    return float(kap[0]), float(dkap[0])


def points_at_many(line: GuideLine, s) -> tuple[NDArray, NDArray, NDArray, NDArray]:
    """Vectorized pose query: x, y, heading, curvature at arc lengths ``s``."""
    from .geometry import gauss_legendre_nodes

    s = np.atleast_1d(np.asarray(s, dtype=float))
    total = line.total_length
    s_in = np.clip(s, 0.0, total)
    cum = line.cumulative_lengths
    idx = _piece_index(line, s_in)
    u = s_in - cum[idx]
    coeffs = _coeff_matrix(line)[idx]

    nodes, weights = gauss_legendre_nodes()
    uq = 0.5 * u[:, None] * (nodes[None, :] + 1.0)
    ang = np.zeros_like(uq)
    for j in range(5, -1, -1):
        ang = ang * uq + coeffs[:, j][:, None]
    x = line.knots[idx, 0] + 0.5 * u * (np.cos(ang) @ weights)
    y = line.knots[idx, 1] + 0.5 * u * (np.sin(ang) @ weights)

    theta = np.zeros(len(s))
    for j in range(5, -1, -1):
        theta = theta * u + coeffs[:, j]
    jj = np.arange(1, 6)
    d1 = coeffs[:, 1:] * jj
    kap = np.zeros(len(s))
    for j in range(4, -1, -1):
        kap = kap * u + d1[:, j]

    over = s > total
    if np.any(over):
        th_end = line.knot_theta[-1]
        ds = s[over] - total
        x[over] = line.knots[-1, 0] + ds * math.cos(th_end)
        y[over] = line.knots[-1, 1] + ds * math.sin(th_end)
        theta[over] = th_end
        kap[over] = 0.0
    return x, y, theta, kap


def point_at(line: GuideLine, s: float) -> tuple[float, float, float, float]:
    """Pose (x, y, heading, curvature) at arc length ``s``."""
    x, y, th, ka = points_at_many(line, [s])
    return float(x[0]), float(y[0]), float(th[0]), float(ka[0])


def to_cartesian(line: GuideLine, state: LongitudinalState) -> CartesianState:
    """Compose a longitudinal state with the line into a Cartesian state."""
    x, y, th, ka = point_at(line, state.s)
    return CartesianState(x=x, y=y, theta=th, kappa=ka, v=state.v, a=state.a)


def centripetal_acceleration(line: GuideLine, state: LongitudinalState) -> float:
    kap, _ = kappa_at(line, state.s)
    return state.v * state.v * kap


def project_with_distance(line: GuideLine, x: float, y: float) -> tuple[float, float]:
    """Arc length of the closest point on the line, plus that distance.

    Coarse 1 m sweep over the whole line followed by golden-section
    refinement of the bracketing interval down to 1e-4 m.
    """
    total = line.total_length
    grid = np.arange(0.0, total, 1.0)
    grid = np.append(grid, total)
    gx, gy, _, _ = points_at_many(line, grid)
    d2 = (gx - x) ** 2 + (gy - y) ** 2
    k = int(np.argmin(d2))
    lo = grid[max(k - 1, 0)]
    hi = grid[min(k + 1, len(grid) - 1)]

    def dist2(sv: float) -> float:
        px, py, _, _ = point_at(line, sv)
        return (px - x) ** 2 + (py - y) ** 2

    a, b = lo, hi
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = dist2(c), dist2(d)
    while b - a > 1e-4:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = dist2(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = dist2(d)
    s_best = 0.5 * (a + b)
    return s_best, math.sqrt(dist2(s_best))


def project(line: GuideLine, x: float, y: float, max_lateral: float = 10.0) -> float:
    """Arc length of the closest point; errors if farther than ``max_lateral``."""
    s_best, dist = project_with_distance(line, x, y)
    if dist > max_lateral:
        raise ProjectionError(
            f"point ({x:.2f}, {y:.2f}) is {dist:.2f} m from the guide line "
            f"(limit {max_lateral:.2f} m)"
        )
    return s_best
