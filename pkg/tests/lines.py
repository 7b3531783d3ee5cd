"""Hand-built guide lines with closed-form geometry, for exact oracles."""

from __future__ import annotations

import numpy as np

from inlane.geometry import SpiralCurve
from inlane.smoother import GuideLine


def straight_line(piece_lengths=(10.0, 10.0)) -> GuideLine:
    """Straight line along +x made of zero-curvature pieces.

    Arc length coincides with the x coordinate, so every Frenet query has
    an exact closed form.
    """
    pieces = tuple(SpiralCurve((0.0,) * 6, float(length))
                   for length in piece_lengths)
    cum = np.concatenate([[0.0], np.cumsum([p.length for p in pieces])])
    knots = np.column_stack([cum, np.zeros(len(cum))])
    zeros = np.zeros(len(cum))
    return GuideLine(pieces=pieces, knots=knots, cumulative_lengths=cum,
                     knot_theta=zeros.copy(), knot_kappa=zeros.copy(),
                     knot_dkappa=zeros.copy())


def arc_line(kappa: float = 0.1, length: float = 15.0) -> GuideLine:
    """Single constant-curvature piece starting at the origin heading +x.

    Points lie on a circle of radius 1/kappa centered at (0, 1/kappa):
    (x, y)(s) = (sin(kappa s), 1 - cos(kappa s)) / kappa.
    """
    piece = SpiralCurve((0.0, float(kappa), 0.0, 0.0, 0.0, 0.0), float(length))
    end = piece.position(length)
    knots = np.array([[0.0, 0.0], [end[0], end[1]]])
    return GuideLine(
        pieces=(piece,),
        knots=knots,
        cumulative_lengths=np.array([0.0, float(length)]),
        knot_theta=np.array([0.0, float(kappa) * float(length)]),
        knot_kappa=np.array([float(kappa), float(kappa)]),
        knot_dkappa=np.zeros(2),
    )
