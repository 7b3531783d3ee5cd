"""Quintic polynomial spirals.

A spiral piece describes the tangent direction of a planar curve as a
degree-5 polynomial of arc length,

    theta(s) = c0 + c1*s + c2*s**2 + ... + c5*s**5,    0 <= s <= length,

so curvature kappa = d(theta)/ds and curvature rate dkappa = d2(theta)/ds2
are the first and second polynomial derivatives. Six boundary values
(heading, curvature, curvature rate at both ends) determine the
coefficients in closed form, and positions follow by quadrature of
(cos theta, sin theta).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

# Fixed-order Gauss-Legendre rule used for every position integral.
GAUSS_LEGENDRE_ORDER = 8
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(GAUSS_LEGENDRE_ORDER)

# Slack for endpoint range checks, relative to piece length.
_RANGE_EPS = 1e-9


def _horner(coeffs, s):
    """Evaluate a polynomial with ascending coefficients at s (Horner)."""
    acc = 0.0
    for c in reversed(coeffs):
        acc = acc * s + c
    return acc


def _derivative_coeffs(coeffs):
    return tuple(j * c for j, c in enumerate(coeffs))[1:]


@dataclass(frozen=True)
class SpiralCurve:
    """One quintic spiral piece parameterized by arc length.

    Attributes
    ----------
    coeffs : tuple of 6 floats
        Ascending polynomial coefficients of the tangent angle.
    length : float
        Arc length of the piece in meters, strictly positive.
    """

    coeffs: tuple[float, float, float, float, float, float]
    length: float

    def __post_init__(self):
        if len(self.coeffs) != 6:
            raise ValueError(f"expected 6 coefficients, got {len(self.coeffs)}")
        if not np.isfinite(self.length) or self.length <= 0.0:
            raise ValueError(f"piece length must be positive, got {self.length}")

    def _check_range(self, s: float) -> None:
        slack = _RANGE_EPS * max(1.0, self.length)
        if s < -slack or s > self.length + slack:
            raise ValueError(
                f"arc length {s} outside piece range [0, {self.length}]"
            )

    def theta(self, s: float) -> float:
        """Tangent angle at arc length ``s`` (radians)."""
        self._check_range(s)
        return _horner(self.coeffs, s)

    def kappa(self, s: float) -> float:
        """Curvature at arc length ``s`` (1/m)."""
        self._check_range(s)
        return _horner(_derivative_coeffs(self.coeffs), s)

    def dkappa(self, s: float) -> float:
        """Curvature rate d(kappa)/ds at arc length ``s`` (1/m^2)."""
        self._check_range(s)
        return _horner(_derivative_coeffs(_derivative_coeffs(self.coeffs)), s)

    def position(
        self, s: float, origin: tuple[float, float] = (0.0, 0.0)
    ) -> tuple[float, float]:
        """Planar position at arc length ``s``, integrating from ``origin``.

        Uses one fixed-order Gauss-Legendre rule over [0, s]:

            x(s) = x0 + int_0^s cos(theta(u)) du
            y(s) = y0 + int_0^s sin(theta(u)) du
        """
        self._check_range(s)
        half = 0.5 * s
        u = half * (_GL_NODES + 1.0)
        ang = np.array([_horner(self.coeffs, ui) for ui in u])
        x = origin[0] + half * float(_GL_WEIGHTS @ np.cos(ang))
        y = origin[1] + half * float(_GL_WEIGHTS @ np.sin(ang))
        return (x, y)


def fit_quintic_spiral(
    theta0: float,
    kappa0: float,
    dkappa0: float,
    theta1: float,
    kappa1: float,
    dkappa1: float,
    length: float,
) -> SpiralCurve:
    """Fit the unique quintic spiral matching both endpoint boundary tuples.

    Boundary conditions are heading, curvature and curvature rate at s=0
    and s=length. The fit is the standard two-point Hermite solve: the
    first three coefficients read off the left boundary directly and the
    remaining three come from inverting the 3x3 endpoint system.

    Raises
    ------
    ValueError
        If ``length`` is not strictly positive.
    """
    if not np.isfinite(length) or length <= 0.0:
        raise ValueError(f"piece length must be positive, got {length}")
    t = float(length)
    c0 = float(theta0)
    c1 = float(kappa0)
    c2 = 0.5 * float(dkappa0)

    # Residuals of the right boundary after removing the left-boundary part.
    dth = theta1 - theta0 - kappa0 * t - 0.5 * dkappa0 * t * t
    dka = kappa1 - kappa0 - dkappa0 * t
    ddk = dkappa1 - dkappa0

    c3 = 10.0 * dth / t**3 - 4.0 * dka / t**2 + 0.5 * ddk / t
    c4 = -15.0 * dth / t**4 + 7.0 * dka / t**3 - ddk / t**2
    c5 = 6.0 * dth / t**5 - 3.0 * dka / t**4 + 0.5 * ddk / t**3
    return SpiralCurve((c0, c1, c2, c3, c4, c5), t)


def gauss_legendre_nodes(order: int = GAUSS_LEGENDRE_ORDER):
    """Nodes and weights on [-1, 1] for the given order (for callers that
    vectorize their own quadrature, e.g. the smoother's gradient path)."""
    if order == GAUSS_LEGENDRE_ORDER:
        return _GL_NODES, _GL_WEIGHTS
    return np.polynomial.legendre.leggauss(order)


def integrate_position(
    curve: SpiralCurve,
    s: float,
    origin: tuple[float, float] = (0.0, 0.0),
    order: int = GAUSS_LEGENDRE_ORDER,
) -> tuple[float, float]:
    """Position at arc length ``s`` along ``curve`` starting from ``origin``.

    Same quadrature as :meth:`SpiralCurve.position`; ``order`` is exposed so
    tests can compare against a refined rule.
    """
    curve._check_range(s)
    nodes, weights = gauss_legendre_nodes(order)
    half = 0.5 * s
    u = half * (nodes + 1.0)
    ang = np.array([_horner(curve.coeffs, ui) for ui in u])
    x = origin[0] + half * float(weights @ np.cos(ang))
    y = origin[1] + half * float(weights @ np.sin(ang))
    return (x, y)


def eval_theta_many(curve: SpiralCurve, s: NDArray) -> NDArray:
    """Vectorized tangent angle over an array of arc lengths."""
    out = np.zeros_like(np.asarray(s, dtype=float))
    for c in reversed(curve.coeffs):
        out = out * s + c
    return out
