"""Quintic spiral pieces: fitting, evaluation, quadrature.

Oracles:
* boundary residuals of the closed-form fit checked directly;
* curvature / curvature rate checked against central finite differences
  of the tangent angle;
* position quadrature checked against closed-form circles and against
  both a higher-order rule and a chunked composite rule.
"""

from __future__ import annotations

import math

import numpy as np
import pytest

from inlane.geometry import (
    GAUSS_LEGENDRE_ORDER,
    SpiralCurve,
    fit_quintic_spiral,
    gauss_legendre_nodes,
    integrate_position,
)


def test_fit_straight_is_all_zero():
    curve = fit_quintic_spiral(0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 10.0)
    assert curve.length == 10.0
    np.testing.assert_allclose(curve.coeffs, np.zeros(6), atol=0.0)


def test_fit_constant_curvature_arc():
    # theta grows linearly, curvature stays constant: only c0, c1 fire.
    curve = fit_quintic_spiral(0.0, 0.1, 0.0, 1.0, 0.1, 0.0, 10.0)
    np.testing.assert_allclose(curve.coeffs[:2], [0.0, 0.1], atol=1e-14)
    np.testing.assert_allclose(curve.coeffs[2:], np.zeros(4), atol=1e-14)
    assert curve.theta(3.0) == pytest.approx(0.3, abs=1e-14)
    assert curve.kappa(7.0) == pytest.approx(0.1, abs=1e-14)
    assert curve.dkappa(7.0) == pytest.approx(0.0, abs=1e-14)


def test_fit_boundary_residuals_random():
    rng = np.random.default_rng(12)
    for _ in range(100):
        th0, th1 = rng.uniform(-3.0, 3.0, size=2)
        k0, k1 = rng.uniform(-0.3, 0.3, size=2)
        dk0, dk1 = rng.uniform(-0.05, 0.05, size=2)
        length = rng.uniform(0.5, 20.0)
        curve = fit_quintic_spiral(th0, k0, dk0, th1, k1, dk1, length)
        residuals = [
            curve.theta(0.0) - th0,
            curve.kappa(0.0) - k0,
            curve.dkappa(0.0) - dk0,
            curve.theta(length) - th1,
            curve.kappa(length) - k1,
            curve.dkappa(length) - dk1,
        ]
        assert max(abs(r) for r in residuals) < 1e-10


def test_fit_rejects_nonpositive_length():
    with pytest.raises(ValueError):
        fit_quintic_spiral(0.0, 0.0, 0.0, 0.1, 0.0, 0.0, 0.0)
    with pytest.raises(ValueError):
        fit_quintic_spiral(0.0, 0.0, 0.0, 0.1, 0.0, 0.0, -1.0)


def test_spiral_curve_validates_inputs():
    with pytest.raises(ValueError):
        SpiralCurve((0.0, 0.1, 0.0), 5.0)
    with pytest.raises(ValueError):
        SpiralCurve((0.0,) * 6, -2.0)


def test_evaluation_outside_range_raises():
    curve = SpiralCurve((0.0, 0.1, 0.0, 0.0, 0.0, 0.0), 5.0)
    # Endpoints are fine, clearly outside values are not.
    curve.theta(0.0)
    curve.theta(5.0)
    for s in (-0.1, 5.1):
        with pytest.raises(ValueError):
            curve.theta(s)
        with pytest.raises(ValueError):
            curve.position(s)


def test_derivatives_match_finite_differences():
    curve = SpiralCurve((0.1, 0.05, 0.01, 0.001, 1e-4, 1e-5), 10.0)
    rng = np.random.default_rng(3)
    h = 1e-6
    for s in rng.uniform(h, curve.length - h, size=100):
        fd_kappa = (curve.theta(s + h) - curve.theta(s - h)) / (2 * h)
        fd_dkappa = (curve.kappa(s + h) - curve.kappa(s - h)) / (2 * h)
        assert abs(curve.kappa(s) - fd_kappa) / abs(fd_kappa) < 1e-6
        assert abs(curve.dkappa(s) - fd_dkappa) / abs(fd_dkappa) < 1e-6


def test_position_straight():
    curve = SpiralCurve((0.0,) * 6, 12.0)
    np.testing.assert_allclose(curve.position(10.0), (10.0, 0.0), atol=1e-12)
    np.testing.assert_allclose(curve.position(10.0, origin=(2.0, -1.0)),
                               (12.0, -1.0), atol=1e-12)


def test_position_quarter_circle():
    # kappa = 0.1 -> radius 10; a quarter turn ends at (10, 10).
    radius = 10.0
    length = 0.5 * math.pi * radius
    curve = SpiralCurve((0.0, 1.0 / radius, 0.0, 0.0, 0.0, 0.0), length)
    np.testing.assert_allclose(curve.position(length), (radius, radius),
                               atol=1e-6)
    # Halfway point of the quarter turn, also closed form.
    half = 0.5 * length
    angle = half / radius
    expected = (radius * math.sin(angle), radius * (1.0 - math.cos(angle)))
    np.testing.assert_allclose(curve.position(half), expected, atol=1e-6)


def _chunked_position(curve: SpiralCurve, s: float, chunks: int = 8):
    """Composite quadrature oracle: same rule applied per subinterval."""
    nodes, weights = gauss_legendre_nodes(GAUSS_LEGENDRE_ORDER)
    edges = np.linspace(0.0, s, chunks + 1)
    x = y = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        half = 0.5 * (b - a)
        u = a + half * (nodes + 1.0)
        ang = np.array([curve.theta(ui) for ui in u])
        x += half * float(weights @ np.cos(ang))
        y += half * float(weights @ np.sin(ang))
    return x, y


def test_quadrature_order_and_chunking_agree():
    rng = np.random.default_rng(21)
    for _ in range(10):
        th1 = rng.uniform(-0.5 * math.pi, 0.5 * math.pi)
        k0, k1 = rng.uniform(-0.1, 0.1, size=2)
        length = rng.uniform(2.0, 15.0)
        curve = fit_quintic_spiral(0.0, k0, 0.0, th1, k1, 0.0, length)
        base = integrate_position(curve, length)
        refined = integrate_position(curve, length,
                                     order=2 * GAUSS_LEGENDRE_ORDER)
        chunked = _chunked_position(curve, length)
        assert math.hypot(base[0] - refined[0], base[1] - refined[1]) < 1e-8
        assert math.hypot(base[0] - chunked[0], base[1] - chunked[1]) < 1e-8


def test_gauss_legendre_nodes_integrate_polynomials_exactly():
    nodes, weights = gauss_legendre_nodes(GAUSS_LEGENDRE_ORDER)
    assert len(nodes) == GAUSS_LEGENDRE_ORDER
    # Exact for polynomials up to degree 2 * order - 1 on [-1, 1].
    for degree in range(2 * GAUSS_LEGENDRE_ORDER):
        exact = (1.0 - (-1.0) ** (degree + 1)) / (degree + 1)
        assert float(weights @ nodes**degree) == pytest.approx(exact,
                                                               abs=1e-13)
