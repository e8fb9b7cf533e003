import math

import numpy as np
import pytest
import scipy.special

from fbmchaos import DomainError
from fbmchaos.quadrature import (
    GAUSS_WEIGHTS,
    KRONROD_WEIGHTS,
    NODES,
    QuadratureError,
    QuadratureSpec,
    TailComponent,
    algebraic_tail,
    fourier_tail,
    grade_toward_zero,
    half_line_integral,
    integrate_panels,
    phase_edges,
    wynn_epsilon,
)


def test_rule_constants():
    assert KRONROD_WEIGHTS.sum() == pytest.approx(2.0, abs=1e-15)
    assert GAUSS_WEIGHTS.sum() == pytest.approx(2.0, abs=1e-15)
    np.testing.assert_allclose(NODES, -NODES[::-1], atol=0)
    # Kronrod is exact to degree 31, Gauss to 19
    for k in range(0, 31, 2):
        assert np.dot(KRONROD_WEIGHTS, NODES**k) == pytest.approx(2 / (k + 1), abs=1e-14)
    for k in range(0, 20, 2):
        assert np.dot(GAUSS_WEIGHTS, NODES**k) == pytest.approx(2 / (k + 1), abs=1e-14)


def test_quadrature_settings_validation():
    with pytest.raises(DomainError):
        QuadratureSpec(abs_tol=0)
    with pytest.raises(DomainError):
        QuadratureSpec(gamma_max=0.5)
    s = QuadratureSpec().scaled(0.5)
    assert s.abs_tol == 5e-9 and s.rel_tol == 5e-7


def test_integrate_panels_with_endpoint_singularity():
    # int_0^1 x^(-1/2) dx = 2 with geometric grading toward zero
    edges = grade_toward_zero(np.array([0.0, 1.0]))
    res = integrate_panels(lambda x: x**-0.5, edges, QuadratureSpec(1e-12, 1e-12))
    assert res.value == pytest.approx(2.0, abs=1e-10)
    assert res.error < 1e-9


def test_integrate_panels_batched_rows():
    a = np.array([1.0, 2.0, 5.0])

    def f(x):
        return np.cos(a[:, None] * x)

    res = integrate_panels(f, np.linspace(0, 3, 4), QuadratureSpec(1e-12, 1e-12))
    np.testing.assert_allclose(res.value, np.sin(3 * a) / a, atol=1e-11)


def test_integrate_panels_budget_overrun_raises():
    with pytest.raises(QuadratureError):
        integrate_panels(lambda x: np.sin(1 / x), np.array([1e-6, 1.0]), QuadratureSpec(1e-14, 1e-14, max_panels=20))


def test_non_finite_integrand_raises():
    with pytest.raises(QuadratureError):
        integrate_panels(lambda x: np.full_like(x, np.nan), np.array([0.0, 1.0]), QuadratureSpec())


def test_phase_edges_follow_half_periods():
    edges = phase_edges(lambda x: 3 * x, 0.0, 10.0)
    assert edges[0] == 0.0 and edges[-1] == 10.0
    inner = np.diff(edges)[:-1]
    np.testing.assert_allclose(inner, math.pi / 3, rtol=1e-10)


def test_wynn_accelerates_alternating_series():
    partial = np.cumsum([(-1) ** k / (k + 1) for k in range(15)])
    est = wynn_epsilon(partial)
    assert abs(est - math.log(2)) < 1e-9
    assert abs(partial[-1] - math.log(2)) > 1e-2


def test_fourier_tail_sine_integral():
    # int_a^inf sin(x)/x dx = pi/2 - Si(a), as Im of int exp(i x)/x
    a = 5.0
    res = fourier_tail(lambda x: 1 / x, 1.0, a, QuadratureSpec(1e-11, 1e-11))
    si, _ = scipy.special.sici(a)
    assert np.imag(res.value) == pytest.approx(math.pi / 2 - si, abs=1e-10)
    ci = scipy.special.sici(a)[1]
    assert np.real(res.value) == pytest.approx(-ci, abs=1e-10)


def test_fourier_tail_rejects_zero_frequency():
    with pytest.raises(DomainError):
        fourier_tail(lambda x: 1 / x**2, 0.0, 1.0, QuadratureSpec())


def test_algebraic_tail():
    res = algebraic_tail(lambda x: x**-1.5, 4.0, QuadratureSpec(1e-12, 1e-12))
    assert res.value == pytest.approx(2 / math.sqrt(4.0), abs=1e-10)


def test_half_line_integral_matches_closed_form():
    # int_0^inf (1 - cos(t g)) / g^2 dg = pi |t| / 2, tail split into exp(+-i t g) parts
    t = 1.7

    def full(g):
        return (1 - np.cos(t * g)) / g**2

    comps = [
        TailComponent(0.0, lambda g: 1 / g**2),
        TailComponent(t, lambda g: -0.5 / g**2),
        TailComponent(-t, lambda g: -0.5 / g**2),
    ]
    res = half_line_integral(full, comps, QuadratureSpec(1e-10, 1e-10), phase=lambda g: t * g)
    assert np.real(res.value) == pytest.approx(math.pi * t / 2, abs=1e-8)
