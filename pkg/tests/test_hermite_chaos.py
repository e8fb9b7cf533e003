import math
import warnings
from fractions import Fraction

import numpy as np
import pytest

from fbmchaos import DomainError
from fbmchaos.hermite_chaos import (
    ChaosExpansion,
    MultiIndex,
    PastSet,
    chaos_condition,
    chaos_eval,
    chaos_mean_variance,
    conditional_hermite,
    conditional_moment,
    hermite_eval,
    hermite_param_eval,
    multiindex_factorial,
    wick_exponential,
    wick_square,
)


def hermite_sum(n, alpha, x):
    """Definition oracle: ``sum_k n!/(k!(n-2k)!) (-alpha/2)^k x^(n-2k)``."""
    return sum(
        Fraction(math.factorial(n), math.factorial(k) * math.factorial(n - 2 * k))
        * Fraction(-alpha, 2) ** k * Fraction(x) ** (n - 2 * k)
        for k in range(n // 2 + 1)
    )


# Hermite polynomials ---------------------------------------------------------


def test_hermite_small_values():
    assert hermite_eval(2, 2.0) == 3.0
    assert hermite_eval(0, 7.3) == 1.0
    assert hermite_eval(3, 2.0) == 2.0
    assert hermite_eval(1, -0.25) == -0.25


def test_parametrized_small_values():
    for a in (-1.5, 0.0, 0.5, 2.0):
        for x in (-1.0, 0.3, 2.5):
            assert hermite_param_eval(2, a, x) == pytest.approx(x * x - a, abs=1e-15)
    assert hermite_param_eval(4, 0, 1.5) == 5.0625
    assert hermite_param_eval(3, 2.0, 1.0) == -5.0


@pytest.mark.parametrize("n", range(0, 11))
def test_exact_integer_arithmetic_matches_definition(n):
    for x in range(-4, 5):
        for a in (-2, 0, 1, 3):
            got = hermite_param_eval(n, a, x)
            assert isinstance(got, int)
            assert got == hermite_sum(n, a, x)
        assert hermite_param_eval(n, 1, x) == hermite_eval(n, x)
        assert hermite_param_eval(n, 0, x) == x**n


def test_fraction_inputs_stay_exact():
    x = Fraction(7, 3)
    assert hermite_eval(5, x) == hermite_sum(5, 1, x)
    assert isinstance(hermite_eval(5, x), Fraction)


def test_float_recurrence_relative_accuracy_to_degree_50():
    xs = np.linspace(-10, 10, 41)
    for n in range(1, 50):
        lhs = hermite_eval(n + 1, xs)
        rhs = xs * hermite_eval(n, xs) - n * hermite_eval(n - 1, xs)
        assert np.all(np.abs(lhs - rhs) <= 1e-12 * np.maximum(1.0, np.abs(lhs)))
    for x in (-7.5, -0.5, 3.25, 9.0):
        for n in (20, 35, 50):
            ref = float(hermite_sum(n, 1, Fraction(x)))
            assert hermite_eval(n, x) == pytest.approx(ref, rel=1e-12, abs=1e-12)


def test_derivative_against_central_differences():
    h = 1e-5
    for n in range(1, 11):
        for x in (-2.3, -0.4, 0.9, 3.1):
            fd = (hermite_eval(n, x + h) - hermite_eval(n, x - h)) / (2 * h)
            assert fd == pytest.approx(n * hermite_eval(n - 1, x), rel=1e-6, abs=1e-6)


def test_generating_function():
    c, x = 0.5, 1.0
    partial = math.fsum(c**n * hermite_eval(n, x) / math.factorial(n) for n in range(31))
    assert abs(partial - math.exp(c * x - c * c / 2)) <= 1e-12


def test_vectorized_evaluation():
    xs = np.array([-1.0, 0.0, 2.0])
    np.testing.assert_array_equal(hermite_eval(2, xs), xs**2 - 1)
    np.testing.assert_array_equal(hermite_eval(0, xs), np.ones(3))
    np.testing.assert_array_equal(hermite_param_eval(3, 0.5, [1.0, 2.0]), np.array([1 - 1.5, 8 - 3.0]))


@pytest.mark.parametrize("n", [-1, 171, 2.5, True])
def test_degree_guard(n):
    with pytest.raises(DomainError):
        hermite_eval(n, 1.0)


def test_degree_170_allowed():
    assert hermite_param_eval(170, 0, 1.0) == 1.0
    assert math.isfinite(hermite_eval(170, 0.0))


# Conditional moments ---------------------------------------------------------


def test_conditional_moment_values():
    assert conditional_moment(2, 0.7, 0.3) == pytest.approx(0.49 + 0.3)
    assert conditional_moment(1, 0.4, 0.9) == 0.4
    assert conditional_moment(4, 0.0, 1.0) == 3.0
    with pytest.raises(DomainError):
        conditional_moment(2, 0.0, -0.1)


def test_conditional_moment_against_gauss_hermite_quadrature():
    z, w = np.polynomial.hermite_e.hermegauss(40)
    w = w / w.sum()
    for n in range(0, 12):
        for mu, s2 in ((0.0, 1.0), (0.7, 0.3), (-1.2, 2.5)):
            ref = float(np.sum(w * (mu + math.sqrt(s2) * z) ** n))
            assert conditional_moment(n, mu, s2) == pytest.approx(ref, rel=1e-11, abs=1e-12)


def test_conditional_hermite_values():
    assert conditional_hermite(2, 0.8, 0.25) == pytest.approx(0.64 - 0.25)
    assert conditional_hermite(0, 5.0, 2.0) == 1.0
    assert conditional_hermite(3, 1.0, 0.5) == -0.5
    with pytest.raises(DomainError):
        conditional_hermite(1, 0.0, -1.0)


def test_conditional_hermite_is_conditional_expectation():
    # U = mu + sqrt(1 - v) Z with mu ~ N(0, v): E[h_n(U) | mu] = h_n^[v](mu)
    z, w = np.polynomial.hermite_e.hermegauss(40)
    w = w / w.sum()
    for v in (0.2, 0.5, 0.9):
        for mu in (-1.3, 0.0, 0.6):
            for n in range(0, 9):
                ref = float(np.sum(w * hermite_eval(n, mu + math.sqrt(1 - v) * z)))
                assert conditional_hermite(n, mu, v) == pytest.approx(ref, rel=1e-10, abs=1e-11)


# Multi-indices and expansions ------------------------------------------------


def test_multiindex_canonical_form():
    a = MultiIndex(((3, 1), (-2, 2), (5, 0)))
    b = MultiIndex.from_mapping({-2: 2, 3: 1})
    assert a == b and hash(a) == hash(b)
    assert a.entries == ((-2, 2), (3, 1))
    assert a.order == 3 and a.support == (-2, 3)
    assert MultiIndex.pair(4, 1) == MultiIndex(((1, 1), (4, 1)))
    assert MultiIndex.pair(2, 2) == MultiIndex.unit(2, 2)
    with pytest.raises(DomainError):
        MultiIndex(((1, -1),))


def test_multiindex_text_roundtrip():
    for a in (MultiIndex(), MultiIndex.unit(-7), MultiIndex(((-3, 2), (1, 3)))):
        assert MultiIndex.from_text(a.to_text()) == a
    assert MultiIndex().to_text() == "-"
    assert MultiIndex(((-3, 2), (1, 3))).to_text() == "-3:2,1:3"


def test_multiindex_factorial():
    assert multiindex_factorial(MultiIndex()) == 1
    assert multiindex_factorial(MultiIndex(((-3, 2), (1, 3)))) == 12
    assert multiindex_factorial(MultiIndex.unit(0, 4)) == 24


def test_expansion_drops_tiny_and_checks_window():
    e = ChaosExpansion({MultiIndex(): 1.0, MultiIndex.unit(1): 1e-16, MultiIndex.unit(2): 0.5})
    assert len(e) == 2
    assert e.coefficient(MultiIndex.unit(1)) == 0.0
    with pytest.raises(DomainError):
        ChaosExpansion({MultiIndex.unit(9): 1.0}, basis_window=(-2, 2))


def test_expansion_text_roundtrip_is_lossless():
    rng = np.random.default_rng(3)
    terms = {MultiIndex(): float(rng.normal())}
    for j in range(-3, 3):
        terms[MultiIndex.unit(j)] = float(rng.normal())
        terms[MultiIndex.pair(j, j + 2)] = float(rng.normal()) * 1e-9
    e = ChaosExpansion(terms)
    back = ChaosExpansion.from_text(e.to_text())
    assert dict(back.terms) == dict(e.terms)
    assert e.to_text().splitlines()[0].startswith("- ")


def test_chaos_eval_examples():
    assert chaos_eval(ChaosExpansion({MultiIndex(): 2.5}), {}) == 2.5
    assert chaos_eval(ChaosExpansion({MultiIndex.unit(5): 2.0}), {5: 1.5}) == 3.0
    assert chaos_eval(ChaosExpansion({MultiIndex.unit(5, 2): 1.0}), {5: 2.0}) == 3.0
    with pytest.raises(DomainError):
        chaos_eval(ChaosExpansion({MultiIndex.unit(5): 1.0}), {4: 0.0})


def test_chaos_condition_examples():
    a, b, c = 0.3, -1.1, 0.7
    e = ChaosExpansion({MultiIndex(): 0.2, MultiIndex.unit(-1): a, MultiIndex.unit(0): b, MultiIndex.pair(-1, 0): c})
    assert dict(chaos_condition(e, PastSet.everything()).terms) == dict(e.terms)
    assert dict(chaos_condition(e, PastSet.nothing()).terms) == {MultiIndex(): 0.2}
    kept = chaos_condition(e, PastSet.half_line(-1))
    assert dict(kept.terms) == {MultiIndex(): 0.2, MultiIndex.unit(-1): a}


def test_chaos_condition_is_a_projection():
    e = wick_exponential({-2: 0.3, -1: 0.2, 0: -0.4, 1: 0.1}, 4)
    p = PastSet.of([-2, 0])
    once = chaos_condition(e, p)
    assert dict(chaos_condition(once, p).terms) == dict(once.terms)
    assert chaos_mean_variance(once)[1] <= chaos_mean_variance(e)[1]


def test_chaos_condition_matches_monte_carlo_conditioning():
    # E[(Z1 + Z2)^2 Z1 | Z1] = Z1^3 + Z1
    e = ChaosExpansion({MultiIndex.unit(1, 3): 1.0, MultiIndex.unit(1): 3.0, MultiIndex(((1, 1), (2, 2))): 1.0,
                        MultiIndex(((1, 2), (2, 1))): 2.0})
    cond = chaos_condition(e, PastSet.of([1]))
    z = np.linspace(-2, 2, 9)
    np.testing.assert_allclose(chaos_eval(cond, {1: z}), hermite_eval(3, z) + 3 * z)


def test_mean_variance_examples():
    assert chaos_mean_variance(ChaosExpansion({MultiIndex(): 3.0})) == (3.0, 0.0)
    assert chaos_mean_variance(ChaosExpansion({MultiIndex.unit(1): 2.0, MultiIndex.unit(2): 1.0})) == (0.0, 5.0)
    assert chaos_mean_variance(ChaosExpansion({MultiIndex.unit(1, 2): 1.0})) == (0.0, 2.0)


# Wick square and exponential ---------------------------------------------------


def test_wick_square_one_term():
    e = wick_square({1: 1.0}, 1.0)
    assert dict(e.terms) == {MultiIndex(): 1.0, MultiIndex.unit(1, 2): 1.0}
    z = np.linspace(-3, 3, 7)
    np.testing.assert_allclose(chaos_eval(e, {1: z}), z**2, atol=1e-14)


def test_wick_square_pairs_stored_once():
    a, b = 0.6, -0.8
    e = wick_square({2: b, 1: a}, a * a + b * b)
    assert e.coefficient(MultiIndex.pair(1, 2)) == 2 * a * b
    assert e.coefficient(MultiIndex.unit(1, 2)) == a * a
    rng = np.random.default_rng(0)
    z1, z2 = rng.standard_normal((2, 1000))
    np.testing.assert_allclose(chaos_eval(e, {1: z1, 2: z2}), (a * z1 + b * z2) ** 2, rtol=1e-12, atol=1e-14)


def test_wick_square_conditioning_is_gaussian_identity():
    a, b = 0.6, -0.8
    cond = chaos_condition(wick_square({1: a, 2: b}, a * a + b * b), PastSet.of([1]))
    z = np.linspace(-2, 2, 5)
    expected = conditional_moment(2, a * z, b * b)
    np.testing.assert_allclose(chaos_eval(cond, {1: z}), expected, rtol=1e-14)


def test_wick_square_warns_on_inconsistent_variance():
    with pytest.warns(RuntimeWarning):
        wick_square({1: 0.5}, 1.0)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        wick_square({1: 0.5}, 0.25)


def test_wick_exponential_single_index():
    lam = 0.4
    e = wick_exponential({1: lam}, 3)
    assert dict(e.terms) == pytest.approx({
        MultiIndex(): 1.0,
        MultiIndex.unit(1): lam,
        MultiIndex.unit(1, 2): lam**2 / 2,
        MultiIndex.unit(1, 3): lam**3 / 6,
    })


def test_wick_exponential_mean_and_variance():
    e = wick_exponential({1: 0.1}, 6)
    mean, var = chaos_mean_variance(e)
    assert mean == 1.0
    assert abs(var - (math.exp(0.01) - 1)) < 1e-10
    e2 = wick_exponential({-1: 0.2, 3: -0.3, 4: 0.1}, 8)
    assert chaos_mean_variance(e2)[1] == pytest.approx(math.exp(0.14) - 1, rel=1e-7)


def test_wick_exponential_is_normalized_exponential():
    c = {-2: 0.25, 0: -0.15, 5: 0.2}
    var = sum(v * v for v in c.values())
    rng = np.random.default_rng(1)
    draws = {j: rng.standard_normal(1000) for j in c}
    x = sum(v * draws[j] for j, v in c.items())
    got = chaos_eval(wick_exponential(c, 10), draws)
    np.testing.assert_allclose(got, np.exp(x - var / 2), atol=1e-6)


@pytest.mark.parametrize("order", [0, 13, 2.5])
def test_wick_exponential_order_guard(order):
    with pytest.raises(DomainError):
        wick_exponential({1: 0.1}, order)
