"""Stochastic-core: samplers, special functions, quadrature.

Derived expectations are computed by independent oracles defined in this
file (series, continued fractions, recurrences), then pinned as literals.
"""

import math

import numpy as np
import pytest

from mcarsense.errors import AccuracyError, DomainError, ParameterError
from mcarsense.stochastic import (
    QuadratureSpec,
    RngStream,
    digamma,
    exp_integral_e1,
    exp_integral_e1_inverse,
    integrate_semiline,
    log_gamma,
    sample_categorical,
    sample_categorical_many,
    sample_gamma,
)

EULER_GAMMA = 0.5772156649015329


# --- independent oracles ----------------------------------------------------


def lower_incomplete_gamma_p(a, x, terms=200):
    """Regularized lower incomplete gamma P(a, x) by its power series."""
    total = 0.0
    term = 1.0 / a
    for k in range(1, terms):
        total += term
        term *= x / (a + k)
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))


def e1_continued_fraction(x, depth=60):
    """E1 via the standard continued fraction (good for x >= 1)."""
    cf = 0.0
    for k in range(depth, 0, -1):
        cf = k / (1.0 + k / (x + cf))
    return math.exp(-x) / (x + cf)


def e1_asymptotic(x, terms=12):
    """E1 via the divergent asymptotic series (x large)."""
    s, term = 1.0, 1.0
    for k in range(1, terms):
        term *= -k / x
        s += term
    return math.exp(-x) / x * s


# --- RngStream ---------------------------------------------------------------


def test_rng_reproducible_and_streams_distinct():
    a = RngStream(123, 4).generator().random(8)
    b = RngStream(123, 4).generator().random(8)
    c = RngStream(123, 5).generator().random(8)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


# --- sample_gamma ------------------------------------------------------------


def test_gamma_mean_exponential_case():
    x = sample_gamma(1.0, 2.0, RngStream(1), size=100_000)
    assert x.mean() == pytest.approx(0.5, abs=0.01)


def test_gamma_variance():
    x = sample_gamma(2.0, 1.0, RngStream(2), size=100_000)
    assert x.var() == pytest.approx(2.0, abs=0.1)


def test_gamma_cdf_against_series_oracle():
    oracle = lower_incomplete_gamma_p(2.0, 1.0)
    assert oracle == pytest.approx(0.2642411176571153, abs=1e-12)
    x = sample_gamma(2.0, 1.0, RngStream(3), size=100_000)
    assert np.mean(x <= 1.0) == pytest.approx(oracle, abs=0.01)


def test_gamma_small_shape_moments():
    x = sample_gamma(0.3, 1.5, RngStream(4), size=200_000)
    assert x.mean() == pytest.approx(0.2, abs=0.005)
    assert np.all(x >= 0)


def test_gamma_rejects_bad_parameters():
    with pytest.raises(ParameterError):
        sample_gamma(0.0, 1.0, RngStream(0))
    with pytest.raises(ParameterError):
        sample_gamma(1.0, -2.0, RngStream(0))


# --- sample_categorical ------------------------------------------------------


def test_categorical_degenerate():
    gen = RngStream(5).generator()
    assert all(sample_categorical([1, 0, 0], gen) == 0 for _ in range(50))


def test_categorical_symmetric():
    idx = sample_categorical_many([1.0, 1.0], 100_000, RngStream(6))
    assert np.mean(idx == 0) == pytest.approx(0.5, abs=0.01)


def test_categorical_frequencies():
    idx = sample_categorical_many([0.2, 0.3, 0.5], 100_000, RngStream(7))
    freqs = np.bincount(idx, minlength=3) / idx.size
    assert np.allclose(freqs, [0.2, 0.3, 0.5], atol=0.01)


def test_categorical_rejects_bad_weights():
    with pytest.raises(ParameterError):
        sample_categorical([0.0, 0.0], RngStream(0))
    with pytest.raises(ParameterError):
        sample_categorical([1.0, -0.5], RngStream(0))


# --- special functions -------------------------------------------------------


def test_digamma_values():
    assert digamma(1.0) == pytest.approx(-EULER_GAMMA, abs=1e-10)
    assert digamma(2.0) == pytest.approx(0.4227843350984671, abs=1e-10)
    # reflection oracle: psi(1/2) = -gamma - 2 log 2
    oracle = -EULER_GAMMA - 2 * math.log(2)
    assert oracle == pytest.approx(-1.9635100260214235, abs=1e-12)
    assert digamma(0.5) == pytest.approx(oracle, abs=1e-10)


def test_digamma_recurrence():
    for x in (0.1, 1.0, 2.0, 10.0):
        assert digamma(x + 1) - digamma(x) == pytest.approx(1.0 / x, abs=1e-9)


def test_log_gamma_values():
    assert log_gamma(1.0) == pytest.approx(0.0, abs=1e-12)
    assert log_gamma(4.0) == pytest.approx(math.log(6.0), abs=1e-10)
    # recurrence oracle: Gamma(2.5) = 1.5 * 0.5 * Gamma(0.5) = 0.75 * sqrt(pi)
    oracle = math.log(0.75 * math.sqrt(math.pi))
    assert oracle == pytest.approx(0.2846828704729192, abs=1e-12)
    assert log_gamma(2.5) == pytest.approx(oracle, abs=1e-10)


def test_log_gamma_recurrence():
    for x in (0.1, 1.0, 2.0, 10.0):
        assert log_gamma(x + 1) - log_gamma(x) == pytest.approx(math.log(x), abs=1e-9)


def test_special_functions_domain_errors():
    for fn in (digamma, log_gamma, exp_integral_e1):
        with pytest.raises(DomainError):
            fn(0.0)
        with pytest.raises(DomainError):
            fn(-1.0)


def test_e1_continued_fraction_oracle():
    oracle = e1_continued_fraction(1.0)
    assert oracle == pytest.approx(0.21938393439552029, abs=1e-12)
    assert exp_integral_e1(1.0) == pytest.approx(oracle, rel=1e-10)


def test_e1_asymptotic_oracle():
    # the divergent asymptotic series at x = 10 carries ~4 correct digits;
    # the continued fraction pins the full precision
    assert exp_integral_e1(10.0) == pytest.approx(e1_asymptotic(10.0), rel=5e-4)
    assert exp_integral_e1(10.0) == pytest.approx(e1_continued_fraction(10.0), rel=1e-10)
    assert exp_integral_e1(10.0) == pytest.approx(4.15697e-6, abs=1e-10)


def test_e1_small_x_expansion():
    x = 1e-6
    assert exp_integral_e1(x) + math.log(x) + EULER_GAMMA == pytest.approx(0.0, abs=1e-5)


def test_e1_inverse_roundtrip():
    for u in (1e-6, 0.01, 0.5, 3.0, 40.0):
        x = exp_integral_e1_inverse(u)
        assert exp_integral_e1(x) == pytest.approx(u, rel=1e-10)


# --- quadrature --------------------------------------------------------------


def test_semiline_exponential():
    val, err = integrate_semiline(lambda t: np.exp(-t), return_error=True)
    assert val == pytest.approx(1.0, abs=1e-8)
    assert err >= abs(val - 1.0)


def test_semiline_rational():
    val, err = integrate_semiline(lambda t: 1.0 / (1.0 + t) ** 2, return_error=True)
    assert val == pytest.approx(1.0, abs=1e-8)
    assert err >= abs(val - 1.0)


def test_semiline_gaussian_tail():
    val, err = integrate_semiline(lambda t: t * np.exp(-t * t), return_error=True)
    assert val == pytest.approx(0.5, abs=1e-8)
    assert err >= abs(val - 0.5)


def test_semiline_budget_exhaustion_carries_estimate():
    spec = QuadratureSpec(abs_tol=1e-15, rel_tol=1e-15, max_subdivisions=2)
    with pytest.raises(AccuracyError) as ei:
        integrate_semiline(lambda t: np.exp(-t) * np.sin(40 * t) ** 2, spec)
    assert ei.value.estimate is not None
    assert ei.value.error_bound is not None


def test_quadrature_spec_validation():
    with pytest.raises(ParameterError):
        QuadratureSpec(abs_tol=0.0)
    with pytest.raises(ParameterError):
        QuadratureSpec(max_subdivisions=0)
