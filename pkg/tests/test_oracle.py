import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nlselect.errors import DimensionTooLarge
from nlselect.laplace import log_marginal
from nlselect.oracle import (QuadratureConfig, central_tail_bound, central_tail_bound_stated,
                             chisq_tail_check, fd_gradient, finite_difference_check,
                             gaussian_product_moment, max_relative_deviation, mc_log_marginal,
                             noncentral_tail_bound, normal_moment_1d, quadrature_log_marginal)
from nlselect.priors import HyperConfig
from nlselect.verify import fixture

CFG = HyperConfig()


def test_product_moment_examples():
    assert gaussian_product_moment([0.0], [[1.0]], 1) == pytest.approx(1.0, rel=1e-12)
    assert gaussian_product_moment([0.0], [[1.0]], 2) == pytest.approx(3.0, rel=1e-12)
    assert gaussian_product_moment([1.0], [[2.0]], 1) == pytest.approx(3.0, rel=1e-12)
    with pytest.raises(DimensionTooLarge):
        gaussian_product_moment(np.zeros(3), np.eye(3), 1)


@given(st.floats(-3, 3), st.floats(0.05, 4), st.integers(1, 3))
def test_product_moment_matches_closed_form(mu, var, r):
    assert gaussian_product_moment([mu], [[var]], r) == pytest.approx(normal_moment_1d(mu, var, r), rel=1e-9)


def test_bivariate_moment_isserlis():
    # E[x^2 y^2] = 1 + 2 rho^2 for unit variances
    rho = 0.6
    got = gaussian_product_moment([0.0, 0.0], [[1.0, rho], [rho, 1.0]], 1)
    assert got == pytest.approx(1 + 2 * rho ** 2, rel=1e-10)


@given(st.floats(-2, 2), st.floats(-2, 2))
def test_product_moment_symmetric_in_mean(a, b):
    cov = [[1.0, 0.3], [0.3, 0.8]]
    assert gaussian_product_moment([a, b], cov, 2) == pytest.approx(
        gaussian_product_moment([-a, -b], cov, 2), rel=1e-10)


def test_product_moment_monotone_in_variance():
    vals = [gaussian_product_moment([0.0, 0.0], [[v, 0.2], [0.2, 1.0]], 2) for v in (0.5, 1.0, 2.0)]
    assert vals[0] < vals[1] < vals[2]


def test_null_quadrature_is_closed_form(two_col):
    assert quadrature_log_marginal(two_col, (), CFG) == log_marginal(two_col, (), CFG)


def test_quadrature_self_convergence():
    data = fixture(50, 1, [1.0], seed=11)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        res = quadrature_log_marginal(data, (0,), CFG, QuadratureConfig(check_doubling=True), full=True)
    assert res.rel_change <= 1e-4


def test_quadrature_dimension_limit(small_data):
    with pytest.raises(DimensionTooLarge):
        quadrature_log_marginal(small_data, (0, 1, 2), CFG)


def test_quadrature_fixed_tau_runs(two_col):
    cfg = HyperConfig(fixed_tau=0.5)
    quad = quadrature_log_marginal(two_col, (0,), cfg)
    assert abs(quad - log_marginal(two_col, (0,), cfg)) < 1.0


@pytest.mark.slow
def test_quadrature_agrees_with_monte_carlo():
    data = fixture(50, 1, [1.0], seed=11)
    quad = quadrature_log_marginal(data, (0,), CFG)
    mc = mc_log_marginal(data, (0,), CFG, draws=1_000_000, seed=2)
    assert abs(quad - mc.value) <= 3 * mc.stderr + 1e-9


def test_fd_exact_on_quadratic():
    a = np.array([[3.0, 1.0], [1.0, 2.0]])
    f = lambda x: 0.5 * x @ a @ x + x[0]
    x0 = np.array([0.3, -1.2])
    assert finite_difference_check("gradient", f, x0, a @ x0 + [1.0, 0.0]) <= 1e-10
    assert finite_difference_check("hessian", lambda x: a @ x, x0, a) <= 1e-10
    with pytest.raises(ValueError):
        finite_difference_check("jerk", f, x0, a)


def test_relative_deviation_definition():
    assert max_relative_deviation([1.0, 2.0], [1.0, 2.0]) == 0.0
    assert max_relative_deviation([1.0], [1.1]) == pytest.approx(0.1 / 1.1)
    assert fd_gradient(lambda x: math.sin(x[0]), np.array([0.4]))[0] == pytest.approx(math.cos(0.4), abs=1e-10)


def test_tail_bounds_formulas():
    assert central_tail_bound(10, 20) == pytest.approx(2 * math.exp(-400 / 120))
    assert central_tail_bound(10, 20) == pytest.approx(0.0713, abs=1e-4)
    assert central_tail_bound_stated(10, 20) == pytest.approx(2 * math.exp(-10))
    assert central_tail_bound(5, 1e-9) >= 1.0
    u = 50 / 15
    assert noncentral_tail_bound(5, 10, 50) == pytest.approx(math.exp(-2.5 * (u - math.log1p(u))))


def test_tail_checks_pass():
    rep = chisq_tail_check(10, 20, draws=1_000_000, seed=0)
    assert rep.passed and rep.empirical_prob <= 0.0713
    rep = chisq_tail_check(5, 1e-6, draws=100_000, seed=1)
    assert rep.bound >= 1 and rep.passed
    rep = chisq_tail_check(5, 50, noncentrality=10, draws=1_000_000, seed=2)
    assert rep.passed and rep.stated_bound is None
    with pytest.raises(ValueError):
        chisq_tail_check(5, 1.0, draws=10)
