import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from insurance_equilibrium.model import PerfectCorrelationError, benchmark
from insurance_equilibrium.oracle import kkt_multiplier
from insurance_equilibrium.strategy import (
    Branch,
    FrictionSchedule,
    hjb_integrand,
    optimal_point,
    optimal_point_frictional,
    value_derivatives,
    value_function,
)


def test_uncorrelated_controls_at_horizon(bench):
    # x = 0.2*0.5*0.2 / (2*0.01*0.2), y = 0.08*0.1 / (2*0.1*0.04)
    pt = optimal_point(0.2, 50.0, bench)
    assert pt.branch is Branch.UNDERWRITING_ACTIVE
    assert pt.x_star == pytest.approx(5.0, rel=1e-14)
    assert pt.y_star == pytest.approx(1.0, rel=1e-14)
    assert pt.exponent_rate == pytest.approx(0.58, rel=1e-14)


@pytest.mark.parametrize("s", [0.0, 20.0, 50.0])
def test_zero_underwriting_when_correlation_dominates(s):
    p = benchmark(financial__rho=0.9)
    pt = optimal_point(0.05, s, p)
    assert pt.branch is Branch.UNDERWRITING_ZERO
    assert pt.x_star == 0.0
    assert pt.y_star == pytest.approx(0.08 / (2 * 0.04) * math.exp(-0.04 * (50 - s)), rel=1e-14)
    assert pt.exponent_rate == pytest.approx(0.08**2 / (2 * 0.04))


def test_negative_correlation_underwrites_at_zero_loading():
    p = benchmark(financial__rho=-0.7)
    pt = optimal_point(0.0, 50.0, p)
    # x = 0.7*0.08*0.1 / (2*0.51*0.01*0.2), y = 0.08*0.1 / (2*0.51*0.1*0.04)
    assert pt.x_star == pytest.approx(0.0056 / 0.00204, rel=1e-13)
    assert pt.y_star == pytest.approx(0.008 / 0.00408, rel=1e-13)


def test_friction_zero_branch_investment():
    p = benchmark(financial__rho=0.5)
    pt = optimal_point_frictional(0.0, 50.0, 0.2, p)
    assert pt.branch is Branch.UNDERWRITING_ZERO
    assert pt.y_star == pytest.approx(0.08 / 0.28, rel=1e-14)


def test_friction_leaves_uncorrelated_underwriting_unchanged(bench):
    pt = optimal_point_frictional(0.2, 50.0, 0.2, bench)
    assert pt.x_star == pytest.approx(5.0, rel=1e-14)
    assert pt.y_star == pytest.approx(1.0 / 3.5, rel=1e-14)


@settings(max_examples=200)
@given(st.floats(-0.2, 0.2), st.floats(0, 50), st.floats(-0.99, 0.99))
def test_zero_friction_is_bit_identical(theta, s, rho):
    p = benchmark(financial__rho=rho)
    assert optimal_point_frictional(theta, s, 0.0, p) == optimal_point(theta, s, p)


def test_perfect_correlation_is_refused():
    with pytest.raises(PerfectCorrelationError, match="perfect-correlation"):
        optimal_point(0.1, 10.0, benchmark(financial__rho=1.0))


def test_tie_goes_to_zero_branch():
    p = benchmark(financial__rho=0.5)
    assert optimal_point(p.hedge_price, 50.0, p).branch is Branch.UNDERWRITING_ZERO


@pytest.mark.parametrize("rho", [-0.5, 0.3, 0.8])
def test_branch_continuity(rho):
    p = benchmark(financial__rho=rho)
    th0 = p.hedge_price
    xs = [optimal_point(th0 + d, 30.0, p).x_star for d in (1e-3, 1e-5, 1e-7, 1e-9)]
    assert all(a > b for a, b in zip(xs, xs[1:]))
    assert xs[-1] < 1e-6
    # the investment amount is continuous across the switch
    y_zero = optimal_point(th0, 30.0, p).y_star
    assert optimal_point(th0 + 1e-10, 30.0, p).y_star == pytest.approx(y_zero, rel=1e-8)


def test_discounting_of_controls(bench):
    at_T = optimal_point(0.1, 50.0, bench)
    for s in (0.0, 12.5, 37.0):
        pt = optimal_point(0.1, s, bench)
        f = math.exp(-0.04 * (50 - s))
        assert pt.x_star == pytest.approx(at_T.x_star * f, rel=1e-14)
        assert pt.y_star == pytest.approx(at_T.y_star * f, rel=1e-14)


def test_value_function_terminal_condition(bench):
    for m in (-1.0, 0.0, 2.5):
        assert value_function(50.0, m, 0.2, None, bench) == pytest.approx(-math.exp(-2 * m) / 2, rel=1e-15)


def test_value_function_increasing_in_wealth(bench):
    vs = [value_function(10.0, m, 0.1, 0.1, bench) for m in np.linspace(-1, 1, 9)]
    assert all(a < b for a, b in zip(vs, vs[1:]))


def test_constant_rate_integral(bench):
    # the active-branch rate is constant in time for a constant price and no friction
    v = value_function(0.0, 0.0, 0.2, None, bench)
    assert v == pytest.approx(-0.5 * math.exp(-0.58 * 50), rel=1e-13)


def test_integrand_vanishes_at_zero_controls(bench):
    d = value_derivatives(25.0, 0.0, 0.2, None, bench)
    assert hjb_integrand(0.0, 0.0, 0.2, 0.0, d.v_m, d.v_mm, bench) == 0.0


@pytest.mark.parametrize("rho,theta,eps", [(0.0, 0.2, 0.0), (-0.7, 0.0, 0.1), (0.3, 0.15, 0.2), (0.9, 0.05, 0.0)])
def test_closed_form_is_local_maximum(rho, theta, eps):
    p = benchmark(financial__rho=rho)
    s = 20.0
    pt = optimal_point_frictional(theta, s, eps, p)
    d = value_derivatives(s, 0.0, theta, eps, p)
    best = hjb_integrand(pt.x_star, pt.y_star, theta, 0.0, d.v_m, d.v_mm, p, eps)
    delta = 1e-3
    for dx in (-delta, 0.0, delta):
        for dy in (-delta, 0.0, delta):
            x = pt.x_star + dx
            if x < 0:
                continue
            assert hjb_integrand(x, pt.y_star + dy, theta, 0.0, d.v_m, d.v_mm, p, eps) <= best


@settings(max_examples=200)
@given(st.floats(-0.2, 0.2), st.floats(0, 50), st.floats(-0.95, 0.95), st.floats(0, 0.2))
def test_kkt_consistency(theta, s, rho, eps):
    p = benchmark(financial__rho=rho)
    pt = optimal_point_frictional(theta, s, eps, p)
    d = value_derivatives(s, 0.0, theta, eps, p)
    if pt.branch is Branch.UNDERWRITING_ZERO:
        assert kkt_multiplier(theta, s, eps, p, d.v_m) >= 0
    else:
        # unconstrained stationary point of the integrand, solved directly from the gradient
        kappa_term = eps * d.v_m
        hess = np.array([
            [d.v_mm * p.eta**2, d.v_mm * rho * p.eta * p.sigma],
            [d.v_mm * rho * p.eta * p.sigma, d.v_mm * p.sigma**2 - kappa_term],
        ])
        grad0 = np.array([d.v_m * theta * p.l, d.v_m * (p.mu - p.r)])
        x, y = np.linalg.solve(hess, -grad0)
        assert x > 0
        assert x == pytest.approx(pt.x_star, rel=1e-9, abs=1e-12)
        assert y == pytest.approx(pt.y_star, rel=1e-9, abs=1e-12)


def test_friction_schedule_bounds(bench):
    FrictionSchedule.constant(0.1).check(np.linspace(0, 50, 11), bench.eps_bar)
    ramp = FrictionSchedule(lambda s: 0.01 * s)
    with pytest.raises(ValueError, match="eps_bar"):
        ramp.check(np.linspace(0, 50, 11), bench.eps_bar)


def test_time_varying_friction_in_value_function(bench):
    ramp = FrictionSchedule(lambda s: 0.004 * s)
    const = FrictionSchedule.constant(0.0)
    assert value_function(0.0, 0.0, 0.1, ramp, bench) != value_function(0.0, 0.0, 0.1, const, bench)
