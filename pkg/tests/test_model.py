import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from insurance_equilibrium.model import DomainError, benchmark, demand, phi, sharpe, validate


def test_benchmark_is_valid(bench):
    result = validate(bench)
    assert result.ok
    assert not result.perfect_correlation


def test_mu_equal_r_rejected():
    result = validate(benchmark(financial__mu=0.04))
    assert not result.ok
    assert any(v.rule == "mu > r required" for v in result.violations)


def test_degenerate_price_band_rejected():
    result = validate(benchmark(regulator__theta_lo=0.2))
    assert [v.rule for v in result.violations] == ["Δθ > 0 required"]


@pytest.mark.parametrize("key", ["insurance.l", "financial.sigma", "insurer.gamma", "regulator.eps_bar"])
@pytest.mark.parametrize("bad", [math.nan, math.inf, -math.inf])
def test_non_finite_values_rejected(key, bad):
    result = validate(benchmark().set(key, bad))
    assert not result.ok
    assert result.violations[0].field == key


def test_perfect_correlation_accepted_and_flagged():
    result = validate(benchmark(financial__rho=-1.0))
    assert result.ok and result.perfect_correlation


def test_sharpe_values():
    assert sharpe(benchmark()) == pytest.approx(0.4)
    assert sharpe(benchmark(financial__mu=0.24)) == pytest.approx(1.0)
    assert sharpe(benchmark(financial__mu=0.2)) == pytest.approx(0.8)


def test_phi_values(bench):
    assert phi(0.0, bench) == 0.0
    assert phi(0.2, bench) == pytest.approx(2.5)
    p = benchmark(financial__rho=0.37)
    assert phi(p.hedge_price, p) == pytest.approx(0.37)


def test_demand_endpoints(bench):
    assert demand(bench.theta_hi, bench) == 0.0
    assert demand(bench.theta_lo, bench) == 1.0
    assert demand(0.0, bench) == pytest.approx(0.5)


@pytest.mark.parametrize("theta", [-0.2000001, 0.21])
def test_demand_out_of_range(bench, theta):
    with pytest.raises(DomainError, match="bound"):
        demand(theta, bench)


@given(st.floats(-0.2, 0.2), st.floats(-0.2, 0.2))
def test_demand_strictly_decreasing(a, b):
    p = benchmark()
    if abs(a - b) < 1e-9:
        return
    lo, hi = min(a, b), max(a, b)
    assert demand(lo, p) > demand(hi, p)


@given(st.floats(-5, 5, allow_nan=False))
def test_phi_linear_and_sign(theta):
    p = benchmark()
    if abs(theta) < 1e-300:
        theta = 0.0
    assert np.sign(phi(theta, p)) == np.sign(theta)
    assert phi(2 * theta, p) == pytest.approx(2 * phi(theta, p), abs=1e-12)


def _region(vals):
    l, eta, r, mu, sigma, rho, gamma, t0, T, th_hi, th_lo, eps_bar = vals
    return (
        l > 0 and eta > 0 and sigma > 0 and mu > r and abs(rho) <= 1 and gamma > 0 and T > t0
        and -1 <= th_lo < th_hi and th_hi > 0 and eps_bar >= 0
    )


@settings(max_examples=300)
@given(st.lists(st.floats(-2, 2), min_size=12, max_size=12))
def test_validate_accepts_exactly_the_stated_region(vals):
    keys = [
        "insurance.l", "insurance.eta", "financial.r", "financial.mu", "financial.sigma", "financial.rho",
        "insurer.gamma", "insurer.t0", "insurer.T", "regulator.theta_hi", "regulator.theta_lo", "regulator.eps_bar",
    ]
    p = benchmark()
    for k, v in zip(keys, vals):
        p = p.set(k, v)
    assert validate(p).ok == _region(vals)
