"""Market regimes and equilibrium price/quantity paths.

Regime conditions are evaluated pointwise on a time grid and then aggregated
over the horizon. Stopping times (market failure, negative loading) are found
by a grid scan for the first bracket followed by bisection.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import bisect

from .model import ModelParams, PerfectCorrelationError, sharpe
from .strategy import FrictionSchedule, as_schedule, controls, kappa_minus_one

DEFAULT_GRID_POINTS = 2001
TIME_TOL = 1e-10


class Regime(enum.Enum):
    POSITIVE = "PositiveMarket"
    ZERO = "ZeroMarket"
    FAILURE = "MarketFailure"


class RegimeError(RuntimeError):
    """An equilibrium quantity was requested in a regime that does not support it."""

    def __init__(self, verdict: "RegimeVerdict", what: str = "equilibrium path"):
        msg = f"no {what}: regime is {verdict.regime.value}"
        if verdict.tau_f is not None:
            msg += f" (market fails from tau_f = {verdict.tau_f:.10g})"
        super().__init__(msg)
        self.verdict = verdict


@dataclass(frozen=True)
class RegimeVerdict:
    regime: Regime
    tau_f: float | None
    binding_condition: str


@dataclass
class EquilibriumPath:
    grid: np.ndarray
    theta_star: np.ndarray
    x_star: np.ndarray
    y_star: np.ndarray
    regime: Regime
    tau_n: float | None = None
    friction: FrictionSchedule | None = None
    eps_values: np.ndarray = field(default=None, repr=False)


def make_grid(p: ModelParams, n: int = DEFAULT_GRID_POINTS) -> np.ndarray:
    if n < 2:
        raise ValueError("grid needs at least 2 points")
    return np.linspace(p.t0, p.T, n)


def _grid(p: ModelParams, grid) -> np.ndarray:
    if grid is None:
        return make_grid(p)
    if np.ndim(grid) == 0:
        return make_grid(p, int(grid))
    return np.asarray(grid, dtype=float)


def _eps_at(eps: FrictionSchedule | None, s):
    return np.zeros(np.shape(s)) if eps is None else np.asarray(eps(s), dtype=float)


def first_time(margin, grid: np.ndarray, tol: float = TIME_TOL) -> float | None:
    """inf{s in grid range : margin(s) > 0}, assuming one crossing from <= 0 to > 0.

    ``margin`` must be vectorised. The first positive grid point brackets the
    crossing, which is then refined by bisection to ``tol``.
    """
    vals = margin(grid)
    hits = np.flatnonzero(vals > 0)
    if hits.size == 0:
        return None
    i = int(hits[0])
    if i == 0:
        return float(grid[0])
    a, b = float(grid[i - 1]), float(grid[i])
    if margin(np.array(a)) == 0:
        return a
    return float(bisect(lambda s: float(margin(np.array(s))), a, b, xtol=tol))


# -- pointwise regime margins --------------------------------------------------


def upper_margin(s, eps, p: ModelParams):
    """kappa*theta_hi*l*sigma - rho*(mu-r)*eta; positive iff theta_hi exceeds the
    friction-adjusted hedge price rho*(mu-r)*eta/(kappa*sigma*l)."""
    kappa = 1.0 + kappa_minus_one(s, eps, p)
    return kappa * p.theta_hi * p.l * p.sigma - p.rho * (p.mu - p.r) * p.eta


def lower_margin(s, eps, p: ModelParams):
    """Non-negative iff supply at theta_lo does not exceed demand there (= 1),
    i.e. the clearing price stays at or above theta_lo."""
    km1 = kappa_minus_one(s, eps, p)
    kappa = 1.0 + km1
    growth = np.exp(p.r * (p.T - np.asarray(s, dtype=float)))
    cap = p.gamma * (km1 + p.one_minus_rho2) * p.eta**2 / p.l * growth + p.hedge_price
    return cap - kappa * p.theta_lo


def classify(p: ModelParams, eps=None, grid=None) -> RegimeVerdict:
    """Horizon-wide regime for a constant cost ``eps`` (or schedule / None)."""
    if p.perfect_correlation:
        raise PerfectCorrelationError(p.rho)
    sched = as_schedule(eps)
    g = _grid(p, grid)
    e = _eps_at(sched, g)
    up = upper_margin(g, e, p)
    low = lower_margin(g, e, p)

    if np.all(up <= 0):
        return RegimeVerdict(Regime.ZERO, None, "theta_hi <= hedge price / kappa (zero underwriting)")
    if np.all(up > 0) and np.all(low >= 0):
        return RegimeVerdict(Regime.POSITIVE, None, "theta_hi > hedge price / kappa and theta_lo <= clearing cap")

    if np.all(up > 0):
        tau = first_time(lambda s: -lower_margin(s, _eps_at(sched, s), p), g)
        return RegimeVerdict(Regime.FAILURE, tau, "theta_lo > clearing cap (supply exceeds demand at theta_lo)")
    # zero-underwriting on part of the horizon only
    tau = first_time(
        lambda s: np.where(
            (upper_margin(s, _eps_at(sched, s), p) > 0) & (lower_margin(s, _eps_at(sched, s), p) >= 0), -1.0, 1.0
        ),
        g,
    )
    return RegimeVerdict(Regime.FAILURE, tau, "mixed: theta_hi condition changes over the horizon")


def positive_at(s, eps, p: ModelParams):
    """Pointwise positive-market test, vectorised over ``s`` and ``eps``."""
    return (upper_margin(s, eps, p) > 0) & (lower_margin(s, eps, p) >= 0)


# -- closed forms -------------------------------------------------------------


def positive_market_closed_form(s, eps, p: ModelParams):
    """(theta*, x*, y*) of the positive market at times ``s`` with cost values ``eps``."""
    if p.perfect_correlation:
        raise PerfectCorrelationError(p.rho)
    s = np.asarray(s, dtype=float)
    disc = p.discount(s)
    km1 = kappa_minus_one(s, eps, p)
    kappa = 1.0 + km1
    k_rho = km1 + p.one_minus_rho2
    sr = sharpe(p)
    dth = p.delta_theta
    den = p.gamma * k_rho * p.eta**2 + kappa * p.l * dth * disc
    theta = (p.gamma * k_rho * p.eta**2 * p.theta_hi + p.rho * sr * p.eta * dth * disc) / den
    x = (kappa * p.theta_hi * p.l - p.rho * sr * p.eta) * disc / den
    y = (
        (p.eta**2 / p.sigma * (sr - p.rho * p.l / p.eta * p.theta_hi) + sr / (p.gamma * p.sigma) * p.l * dth * disc)
        * disc
        / den
    )
    return theta, x, y


def theta_star(s, p: ModelParams, eps=0.0):
    return positive_market_closed_form(s, eps, p)[0]


def equilibrium_path(p: ModelParams, eps=None, grid=None) -> EquilibriumPath:
    """Equilibrium (theta*, x*, y*) on ``grid``; raises :class:`RegimeError` on market failure."""
    sched = as_schedule(eps)
    g = _grid(p, grid)
    if sched is not None:
        sched.check(g, p.eps_bar)
    verdict = classify(p, sched, g)
    e = _eps_at(sched, g)

    if verdict.regime is Regime.FAILURE:
        raise RegimeError(verdict)
    if verdict.regime is Regime.ZERO:
        _, y, _, _ = controls(p.theta_hi, g, e, p)
        return EquilibriumPath(
            g, np.full_like(g, p.theta_hi), np.zeros_like(g), y, Regime.ZERO, None, sched, e
        )

    theta, x, y = positive_market_closed_form(g, e, p)
    theta = np.clip(theta, p.theta_lo, p.theta_hi)
    tau_n = first_time(lambda s: -positive_market_closed_form(s, _eps_at(sched, s), p)[0], g)
    return EquilibriumPath(g, theta, x, y, Regime.POSITIVE, tau_n, sched, e)


def negative_loading_time(p: ModelParams, grid=None) -> float | None:
    """First time the equilibrium loading turns negative, from the loading-sign inequality."""
    if p.perfect_correlation:
        raise PerfectCorrelationError(p.rho)
    g = _grid(p, grid)
    verdict = classify(p, None, g)
    if verdict.regime is not Regime.POSITIVE:
        raise RegimeError(verdict, "negative-loading time")
    if p.rho >= 0:
        return None
    lhs = p.rho / p.one_minus_rho2
    scale = p.gamma * p.sigma / (p.mu - p.r) * p.eta * p.theta_hi / p.delta_theta

    def margin(s):
        return -scale * np.exp(p.r * (p.T - np.asarray(s, dtype=float))) - lhs

    return first_time(margin, g)


def perfect_correlation_path(p: ModelParams, grid=None) -> EquilibriumPath:
    if not p.perfect_correlation:
        raise ValueError(f"perfect-correlation branch needs rho = +-1, got {p.rho}")
    price = p.hedge_price
    if price < p.theta_lo:
        raise ValueError(f"hedge price {price:.10g} below theta_lo = {p.theta_lo}")
    if price > p.theta_hi:
        raise ValueError(f"hedge price {price:.10g} above theta_hi = {p.theta_hi}")
    g = _grid(p, grid)
    disc = p.discount(g)
    sr = sharpe(p)
    dth = p.delta_theta
    x = np.full_like(g, (p.theta_hi - price) / dth)
    y = (p.eta**2 / p.sigma * (sr - p.rho * p.l / p.eta * p.theta_hi) + sr / (p.gamma * p.sigma) * p.l * dth * disc) / (
        p.l * dth
    )
    return EquilibriumPath(g, np.full_like(g, price), x, y, Regime.POSITIVE, None, None, np.zeros_like(g))
