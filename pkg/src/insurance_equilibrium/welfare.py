"""Social welfare, comparative statics and the welfare-optimal regulatory cost."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .equilibrium import (
    Regime,
    RegimeError,
    _eps_at,
    _grid,
    classify,
    positive_at,
    positive_market_closed_form,
)
from .model import ModelParams, sharpe
from .strategy import FrictionSchedule, as_schedule, kappa_minus_one

IDENTITY_TOL = 1e-12
ZERO_DERIVATIVE_TOL = 1e-9


@dataclass
class WelfarePath:
    grid: np.ndarray
    w_star: np.ndarray
    eps_used: FrictionSchedule | None
    consumer_surplus: np.ndarray = field(repr=False, default=None)
    producer_surplus: np.ndarray = field(repr=False, default=None)


def welfare_closed_form(s, eps, p: ModelParams):
    """Positive-market welfare; also returns the underwriting amount it was built from."""
    s = np.asarray(s, dtype=float)
    disc = p.discount(s)
    km1 = kappa_minus_one(s, eps, p)
    kappa = 1.0 + km1
    den = p.gamma * (km1 + p.one_minus_rho2) * p.eta**2 + kappa * p.l * p.delta_theta * disc
    gap = p.theta_hi - p.hedge_price / kappa
    return 0.5 * kappa * p.l * gap**2 * disc / den


def welfare_path(p: ModelParams, eps=None, grid=None) -> WelfarePath:
    sched = as_schedule(eps)
    g = _grid(p, grid)
    verdict = classify(p, sched, g)
    if verdict.regime is not Regime.POSITIVE:
        raise RegimeError(verdict, "welfare path")
    e = _eps_at(sched, g)
    w = welfare_closed_form(g, e, p)

    theta, x, _ = positive_market_closed_form(g, e, p)
    supply_floor = p.hedge_price / (1.0 + kappa_minus_one(g, e, p))
    triangle = 0.5 * x * (p.theta_hi - supply_floor)
    if np.max(np.abs(w - triangle)) > IDENTITY_TOL:
        raise AssertionError("welfare closed form disagrees with the surplus-triangle identity")
    return WelfarePath(g, w, sched, 0.5 * x * (p.theta_hi - theta), 0.5 * x * (theta - supply_floor))


# -- comparative statics ---------------------------------------------------------


@dataclass
class SignCheck:
    quantity: str
    analytic: np.ndarray
    numeric: np.ndarray
    agree: np.ndarray

    @property
    def ok(self) -> bool:
        return bool(np.all(self.agree))


@dataclass
class SignReport:
    variable: str
    grid: np.ndarray
    checks: list[SignCheck]

    @property
    def ok(self) -> bool:
        return all(c.ok for c in self.checks)

    def summary(self) -> dict[str, dict[str, object]]:
        out = {}
        for c in self.checks:
            signs = sorted({int(v) for v in c.analytic})
            out[c.quantity] = {"analytic_signs": signs, "agree": c.ok}
        return out


def _all_quantities(s, eps, p: ModelParams):
    theta, x, y = positive_market_closed_form(s, eps, p)
    return {"theta_star": theta, "x_star": x, "y_star": y, "w_star": welfare_closed_form(s, eps, p)}


def _agreement(analytic, numeric, exempt=None):
    """Signs agree where the estimate is resolvable; unresolvable estimates must be predicted zero
    (or sit next to a predicted sign change, given by ``exempt``)."""
    resolvable = np.abs(numeric) > ZERO_DERIVATIVE_TOL
    agree = np.where(resolvable, np.sign(numeric) == analytic, analytic == 0)
    if exempt is not None:
        agree |= exempt & ~resolvable
    return agree


def sharpe_statics(p: ModelParams, grid=None, rel_bump: float = 1e-5) -> SignReport:
    """Signs of d/d(Sharpe) of theta*, x*, y*, w*, analytic vs central differences in mu."""
    g = _grid(p, grid)
    verdict = classify(p, None, g)
    if verdict.regime is not Regime.POSITIVE:
        raise RegimeError(verdict, "Sharpe comparative statics")
    h = rel_bump * p.mu
    up = _all_quantities(g, 0.0, p.with_values(financial__mu=p.mu + h))
    dn = _all_quantities(g, 0.0, p.with_values(financial__mu=p.mu - h))
    d_sharpe = 2.0 * h / p.sigma

    sr = np.sign(p.rho)
    analytic = {"theta_star": sr, "x_star": -sr, "y_star": 1.0, "w_star": -sr}
    checks = []
    for q, a in analytic.items():
        num = (up[q] - dn[q]) / d_sharpe
        a_arr = np.full_like(g, a)
        checks.append(SignCheck(q, a_arr, num, _agreement(a_arr, num)))
    return SignReport("sharpe", g, checks)


def rho_bar(s, p: ModelParams):
    """Correlation threshold at which the friction effect on price and quantity changes sign."""
    return (
        (p.mu - p.r) / p.sigma * p.eta / p.l / p.theta_hi
        * (1.0 + p.l * p.delta_theta / (p.gamma * p.eta**2) * p.discount(s))
    )


def rho_lo(s, p: ModelParams):
    """Correlation threshold below which welfare increases in the regulatory cost."""
    a = p.theta_hi * p.sigma / (p.mu - p.r) * p.l / p.eta
    return -0.5 * a + 0.5 * np.sqrt(a**2 + 8.0 * (1.0 + p.delta_theta * p.l / (p.gamma * p.eta**2) * p.discount(s)))


def eps_upper_s(s, p: ModelParams):
    """Cost level at which the lower-bound condition binds (meaningful as a cap when theta_lo > 0)."""
    growth = np.exp(p.r * (p.T - np.asarray(s, dtype=float)))
    cap = p.gamma * p.one_minus_rho2 * p.eta**2 / p.l + p.hedge_price
    with np.errstate(divide="ignore"):
        return p.gamma * p.sigma**2 * (cap / p.theta_lo - 1.0) * growth


def eps_lower_s(s, p: ModelParams):
    """Cost level below which underwriting stops."""
    growth = np.exp(p.r * (p.T - np.asarray(s, dtype=float)))
    return p.gamma * p.sigma**2 * (p.hedge_price / p.theta_hi - 1.0) * growth


def friction_statics(p: ModelParams, eps: float, grid=None, rel_bump: float = 1e-4) -> SignReport:
    """Signs of d/d(eps) of theta*, x*, y* at constant cost ``eps``, analytic vs central differences."""
    g = _grid(p, grid)
    verdict = classify(p, eps, g)
    if verdict.regime is not Regime.POSITIVE:
        raise RegimeError(verdict, "friction comparative statics")
    h = rel_bump * (p.eps_bar if p.eps_bar > 0 else 1.0)
    up = _all_quantities(g, eps + h, p)
    dn = _all_quantities(g, eps - h, p)
    base = _all_quantities(g, eps, p)

    rb = rho_bar(g, p)
    rho = p.rho
    s_theta = np.where(rho < 0, 1.0, np.where(rho == 0, 0.0, np.sign(rho - rb)))
    analytic = {"theta_star": s_theta, "x_star": -s_theta, "y_star": -np.sign(base["y_star"])}
    # grid points adjacent to a crossing of rho_bar_s may legitimately be unresolvable
    side = np.sign(rho - rb)
    near = np.zeros_like(g, dtype=bool)
    flips = np.flatnonzero(side[1:] != side[:-1])
    near[flips] = near[flips + 1] = True

    checks = []
    for q, a in analytic.items():
        num = (up[q] - dn[q]) / (2.0 * h)
        checks.append(SignCheck(q, a, num, _agreement(a, num, near)))
    return SignReport("eps", g, checks)


# -- optimal regulation ----------------------------------------------------------


@dataclass
class OptimalRegulation:
    grid: np.ndarray
    eps_star: np.ndarray
    case: np.ndarray  # 1..4 per grid point
    rho_bar_s: np.ndarray
    rho_lo_s: np.ndarray
    eps_upper_s: np.ndarray
    eps_lower_s: np.ndarray
    notes: list[str] = field(default_factory=list)

    @property
    def independent(self) -> np.ndarray:
        return self.case == 4

    @property
    def constant(self) -> bool:
        return bool(np.all(self.eps_star == self.eps_star[0]))


CASE_LABELS = {
    1: "rho < 0 or rho >= 2*rho_bar: eps* = 0",
    2: "0 < rho < rho_lo: eps* = eps_bar",
    3: "rho_lo <= rho < 2*rho_bar: better endpoint",
    4: "rho = 0: welfare independent of eps",
}


def optimal_epsilon(p: ModelParams, grid=None) -> OptimalRegulation:
    """Welfare-maximising constant cost per grid time, from the threshold case table."""
    g = _grid(p, grid)
    rho = p.rho
    rb, rl = rho_bar(g, p), rho_lo(g, p)
    e_up, e_lo = eps_upper_s(g, p), eps_lower_s(g, p)
    notes: list[str] = []

    lo_candidate = np.maximum(0.0, e_lo)
    if np.any(e_lo >= 0):
        notes.append("eps_lower_s >= 0 somewhere: zero-cost endpoint replaced by max(0, eps_lower_s)")
    hi_candidate = np.full_like(g, p.eps_bar)
    if p.theta_lo > 0 and np.any(e_up >= 0):
        hi_candidate = np.minimum(p.eps_bar, e_up)
        notes.append("eps_upper_s >= 0 somewhere: eps_bar endpoint replaced by min(eps_bar, eps_upper_s)")

    if rho == 0:
        case = np.full(g.shape, 4)
    elif rho < 0:
        case = np.full(g.shape, 1)
    else:
        case = np.where(rho >= 2 * rb, 1, np.where(rho < rl, 2, 3))

    ok_lo = positive_at(g, lo_candidate, p)
    ok_hi = positive_at(g, hi_candidate, p)
    if not np.all(ok_lo):
        notes.append("zero-cost endpoint is not a positive market at some s; excluded there")
    if not np.all(ok_hi):
        notes.append("eps_bar endpoint is not a positive market at some s; excluded there")

    w_lo = np.where(ok_lo, welfare_closed_form(g, lo_candidate, p), -np.inf)
    w_hi = np.where(ok_hi, welfare_closed_form(g, hi_candidate, p), -np.inf)
    better = np.where(w_hi > w_lo, hi_candidate, lo_candidate)

    eps_star = np.select(
        [case == 1, case == 2, case == 3],
        [np.where(ok_lo, lo_candidate, hi_candidate), np.where(ok_hi, hi_candidate, lo_candidate), better],
        default=0.0,
    )
    for n in notes:
        warnings.warn(n, stacklevel=2)
    return OptimalRegulation(g, eps_star, case, rb, rl, e_up, e_lo, notes)


def brute_force_epsilon(p: ModelParams, grid=None, n_eps: int = 201):
    """Welfare argmax over an even grid of constant costs in [0, eps_bar], per time point.

    Returns ``(eps_grid, argmax_eps)``; infeasible (non-positive) costs are skipped.
    """
    g = _grid(p, grid)
    eps_grid = np.linspace(0.0, p.eps_bar, n_eps)
    S, E = np.meshgrid(g, eps_grid, indexing="ij")
    w = np.where(positive_at(S, E, p), welfare_closed_form(S, E, p), -np.inf)
    return eps_grid, eps_grid[np.argmax(w, axis=1)]
