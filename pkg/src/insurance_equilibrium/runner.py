"""Scenario orchestration shared by the CLI: result assembly, figure families and the oracle suite."""

from __future__ import annotations

import numpy as np

from . import equilibrium as eq
from . import oracle, strategy, welfare
from .model import ModelParams
from .scenario import Scenario

QUANTITIES = ("theta_star", "x_star", "y_star", "w_star")

# canonical correlation per figure, used when the scenario leaves rho unset
FIGURE_RHO = {2: -0.7, 3: 0.3, 4: -0.7, 5: 0.3}


def path_quantities(p: ModelParams, eps, grid) -> dict[str, np.ndarray]:
    """theta*, x*, y*, w* on the grid; raises RegimeError on market failure."""
    if p.perfect_correlation:
        path = eq.perfect_correlation_path(p, grid)
        w = 0.5 * path.x_star * (p.theta_hi - p.hedge_price)
    else:
        path = eq.equilibrium_path(p, eps, grid)
        if path.regime is eq.Regime.POSITIVE:
            w = welfare.welfare_path(p, eps, path.grid).w_star
        else:
            w = np.zeros_like(path.grid)
    return {"s": path.grid, "theta_star": path.theta_star, "x_star": path.x_star, "y_star": path.y_star, "w_star": w}


def regime_report(sc: Scenario) -> dict:
    p = sc.params
    grid = eq.make_grid(p, sc.grid_points)
    if p.perfect_correlation:
        try:
            eq.perfect_correlation_path(p, grid)
            return {"regime": "PositiveMarket", "tau_f": None, "tau_n": None,
                    "binding_condition": "perfect correlation: theta* = hedge price", "perfect_correlation": True}
        except ValueError as exc:
            return {"regime": "MarketFailure", "tau_f": None, "tau_n": None,
                    "binding_condition": str(exc), "perfect_correlation": True}
    verdict = eq.classify(p, sc.eps, grid)
    out = {
        "regime": verdict.regime.value,
        "tau_f": verdict.tau_f,
        "tau_n": None,
        "binding_condition": verdict.binding_condition,
        "perfect_correlation": False,
    }
    if verdict.regime is eq.Regime.POSITIVE:
        out["tau_n"] = eq.equilibrium_path(p, sc.eps, grid).tau_n
        if not sc.eps:
            out["tau_n_formula"] = eq.negative_loading_time(p, grid)
    return out


def statics_report(sc: Scenario) -> dict:
    p = sc.params
    grid = eq.make_grid(p, sc.grid_points)
    out: dict = {}
    try:
        rep = welfare.sharpe_statics(p, grid)
        out["sharpe"] = {"ok": rep.ok, "signs": rep.summary()}
    except (eq.RegimeError, ValueError) as exc:
        out["sharpe"] = {"skipped": str(exc)}
    eps = sc.eps if sc.eps is not None else 0.5 * p.eps_bar
    try:
        rep = welfare.friction_statics(p, eps, grid)
        out["friction"] = {"eps": eps, "ok": rep.ok, "signs": rep.summary()}
    except (eq.RegimeError, ValueError) as exc:
        out["friction"] = {"skipped": str(exc)}
    return out


def figure_family(sc: Scenario, figure: int) -> tuple[np.ndarray, dict[str, dict[str, np.ndarray]]]:
    """Curve family for one of the four equilibrium figures, keyed by series label."""
    if figure not in FIGURE_RHO:
        raise ValueError(f"figure must be one of {sorted(FIGURE_RHO)}")
    base = sc.params
    if "financial.rho" not in sc.explicit:
        base = base.with_values(financial__rho=FIGURE_RHO[figure])
    grid = eq.make_grid(base, sc.grid_points)

    if figure in (2, 3):
        variants = {
            "baseline": (base, None),
            "mu=0.2": (base.with_values(financial__mu=0.2), None),
            "gamma=4": (base.with_values(insurer__gamma=4.0), None),
            "theta_lo=-0.3": (base.with_values(regulator__theta_lo=-0.3), None),
        }
    else:
        variants = {f"eps={e:g}": (base, float(e)) for e in np.linspace(0.0, base.eps_bar, 3)}

    family = {}
    for label, (p, eps) in variants.items():
        q = path_quantities(p, eps, grid)
        family[label] = {k: q[k] for k in QUANTITIES}
    return grid, family


def long_rows(grid: np.ndarray, family: dict[str, dict[str, np.ndarray]]):
    """Rows (s, quantity, value, series) in a stable order."""
    for series, curves in family.items():
        for q in QUANTITIES:
            for s, v in zip(grid, curves[q]):
                yield s, q, v, series


def numeric_clearing_path(grid, eps, p: ModelParams, iters: int = 200, xtol: float = 1e-13) -> np.ndarray:
    """Vectorised bisection of supply(theta) - demand(theta) at every grid time."""
    grid = np.asarray(grid, dtype=float)
    eps = np.broadcast_to(np.asarray(0.0 if eps is None else eps, dtype=float), grid.shape)
    lo = np.full_like(grid, p.theta_lo)
    hi = np.full_like(grid, p.theta_hi)

    def excess(theta):
        x, _, _, _ = strategy.controls(theta, grid, eps, p)
        return x - (p.theta_hi - theta) / p.delta_theta

    f_lo = excess(lo)
    if np.any(f_lo > 1e-15) or np.any(excess(hi) < 0):
        raise oracle.RegimeContradiction("no sign change of excess supply on [theta_lo, theta_hi]")
    at_lo = np.abs(f_lo) <= 1e-15
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        neg = excess(mid) < 0
        lo = np.where(neg, mid, lo)
        hi = np.where(neg, hi, mid)
        if np.max(hi - lo) < xtol:
            break
    return np.where(at_lo, p.theta_lo, 0.5 * (lo + hi))


def run_oracle_suite(sc: Scenario, n_random: int = 25, seed: int | None = None) -> tuple[oracle.OracleReport, dict]:
    """Every independent check applicable to the scenario's regime.

    Returns the report and the regime summary; in a failing market only the
    regime is reported.
    """
    p = sc.params
    rep = oracle.OracleReport()
    regime = regime_report(sc)
    if regime["regime"] != "PositiveMarket" or p.perfect_correlation:
        return rep, regime
    rng = np.random.default_rng(sc.sim.seed if seed is None else seed)
    grid = eq.make_grid(p, sc.grid_points)
    eps = sc.eps
    eps_val = 0.0 if eps is None else float(eps)
    path = eq.equilibrium_path(p, eps, grid)

    def theta_fn(s):
        return eq.positive_market_closed_form(s, eps_val, p)[0]

    # supply equals demand at the closed-form price
    x_at, _, _, _ = strategy.controls(path.theta_star, grid, eps_val, p)
    rep.add("market clearing |x*(theta*) - d(theta*)|", np.max(np.abs(x_at - (p.theta_hi - path.theta_star) / p.delta_theta)), 1e-12)
    theta_num = numeric_clearing_path(grid, eps_val, p)
    rep.add("numeric clearing vs closed-form theta*", np.max(np.abs(theta_num - path.theta_star)), 1e-10)

    # controls: brute-force maximiser of the HJB integrand
    worst = 0.0
    gspec = oracle.GridSpec()
    for s in rng.uniform(p.t0, p.T, 5):
        th = float(theta_fn(s))
        bx, by, _ = oracle.grid_argmax(th, s, eps_val, p, gspec)
        pt = strategy.optimal_point_frictional(th, s, eps_val, p)
        worst = max(worst, abs(bx - pt.x_star), abs(by - pt.y_star))
    rep.add("grid argmax vs closed-form controls", worst, 1e-4)

    # HJB residual of V at random (t, m)
    worst = 0.0
    for t, m in zip(rng.uniform(p.t0, p.T - 1e-3 * (p.T - p.t0), n_random), rng.uniform(-2.0, 2.0, n_random)):
        worst = max(worst, oracle.hjb_residual(t, m, theta_fn, eps, p).relative)
    rep.add("HJB residual (relative to largest term)", worst, 1e-6)

    # expected utility: analytic Gaussian, Monte Carlo, perturbations
    strat = oracle.closed_form_strategy(theta_fn, eps, p)
    v = strategy.value_function(p.t0, p.m0, theta_fn, eps, p)
    eu, _ = oracle.expected_utility(strat, theta_fn, eps, p)
    rep.add("analytic expected utility vs V (relative)", abs(eu - v) / abs(v), 1e-8)

    t_mc = max(p.t0, p.T - 1.0)
    v_mc = strategy.value_function(t_mc, p.m0, theta_fn, eps, p)
    mc_mean, mc_se = oracle.expected_utility(strat, theta_fn, eps, p, sim=sc.sim, t=t_mc)
    rep.add("Monte Carlo expected utility vs V (standard errors)", abs(mc_mean - v_mc) / mc_se, 3.0)

    beaten = 0
    for _ in range(50):
        dx, dy = rng.normal(0.0, 0.1, 2)

        def perturbed(s, dx=dx, dy=dy):
            x, y = strat(s)
            return np.maximum(x + dx, 0.0), y + dy

        eu_pert, _ = oracle.expected_utility(perturbed, theta_fn, eps, p)
        beaten += eu_pert > eu
    rep.add("perturbed strategies beating the optimum", beaten, 0)

    if eps is None:
        tau_formula = eq.negative_loading_time(p, grid)
        if (tau_formula is None) != (path.tau_n is None):
            rep.add("negative-loading time: formula vs zero crossing", np.inf, 1e-6)
        elif tau_formula is not None:
            rep.add("negative-loading time: formula vs zero crossing", abs(tau_formula - path.tau_n), 1e-6)

    # eps = 0 reduction
    zero = eq.equilibrium_path(p, 0.0, grid)
    free = eq.equilibrium_path(p, None, grid)
    rep.add("eps = 0 path vs frictionless path", np.max(np.abs(zero.theta_star - free.theta_star)), 1e-12)
    return rep, regime
