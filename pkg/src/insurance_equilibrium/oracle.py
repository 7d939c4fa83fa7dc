"""Independent numerical checks of the closed forms.

Nothing here calls the closed-form optimal controls or equilibrium prices
except where a check explicitly compares against them: the grid search
maximises the raw HJB integrand, the clearing solver bisects supply minus
demand, the residual uses finite differences of V, and expected utility is
computed from the wealth SDE for any deterministic strategy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import simpson
from scipy.optimize import bisect

from .model import ModelParams, demand
from .strategy import (
    DEFAULT_QUAD_POINTS,
    _eval_path,
    as_schedule,
    controls,
    hjb_integrand,
    value_derivatives,
    value_function,
)


class OracleError(RuntimeError):
    pass


class RegimeContradiction(OracleError):
    """Supply minus demand has no sign change on [theta_lo, theta_hi]."""


# -- brute-force maximisation of the HJB integrand --------------------------------


@dataclass(frozen=True)
class GridSpec:
    x_range: tuple[float, float] = (0.0, 64.0)
    y_range: tuple[float, float] = (-64.0, 64.0)
    nx: int = 201
    ny: int = 201
    refine_rounds: int = 5

    def __post_init__(self):
        if self.nx < 3 or self.ny < 3:
            raise ValueError("grid needs at least 3 points per axis")
        if self.x_range[0] < 0:
            raise ValueError("x grid must respect the x >= 0 constraint")

    @property
    def final_resolution(self) -> float:
        wx = (self.x_range[1] - self.x_range[0]) / (self.nx - 1)
        wy = (self.y_range[1] - self.y_range[0]) / (self.ny - 1)
        return max(wx, wy) / 10.0**self.refine_rounds


def grid_argmax(theta: float, s: float, eps: float, p: ModelParams, gspec: GridSpec = GridSpec()):
    """Maximise the HJB integrand over x >= 0 and y on successively zoomed grids.

    V_m and V_mm come from the closed-form V at (s, m = 0) with the price held at
    ``theta`` from ``s`` on. Each round shrinks the window tenfold around the
    incumbent. Returns ``(x, y, value)``.
    """
    d = value_derivatives(s, 0.0, theta, eps, p)
    (x_lo, x_hi), (y_lo, y_hi) = gspec.x_range, gspec.y_range
    for rnd in range(gspec.refine_rounds + 1):
        xs = np.linspace(x_lo, x_hi, gspec.nx)
        ys = np.linspace(y_lo, y_hi, gspec.ny)
        X, Y = np.meshgrid(xs, ys, indexing="ij")
        f = hjb_integrand(X, Y, theta, 0.0, d.v_m, d.v_mm, p, eps)
        i, j = np.unravel_index(np.argmax(f), f.shape)
        bx, by = xs[i], ys[j]
        if rnd == gspec.refine_rounds:
            on_edge = (i == gspec.nx - 1) or (i == 0 and x_lo > 0) or j in (0, gspec.ny - 1)
            if on_edge:
                raise OracleError("range too small: argmax on the grid boundary after final refinement")
            return float(bx), float(by), float(f[i, j])
        hx, hy = (x_hi - x_lo) / 20.0, (y_hi - y_lo) / 20.0
        x_lo, x_hi = bx - hx, bx + hx
        if x_lo < 0:
            x_lo, x_hi = 0.0, 2 * hx
        y_lo, y_hi = by - hy, by + hy


def kkt_multiplier(theta: float, s: float, eps: float, p: ModelParams, v_m: float) -> float:
    """Multiplier of x >= 0 when the constraint binds: V_m (rho (mu-r) eta / (kappa sigma) - theta l)."""
    kappa = 1.0 + eps * p.discount(s) / (p.gamma * p.sigma**2)
    return float(v_m * (p.rho * (p.mu - p.r) * p.eta / (kappa * p.sigma) - theta * p.l))


# -- market clearing by bisection -------------------------------------------------


def numeric_clearing(s: float, eps: float, p: ModelParams, xtol: float = 1e-13) -> float:
    """Price in [theta_lo, theta_hi] at which optimal supply equals demand."""

    def excess(theta: float) -> float:
        x, _, _, _ = controls(theta, s, eps, p)
        return float(x) - demand(theta, p)

    a, b = p.theta_lo, p.theta_hi
    fa, fb = excess(a), excess(b)
    if abs(fa) <= 1e-15:
        return a
    if fb == 0:
        return b
    if fa > 0 or fb < 0:
        raise RegimeContradiction(f"no clearing price at s = {s}: excess supply {fa:.3g} .. {fb:.3g}")
    return float(bisect(excess, a, b, xtol=xtol, rtol=4 * np.finfo(float).eps, maxiter=200))


# -- finite-difference HJB residual ------------------------------------------------


@dataclass(frozen=True)
class Residual:
    absolute: float
    relative: float  # relative to the largest single term of the equation
    relative_vt: float  # relative to |V_t|; unbounded where V_t crosses zero


def hjb_residual(
    t: float,
    m: float,
    theta_path,
    eps_path,
    p: ModelParams,
    h_t: float | None = None,
    h_m: float | None = None,
    n: int = DEFAULT_QUAD_POINTS,
) -> Residual:
    """HJB residual of the closed-form V using central differences for V_t, V_m, V_mm.

    The default wealth step scales with the curvature of V in m, which is
    gamma * exp(r (T - t)). At t = T the terminal condition V(T, m) - U(m) is
    reported instead.
    """
    if t >= p.T:
        gap = value_function(p.T, m, theta_path, eps_path, p, n) + math.exp(-p.gamma * m) / p.gamma
        rel = abs(gap) * p.gamma * math.exp(p.gamma * m)
        return Residual(abs(gap), rel, rel)
    if h_t is None:
        h_t = 1e-5 * (p.T - p.t0)
    h_t = min(h_t, 0.5 * (p.T - t))
    if h_m is None:
        h_m = 3e-4 / (p.gamma * math.exp(p.r * (p.T - t)))

    def V(tt, mm):
        return value_function(tt, mm, theta_path, eps_path, p, n)

    v0 = V(t, m)
    v_t = (V(t + h_t, m) - V(t - h_t, m)) / (2 * h_t)
    vp, vm = V(t, m + h_m), V(t, m - h_m)
    v_m = (vp - vm) / (2 * h_m)
    v_mm = (vp - 2 * v0 + vm) / h_m**2

    theta = float(_eval_path(theta_path, t))
    sched = as_schedule(eps_path)
    eps = 0.0 if sched is None else float(sched(t))
    x, y, _, _ = controls(theta, t, eps, p)
    x, y = float(x), float(y)
    res = v_t + hjb_integrand(x, y, theta, m, v_m, v_mm, p, eps)
    terms = (
        v_t,
        v_m * (x * theta * p.l + y * (p.mu - p.r) - 0.5 * eps * y * y),
        v_m * m * p.r,
        0.5 * v_mm * (x * x * p.eta**2 + 2 * p.rho * x * y * p.eta * p.sigma + y * y * p.sigma**2),
    )
    scale = max(abs(v) for v in terms)
    return Residual(abs(res), abs(res) / scale, abs(res) / abs(v_t))


# -- expected utility of terminal wealth ---------------------------------------------


@dataclass(frozen=True)
class SimSpec:
    n_paths: int = 100_000
    n_steps: int = 500
    seed: int = 12345
    block: int = 4096  # paths per RNG substream

    def __post_init__(self):
        if self.n_paths < 1 or self.n_steps < 1:
            raise ValueError("n_paths and n_steps must be >= 1")


def correlated_increments(rng: np.random.Generator, rho: float, dt: float, shape) -> tuple[np.ndarray, np.ndarray]:
    """Brownian increments (dW_I, dW_S) with correlation rho."""
    z1 = rng.standard_normal(shape)
    z2 = rng.standard_normal(shape)
    sq = math.sqrt(dt)
    return sq * z1, sq * (rho * z1 + math.sqrt((1 - rho) * (1 + rho)) * z2)


def _substreams(sim: SimSpec):
    """Per-block generators derived from (seed, block index): results do not depend on scheduling."""
    n_blocks = -(-sim.n_paths // sim.block)
    seeds = np.random.SeedSequence(sim.seed).spawn(n_blocks)
    for b, ss in enumerate(seeds):
        size = min(sim.block, sim.n_paths - b * sim.block)
        yield np.random.Generator(np.random.Philox(ss)), size


def expected_utility(
    strategy,
    theta_path,
    eps_path,
    p: ModelParams,
    sim: SimSpec | None = None,
    t: float | None = None,
    m: float | None = None,
    n: int = DEFAULT_QUAD_POINTS,
) -> tuple[float, float]:
    """E[U(m_T)] under a deterministic strategy ``s -> (x_s, y_s)`` (vectorised).

    With ``sim=None`` terminal wealth is Gaussian and the expectation is exact up
    to Simpson quadrature; otherwise Euler-Maruyama Monte Carlo. Returns
    ``(mean, standard error)``; the analytic standard error is 0.
    """
    t = p.t0 if t is None else t
    m = p.m0 if m is None else m
    sched = as_schedule(eps_path)

    def coeffs(s):
        x, y = strategy(s)
        x = np.broadcast_to(np.asarray(x, dtype=float), np.shape(s))
        y = np.broadcast_to(np.asarray(y, dtype=float), np.shape(s))
        eps = 0.0 if sched is None else sched(s)
        theta = _eval_path(theta_path, s)
        drift = x * theta * p.l + y * (p.mu - p.r) - 0.5 * eps * y * y
        return x, y, drift

    if sim is None:
        s = np.linspace(t, p.T, n)
        x, y, drift = coeffs(s)
        grow = np.exp(p.r * (p.T - s))
        mean = m * math.exp(p.r * (p.T - t)) + simpson(grow * drift, x=s)
        var = simpson(
            grow**2 * (x * x * p.eta**2 + 2 * p.rho * x * y * p.eta * p.sigma + y * y * p.sigma**2), x=s
        )
        return float(-math.exp(-p.gamma * mean + 0.5 * p.gamma**2 * var) / p.gamma), 0.0

    dt = (p.T - t) / sim.n_steps
    s_left = t + dt * np.arange(sim.n_steps)
    x, y, drift = coeffs(s_left)
    total = 0.0
    total_sq = 0.0
    for rng, size in _substreams(sim):
        wealth = np.full(size, float(m))
        for k in range(sim.n_steps):
            dwi, dws = correlated_increments(rng, p.rho, dt, size)
            wealth += (drift[k] + p.r * wealth) * dt + x[k] * p.eta * dwi + y[k] * p.sigma * dws
        u = -np.exp(-p.gamma * wealth) / p.gamma
        total += u.sum()
        total_sq += (u * u).sum()
    mean = total / sim.n_paths
    var = max(total_sq / sim.n_paths - mean * mean, 0.0) * sim.n_paths / max(sim.n_paths - 1, 1)
    return float(mean), float(math.sqrt(var / sim.n_paths))


def closed_form_strategy(theta_path, eps_path, p: ModelParams):
    """Deterministic strategy s -> (x*_s, y*_s) from the closed-form controls."""
    sched = as_schedule(eps_path)

    def strat(s):
        eps = 0.0 if sched is None else sched(s)
        x, y, _, _ = controls(_eval_path(theta_path, s), s, eps, p)
        return x, y

    return strat


# -- report ------------------------------------------------------------------


@dataclass
class OracleCheck:
    name: str
    value: float
    tolerance: float
    passed: bool

    def line(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        return f"[{flag}] {self.name}: {self.value:.3e} (tol {self.tolerance:.1e})"


@dataclass
class OracleReport:
    checks: list[OracleCheck] = field(default_factory=list)

    def add(self, name: str, value: float, tolerance: float, passed: bool | None = None) -> OracleCheck:
        if passed is None:
            passed = bool(value <= tolerance)
        c = OracleCheck(name, float(value), float(tolerance), bool(passed))
        self.checks.append(c)
        return c

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    def lines(self) -> list[str]:
        return [c.line() for c in self.checks]

    def as_dict(self) -> dict:
        return {"ok": self.ok, "checks": [c.__dict__ for c in self.checks]}
