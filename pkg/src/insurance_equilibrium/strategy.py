"""Optimal underwriting/investment controls of a CARA insurer facing a given price path.

The frictionless problem is the ``eps = 0`` instance of the frictional one, so
both public entry points share a single implementation; that is what makes the
``eps = 0`` reduction bit-exact.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np
from scipy.integrate import simpson

from .model import ModelParams, PerfectCorrelationError

DEFAULT_QUAD_POINTS = 2001


class Branch(enum.Enum):
    UNDERWRITING_ACTIVE = "UnderwritingActive"
    UNDERWRITING_ZERO = "UnderwritingZero"


@dataclass(frozen=True)
class StrategyPoint:
    x_star: float
    y_star: float
    exponent_rate: float
    branch: Branch

    def __post_init__(self):
        if self.x_star < 0:
            raise ValueError("x_star must be non-negative")
        if self.branch is Branch.UNDERWRITING_ZERO and self.x_star != 0:
            raise ValueError("zero-underwriting branch requires x_star == 0")


class FrictionSchedule:
    """Regulatory cost intensity s -> eps_s, bounded by [0, eps_bar]."""

    def __init__(self, eps_fn: Callable[[np.ndarray], np.ndarray], label: str = "custom"):
        self._fn = eps_fn
        self.label = label
        self.value: float | None = None

    @classmethod
    def constant(cls, eps: float) -> "FrictionSchedule":
        eps = float(eps)
        sched = cls(lambda s: np.full(np.shape(s), eps), label=f"{eps:g}")
        sched.value = eps
        return sched

    @property
    def is_constant(self) -> bool:
        return self.value is not None

    def __call__(self, s):
        out = np.asarray(self._fn(np.asarray(s, dtype=float)), dtype=float)
        return float(out) if out.ndim == 0 else out

    def check(self, grid, eps_bar: float) -> None:
        vals = np.atleast_1d(self(grid))
        if np.any(vals < 0) or np.any(vals > eps_bar):
            raise ValueError(f"friction schedule leaves [0, eps_bar = {eps_bar}]")

    def __repr__(self) -> str:
        return f"FrictionSchedule({self.label})"


def as_schedule(eps) -> FrictionSchedule | None:
    """Normalise None / scalar / schedule arguments."""
    if eps is None or isinstance(eps, FrictionSchedule):
        return eps
    return FrictionSchedule.constant(eps)


def _require_interior_rho(p: ModelParams) -> None:
    if p.perfect_correlation:
        raise PerfectCorrelationError(p.rho)


def kappa_minus_one(s, eps, p: ModelParams):
    """eps_s/(gamma sigma^2) * exp(-r (T - s)); the friction multiplier is 1 + this."""
    return eps * p.discount(s) / (p.gamma * p.sigma**2)


def controls(theta, s, eps, p: ModelParams):
    """Vectorised closed-form controls.

    Returns ``(x, y, rate, active)`` arrays broadcast over ``theta``, ``s`` and
    ``eps``; ``rate`` is the exponent integrand of the value function.
    """
    _require_interior_rho(p)
    theta = np.asarray(theta, dtype=float)
    disc = p.discount(s)
    km1 = kappa_minus_one(s, eps, p)
    kappa = 1.0 + km1
    k_rho = km1 + p.one_minus_rho2  # kappa - rho^2
    excess = p.mu - p.r
    tl_sig = theta * p.l * p.sigma
    rho_ex_eta = p.rho * excess * p.eta

    active = kappa * tl_sig > rho_ex_eta  # kappa*phi > rho, tie goes to zero branch
    with np.errstate(divide="ignore", invalid="ignore"):
        x_act = (kappa * tl_sig - rho_ex_eta) * disc / (p.gamma * k_rho * p.eta**2 * p.sigma)
        y_act = (excess * p.eta - p.rho * tl_sig) * disc / (p.gamma * k_rho * p.eta * p.sigma**2)
        rate_act = (kappa * tl_sig**2 - 2.0 * rho_ex_eta * tl_sig + (excess * p.eta) ** 2) / (
            2.0 * k_rho * p.eta**2 * p.sigma**2
        )
    y_zero = excess * disc / (p.gamma * p.sigma**2 * kappa)
    rate_zero = excess**2 / (2.0 * kappa * p.sigma**2)

    x = np.where(active, x_act, 0.0)
    y = np.where(active, y_act, y_zero)
    rate = np.where(active, rate_act, rate_zero)
    return x, y, rate, active


def optimal_point_frictional(theta: float, s: float, eps: float, p: ModelParams) -> StrategyPoint:
    if eps < 0 or eps > p.eps_bar:
        raise ValueError(f"eps = {eps} outside [0, eps_bar = {p.eps_bar}]")
    if s < p.t0 or s > p.T:
        raise ValueError(f"s = {s} outside [{p.t0}, {p.T}]")
    x, y, rate, active = controls(theta, s, eps, p)
    branch = Branch.UNDERWRITING_ACTIVE if bool(active) else Branch.UNDERWRITING_ZERO
    return StrategyPoint(float(x), float(y), float(rate), branch)


def optimal_point(theta: float, s: float, p: ModelParams) -> StrategyPoint:
    """Optimal controls at price ``theta`` and time ``s`` without regulatory cost."""
    return optimal_point_frictional(theta, s, 0.0, p)


def _eval_path(path, s):
    if callable(path):
        out = path(s)
    else:
        out = path
    return np.broadcast_to(np.asarray(out, dtype=float), np.shape(s))


def exponent_integral(t: float, price_path, eps_path, p: ModelParams, n: int = DEFAULT_QUAD_POINTS) -> float:
    """Integral of the exponent rate over [t, T] by composite Simpson."""
    if t >= p.T:
        return 0.0
    s = np.linspace(t, p.T, n)
    theta = _eval_path(price_path, s)
    eps = 0.0 if eps_path is None else _eval_path(as_schedule(eps_path), s)
    _, _, rate, _ = controls(theta, s, eps, p)
    return float(simpson(rate, x=s))


def value_function(
    t: float,
    m: float,
    price_path,
    eps_path,
    p: ModelParams,
    n: int = DEFAULT_QUAD_POINTS,
) -> float:
    """Closed-form CARA value function V(t, m) for the given price and friction paths.

    ``price_path`` is a scalar or a vectorised callable of time; ``eps_path`` is
    None, a scalar, or a :class:`FrictionSchedule`.
    """
    growth = np.exp(p.r * (p.T - t))
    return float(-np.exp(-p.gamma * m * growth - exponent_integral(t, price_path, eps_path, p, n)) / p.gamma)


class ValueDerivatives(NamedTuple):
    v_t: float
    v_m: float
    v_mm: float


def value_derivatives(t: float, m: float, price_path, eps_path, p: ModelParams, n: int = DEFAULT_QUAD_POINTS):
    """Analytic partials of V: V_m = -gamma e^{r(T-t)} V, V_mm = gamma^2 e^{2r(T-t)} V,
    V_t = V (gamma m r e^{r(T-t)} + rate(t))."""
    v = value_function(t, m, price_path, eps_path, p, n)
    growth = np.exp(p.r * (p.T - t))
    theta_t = float(_eval_path(price_path, t))
    eps_t = 0.0 if eps_path is None else float(_eval_path(as_schedule(eps_path), t))
    _, _, rate_t, _ = controls(theta_t, t, eps_t, p)
    return ValueDerivatives(
        v_t=v * (p.gamma * m * p.r * growth + float(rate_t)),
        v_m=-p.gamma * growth * v,
        v_mm=p.gamma**2 * growth**2 * v,
    )


def hjb_integrand(x, y, theta, m, v_m, v_mm, p: ModelParams, eps=0.0):
    """Expression under the supremum of the HJB equation (quadratic investment cost included)."""
    drift = x * theta * p.l + y * (p.mu - p.r) - 0.5 * y * y * eps + m * p.r
    var = x * x * p.eta**2 + 2.0 * p.rho * x * p.eta * y * p.sigma + y * y * p.sigma**2
    return v_m * drift + 0.5 * v_mm * var
