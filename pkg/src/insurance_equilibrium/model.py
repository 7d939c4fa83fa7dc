"""Market, insurer and regulator parameters plus the scalar quantities derived from them.

Every parameter group is an immutable dataclass. Invariants are checked by
:func:`validate`, which returns the violations instead of raising, so callers
(the CLI in particular) can report every problem at once.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from typing import Any

import numpy as np


class DomainError(ValueError):
    """An argument lies outside the domain of a model function."""


class PerfectCorrelationError(ValueError):
    """Raised by operations that need |rho| < 1."""

    def __init__(self, rho: float):
        super().__init__(
            f"rho = {rho} has |rho| = 1: use the perfect-correlation branch "
            "(equilibrium.perfect_correlation_path)"
        )
        self.rho = rho


@dataclass(frozen=True)
class InsuranceParams:
    l: float = 0.5
    eta: float = 0.1


@dataclass(frozen=True)
class FinancialParams:
    r: float = 0.04
    mu: float = 0.12
    sigma: float = 0.2
    rho: float = 0.0


@dataclass(frozen=True)
class InsurerParams:
    gamma: float = 2.0
    t0: float = 0.0
    T: float = 50.0
    m0: float = 0.0


@dataclass(frozen=True)
class RegulatorParams:
    theta_hi: float = 0.2
    theta_lo: float = -0.2
    eps_bar: float = 0.2


@dataclass(frozen=True)
class ModelParams:
    """All model scalars. The defaults are the benchmark calibration.

    The benchmark has no correlation of its own; ``rho`` defaults to 0 and the
    regulatory-cost cap to 0.2.
    """

    insurance: InsuranceParams = field(default_factory=InsuranceParams)
    financial: FinancialParams = field(default_factory=FinancialParams)
    insurer: InsurerParams = field(default_factory=InsurerParams)
    regulator: RegulatorParams = field(default_factory=RegulatorParams)

    # Flat accessors keep the closed forms readable.
    @property
    def l(self) -> float:
        return self.insurance.l

    @property
    def eta(self) -> float:
        return self.insurance.eta

    @property
    def r(self) -> float:
        return self.financial.r

    @property
    def mu(self) -> float:
        return self.financial.mu

    @property
    def sigma(self) -> float:
        return self.financial.sigma

    @property
    def rho(self) -> float:
        return self.financial.rho

    @property
    def gamma(self) -> float:
        return self.insurer.gamma

    @property
    def t0(self) -> float:
        return self.insurer.t0

    @property
    def T(self) -> float:
        return self.insurer.T

    @property
    def m0(self) -> float:
        return self.insurer.m0

    @property
    def theta_hi(self) -> float:
        return self.regulator.theta_hi

    @property
    def theta_lo(self) -> float:
        return self.regulator.theta_lo

    @property
    def eps_bar(self) -> float:
        return self.regulator.eps_bar

    @property
    def delta_theta(self) -> float:
        return self.regulator.theta_hi - self.regulator.theta_lo

    @property
    def one_minus_rho2(self) -> float:
        # factored form keeps precision as |rho| -> 1
        rho = self.financial.rho
        return (1.0 - rho) * (1.0 + rho)

    @property
    def perfect_correlation(self) -> bool:
        return abs(self.financial.rho) == 1.0

    @property
    def hedge_price(self) -> float:
        """Loading rho*(mu - r)*eta/(sigma*l) at which phi equals rho."""
        return self.rho * (self.mu - self.r) * self.eta / (self.sigma * self.l)

    def discount(self, s):
        """exp(-r (T - s)); accepts scalars or arrays."""
        return np.exp(-self.r * (self.T - np.asarray(s, dtype=float)))

    def with_values(self, **dotted: Any) -> "ModelParams":
        """Copy with overrides given as ``group__name=value`` or a dict of dotted keys."""
        out = self
        for key, value in dotted.items():
            out = out.set(key.replace("__", "."), value)
        return out

    def set(self, dotted_key: str, value: float) -> "ModelParams":
        group, _, name = dotted_key.partition(".")
        if group not in PARAM_KEYS or name not in PARAM_KEYS[group]:
            raise KeyError(f"unknown parameter '{dotted_key}'")
        sub = replace(getattr(self, group), **{name: float(value)})
        return replace(self, **{group: sub})

    def as_dotted(self) -> dict[str, float]:
        return {
            f"{group}.{name}": getattr(getattr(self, group), name)
            for group, names in PARAM_KEYS.items()
            for name in names
        }


PARAM_KEYS: dict[str, tuple[str, ...]] = {
    "insurance": tuple(f.name for f in fields(InsuranceParams)),
    "financial": tuple(f.name for f in fields(FinancialParams)),
    "insurer": tuple(f.name for f in fields(InsurerParams)),
    "regulator": tuple(f.name for f in fields(RegulatorParams)),
}


def benchmark(**overrides: Any) -> ModelParams:
    """Benchmark calibration, optionally with ``group__name=value`` overrides."""
    return ModelParams().with_values(**overrides)


@dataclass(frozen=True)
class Violation:
    field: str
    rule: str

    def __str__(self) -> str:
        return f"{self.field}: {self.rule}"


@dataclass(frozen=True)
class ValidationResult:
    violations: tuple[Violation, ...] = ()
    perfect_correlation: bool = False

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok

    def messages(self) -> list[str]:
        return [str(v) for v in self.violations]


def validate(p: ModelParams) -> ValidationResult:
    """Check every parameter invariant; violations are returned, never raised."""
    found: list[Violation] = []
    finite = True
    for key, value in p.as_dotted().items():
        if not isinstance(value, (int, float)) or not math.isfinite(value):
            found.append(Violation(key, "finite value required"))
            finite = False
    if not finite:
        return ValidationResult(tuple(found))

    def need(cond: bool, key: str, rule: str) -> None:
        if not cond:
            found.append(Violation(key, rule))

    need(p.l > 0, "insurance.l", "l > 0 required")
    need(p.eta > 0, "insurance.eta", "eta > 0 required")
    need(p.sigma > 0, "financial.sigma", "sigma > 0 required")
    need(p.mu > p.r, "financial.mu", "mu > r required")
    need(abs(p.rho) <= 1, "financial.rho", "|rho| <= 1 required")
    need(p.gamma > 0, "insurer.gamma", "gamma > 0 required")
    need(p.T > p.t0, "insurer.T", "T > t0 required")
    need(p.theta_lo >= -1, "regulator.theta_lo", "theta_lo >= -1 required")
    need(p.theta_hi > 0, "regulator.theta_hi", "theta_hi > 0 required")
    need(p.delta_theta > 0, "regulator.theta_lo", "Δθ > 0 required")
    need(p.eps_bar >= 0, "regulator.eps_bar", "eps_bar >= 0 required")
    return ValidationResult(tuple(found), perfect_correlation=abs(p.rho) == 1)


def sharpe(p: ModelParams) -> float:
    return (p.mu - p.r) / p.sigma


def phi(theta, p: ModelParams):
    """Underwriting-to-investment profit-margin ratio theta*l*sigma / ((mu - r)*eta)."""
    return theta * p.l * p.sigma / ((p.mu - p.r) * p.eta)


def demand(theta, p: ModelParams):
    """Linear consumer demand, 1 at ``theta_lo`` and 0 at ``theta_hi``."""
    t = np.asarray(theta, dtype=float)
    if np.any(t < p.theta_lo):
        raise DomainError(f"theta below lower bound theta_lo = {p.theta_lo}")
    if np.any(t > p.theta_hi):
        raise DomainError(f"theta above upper bound theta_hi = {p.theta_hi}")
    out = (p.theta_hi - t) / p.delta_theta
    return float(out) if out.ndim == 0 else out
