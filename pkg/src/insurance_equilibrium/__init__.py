"""Closed-form insurance-market equilibria with investment, regulatory friction and welfare,
plus independent numerical oracles for every closed form."""

from .equilibrium import (
    EquilibriumPath,
    Regime,
    RegimeError,
    RegimeVerdict,
    classify,
    equilibrium_path,
    negative_loading_time,
    perfect_correlation_path,
)
from .model import (
    DomainError,
    FinancialParams,
    InsuranceParams,
    InsurerParams,
    ModelParams,
    PerfectCorrelationError,
    RegulatorParams,
    benchmark,
    demand,
    phi,
    sharpe,
    validate,
)
from .strategy import (
    Branch,
    FrictionSchedule,
    StrategyPoint,
    hjb_integrand,
    optimal_point,
    optimal_point_frictional,
    value_function,
)
from .welfare import (
    OptimalRegulation,
    WelfarePath,
    friction_statics,
    optimal_epsilon,
    sharpe_statics,
    welfare_path,
)

__version__ = "0.1.0"
