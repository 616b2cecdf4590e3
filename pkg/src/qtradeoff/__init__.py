"""Incompatibility trade-offs and optimal measurements for pure-state multiparameter estimation."""

from .errors import (
    ConsistencyError, ConvergenceError, DomainError, InvalidArgumentError, ParseError,
    QTradeoffError, ResolutionError, SingularInformationError, ValidationError,
)
from .information import (
    InformationBundle, TradeoffReport, bundle_at, cfim, gamma_of, geometric_tensor,
    reparametrize, sld_vectors, tradeoff_bound,
)
from .measurement import MeasurementPlan, OptimizerConfig, construct, optimal_rotation
from .model import AncillaSpec, PureStateModel, augment, builtin, evaluate_with_derivatives
from .montecarlo import simulate_estimation
from .oracle import brute_force_gamma

__version__ = "0.1.0"

__all__ = [
    "AncillaSpec", "ConsistencyError", "ConvergenceError", "DomainError", "InformationBundle",
    "InvalidArgumentError", "MeasurementPlan", "OptimizerConfig", "ParseError", "PureStateModel",
    "QTradeoffError", "ResolutionError", "SingularInformationError", "TradeoffReport",
    "ValidationError", "augment", "brute_force_gamma", "builtin", "bundle_at", "cfim", "construct",
    "evaluate_with_derivatives", "gamma_of", "geometric_tensor", "optimal_rotation", "reparametrize",
    "simulate_estimation", "sld_vectors", "tradeoff_bound",
]
