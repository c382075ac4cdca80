"""Social learning over networks where each agent pulls from one random neighbor per step."""

from .analysis import (
    ErrorExponent,
    Interval,
    LdpApplicabilityWarning,
    RateFunction,
    asymptotic_rate,
    error_exponent,
    ldp_interval_bounds,
    log_perron,
    rate_function,
    tilted_matrix,
)
from .engine import SimConfig, Trajectory, lambda_recursion_check, run, weight_average_diagnostic
from .models import CategoricalModel, GaussianModel, HypothesisSpace
from .montecarlo import build_tilted, importance_estimate, plain_estimate, solve_tilt
from .network import Graph, effective_matrix, lazy_metropolis, paper_graph, perron_vector, validate

__version__ = "0.1.0"

__all__ = [
    "CategoricalModel",
    "ErrorExponent",
    "GaussianModel",
    "Graph",
    "HypothesisSpace",
    "Interval",
    "LdpApplicabilityWarning",
    "RateFunction",
    "SimConfig",
    "Trajectory",
    "asymptotic_rate",
    "build_tilted",
    "effective_matrix",
    "error_exponent",
    "importance_estimate",
    "lambda_recursion_check",
    "lazy_metropolis",
    "ldp_interval_bounds",
    "log_perron",
    "paper_graph",
    "perron_vector",
    "plain_estimate",
    "rate_function",
    "run",
    "solve_tilt",
    "tilted_matrix",
    "validate",
    "weight_average_diagnostic",
]
