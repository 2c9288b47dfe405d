"""Strategy search and learned per-problem strategy scheduling for command-line solvers."""

from stratsched.config import (
    FeatureMode,
    Settings,
    SolverSpec,
    parse_settings,
    parse_solver_config,
    parse_strategies,
)
from stratsched.strategy import InvocationFormat, ParameterSpace, Strategy

__all__ = [
    "FeatureMode",
    "InvocationFormat",
    "ParameterSpace",
    "Settings",
    "SolverSpec",
    "Strategy",
    "parse_settings",
    "parse_solver_config",
    "parse_strategies",
]
__version__ = "0.1.0"
