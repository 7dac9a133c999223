"""
Core module for EntLaser
"""

from .exceptions import (
    BudgetExceededError,
    ConfigurationError,
    EntLaserException,
    NumericalError,
    PropertyCheckError,
    ValidationError,
)
from .models import CovarianceState, DriftSpec, ScenarioConfig, SweepConfig, Tolerances
from .services import (
    LoggingService,
    get_fock_oracle,
    get_gaussian_engine,
    get_logger,
    get_logging_service,
    get_settings_service,
    get_witness_service,
)

__all__ = [
    "BudgetExceededError",
    "ConfigurationError",
    "EntLaserException",
    "NumericalError",
    "PropertyCheckError",
    "ValidationError",
    "CovarianceState",
    "DriftSpec",
    "ScenarioConfig",
    "SweepConfig",
    "Tolerances",
    "LoggingService",
    "get_fock_oracle",
    "get_gaussian_engine",
    "get_logger",
    "get_logging_service",
    "get_settings_service",
    "get_witness_service",
]
