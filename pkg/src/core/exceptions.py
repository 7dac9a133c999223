"""
Custom exceptions for EntLaser

This module contains all custom exceptions used throughout the toolkit.
The command-line front end maps each family onto a process exit code.
"""

from typing import Optional


class EntLaserException(Exception):
    """Base exception for all EntLaser exceptions"""


class ConfigurationError(EntLaserException):
    """Raised when a settings file or scenario document is invalid"""


class ValidationError(EntLaserException):
    """Raised when an operation argument violates its precondition"""


class BudgetExceededError(EntLaserException):
    """Raised when a Fock dimension or sweep size exceeds its configured budget"""

    def __init__(self, message: str, requested: int, budget: int):
        super().__init__(message)
        self.requested = requested
        self.budget = budget


class NumericalError(EntLaserException):
    """Base class for numerical failures"""


class IntegrationError(NumericalError):
    """Raised when the moment-equation integrator fails or rejects a step"""


class QuadratureError(NumericalError):
    """Raised when adaptive quadrature does not reach its tolerance"""

    def __init__(self, message: str, error_estimate: Optional[float] = None):
        super().__init__(message)
        self.error_estimate = error_estimate


class ConvergenceError(NumericalError):
    """Raised when the Krylov exponential does not converge"""

    def __init__(self, message: str, residual: Optional[float] = None):
        super().__init__(message)
        self.residual = residual


class PhysicalityError(NumericalError):
    """Raised when a state violates Hermiticity or the uncertainty relation"""


class PropertyCheckError(EntLaserException):
    """Raised when an oracle-check property fails"""
