"""
Core services for EntLaser
"""

from .logging import LoggingService, configure_logging, get_logging_service, get_logger
from .settings_config_service import SettingsConfigService, get_settings_service
from .gaussian_engine import GaussianEngineService, get_gaussian_engine
from .fock_oracle import FockOracleService, get_fock_oracle
from .witness_service import WitnessService, criterion, get_witness_service
from .export_service import ExportService, get_export_service
from .scenario_service import ScenarioService, get_scenario_service
from .oracle_check_service import OracleCheckService, get_oracle_check_service

__all__ = [
    "LoggingService",
    "configure_logging",
    "get_logging_service",
    "get_logger",
    "SettingsConfigService",
    "get_settings_service",
    "GaussianEngineService",
    "get_gaussian_engine",
    "FockOracleService",
    "get_fock_oracle",
    "WitnessService",
    "criterion",
    "get_witness_service",
    "ExportService",
    "get_export_service",
    "ScenarioService",
    "get_scenario_service",
    "OracleCheckService",
    "get_oracle_check_service",
]
