"""
Settings Configuration Service for EntLaser

Centralized tolerances and budgets read from an INI-style properties file.

Lookup order:
1. explicit path passed by the caller (the CLI's --settings flag)
2. entlaser.properties in the current working directory
3. built-in defaults
"""

import configparser
import logging
from dataclasses import fields
from pathlib import Path
from typing import Any, Dict, Optional, Union

from ..exceptions import ConfigurationError
from ..models import Tolerances

DEFAULT_CONFIG_NAME = "entlaser.properties"

# Tolerances field -> (section, key)
_TOLERANCE_KEYS = {
    "rk4_step": ("engine", "rk4_step"),
    "quad_epsabs": ("engine", "quad_epsabs"),
    "quad_epsrel": ("engine", "quad_epsrel"),
    "quad_limit": ("engine", "quad_limit"),
    "wick_imag_tol": ("engine", "wick_imag_tol"),
    "psd_floor": ("engine", "psd_floor"),
    "max_dimension": ("oracle", "max_dimension"),
    "max_density_elements": ("oracle", "max_density_elements"),
    "krylov_tol": ("oracle", "krylov_tol"),
    "krylov_max_subspace": ("oracle", "krylov_max_subspace"),
    "truncation_warn": ("oracle", "truncation_warn"),
    "imag_tol": ("oracle", "imag_tol"),
    "hermiticity_tol": ("oracle", "hermiticity_tol"),
    "trace_tol": ("oracle", "trace_tol"),
    "pure_cutoff": ("oracle", "pure_cutoff"),
    "density_cutoff": ("oracle", "density_cutoff"),
    "separable_tol": ("witness", "separable_tol"),
    "bound_tol": ("witness", "bound_tol"),
    "max_mixture_components": ("witness", "max_mixture_components"),
    "max_sweep_points": ("cli", "max_sweep_points"),
    "workers": ("cli", "workers"),
}


def get_config_file_path() -> Optional[str]:
    """Return entlaser.properties from the working directory if it exists."""
    candidate = Path.cwd() / DEFAULT_CONFIG_NAME
    return str(candidate) if candidate.exists() else None


class SettingsConfigService:
    """Service for managing toolkit settings from properties files."""

    def __init__(self, config_file: Optional[str] = None):
        """
        Initialize the settings configuration service.

        Args:
            config_file: Optional path to config file. A path given explicitly
                must exist; otherwise the working directory is searched.
        """
        self.explicit = config_file is not None
        self.config_file = config_file or get_config_file_path()
        self.config = configparser.ConfigParser()
        self.logger = logging.getLogger(__name__)
        self._create_default_config()
        self._load_config()

    def _load_config(self):
        """Overlay the properties file on the defaults."""
        if self.config_file is None:
            self.logger.debug("No settings file found, using defaults")
            return
        if not Path(self.config_file).exists():
            if self.explicit:
                raise ConfigurationError(f"settings file {self.config_file} not found")
            self.logger.warning(
                f"Config file {self.config_file} not found, using defaults"
            )
            return
        try:
            self.config.read(self.config_file, encoding="utf-8")
        except configparser.Error as e:
            raise ConfigurationError(
                f"cannot parse settings file {self.config_file}: {e}"
            ) from e
        self.logger.info(f"Configuration loaded from {self.config_file}")

    def _create_default_config(self):
        """Populate the built-in defaults."""
        defaults = Tolerances()
        for name, (section, key) in _TOLERANCE_KEYS.items():
            if not self.config.has_section(section):
                self.config.add_section(section)
            self.config.set(section, key, repr(getattr(defaults, name)))

        self.config.add_section("logging")
        self.config.set("logging", "default_level", "INFO")
        self.config.set("logging", "dir", "")

        self.config.set("cli", "csv_digits", "17")
        self.config.set("cli", "svg_hashsalt", "entlaser")

    def save_config(self, path: Optional[Union[str, Path]] = None):
        """Write the current configuration to a properties file."""
        target = Path(path or self.config_file or DEFAULT_CONFIG_NAME)
        with open(target, "w", encoding="utf-8") as f:
            self.config.write(f)
        self.logger.info(f"Configuration saved to {target}")

    def get(self, section: str, key: str, fallback: Optional[str] = None) -> str:
        """Get a configuration value."""
        try:
            return self.config.get(section, key)
        except (configparser.NoSectionError, configparser.NoOptionError):
            if fallback is not None:
                return fallback
            self.logger.warning(f"Configuration not found: {section}.{key}")
            return ""

    def getint(self, section: str, key: str, fallback: Optional[int] = None) -> int:
        """Get an integer configuration value."""
        try:
            return self.config.getint(section, key)
        except (configparser.NoSectionError, configparser.NoOptionError):
            if fallback is not None:
                return fallback
            raise ConfigurationError(f"missing integer setting {section}.{key}")
        except ValueError as e:
            raise ConfigurationError(f"setting {section}.{key} is not an integer") from e

    def getfloat(
        self, section: str, key: str, fallback: Optional[float] = None
    ) -> float:
        """Get a float configuration value."""
        try:
            return self.config.getfloat(section, key)
        except (configparser.NoSectionError, configparser.NoOptionError):
            if fallback is not None:
                return fallback
            raise ConfigurationError(f"missing float setting {section}.{key}")
        except ValueError as e:
            raise ConfigurationError(f"setting {section}.{key} is not a number") from e

    def set(self, section: str, key: str, value: Union[str, int, float, bool]):
        """Set a configuration value."""
        if not self.config.has_section(section):
            self.config.add_section(section)
        self.config.set(section, key, str(value))

    def get_tolerances(self, **overrides: Any) -> Tolerances:
        """Build the tolerance record, applying non-None overrides last."""
        values: Dict[str, Any] = {}
        for item in fields(Tolerances):
            section, key = _TOLERANCE_KEYS[item.name]
            if item.type in (int, "int"):
                values[item.name] = self.getint(section, key)
            else:
                values[item.name] = self.getfloat(section, key)
        for name, value in overrides.items():
            if name not in values:
                raise ConfigurationError(f"unknown tolerance override '{name}'")
            if value is not None:
                values[name] = value
        if values["rk4_step"] <= 0:
            raise ConfigurationError("engine.rk4_step must be positive")
        if values["max_dimension"] < 1 or values["max_sweep_points"] < 1:
            raise ConfigurationError("budgets must be positive")
        if values["workers"] < 1:
            raise ConfigurationError("cli.workers must be at least 1")
        return Tolerances(**values)

    def get_logging_defaults(self) -> Dict[str, Any]:
        """Get logging configuration defaults."""
        log_dir = self.get("logging", "dir", "").strip()
        return {
            "default_level": self.get("logging", "default_level", "INFO").upper(),
            "dir": log_dir or None,
        }

    def get_export_defaults(self) -> Dict[str, Any]:
        """Get CSV/SVG export defaults."""
        return {
            "csv_digits": self.getint("cli", "csv_digits", 17),
            "svg_hashsalt": self.get("cli", "svg_hashsalt", "entlaser"),
        }


# Global instance
_settings_service: Optional[SettingsConfigService] = None


def get_settings_service(config_file: Optional[str] = None) -> SettingsConfigService:
    """
    Get the global settings service instance.

    Args:
        config_file: Optional path to a properties file, honoured on first call
            or after reset_settings_service().
    """
    global _settings_service
    if _settings_service is None:
        _settings_service = SettingsConfigService(config_file)
    return _settings_service


def reset_settings_service():
    """Reset the global settings service instance. Useful for testing."""
    global _settings_service
    _settings_service = None
