"""
Test configuration and setup for EntLaser
"""

import sys
from pathlib import Path

import numpy as np
import pytest

# Add the repo root to path so tests import the `src` package
project_root = Path(__file__).parent.parent
if str(project_root) not in sys.path:
    sys.path.insert(0, str(project_root))

from src.core.models import Tolerances  # noqa: E402
from src.core.services.export_service import reset_export_service  # noqa: E402
from src.core.services.fock_oracle import FockOracleService, reset_fock_oracle  # noqa: E402
from src.core.services.gaussian_engine import (  # noqa: E402
    GaussianEngineService,
    reset_gaussian_engine,
)
from src.core.services.oracle_check_service import (  # noqa: E402
    OracleCheckService,
    reset_oracle_check_service,
)
from src.core.services.scenario_service import (  # noqa: E402
    ScenarioService,
    reset_scenario_service,
)
from src.core.services.settings_config_service import reset_settings_service  # noqa: E402
from src.core.services.witness_service import (  # noqa: E402
    WitnessService,
    reset_witness_service,
)


def _reset_all():
    reset_settings_service()
    reset_export_service()
    reset_gaussian_engine()
    reset_fock_oracle()
    reset_witness_service()
    reset_scenario_service()
    reset_oracle_check_service()


@pytest.fixture(autouse=True)
def isolated_services(tmp_path, monkeypatch):
    """
    Run every test from an empty working directory with fresh singletons,
    so no entlaser.properties on the developer's machine leaks in.
    """
    monkeypatch.chdir(tmp_path)
    _reset_all()
    yield
    _reset_all()


@pytest.fixture
def tolerances():
    return Tolerances()


@pytest.fixture
def engine(tolerances):
    return GaussianEngineService(tolerances)


@pytest.fixture
def oracle(tolerances):
    return FockOracleService(tolerances)


@pytest.fixture
def witness(tolerances):
    return WitnessService(tolerances)


@pytest.fixture
def scenarios(tolerances):
    return ScenarioService(tolerances)


@pytest.fixture
def checks(tolerances):
    return OracleCheckService(tolerances)


@pytest.fixture
def rng():
    """Seeded generator; tests needing other streams seed their own."""
    return np.random.default_rng(20240611)


@pytest.fixture
def test_log_dir(tmp_path):
    """Create a test logs directory"""
    log_dir = tmp_path / "logs"
    log_dir.mkdir(exist_ok=True)
    return log_dir


def pytest_configure(config):
    """Register custom markers used across tests"""
    config.addinivalue_line(
        "markers", "slow: long-running acceptance and large-sample checks"
    )
