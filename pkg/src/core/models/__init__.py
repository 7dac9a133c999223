"""
Domain models for EntLaser
"""

from .models import (
    NUM_MODES,
    QUADRATURE_DIM,
    QUADRATURE_LABELS,
    CovarianceState,
    DriftSpec,
    FockDensity,
    FockState,
    Observable,
    OracleSuite,
    PropertyResult,
    QuadraticForm,
    SeparableGenerator,
    SeparableSample,
    SweepTable,
    ThresholdReport,
    TimeSeries,
    Tolerances,
    WitnessReport,
)
from .scenario import SWEEP_KEYS, DriftSpecModel, ScenarioConfig, SweepConfig

__all__ = [
    "NUM_MODES",
    "QUADRATURE_DIM",
    "QUADRATURE_LABELS",
    "SWEEP_KEYS",
    "CovarianceState",
    "DriftSpec",
    "DriftSpecModel",
    "FockDensity",
    "FockState",
    "Observable",
    "OracleSuite",
    "PropertyResult",
    "QuadraticForm",
    "ScenarioConfig",
    "SeparableGenerator",
    "SeparableSample",
    "SweepConfig",
    "SweepTable",
    "ThresholdReport",
    "TimeSeries",
    "Tolerances",
    "WitnessReport",
]
