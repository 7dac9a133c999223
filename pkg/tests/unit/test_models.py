"""
Tests for domain models and scenario documents
"""

import json
import math

import numpy as np
import pytest
from pydantic import ValidationError as SchemaError

from src.core.exceptions import ValidationError
from src.core.models import (
    CovarianceState,
    DriftSpec,
    FockState,
    Observable,
    PropertyResult,
    QuadraticForm,
    ScenarioConfig,
    SweepConfig,
    SweepTable,
    ThresholdReport,
    TimeSeries,
)


def _scenario(**changes):
    document = {"spec": {"kappa0": 1.0}, "t_end": 1.0}
    document.update(changes)
    return document


class TestDriftSpec:
    def test_mean_imbalance(self):
        spec = DriftSpec.from_mean_imbalance(1.0, lambda_bar=0.03, delta_lambda=0.002)
        assert spec.lambda_a == pytest.approx(0.031)
        assert spec.lambda_b == pytest.approx(0.029)
        assert spec.lambda_bar == pytest.approx(0.03)
        assert spec.delta_lambda == pytest.approx(0.002)
        assert not spec.is_balanced

    def test_pump_depletion(self):
        spec = DriftSpec(kappa0=2.0, Lambda=0.5)
        assert spec.kappa(0.0) == 2.0
        assert spec.kappa(2.0) == pytest.approx(2.0 * math.exp(-1.0))

    def test_balanced(self):
        assert DriftSpec(kappa0=1.0, lambda_a=0.1, lambda_b=0.1).is_balanced
        assert not DriftSpec(kappa0=1.0, phi=1e-3).is_balanced
        assert not DriftSpec(kappa0=1.0, f=1.1).is_balanced

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"kappa0": 0.0},
            {"kappa0": 1.0, "Lambda": -0.1},
            {"kappa0": 1.0, "lambda_a": -0.01},
            {"kappa0": 1.0, "f": 0.0},
            {"kappa0": float("nan")},
            {"kappa0": 1.0, "phi": float("inf")},
        ],
    )
    def test_rejects_unphysical(self, kwargs):
        with pytest.raises(ValidationError):
            DriftSpec(**kwargs)


class TestValueTypes:
    def test_quadratic_form_shape(self):
        with pytest.raises(ValidationError):
            QuadraticForm(np.eye(4))

    def test_quadratic_form_symmetry(self):
        matrix = np.zeros((8, 8))
        matrix[0, 1] = 1.0
        with pytest.raises(ValidationError):
            QuadraticForm(matrix)

    def test_quadratic_form_evaluate(self):
        form = QuadraticForm(np.eye(8), constant=-2.0)
        assert form.evaluate(np.ones(8)) == pytest.approx(2.0)

    def test_covariance_is_frozen_copy(self):
        sigma = 0.5 * np.eye(8)
        state = CovarianceState(sigma)
        sigma[0, 0] = 9.0
        assert state.sigma[0, 0] == 0.5
        with pytest.raises(ValueError):
            state.sigma[0, 0] = 1.0

    def test_covariance_rejects_asymmetric(self):
        sigma = 0.5 * np.eye(8)
        sigma[0, 1] = 0.1
        with pytest.raises(ValidationError):
            CovarianceState(sigma)

    def test_covariance_symmetrizes_round_off(self):
        sigma = 0.5 * np.eye(8)
        sigma[0, 1] = 1e-12
        state = CovarianceState(sigma)
        assert state.sigma[0, 1] == state.sigma[1, 0] == pytest.approx(5e-13)

    def test_covariance_rejects_non_finite(self):
        sigma = 0.5 * np.eye(8)
        sigma[2, 2] = np.nan
        with pytest.raises(ValidationError):
            CovarianceState(sigma)

    def test_variances_are_labelled(self):
        variances = CovarianceState.vacuum().variances()
        assert list(variances) == ["x1", "p1", "x2", "p2", "x3", "p3", "x4", "p4"]
        assert set(variances.values()) == {0.5}

    def test_fock_state_size(self):
        with pytest.raises(ValidationError):
            FockState(np.zeros(10), cutoff=1)
        state = FockState(np.ones(16), cutoff=1)
        assert state.dimension == 16
        assert state.norm == pytest.approx(4.0)

    def test_time_series_lengths(self):
        with pytest.raises(ValidationError):
            TimeSeries(times=np.arange(3.0), columns={"N": np.arange(2.0)})

    def test_time_series_final_row(self):
        series = TimeSeries(
            times=np.array([0.0, 0.5]), columns={"N": [0.0, 1.0], "ratio": [0.1, 0.2]}
        )
        assert len(series) == 2
        assert series.final_row() == {"t": 0.5, "N": 1.0, "ratio": 0.2}

    def test_sweep_table_columns(self):
        table = SweepTable(header=("eta", "ratio"), rows=((0.5, 0.375), (1.0, 0.0)))
        assert table.column("eta") == [0.5, 1.0]
        with pytest.raises(ValidationError):
            table.column("N")

    def test_threshold_report_rows(self):
        report = ThresholdReport(
            n_mean=100.0,
            kappa=2.0,
            delta_eta_max=0.1,
            delta_lambda_over_kappa_max=0.4,
            phi_max_sqrt=0.2,
            phi_max_linear=0.02,
        )
        rows = dict(report.rows())
        assert rows["delta_lambda_max"] == pytest.approx(0.8)
        assert rows["eta_critical"] == pytest.approx(1.0 / 3.0)

    def test_property_result_json(self):
        result = PropertyResult(
            suite="algebra",
            name="hermiticity",
            deviation=1e-16,
            tolerance=1e-12,
            passed=True,
            seed=3,
            details={"cutoff": 4},
        )
        payload = json.loads(result.to_json_line())
        assert payload["property"] == "hermiticity"
        assert payload["cutoff"] == 4
        assert payload["passed"] is True


class TestScenarioConfig:
    def test_defaults(self):
        config = ScenarioConfig.model_validate(_scenario())
        assert config.step == 1e-3
        assert config.outputs == [Observable.N, Observable.J2, Observable.RATIO]
        assert config.spec.to_drift_spec() == DriftSpec(kappa0=1.0)

    def test_mean_imbalance_document(self):
        config = ScenarioConfig.model_validate(
            _scenario(spec={"kappa0": 1.0, "lambda_bar": 0.03, "delta_lambda": 0.002})
        )
        assert config.spec.lambda_a == pytest.approx(0.031)
        assert config.spec.lambda_b == pytest.approx(0.029)

    @pytest.mark.parametrize(
        "changes",
        [
            {"t_end": -1.0},
            {"step": 0.0},
            {"sample_every": 1e-4},
            {"post_loss": [0.5, 0.5, 0.5]},
            {"post_loss": [0.5, 0.5, 0.5, 1.5]},
            {"outputs": []},
            {"outputs": ["N", "N"]},
            {"outputs": ["entropy"]},
            {"unknown": 1},
            {"spec": {"kappa0": 1.0, "lambda_a": 0.1, "lambda_bar": 0.1}},
            {"spec": {"kappa0": -1.0}},
        ],
    )
    def test_rejects_invalid(self, changes):
        with pytest.raises(SchemaError):
            ScenarioConfig.model_validate(_scenario(**changes))

    def test_round_trips_through_json(self):
        config = ScenarioConfig.model_validate(
            _scenario(post_loss=[0.9, 0.9, 0.8, 0.8], outputs=["ratio", "variances"])
        )
        again = ScenarioConfig.model_validate(config.model_dump(mode="json"))
        assert again == config


class TestSweepConfig:
    def test_size(self):
        sweep = SweepConfig.model_validate(
            {"base": _scenario(), "grid": {"eta": [0.5, 1.0], "kappa0": [1, 2, 3]}}
        )
        assert sweep.size == 6
        assert sweep.workers is None

    @pytest.mark.parametrize(
        "grid",
        [
            {},
            {"temperature": [1.0]},
            {"eta": []},
            {"lambda_a": [0.1], "delta_lambda": [0.0]},
        ],
    )
    def test_rejects_invalid_grid(self, grid):
        with pytest.raises(SchemaError):
            SweepConfig.model_validate({"base": _scenario(), "grid": grid})

    def test_rejects_zero_workers(self):
        with pytest.raises(SchemaError):
            SweepConfig.model_validate(
                {"base": _scenario(), "grid": {"eta": [1.0]}, "workers": 0}
            )
