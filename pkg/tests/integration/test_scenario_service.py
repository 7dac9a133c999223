"""
Integration tests for scenario runs and parameter sweeps
"""

import json
import math

import pytest

from src.core.exceptions import BudgetExceededError, ConfigurationError
from src.core.models import QUADRATURE_LABELS, ScenarioConfig, SweepConfig
from src.core.services.export_service import get_export_service
from src.core.services.scenario_service import (
    expand_sweep,
    fig2_scenario,
    get_scenario_service,
    load_scenario,
    load_sweep,
    output_columns,
    sample_times,
    with_step,
)


def _config(**changes):
    document = {
        "spec": {"kappa0": 1.0},
        "t_end": 0.5,
        "step": 1e-3,
        "sample_every": 0.25,
    }
    document.update(changes)
    return ScenarioConfig.model_validate(document)


def _write_json(path, document):
    path.write_text(json.dumps(document, indent=2), encoding="utf-8")
    return path


class TestHelpers:
    def test_sample_times_end_exactly(self):
        assert sample_times(1.0, 0.25) == [0.0, 0.25, 0.5, 0.75, 1.0]
        assert sample_times(1.0, 0.3)[-1] == 1.0
        assert len(sample_times(1.0, 0.3)) == 5
        assert sample_times(0.0, 0.1) == [0.0]

    def test_sample_times_absorb_rounding(self):
        times = sample_times(8.0, 0.1)
        assert len(times) == 81
        assert times[-1] == 8.0

    def test_output_columns(self):
        config = _config(outputs=["ratio", "variances"])
        columns = output_columns(config.outputs)
        assert columns[0] == "ratio"
        assert columns[1:] == [f"var_{q}" for q in QUADRATURE_LABELS]
        assert columns[1] == "var_x1"

    def test_with_step(self):
        assert with_step(_config(), 0.01).step == 0.01
        with pytest.raises(ConfigurationError):
            with_step(_config(), 0.5)

    def test_fig2_scenario(self):
        config = fig2_scenario(0.002)
        assert config.spec.lambda_a == pytest.approx(0.031)
        assert config.spec.lambda_b == pytest.approx(0.029)
        assert config.t_end == 8.0


class TestLoading:
    def test_load_scenario(self, tmp_path):
        document = {"spec": {"kappa0": 2.0}, "t_end": 1.0}
        path = _write_json(tmp_path / "run.json", document)
        assert load_scenario(path).spec.kappa0 == 2.0

    def test_syntax_error_has_position(self, tmp_path):
        path = tmp_path / "run.json"
        text = '{\n  "spec": {"kappa0": 1.0},\n  "t_end": ,\n}\n'
        path.write_text(text, encoding="utf-8")
        with pytest.raises(ConfigurationError) as info:
            load_scenario(path)
        assert f"{path}:3:" in str(info.value)

    def test_schema_error_names_field(self, tmp_path):
        document = {"spec": {"kappa0": -1.0}, "t_end": 1.0}
        path = _write_json(tmp_path / "run.json", document)
        with pytest.raises(ConfigurationError) as info:
            load_scenario(path)
        assert "spec.kappa0" in str(info.value)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigurationError):
            load_scenario(tmp_path / "nothing.json")

    def test_load_sweep(self, tmp_path):
        document = {
            "base": {"spec": {"kappa0": 1.0}, "t_end": 0.5},
            "grid": {"eta": [0.5, 1.0]},
        }
        path = _write_json(tmp_path / "grid.json", document)
        assert load_sweep(path).size == 2


class TestEvolve:
    def test_columns_and_times(self, scenarios):
        series = scenarios.run_evolve(_config())
        assert list(series.columns) == ["N", "J2", "ratio"]
        assert list(series.times) == [0.0, 0.25, 0.5]

    def test_initial_row_is_vacuous(self, scenarios):
        series = scenarios.run_evolve(_config())
        assert series.columns["N"][0] == pytest.approx(0.0, abs=1e-12)
        assert math.isnan(series.columns["ratio"][0])

    def test_zero_duration(self, scenarios):
        series = scenarios.run_evolve(_config(t_end=0.0))
        assert len(series) == 1

    def test_lossless_run_matches_ideal(self, scenarios, engine):
        series = scenarios.run_evolve(_config())
        expected = engine.expect_number(engine.ideal_state(0.5))
        assert series.final_row()["N"] == pytest.approx(expected, rel=1e-9)
        assert series.final_row()["ratio"] < 1e-10

    def test_post_loss(self, scenarios):
        series = scenarios.run_evolve(_config(post_loss=[0.5] * 4))
        assert series.final_row()["ratio"] == pytest.approx(0.375, abs=1e-8)

    def test_variances(self, scenarios):
        series = scenarios.run_evolve(_config(outputs=["variances"]))
        row = series.final_row()
        assert row["var_x1"] == pytest.approx(0.5 * math.exp(1.0), rel=1e-9)
        assert row["var_p1"] == pytest.approx(0.5 * math.exp(-1.0), rel=1e-9)

    def test_metadata(self, scenarios):
        config = _config(seed=42)
        series = scenarios.run_evolve(config)
        assert series.metadata["seed"] == 42
        assert ScenarioConfig.model_validate(series.metadata["config"]) == config
        assert series.metadata["version"]

    def test_csv_output_reloads_as_scenario(self, scenarios, tmp_path):
        config = _config(seed=7, spec={"kappa0": 1.0, "lambda_bar": 0.02})
        path = tmp_path / "run.csv"
        get_export_service().write_time_series_csv(scenarios.run_evolve(config), path)
        assert load_scenario(path) == config

    def test_csv_without_config_is_rejected(self, tmp_path):
        path = tmp_path / "bare.csv"
        path.write_text("# version: \"0.1.0\"\nt,N\n0,0\n", encoding="utf-8")
        with pytest.raises(ConfigurationError) as info:
            load_scenario(path)
        assert "config" in str(info.value)

    def test_csv_is_byte_identical(self, scenarios):
        export = get_export_service()
        config = _config(spec={"kappa0": 1.0, "lambda_bar": 0.02, "delta_lambda": 0.01})
        first = export.render_time_series(scenarios.run_evolve(config))
        second = export.render_time_series(scenarios.run_evolve(config))
        assert first == second

    def test_run_is_logged(self, scenarios, mocker):
        logging_service = mocker.patch(
            "src.core.services.scenario_service.get_logging_service"
        )
        scenarios.run_evolve(_config())
        call = logging_service.return_value.log_run.call_args
        assert call.args[0] == "evolve"
        assert call.kwargs["t_end"] == 0.5
        assert call.kwargs["samples"] == 3


class TestSweep:
    def _sweep(self, grid, **base_changes):
        base = _config(**base_changes).model_dump(mode="json")
        return SweepConfig.model_validate({"base": base, "grid": grid})

    def test_grid_order_first_key_slowest(self):
        sweep = self._sweep({"kappa0": [1.0, 2.0], "eta": [0.5, 0.9, 1.0]})
        points = expand_sweep(sweep)
        assert [values for values, _ in points] == [
            (1.0, 0.5),
            (1.0, 0.9),
            (1.0, 1.0),
            (2.0, 0.5),
            (2.0, 0.9),
            (2.0, 1.0),
        ]
        assert points[4][1].spec.kappa0 == 2.0
        assert points[4][1].post_loss == [0.9] * 4

    def test_mean_imbalance_axes(self):
        sweep = self._sweep(
            {"delta_lambda": [0.0, 0.002]}, spec={"kappa0": 1.0, "lambda_bar": 0.03}
        )
        _, config = expand_sweep(sweep)[1]
        assert config.spec.lambda_a == pytest.approx(0.031)
        assert config.spec.lambda_b == pytest.approx(0.029)

    def test_required_outputs_are_added(self):
        sweep = self._sweep({"eta": [1.0]}, outputs=["variances"])
        _, config = expand_sweep(sweep)[0]
        assert [o.value for o in config.outputs] == ["variances", "N", "J2", "ratio"]

    def test_invalid_point(self):
        sweep = self._sweep({"kappa0": [1.0, -1.0]})
        with pytest.raises(ConfigurationError):
            expand_sweep(sweep)

    def test_loss_law_sweep(self, scenarios):
        table = scenarios.run_sweep(self._sweep({"eta": [0.2, 1.0 / 3.0, 0.5, 0.9]}))
        assert table.header == ("eta", "t", "N", "J2", "ratio", "entangled")
        ratios = table.column("ratio")
        for eta, ratio in zip([0.2, 1.0 / 3.0, 0.5, 0.9], ratios):
            assert ratio == pytest.approx(0.75 * (1.0 - eta), abs=1e-8)
        assert table.column("entangled") == [False, False, True, True]

    def test_single_point_equals_evolve(self, scenarios):
        sweep = self._sweep({"t_end": [0.5]}, spec={"kappa0": 1.0, "lambda_a": 0.02})
        (row,) = scenarios.run_sweep(sweep).rows
        final = scenarios.run_evolve(expand_sweep(sweep)[0][1]).final_row()
        assert row[1:5] == (final["t"], final["N"], final["J2"], final["ratio"])

    def test_budget(self, scenarios):
        sweep = self._sweep({"kappa0": [1.0, 2.0, 3.0], "eta": [0.5, 1.0]})
        with pytest.raises(BudgetExceededError) as info:
            scenarios.run_sweep(sweep, max_points=5)
        assert info.value.requested == 6

    def test_workers_do_not_change_results(self, scenarios):
        sweep = self._sweep({"eta": [0.5, 0.9]}, spec={"kappa0": 1.0, "lambda_a": 0.01})
        serial = scenarios.run_sweep(sweep, workers=1)
        parallel = scenarios.run_sweep(sweep, workers=2)
        assert serial.rows == parallel.rows


class TestThresholds:
    def test_run_thresholds(self, scenarios):
        report = scenarios.run_thresholds(1e6, 1.0)
        assert report.delta_lambda_max == pytest.approx(4e-3)


def test_singleton():
    assert get_scenario_service() is get_scenario_service()
