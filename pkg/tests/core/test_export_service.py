"""
Tests for CSV, SVG and report export
"""

import json

import numpy as np
import pytest

from src.core.exceptions import ConfigurationError, ValidationError
from src.core.models import PropertyResult, ScenarioConfig, TimeSeries
from src.core.services.export_service import (
    ExportService,
    format_number,
    get_export_service,
    read_csv_metadata,
)
from src.core.services.witness_service import thresholds


@pytest.fixture
def export():
    return ExportService()


@pytest.fixture
def series():
    config = ScenarioConfig.model_validate(
        {"spec": {"kappa0": 1.0, "lambda_bar": 0.03}, "t_end": 0.2}
    )
    return TimeSeries(
        times=np.array([0.0, 0.1, 0.2]),
        columns={
            "N": np.array([0.0, 0.04, 0.16]),
            "ratio": np.array([np.nan, 0.01, 0.02]),
        },
        metadata={"config": config.model_dump(mode="json"), "version": "0.1.0"},
    )


class TestFormatting:
    def test_round_trip_digits(self):
        assert format_number(0.1) == "0.10000000000000001"
        assert float(format_number(1 / 3)) == 1 / 3

    def test_special_values(self):
        assert format_number(True) == "true"
        assert format_number(False) == "false"
        assert format_number(7) == "7"
        assert format_number(float("nan")) == "nan"
        assert format_number(float("-inf")) == "-inf"

    def test_numpy_scalars(self):
        assert format_number(np.float64(2.5)) == "2.5"

    def test_digits(self):
        assert format_number(np.pi, digits=4) == "3.142"


class TestCsv:
    def test_layout(self, export, series):
        text = export.render_time_series(series)
        lines = text.split("\n")
        assert lines[0].startswith("# config: ")
        assert lines[1] == '# version: "0.1.0"'
        assert lines[2] == "t,N,ratio"
        assert lines[3] == "0,0,nan"
        assert text.endswith("\n")
        assert "\r" not in text

    def test_metadata_round_trip(self, export, series, tmp_path):
        path = tmp_path / "out" / "run.csv"
        export.write_time_series_csv(series, path)
        metadata = read_csv_metadata(path)
        config = ScenarioConfig.model_validate(metadata["config"])
        assert config.spec.lambda_a == pytest.approx(0.03)
        assert metadata["version"] == "0.1.0"

    def test_deterministic(self, export, series):
        assert export.render_time_series(series) == export.render_time_series(series)

    def test_table(self, export):
        text = export.render_table(("eta", "entangled"), [(0.5, True), (0.25, False)])
        assert text == "eta,entangled\n0.5,true\n0.25,false\n"

    def test_bad_metadata(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("# config: {not json\nt\n", encoding="utf-8")
        with pytest.raises(ConfigurationError) as info:
            read_csv_metadata(path)
        assert "config" in str(info.value)


class TestSvg:
    def test_svg_is_reproducible(self, export, series, tmp_path):
        first, second = tmp_path / "a.svg", tmp_path / "b.svg"
        export.write_time_series_svg(series, first, columns=["N"])
        export.write_time_series_svg(series, second, columns=["N"])
        assert first.read_bytes() == second.read_bytes()
        text = first.read_text(encoding="utf-8")
        assert "<svg" in text
        assert "<dc:date>" not in text

    def test_log_axis_drops_non_positive(self, export, series, tmp_path):
        path = tmp_path / "log.svg"
        export.write_svg(
            path, {"N": (series.times, series.columns["N"])}, ylabel="<N>", log_y=True
        )
        assert path.exists()

    def test_unknown_column(self, export, series, tmp_path):
        with pytest.raises(ValidationError):
            export.write_time_series_svg(series, tmp_path / "x.svg", columns=["J2"])

    def test_empty_plot(self, export, tmp_path):
        with pytest.raises(ValidationError):
            export.write_svg(tmp_path / "x.svg", {})


class TestReports:
    def test_thresholds_text(self, export):
        text = export.render_thresholds_text(thresholds(1e6, 1.0))
        assert "delta_eta_max" in text
        assert "phi_max_linear" in text
        assert text.rstrip().endswith("bounds shown as equalities")

    def test_thresholds_csv(self, export):
        lines = export.render_thresholds_csv(thresholds(1e6, 1.0)).splitlines()
        assert lines[0].startswith("# caveat:")
        assert lines[1].split(",")[0] == "n_mean"
        assert lines[2].split(",")[0] == "1000000"

    def test_properties_are_json_lines(self, export):
        results = [
            PropertyResult("algebra", "hermiticity", 0.0, 1e-12, True, seed=0),
            PropertyResult("algebra", "form_commutators", 1.0, 1e-12, False, seed=0),
        ]
        lines = export.render_properties(results).splitlines()
        assert [json.loads(line)["passed"] for line in lines] == [True, False]


def test_settings_feed_defaults(tmp_path):
    (tmp_path / "entlaser.properties").write_text(
        "[cli]\ncsv_digits = 6\nsvg_hashsalt = lab\n", encoding="utf-8"
    )
    export = get_export_service()
    assert export.digits == 6
    assert export.hashsalt == "lab"
