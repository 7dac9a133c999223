"""
Export Service for EntLaser

Writes run outputs: CSV time series and tables with '#' metadata lines,
SVG line plots rendered by matplotlib, threshold reports and JSON lines.
"""

import csv
import io
import json
import math
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, TextIO, Union

import matplotlib

matplotlib.use("Agg")

from matplotlib.figure import Figure  # noqa: E402

from ..exceptions import ConfigurationError, ValidationError  # noqa: E402
from ..models import PropertyResult, ThresholdReport, TimeSeries  # noqa: E402
from .logging import get_logger  # noqa: E402
from .settings_config_service import get_settings_service  # noqa: E402

PathLike = Union[str, Path]


def format_number(value: Any, digits: int = 17) -> str:
    """Numbers with the given significant digits; booleans as true/false."""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    value = float(value)
    if math.isnan(value):
        return "nan"
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return format(value, f".{digits}g")


def read_csv_metadata(path: PathLike) -> Dict[str, Any]:
    """Parse the '# key: json' lines at the top of a CSV written here."""
    metadata: Dict[str, Any] = {}
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            if not line.startswith("#"):
                break
            key, _, value = line[1:].strip().partition(": ")
            try:
                metadata[key] = json.loads(value)
            except json.JSONDecodeError as e:
                raise ConfigurationError(f"bad metadata line for '{key}' in {path}") from e
    return metadata


class ExportService:
    """CSV, SVG and report writers"""

    def __init__(self, digits: Optional[int] = None, hashsalt: Optional[str] = None):
        defaults = get_settings_service().get_export_defaults()
        self.digits = digits or defaults["csv_digits"]
        self.hashsalt = hashsalt or defaults["svg_hashsalt"]
        self.logger = get_logger("export")

    # ---- CSV ----

    def _write_rows(
        self,
        stream: TextIO,
        header: Sequence[str],
        rows: Iterable[Sequence[Any]],
        metadata: Mapping[str, Any],
    ):
        for key, value in metadata.items():
            stream.write(f"# {key}: {json.dumps(value, sort_keys=True)}\n")
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_number(v, self.digits) for v in row])

    def render_time_series(self, series: TimeSeries) -> str:
        header = ["t", *series.columns.keys()]
        columns = list(series.columns.values())
        rows = (
            [series.times[i], *(column[i] for column in columns)]
            for i in range(len(series))
        )
        buffer = io.StringIO()
        self._write_rows(buffer, header, rows, series.metadata)
        return buffer.getvalue()

    def render_table(
        self,
        header: Sequence[str],
        rows: Iterable[Sequence[Any]],
        metadata: Optional[Mapping[str, Any]] = None,
    ) -> str:
        buffer = io.StringIO()
        self._write_rows(buffer, header, rows, metadata or {})
        return buffer.getvalue()

    def write_text(self, text: str, path: PathLike):
        target = Path(path)
        target.parent.mkdir(parents=True, exist_ok=True)
        with open(target, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
        self.logger.info("export.write", path=str(target), bytes=len(text.encode("utf-8")))

    def write_time_series_csv(self, series: TimeSeries, path: PathLike):
        self.write_text(self.render_time_series(series), path)

    # ---- SVG ----

    def write_svg(
        self,
        path: PathLike,
        series: Mapping[str, Sequence[Sequence[float]]],
        title: str = "",
        xlabel: str = "t",
        ylabel: str = "",
        log_y: bool = False,
    ):
        """
        One line per named series of (x, y) columns. With log_y, points with
        non-positive y are dropped from that series.
        """
        if not series:
            raise ValidationError("no series to plot")
        with matplotlib.rc_context(
            {"svg.hashsalt": self.hashsalt, "svg.fonttype": "path"}
        ):
            figure = Figure(figsize=(6.4, 4.2))
            axes = figure.add_subplot(1, 1, 1)
            for label, (xs, ys) in series.items():
                points = [
                    (x, y)
                    for x, y in zip(xs, ys)
                    if math.isfinite(y) and (y > 0 or not log_y)
                ]
                if not points:
                    self.logger.warning("export.empty_series", label=label, log_y=log_y)
                    continue
                axes.plot([p[0] for p in points], [p[1] for p in points], label=label)
            if log_y:
                axes.set_yscale("log")
            axes.set_xlabel(xlabel)
            axes.set_ylabel(ylabel)
            if title:
                axes.set_title(title)
            axes.legend()
            axes.grid(True, alpha=0.3)
            target = Path(path)
            target.parent.mkdir(parents=True, exist_ok=True)
            figure.savefig(target, format="svg", metadata={"Date": None})
        self.logger.info("export.svg", path=str(target), series=len(series), log_y=log_y)

    def write_time_series_svg(
        self,
        series: TimeSeries,
        path: PathLike,
        columns: Optional[List[str]] = None,
        log_y: bool = False,
    ):
        names = columns or list(series.columns.keys())
        missing = [name for name in names if name not in series.columns]
        if missing:
            raise ValidationError(f"series has no column(s) {missing}")
        self.write_svg(
            path,
            {name: (series.times, series.columns[name]) for name in names},
            log_y=log_y,
        )

    # ---- reports ----

    def render_thresholds_text(self, report: ThresholdReport) -> str:
        width = max(len(name) for name, _ in report.rows())
        lines = [f"{name.ljust(width)}  {value:.6g}" for name, value in report.rows()]
        lines.append(f"note: {report.caveat}")
        return "\n".join(lines) + "\n"

    def render_thresholds_csv(self, report: ThresholdReport) -> str:
        names = [name for name, _ in report.rows()]
        values = [value for _, value in report.rows()]
        return self.render_table(names, [values], {"caveat": report.caveat})

    def render_properties(self, results: Iterable[PropertyResult]) -> str:
        return "".join(result.to_json_line() + "\n" for result in results)


# Global instance
_export_service: Optional[ExportService] = None


def get_export_service() -> ExportService:
    """Get the global export service instance"""
    global _export_service
    if _export_service is None:
        _export_service = ExportService()
    return _export_service


def reset_export_service():
    """Reset the global export service instance. Useful for testing."""
    global _export_service
    _export_service = None
