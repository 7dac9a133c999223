"""
Scenario Service for EntLaser

Back end of the evolve, sweep, thresholds and fig2 commands: loads JSON
scenario documents, integrates them on the Gaussian engine and samples the
requested observables.
"""

import copy
import itertools
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np
from pydantic import ValidationError as SchemaError

from ... import __version__
from ..exceptions import BudgetExceededError, ConfigurationError
from ..models import (
    QUADRATURE_LABELS,
    Observable,
    ScenarioConfig,
    SweepConfig,
    SweepTable,
    ThresholdReport,
    TimeSeries,
    Tolerances,
)
from .export_service import get_export_service, read_csv_metadata
from .gaussian_engine import GaussianEngineService
from .logging import get_logger, get_logging_service
from .settings_config_service import get_settings_service
from .witness_service import criterion, thresholds

PathLike = Union[str, Path]

FIG2_DELTA_LAMBDAS = (0.0, 0.001, 0.002)
_DRIFT_KEYS = ("kappa0", "Lambda", "lambda_a", "lambda_b", "phi", "f")
_SWEEP_COLUMNS = ("t", "N", "J2", "ratio", "entangled")


def _describe_schema_error(error: SchemaError) -> str:
    parts = []
    for item in error.errors():
        location = ".".join(str(part) for part in item["loc"]) or "<document>"
        parts.append(f"{location}: {item['msg']}")
    return "; ".join(parts)


def _read_document(path: PathLike) -> Any:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigurationError(f"cannot read {path}: {e}") from e
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigurationError(f"{path}:{e.lineno}:{e.colno}: {e.msg}") from e


def _read_csv_config(path: PathLike) -> Any:
    try:
        metadata = read_csv_metadata(path)
    except OSError as e:
        raise ConfigurationError(f"cannot read {path}: {e}") from e
    if "config" not in metadata:
        raise ConfigurationError(f"{path}: no config metadata line")
    return metadata["config"]


def load_scenario(path: PathLike) -> ScenarioConfig:
    """
    Parse and validate a scenario document. A CSV written by evolve is also
    accepted: its config metadata line reruns the same scenario.
    """
    if Path(path).suffix.lower() == ".csv":
        document = _read_csv_config(path)
    else:
        document = _read_document(path)
    try:
        return ScenarioConfig.model_validate(document)
    except SchemaError as e:
        raise ConfigurationError(f"{path}: {_describe_schema_error(e)}") from e


def load_sweep(path: PathLike) -> SweepConfig:
    """Parse and validate a sweep document."""
    try:
        return SweepConfig.model_validate(_read_document(path))
    except SchemaError as e:
        raise ConfigurationError(f"{path}: {_describe_schema_error(e)}") from e


def sample_times(t_end: float, sample_every: float) -> List[float]:
    """0, dt, 2dt, ... up to t_end, always ending exactly at t_end."""
    count = int(math.floor(t_end / sample_every * (1.0 + 1e-12)))
    times = [k * sample_every for k in range(count + 1)]
    if t_end - times[-1] > 1e-9 * sample_every:
        times.append(t_end)
    else:
        times[-1] = t_end
    return times


def output_columns(outputs: List[Observable]) -> List[str]:
    """CSV column names in declared order; variances expand per quadrature."""
    columns: List[str] = []
    for output in outputs:
        if output is Observable.VARIANCES:
            columns.extend(f"var_{label}" for label in QUADRATURE_LABELS)
        else:
            columns.append(output.value)
    return columns


def fig2_scenario(delta_lambda: float) -> ScenarioConfig:
    """Eight passes at kappa0 = 1, mean loss 0.03 and pump depletion 0.01."""
    return ScenarioConfig.model_validate(
        {
            "spec": {
                "kappa0": 1.0,
                "Lambda": 0.01,
                "lambda_bar": 0.03,
                "delta_lambda": delta_lambda,
            },
            "t_end": 8.0,
            "step": 1e-3,
            "sample_every": 0.1,
            "outputs": ["N", "J2", "ratio"],
        }
    )


def with_step(config: ScenarioConfig, step: float) -> ScenarioConfig:
    """Copy of a scenario with a different RK4 step."""
    try:
        return ScenarioConfig.model_validate(
            {**config.model_dump(mode="json"), "step": step}
        )
    except SchemaError as e:
        raise ConfigurationError(f"step {step}: {_describe_schema_error(e)}") from e


def expand_sweep(sweep: SweepConfig) -> List[Tuple[Tuple[float, ...], ScenarioConfig]]:
    """
    Cartesian grid in declared key order, first key slowest, as
    (grid values, scenario) pairs.
    """
    keys = list(sweep.grid.keys())
    base = sweep.base.model_dump(mode="json")
    points = []
    for values in itertools.product(*(sweep.grid[key] for key in keys)):
        overrides = dict(zip(keys, values))
        document = copy.deepcopy(base)
        spec = document["spec"]
        if "lambda_bar" in overrides or "delta_lambda" in overrides:
            bar = overrides.get("lambda_bar", 0.5 * (spec["lambda_a"] + spec["lambda_b"]))
            delta = overrides.get("delta_lambda", spec["lambda_a"] - spec["lambda_b"])
            spec["lambda_a"] = bar + 0.5 * delta
            spec["lambda_b"] = bar - 0.5 * delta
        for key in _DRIFT_KEYS:
            if key in overrides:
                spec[key] = overrides[key]
        if "t_end" in overrides:
            document["t_end"] = overrides["t_end"]
        if "eta" in overrides:
            document["post_loss"] = [overrides["eta"]] * 4
        outputs = [Observable(name) for name in document["outputs"]]
        for required in (Observable.N, Observable.J2, Observable.RATIO):
            if required not in outputs:
                outputs.append(required)
        document["outputs"] = [output.value for output in outputs]
        try:
            config = ScenarioConfig.model_validate(document)
        except SchemaError as e:
            raise ConfigurationError(
                f"sweep point {overrides}: {_describe_schema_error(e)}"
            ) from e
        points.append((tuple(values), config))
    return points


def _run_point(task: Tuple[str, Tolerances]) -> Dict[str, float]:
    """Worker entry point; takes the scenario as JSON so it pickles cheaply."""
    document, tolerances = task
    config = ScenarioConfig.model_validate_json(document)
    return ScenarioService(tolerances).run_evolve(config).final_row()


class ScenarioService:
    """Evolution runs, parameter sweeps and presets"""

    def __init__(self, tolerances: Optional[Tolerances] = None):
        self.tolerances = tolerances or get_settings_service().get_tolerances()
        self.engine = GaussianEngineService(self.tolerances)
        self.logger = get_logger("scenario")

    def run_evolve(self, config: ScenarioConfig) -> TimeSeries:
        """Integrate a scenario and sample its observables."""
        started = time.perf_counter()
        spec = config.spec.to_drift_spec()
        times = sample_times(config.t_end, config.sample_every)
        states = self.engine.evolve_trajectory(
            self.engine.vacuum_state(), spec, times, config.step
        )

        names = output_columns(config.outputs)
        columns: Dict[str, List[float]] = {name: [] for name in names}
        for state in states:
            lab = self.engine.to_lab_frame(state, spec)
            if config.post_loss is not None:
                lab = self.engine.apply_loss(lab, config.post_loss)
            report = self.engine.witness(lab)
            for output in config.outputs:
                if output is Observable.N:
                    columns["N"].append(report.n)
                elif output is Observable.J2:
                    columns["J2"].append(report.j2)
                elif output is Observable.RATIO:
                    columns["ratio"].append(report.ratio)
                else:
                    for label, value in lab.variances().items():
                        columns[f"var_{label}"].append(value)

        steps = int(math.ceil(config.t_end / config.step)) if config.t_end > 0 else 0
        duration_ms = int((time.perf_counter() - started) * 1000)
        get_logging_service().log_run(
            "evolve",
            t_end=config.t_end,
            steps=steps,
            duration_ms=duration_ms,
            samples=len(times),
            seed=config.seed,
        )
        return TimeSeries(
            times=np.array(times),
            columns={name: np.array(values) for name, values in columns.items()},
            metadata={
                "config": config.model_dump(mode="json"),
                "version": __version__,
                "seed": config.seed,
            },
        )

    def run_sweep(
        self,
        sweep: SweepConfig,
        workers: Optional[int] = None,
        max_points: Optional[int] = None,
    ) -> SweepTable:
        """
        One row per grid point with the final t, <N>, <J^2>, ratio and verdict.
        Each point is exactly run_evolve's final row for that point's scenario.
        """
        budget = max_points or self.tolerances.max_sweep_points
        if sweep.size > budget:
            raise BudgetExceededError(
                f"sweep has {sweep.size} points, budget is {budget}",
                requested=sweep.size,
                budget=budget,
            )
        workers = workers or sweep.workers or self.tolerances.workers
        started = time.perf_counter()
        points = expand_sweep(sweep)
        tasks = [(config.model_dump_json(), self.tolerances) for _, config in points]
        if workers > 1 and len(tasks) > 1:
            with ProcessPoolExecutor(max_workers=min(workers, len(tasks))) as executor:
                finals = list(executor.map(_run_point, tasks))
        else:
            finals = [_run_point(task) for task in tasks]

        rows = []
        for (values, _), final in zip(points, finals):
            verdict = criterion(final["J2"], final["N"])
            rows.append(
                (
                    *values,
                    final["t"],
                    final["N"],
                    final["J2"],
                    final["ratio"],
                    verdict.entangled,
                )
            )

        duration_ms = int((time.perf_counter() - started) * 1000)
        get_logging_service().log_run(
            "sweep",
            t_end=max(config.t_end for _, config in points),
            steps=len(points),
            duration_ms=duration_ms,
            workers=workers,
        )
        return SweepTable(
            header=(*sweep.grid.keys(), *_SWEEP_COLUMNS),
            rows=tuple(rows),
            metadata={
                "sweep": sweep.model_dump(mode="json"),
                "version": __version__,
            },
        )

    def run_thresholds(self, n_mean: float, kappa: float) -> ThresholdReport:
        report = thresholds(n_mean, kappa)
        self.logger.info("scenario.thresholds", n_mean=n_mean, kappa=kappa)
        return report

    def run_fig2(self, step: Optional[float] = None) -> Dict[float, TimeSeries]:
        """The three pump-depleted runs with delta_lambda in {0, 0.001, 0.002}."""
        results = {}
        for delta_lambda in FIG2_DELTA_LAMBDAS:
            config = fig2_scenario(delta_lambda)
            if step is not None:
                config = with_step(config, step)
            results[delta_lambda] = self.run_evolve(config)
        return results

    def write_fig2(self, out_dir: PathLike, step: Optional[float] = None) -> List[Path]:
        """Write one CSV per curve plus log-scale SVGs of the ratio and <N>."""
        out = Path(out_dir)
        export = get_export_service()
        results = self.run_fig2(step)
        written = []
        for delta_lambda, series in results.items():
            path = out / f"fig2_dlambda_{delta_lambda:g}.csv"
            export.write_time_series_csv(series, path)
            written.append(path)
        for column, name, ylabel in (
            ("ratio", "fig2_ratio.svg", "<J^2>/<N>"),
            ("N", "fig2_photons.svg", "<N>"),
        ):
            path = out / name
            export.write_svg(
                path,
                {
                    f"dlambda={delta_lambda:g}": (series.times, series.columns[column])
                    for delta_lambda, series in results.items()
                },
                ylabel=ylabel,
                log_y=True,
            )
            written.append(path)
        return written


# Global instance
_scenario_service: Optional[ScenarioService] = None


def get_scenario_service() -> ScenarioService:
    """Get the global scenario service instance"""
    global _scenario_service
    if _scenario_service is None:
        _scenario_service = ScenarioService()
    return _scenario_service


def reset_scenario_service():
    """Reset the global scenario service instance. Useful for testing."""
    global _scenario_service
    _scenario_service = None
