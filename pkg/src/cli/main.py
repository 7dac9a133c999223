"""
EntLaser command line

    python -m src.cli evolve --config run.json --out run.csv [--svg run.svg]
    python -m src.cli sweep --config grid.json --out grid.csv [--workers k]
    python -m src.cli oracle-check --suite loss_law [--seed s] [--cutoff c]
    python -m src.cli thresholds --n 1e6 --kappa 1
    python -m src.cli fig2 --out-dir out/

Exit status: 0 success, 1 usage or configuration error, 2 numerical
failure, 3 property-suite failure.
"""

import argparse
import sys
from dataclasses import fields
from pathlib import Path
from typing import Any, Dict, List, Optional

from .. import __version__
from ..core.exceptions import (
    BudgetExceededError,
    ConfigurationError,
    EntLaserException,
    NumericalError,
    PropertyCheckError,
    ValidationError,
)
from ..core.models import OracleSuite, Tolerances
from ..core.services.export_service import get_export_service, reset_export_service
from ..core.services.logging import configure_logging, get_logging_service
from ..core.services.oracle_check_service import OracleCheckService
from ..core.services.scenario_service import (
    ScenarioService,
    load_scenario,
    load_sweep,
    with_step,
)
from ..core.services.settings_config_service import (
    get_settings_service,
    reset_settings_service,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NUMERICAL = 2
EXIT_PROPERTY = 3


class CliArgumentParser(argparse.ArgumentParser):
    """argparse with usage errors mapped to exit status 1"""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _positive_float(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}")
    if not value > 0:
        raise argparse.ArgumentTypeError(f"must be positive: {text!r}")
    return value


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be at least 1: {text!r}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = CliArgumentParser(
        prog="entlaser",
        description="Polarization-entangled laser simulator and witness toolkit",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--settings", help="properties file with tolerances and budgets")
    parser.add_argument("--log-dir", help="directory for entlaser.log and errors.log")
    parser.add_argument("--verbose", action="store_true", help="debug-level logging")
    parser.add_argument(
        "--tol",
        action="append",
        default=[],
        metavar="NAME=VALUE",
        help="override one tolerance or budget, e.g. --tol krylov_tol=1e-12",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    evolve = commands.add_parser("evolve", help="integrate one scenario")
    evolve.add_argument("--config", required=True, help="scenario JSON document")
    evolve.add_argument("--out", required=True, help="CSV output path, '-' for stdout")
    evolve.add_argument("--svg", help="also plot the sampled columns to this SVG")
    evolve.add_argument("--log-y", action="store_true", help="logarithmic y axis")
    evolve.add_argument("--step", type=_positive_float, help="override the RK4 step")

    sweep = commands.add_parser("sweep", help="Cartesian parameter sweep")
    sweep.add_argument("--config", required=True, help="sweep JSON document")
    sweep.add_argument("--out", required=True, help="CSV output path, '-' for stdout")
    sweep.add_argument("--workers", type=_positive_int, help="worker processes")
    sweep.add_argument("--max-points", type=_positive_int, help="sweep size budget")

    check = commands.add_parser("oracle-check", help="run a property suite")
    check.add_argument(
        "--suite", required=True, choices=[suite.value for suite in OracleSuite]
    )
    check.add_argument("--seed", type=int, default=0)
    check.add_argument("--cutoff", type=_positive_int, help="per-mode Fock cutoff")
    check.add_argument("--count", type=_positive_int, help="sample count")
    check.add_argument("--max-dimension", type=_positive_int, help="Fock dimension budget")
    check.add_argument("--out", help="JSON-lines report path (default stdout)")

    limits = commands.add_parser("thresholds", help="imperfection bounds at a given <N>")
    limits.add_argument("--n", required=True, type=_positive_float, dest="n_mean")
    limits.add_argument("--kappa", type=_positive_float, default=1.0)
    limits.add_argument("--csv", help="also write the CSV form to this path")

    fig2 = commands.add_parser("fig2", help="reproduce the pump-depletion figure")
    fig2.add_argument("--out-dir", required=True)
    fig2.add_argument("--step", type=_positive_float, help="override the RK4 step")
    return parser


def _tolerance_overrides(items: List[str]) -> Dict[str, Any]:
    kinds = {item.name: item.type for item in fields(Tolerances)}
    overrides: Dict[str, Any] = {}
    for item in items:
        name, sep, text = item.partition("=")
        name = name.strip()
        if not sep or name not in kinds:
            raise ConfigurationError(f"bad tolerance override '{item}'")
        try:
            value = float(text)
            overrides[name] = int(value) if kinds[name] in (int, "int") else value
        except ValueError as e:
            raise ConfigurationError(f"tolerance override '{item}' is not numeric") from e
    return overrides


def _emit(text: str, out: Optional[str]):
    if out is None or out == "-":
        sys.stdout.write(text)
        sys.stdout.flush()
    else:
        get_export_service().write_text(text, Path(out))


def cmd_evolve(args: argparse.Namespace, tolerances: Tolerances) -> int:
    config = load_scenario(args.config)
    if args.step is not None:
        config = with_step(config, args.step)
    series = ScenarioService(tolerances).run_evolve(config)
    export = get_export_service()
    _emit(export.render_time_series(series), args.out)
    if args.svg:
        export.write_time_series_svg(series, args.svg, log_y=args.log_y)
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace, tolerances: Tolerances) -> int:
    sweep = load_sweep(args.config)
    table = ScenarioService(tolerances).run_sweep(
        sweep, workers=args.workers, max_points=args.max_points
    )
    text = get_export_service().render_table(table.header, table.rows, table.metadata)
    _emit(text, args.out)
    return EXIT_OK


def cmd_oracle_check(args: argparse.Namespace, tolerances: Tolerances) -> int:
    service = OracleCheckService(tolerances)
    results = service.run(
        OracleSuite(args.suite), seed=args.seed, cutoff=args.cutoff, count=args.count
    )
    _emit(get_export_service().render_properties(results), args.out)
    service.assert_passed(results)
    return EXIT_OK


def cmd_thresholds(args: argparse.Namespace, tolerances: Tolerances) -> int:
    report = ScenarioService(tolerances).run_thresholds(args.n_mean, args.kappa)
    export = get_export_service()
    _emit(export.render_thresholds_text(report), None)
    if args.csv:
        export.write_text(export.render_thresholds_csv(report), args.csv)
    return EXIT_OK


def cmd_fig2(args: argparse.Namespace, tolerances: Tolerances) -> int:
    written = ScenarioService(tolerances).write_fig2(args.out_dir, step=args.step)
    _emit("".join(f"{path}\n" for path in written), None)
    return EXIT_OK


def _fail(code: int, error: EntLaserException, command: str) -> int:
    kind = type(error).__name__
    get_logging_service().log_error(kind, str(error), command=command)
    sys.stderr.write(f"entlaser: {kind}: {error}\n")
    return code


COMMANDS = {
    "evolve": cmd_evolve,
    "sweep": cmd_sweep,
    "oracle-check": cmd_oracle_check,
    "thresholds": cmd_thresholds,
    "fig2": cmd_fig2,
}


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        reset_settings_service()
        reset_export_service()
        settings = get_settings_service(args.settings)
        logging_defaults = settings.get_logging_defaults()
        configure_logging(
            log_dir=args.log_dir or logging_defaults["dir"],
            level="DEBUG" if args.verbose else logging_defaults["default_level"],
        )
        overrides = _tolerance_overrides(args.tol)
        if getattr(args, "max_dimension", None) is not None:
            overrides["max_dimension"] = args.max_dimension
        tolerances = settings.get_tolerances(**overrides)
        return COMMANDS[args.command](args, tolerances)
    except (ConfigurationError, ValidationError, BudgetExceededError) as e:
        return _fail(EXIT_USAGE, e, args.command)
    except NumericalError as e:
        return _fail(EXIT_NUMERICAL, e, args.command)
    except PropertyCheckError as e:
        return _fail(EXIT_PROPERTY, e, args.command)
