"""
Command-line interface for superstat.

This module provides the SuperstatCLI application that wires ingest, window
selection, fitting, correlation analysis and simulation into batch commands
writing CSV tables and a JSON report.
"""

import sys
import json
import math
import argparse
import logging
from typing import List, Optional, Tuple, Type

import numpy as np
import pandas as pd

from . import __version__
from .artifacts import ArtifactError, ArtifactWriter
from .correlation import CorrelationError, autocorrelation, deseasonalize, fit_decay
from .distfit import FitError, fit_all, fit_kappa, histogram, select_preferred
from .ingest import IngestError, load_column, load_csv
from .marginal import MarginalError
from .models import AnalysisConfig, ConfigError, IngestConfig, ModelKind, PriceSeries, ReturnSeries, SynthConfig
from .pipeline import AnalysisPipeline, fit_curves
from .progress import ProgressReporter
from .returns import ReturnsError, returns_at_lag
from .settings import OutputDirResolver
from .synth import kappa_scan, load_synth_config, scale_schedule_source, simulate, synthetic_prices
from .windowing import MIN_WINDOW, WindowingError, extract_betas, find_optimal_window


# Set up logging
logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
    handlers=[
        logging.StreamHandler(sys.stderr)
    ]
)
logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_INGEST = 4
EXIT_RETURNS = 5
EXIT_WINDOWING = 6
EXIT_FIT = 7
EXIT_CORRELATION = 8
EXIT_CONFIG = 9
EXIT_INTERRUPTED = 130

# Checked in order; subclasses before their bases.
ERROR_EXIT_CODES: List[Tuple[Type[BaseException], int, str]] = [
    (ConfigError, EXIT_CONFIG, "Configuration error"),
    (IngestError, EXIT_INGEST, "Input error"),
    (ReturnsError, EXIT_RETURNS, "Returns error"),
    (WindowingError, EXIT_WINDOWING, "Window selection error"),
    (FitError, EXIT_FIT, "Fit error"),
    (MarginalError, EXIT_FIT, "Quadrature error"),
    (CorrelationError, EXIT_CORRELATION, "Correlation error"),
    (FileNotFoundError, EXIT_IO, "File not found"),
    (ArtifactError, EXIT_IO, "Output error"),
    (OSError, EXIT_IO, "I/O error"),
]

DEFAULT_MODELS = "Chi2,InvChi2,LogNormal"


def exit_code_for(error: BaseException) -> Tuple[int, str]:
    """Exit code and label for an exception."""
    for error_type, code, label in ERROR_EXIT_CODES:
        if isinstance(error, error_type):
            return code, label
    return EXIT_UNEXPECTED, "Unexpected error"


class SuperstatCLI:
    """Main CLI application for superstat."""

    def __init__(self):
        """Initialize the CLI application."""
        self.out_dir_resolver = OutputDirResolver()
        self.progress_reporter = ProgressReporter()
        self.writer: Optional[ArtifactWriter] = None

    def main(self, args: Optional[List[str]] = None) -> int:
        """
        Main entry point for the CLI application.

        Args:
            args: Command line arguments (defaults to sys.argv)

        Returns:
            Exit code (0 for success, see ERROR_EXIT_CODES for failures)
        """
        try:
            parsed = self.parse_arguments(args)
        except SystemExit as e:
            return e.code if isinstance(e.code, int) else EXIT_USAGE

        try:
            code = parsed.handler(parsed)
            if self.writer is not None:
                self.writer.commit()
            return code
        except KeyboardInterrupt:
            self._rollback()
            print("\n\nOperation cancelled by user.")
            return EXIT_INTERRUPTED
        except Exception as e:
            self._rollback()
            code, label = exit_code_for(e)
            if code == EXIT_UNEXPECTED:
                logger.exception(f"Unexpected error: {str(e)}")
            else:
                logger.error(f"{label}: {str(e)}")
            print(f"\n{label}: {str(e)}", file=sys.stderr)
            for name, message in getattr(e, "field_errors", {}).items():
                print(f"  {name}: {message}", file=sys.stderr)
            return code

    def parse_arguments(self, args: Optional[List[str]] = None) -> argparse.Namespace:
        """
        Parse command line arguments and apply the verbosity flags.

        Args:
            args: Command line arguments (defaults to sys.argv)

        Returns:
            Namespace whose ``handler`` runs the chosen command
        """
        parser = argparse.ArgumentParser(
            prog="superstat",
            description="Superstatistical analysis of price series and simulation of the hybrid volatility model",
            formatter_class=argparse.RawDescriptionHelpFormatter,
            epilog="""
Examples:
  %(prog)s analyze prices.csv --tau 1 --out-dir results
  %(prog)s simulate config.json --seed 7
  %(prog)s kappa-scan prices.csv --taus 1,2,5,10,20

Output directory:
  Artifacts go to the first of:
  1. --out-dir command line argument
  2. SUPERSTAT_OUT_DIR environment variable
  3. ~/.superstat_out configuration file (first line)
  4. ./superstat-out
            """,
        )
        parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")

        common = argparse.ArgumentParser(add_help=False)
        common.add_argument("--out-dir", help="Directory for the written artifacts")
        common.add_argument(
            "--no-overwrite", action="store_true", help="Fail instead of replacing files from an earlier run"
        )
        common.add_argument("--verbose", "-v", action="store_true", help="Enable debug logging")
        common.add_argument("--quiet", "-q", action="store_true", help="Suppress progress output")

        prices = argparse.ArgumentParser(add_help=False)
        prices.add_argument(
            "--resolution",
            choices=["daily", "intraday"],
            help="Sampling resolution of the input (default: detected from the timestamps)",
        )
        prices.add_argument("--label", default="", help="Share name for the report and the decay table")
        prices.add_argument(
            "--tau", type=_positive_int, default=1, help="Return lag in ticks of the input resolution (default: 1)"
        )

        scan = argparse.ArgumentParser(add_help=False)
        scan.add_argument(
            "--window-grid",
            type=_int_list,
            help="Candidate window sizes in returns, as 4,6,8 or start:stop:step (default: 4:100:2)",
        )
        scan.add_argument(
            "--shifts",
            type=_int_list,
            help="Window start offsets in returns (default: 0, dt/4, dt/2, 3dt/4 per window size)",
        )
        scan.add_argument(
            "--window", type=_window_size, help="Fixed window size T in returns; skips the kurtosis scan"
        )

        fitting = argparse.ArgumentParser(add_help=False)
        fitting.add_argument(
            "--models", type=_models, default=_models(DEFAULT_MODELS),
            help=f"Volatility laws to fit, comma separated (default: {DEFAULT_MODELS})",
        )
        fitting.add_argument(
            "--kappa", action=argparse.BooleanOptionalAction, default=True,
            help="Also fit the mixing weight kappa of the Mixed law (default: on)",
        )
        fitting.add_argument(
            "--kappa-step", type=float, default=0.01, help="Grid spacing of the kappa search (default: 0.01)"
        )
        fitting.add_argument(
            "--n-dof", type=_positive_int, default=4,
            help="Number of squared Gaussian factors in the Mixed law (default: 4)",
        )
        fitting.add_argument(
            "--bins", type=_bins, default="fd",
            help="Histogram binning: fd, log or a bin count (default: fd)",
        )

        subparsers = parser.add_subparsers(dest="command", metavar="COMMAND")
        subparsers.required = True

        analyze = subparsers.add_parser(
            "analyze", parents=[common, prices, scan, fitting], help="Run the full analysis of a price file"
        )
        analyze.add_argument("input", help="Price CSV (timestamp, price[, session]); .gz accepted")
        analyze.add_argument(
            "--max-lag", type=_positive_int, default=200, help="Largest lag of C_u in ticks (default: 200)"
        )
        analyze.add_argument(
            "--max-lag-beta", type=_positive_int,
            help="Largest lag of C_beta in windows (default: a quarter of the betas)",
        )
        analyze.add_argument(
            "--u-points", type=_positive_int, default=201,
            help="Number of points of the return-density grid (default: 201)",
        )
        analyze.add_argument(
            "--amended", action=argparse.BooleanOptionalAction, default=True,
            help="Fit each law to the returns themselves as well (default: on)",
        )
        analyze.add_argument("--scan-taus", type=_int_list, help="Also fit kappa at these lags, in ticks")
        analyze.add_argument("--sector", default="", help="Sector name for the decay table")
        analyze.add_argument("--seed", type=int, default=0, help="Seed for the Monte Carlo density check")
        analyze.set_defaults(handler=self.cmd_analyze)

        simulate_parser = subparsers.add_parser(
            "simulate", parents=[common], help="Simulate returns from the hybrid volatility model"
        )
        simulate_parser.add_argument("config", nargs="?", help="Simulation config JSON (default values when omitted)")
        simulate_parser.add_argument("--seed", type=int, help="Override the config seed")
        simulate_parser.add_argument("--ticks", type=_positive_int, help="Override total_ticks")
        simulate_parser.add_argument("--kappa", type=float, help="Override kappa, in [0, 1]")
        simulate_parser.set_defaults(handler=self.cmd_simulate)

        scan_parser = subparsers.add_parser(
            "kappa-scan", parents=[common, scan], help="Fit kappa as a function of the return lag tau"
        )
        scan_parser.add_argument("input", nargs="?", help="Price CSV; omit to scan simulated data")
        scan_parser.add_argument("--taus", type=_int_list, required=True, help="Return lags in ticks, ascending")
        scan_parser.add_argument("--config", help="Simulation config JSON for simulated data")
        scan_parser.add_argument(
            "--kappa-schedule", type=_schedule,
            help="Simulate each lag with kappa = A + B*log(tau), given as A,B",
        )
        scan_parser.add_argument("--kappa-step", type=float, default=0.01, help="Grid spacing of the kappa search")
        scan_parser.add_argument("--n-dof", type=_positive_int, default=4, help="Squared Gaussian factors (default: 4)")
        scan_parser.add_argument("--resolution", choices=["daily", "intraday"], help="Input resolution")
        scan_parser.set_defaults(handler=self.cmd_kappa_scan)

        returns_parser = subparsers.add_parser("returns", parents=[common, prices], help="Write normalized returns")
        returns_parser.add_argument("input", help="Price CSV")
        returns_parser.set_defaults(handler=self.cmd_returns)

        window_parser = subparsers.add_parser(
            "window", parents=[common, prices, scan], help="Scan window sizes for the kurtosis-3 crossing"
        )
        window_parser.add_argument("input", help="Price CSV")
        window_parser.set_defaults(handler=self.cmd_window)

        betas_parser = subparsers.add_parser(
            "betas", parents=[common, prices, scan], help="Write the per-window volatility parameters"
        )
        betas_parser.add_argument("input", help="Price CSV")
        betas_parser.set_defaults(handler=self.cmd_betas)

        fit_parser = subparsers.add_parser("fit", parents=[common, fitting], help="Fit volatility laws to betas")
        fit_parser.add_argument("input", help="CSV with a beta column, e.g. betas.csv")
        fit_parser.add_argument("--column", default="beta", help="Column holding the samples (default: beta)")
        fit_parser.set_defaults(handler=self.cmd_fit)

        corr_parser = subparsers.add_parser("corr", parents=[common], help="Autocorrelation and decay fit")
        corr_parser.add_argument("input", help="CSV with the series, e.g. returns.csv or betas.csv")
        corr_parser.add_argument("--column", default="u", help="Column holding the series (default: u)")
        corr_parser.add_argument(
            "--max-lag", type=_positive_int, default=200, help="Largest lag in rows of the input (default: 200)"
        )
        corr_parser.add_argument(
            "--estimator", choices=["literal", "centered"], default="literal",
            help="Covariance estimator (default: literal)",
        )
        corr_parser.add_argument("--period", type=_positive_int, help="Remove a periodic modulation of this many lags")
        corr_parser.add_argument(
            "--fit", action=argparse.BooleanOptionalAction, default=True, help="Fit the decay form (default: on)"
        )
        corr_parser.set_defaults(handler=self.cmd_corr)

        parsed_args = parser.parse_args(args)

        if parsed_args.verbose:
            logging.getLogger().setLevel(logging.DEBUG)
        elif parsed_args.quiet:
            logging.getLogger().setLevel(logging.ERROR)
        self.progress_reporter.verbose = not parsed_args.quiet
        return parsed_args

    def cmd_analyze(self, parsed: argparse.Namespace) -> int:
        """Run the full pipeline and write the report with every table."""
        series = self._load_prices(parsed)
        config = AnalysisConfig(
            tau=parsed.tau,
            window_grid=parsed.window_grid,
            shifts=parsed.shifts,
            window=parsed.window,
            max_lag=parsed.max_lag,
            max_lag_beta=parsed.max_lag_beta,
            models=parsed.models,
            fit_kappa=parsed.kappa,
            kappa_step=parsed.kappa_step,
            n_dof=parsed.n_dof,
            bins=parsed.bins,
            u_grid_points=parsed.u_points,
            amended=parsed.amended,
            scan_taus=parsed.scan_taus,
            seed=parsed.seed,
            label=parsed.label or series.source_label,
            sector=parsed.sector,
        )
        writer = self._open_writer(parsed.out_dir, not parsed.no_overwrite)

        self.progress_reporter.start_run(f"Analyzing {series.source_label}")
        result = AnalysisPipeline(config, self.progress_reporter).run(series)
        for name, frame in result.frames.items():
            writer.write_frame(name, frame)
        writer.write_report(result.report)

        self.progress_reporter.finish_run(result.report, str(writer.base_path), writer.get_directory_stats())
        return EXIT_OK

    def cmd_simulate(self, parsed: argparse.Namespace) -> int:
        """Simulate the model and write returns, beta truth and prices."""
        config = load_synth_config(parsed.config) if parsed.config else SynthConfig()
        overrides = {
            name: value
            for name, value in (("seed", parsed.seed), ("total_ticks", parsed.ticks), ("kappa", parsed.kappa))
            if value is not None
        }
        if overrides:
            config = config.replace(**overrides)
        if not parsed.quiet:
            print(json.dumps(config.to_dict(), indent=2, sort_keys=True))

        writer = self._open_writer(parsed.out_dir, not parsed.no_overwrite)
        self.progress_reporter.start_run(f"Simulating {config.total_ticks} ticks")
        output = simulate(config)
        prices = synthetic_prices(output)
        writer.write_synth_output(output, _prices_frame(prices))
        writer.write_json(
            "synth_config.json",
            {**config.to_dict(), "burn_in_ticks": config.burn_in_ticks, "raw_std": output.raw_std},
        )
        self.progress_reporter.finish_run(None, str(writer.base_path), writer.get_directory_stats())
        return EXIT_OK

    def cmd_kappa_scan(self, parsed: argparse.Namespace) -> int:
        """Fit kappa at several lags and the logarithmic trend."""
        if parsed.input:
            source = load_csv(parsed.input, IngestConfig(resolution=parsed.resolution))
        else:
            base = load_synth_config(parsed.config) if parsed.config else SynthConfig()
            if parsed.kappa_schedule is not None:
                intercept, slope = parsed.kappa_schedule
                source = scale_schedule_source(
                    base, lambda tau: min(max(intercept + slope * math.log(tau), 0.0), 1.0)
                )
            else:
                source = base
        writer = self._open_writer(parsed.out_dir, not parsed.no_overwrite)

        self.progress_reporter.start_run("Kappa scan")
        self.progress_reporter.start_stage("Lags", len(parsed.taus))
        result = kappa_scan(
            source,
            parsed.taus,
            candidates=parsed.window_grid,
            shifts=parsed.shifts,
            window=parsed.window,
            n_dof=parsed.n_dof,
            step=parsed.kappa_step,
            progress=self.progress_reporter.create_callback(),
        )
        writer.write_frame("kappa_scan.csv", result.to_frame())
        writer.write_json("kappa_scan.json", result.to_dict())
        if not parsed.quiet:
            print(result.trend_text())
        self.progress_reporter.finish_run(None, str(writer.base_path), writer.get_directory_stats())
        return EXIT_OK

    def cmd_returns(self, parsed: argparse.Namespace) -> int:
        """Write normalized returns with their session ids."""
        returns = self._returns(parsed)
        writer = self._open_writer(parsed.out_dir, not parsed.no_overwrite)
        frame = pd.DataFrame({"tick": np.arange(len(returns)), "u": returns.values})
        if returns.session_ids is not None:
            frame["session"] = returns.session_ids
        writer.write_frame("returns.csv", frame)
        self._say(
            f"{len(returns)} returns at lag {returns.lag_tau}, {returns.dropped_count} dropped "
            f"(raw mean {returns.raw_mean:.3e}, raw std {returns.raw_std:.3e})"
        )
        return EXIT_OK

    def cmd_window(self, parsed: argparse.Namespace) -> int:
        """Write the kurtosis scan and report the optimal window."""
        returns = self._returns(parsed)
        writer = self._open_writer(parsed.out_dir, not parsed.no_overwrite)
        scan = find_optimal_window(returns, parsed.window_grid, parsed.shifts)
        writer.write_frame("kurtosis_scan.csv", scan.to_frame())
        self._say(f"T = {scan.crossing:.2f} +/- {scan.crossing_uncertainty:.2f} (window {scan.optimal_window})")
        return EXIT_OK

    def cmd_betas(self, parsed: argparse.Namespace) -> int:
        """Write per-window volatility parameters."""
        returns = self._returns(parsed)
        writer = self._open_writer(parsed.out_dir, not parsed.no_overwrite)
        size = parsed.window
        if size is None:
            size = max(find_optimal_window(returns, parsed.window_grid, parsed.shifts).optimal_window, MIN_WINDOW)
        betas = extract_betas(returns, size)
        writer.write_frame("betas.csv", pd.DataFrame({"window": np.arange(len(betas)), "beta": betas.betas}))
        self._say(f"{len(betas)} betas at T = {size}, beta0 = {betas.beta0:.6g}")
        return EXIT_OK

    def cmd_fit(self, parsed: argparse.Namespace) -> int:
        """Fit volatility laws to a column of betas."""
        betas = load_column(parsed.input, parsed.column)
        writer = self._open_writer(parsed.out_dir, not parsed.no_overwrite)
        direct = [kind for kind in parsed.models if kind is not ModelKind.MIXED]
        fits, failures = fit_all(betas, direct, constrain_mean=True, n_dof=parsed.n_dof)
        if parsed.kappa or ModelKind.MIXED in parsed.models:
            try:
                fits[ModelKind.MIXED] = fit_kappa(betas, n_dof=parsed.n_dof, step=parsed.kappa_step)
            except FitError as e:
                logger.warning(f"Mixed fit failed: {str(e)}")
                failures[ModelKind.MIXED] = str(e)
        if not fits:
            raise FitError("No volatility model could be fitted: " + "; ".join(failures.values()))

        hist = histogram(betas, parsed.bins)
        writer.write_frame("beta_hist.csv", hist.to_frame())
        writer.write_frame("beta_fits.csv", fit_curves(fits, hist.bin_edges))
        preferred = select_preferred({k: m for k, m in fits.items() if k is not ModelKind.MIXED} or fits)
        writer.write_json(
            "fits.json",
            {
                "fits": {kind.value: model.to_dict() for kind, model in fits.items()},
                "failures": {kind.value: message for kind, message in failures.items()},
                "preferred_model": preferred.value,
            },
        )
        for kind, model in fits.items():
            params = ", ".join(f"{name} = {value:.4g}" for name, value in model.params.items())
            self._say(f"{kind.value}: {params} (KS = {model.fit_stats['ks']:.4f})")
        self._say(f"Preferred model: {preferred.value}")
        return EXIT_OK

    def cmd_corr(self, parsed: argparse.Namespace) -> int:
        """Write an autocorrelation function and its decay fit."""
        values = load_column(parsed.input, parsed.column)
        writer = self._open_writer(parsed.out_dir, not parsed.no_overwrite)
        corr = autocorrelation(values, min(parsed.max_lag, max(values.shape[0] - 2, 1)), parsed.estimator)
        if parsed.period:
            corr = deseasonalize(corr, parsed.period)
        writer.write_frame(f"corr_{parsed.column}.csv", corr.to_frame())
        if parsed.fit:
            fit = fit_decay(corr)
            writer.write_json(f"decay_{parsed.column}.json", fit.to_dict())
            self._say(f"{fit.form.value} decay, parameter {fit.parameter:.6g} (residual {fit.residual:.3g})")
        return EXIT_OK

    def _load_prices(self, parsed: argparse.Namespace) -> PriceSeries:
        return load_csv(parsed.input, IngestConfig(resolution=parsed.resolution, source_label=parsed.label))

    def _returns(self, parsed: argparse.Namespace) -> ReturnSeries:
        return returns_at_lag(self._load_prices(parsed), parsed.tau)

    def _open_writer(self, cli_dir: Optional[str], overwrite: bool = True) -> ArtifactWriter:
        out_dir, source = self.out_dir_resolver.resolve(cli_dir)
        logger.info(f"Writing artifacts to {out_dir} (from {source})")
        self.writer = ArtifactWriter(out_dir, overwrite_existing=overwrite)
        return self.writer

    def _rollback(self) -> None:
        if self.writer is not None:
            self.writer.rollback()
            self.writer = None

    def _say(self, text: str) -> None:
        if self.progress_reporter.verbose:
            print(text)


def _prices_frame(series: PriceSeries) -> pd.DataFrame:
    return pd.DataFrame(
        {
            "timestamp": pd.to_datetime(series.timestamps).strftime("%Y-%m-%d %H:%M:%S"),
            "price": series.prices,
            "session": series.session_ids,
        }
    )


def _int_list(text: str) -> List[int]:
    """Parse ``4,6,8`` or an inclusive range ``start:stop[:step]``."""
    try:
        if ":" in text:
            parts = [int(p) for p in text.split(":")]
            if len(parts) not in (2, 3) or (len(parts) == 3 and parts[2] < 1):
                raise ValueError(text)
            step = parts[2] if len(parts) == 3 else 1
            values = list(range(parts[0], parts[1] + 1, step))
        else:
            values = [int(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid integer list: {text!r}")
    if not values:
        raise argparse.ArgumentTypeError(f"empty integer list: {text!r}")
    return values


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid integer: {text!r}")
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be positive, got {value}")
    return value


def _window_size(text: str) -> int:
    value = _positive_int(text)
    if value < 4:
        raise argparse.ArgumentTypeError(f"window size must be at least 4, got {value}")
    return value


def _models(text: str) -> Tuple[ModelKind, ...]:
    try:
        return tuple(ModelKind.parse(name) for name in text.split(",") if name.strip())
    except ValueError as e:
        raise argparse.ArgumentTypeError(str(e))


def _bins(text: str):
    if text.lower() in ("fd", "log"):
        return text.lower()
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bins must be fd, log or a positive integer, got {text!r}")
    if value < 1:
        raise argparse.ArgumentTypeError(f"bin count must be positive, got {value}")
    return value


def _schedule(text: str) -> Tuple[float, float]:
    try:
        intercept, slope = (float(p) for p in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"kappa schedule must be A,B, got {text!r}")
    return intercept, slope


def main():
    """Entry point for the command-line interface."""
    cli = SuperstatCLI()
    exit_code = cli.main()
    sys.exit(exit_code)


if __name__ == "__main__":
    main()
