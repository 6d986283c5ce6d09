"""
End-to-end analysis of a price series.

This module provides the AnalysisPipeline class that runs returns, window
selection, volatility fits, integrated return densities and correlation
analysis in order, and collects the report together with the tables that
back each plot.
"""

import logging
import math
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from . import correlation, distfit, marginal
from .artifacts import json_ready
from .correlation import CorrelationError
from .distfit import FitError
from .marginal import MarginalError
from .models import (
    AnalysisConfig,
    AnalysisReport,
    BetaSeries,
    CorrelationFunction,
    DistributionModel,
    ModelKind,
    PriceSeries,
    Resolution,
    ReturnSeries,
    WindowScan,
)
from .progress import ProgressReporter
from .returns import ReturnsError, returns_at_lag
from .synth import kappa_scan
from .windowing import MIN_WINDOW, WindowingError, extract_betas, find_optimal_window


logger = logging.getLogger(__name__)

BETA_CURVE_POINTS = 200
MONTE_CARLO_DRAWS = 200_000


@dataclass
class AnalysisResult:
    """Report of one run and the tables to write next to it."""

    report: AnalysisReport
    frames: Dict[str, pd.DataFrame] = field(default_factory=dict)
    returns: Optional[ReturnSeries] = None
    betas: Optional[BetaSeries] = None
    fits: Dict[ModelKind, DistributionModel] = field(default_factory=dict)


class AnalysisPipeline:
    """Runs the full analysis on one price series."""

    def __init__(self, config: Optional[AnalysisConfig] = None, progress: Optional[ProgressReporter] = None):
        """
        Initialize the pipeline.

        Args:
            config: Analysis knobs (defaults when omitted)
            progress: Optional reporter for stage output
        """
        self.config = config or AnalysisConfig()
        self.progress = progress

    def run(self, series: PriceSeries) -> AnalysisResult:
        """
        Analyze a price series.

        Failures of the returns, window and beta stages, and a failure of every
        requested fit, stop the run. Failures of the amended fits, the
        marginal integrations, the decay fits and the kappa scan are recorded
        in ``report.errors`` and the run continues.

        Args:
            series: Ingested prices

        Returns:
            AnalysisResult with a validated report
        """
        config = self.config
        report = AnalysisReport()
        result = AnalysisResult(report=report)

        self._stage("Returns")
        returns = returns_at_lag(series, config.tau)
        result.returns = returns
        report.input_summary = {
            "source": series.source_label,
            "label": config.label,
            "sector": config.sector,
            "resolution": series.resolution.value,
            "record_count": len(series),
            "session_count": series.session_count,
            "tau": config.tau,
            "return_count": len(returns),
            "dropped_count": returns.dropped_count,
            "raw_mean": returns.raw_mean,
            "raw_std": returns.raw_std,
            "seed": config.seed,
        }
        self._done("Returns", f"{len(returns)} returns, {returns.dropped_count} dropped")

        window, scan = self._select_window(returns)
        report.window = window
        if scan is not None:
            result.frames["kurtosis_scan.csv"] = scan.to_frame()

        self._stage("Volatility")
        betas = extract_betas(returns, window["T"])
        result.betas = betas
        report.beta_stats = {
            "count": len(betas),
            "beta0": betas.beta0,
            "window_size": betas.window_size,
            "min": float(betas.betas.min()),
            "max": float(betas.betas.max()),
            "inverse_mean": float(np.mean(1.0 / betas.betas)),
        }
        hist = distfit.histogram(betas, config.bins)
        result.frames["beta_hist.csv"] = hist.to_frame()
        self._done("Volatility", f"{len(betas)} betas, beta0 = {betas.beta0:.4g}")

        fits = self._fit_models(betas, report)
        result.fits = fits
        result.frames["beta_fits.csv"] = fit_curves(fits, hist.bin_edges)

        self._stage("Return densities")
        result.frames["returns_hist.csv"] = _returns_histogram(returns.values)
        result.frames["marginals.csv"] = self._marginals(returns, fits, report)

        self._stage("Correlations")
        corr_frames = self._correlations(series, returns, betas, report)
        result.frames.update(corr_frames)

        if config.scan_taus:
            self._scan(series, report, result)

        report.generated_at = datetime.now(timezone.utc).isoformat(timespec="seconds")
        _sanitize(report)
        report.validate()
        logger.info(f"Analysis finished; preferred model {report.preferred_model}, {len(report.errors)} errors")
        return result

    def _select_window(self, returns: ReturnSeries) -> Tuple[Dict[str, object], Optional[WindowScan]]:
        config = self.config
        if config.window is not None:
            logger.info(f"Using fixed window T = {config.window}")
            return {"T": config.window, "source": "fixed", "crossing": None, "uncertainty": None}, None

        self._stage("Window scan")
        callback = self.progress.create_callback() if self.progress else None
        scan = find_optimal_window(returns, config.window_grid, config.shifts, progress=callback)
        size = max(scan.optimal_window, MIN_WINDOW)
        self._done("Window scan", f"T = {scan.crossing:.2f} +/- {scan.crossing_uncertainty:.2f}")
        summary = {
            "T": size,
            "source": "kurtosis scan",
            "crossing": scan.crossing,
            "uncertainty": scan.crossing_uncertainty,
            "window_sizes": scan.window_sizes,
            "mean_kurtosis": [float(v) for v in scan.curve],
        }
        return summary, scan

    def _fit_models(self, betas: BetaSeries, report: AnalysisReport) -> Dict[ModelKind, DistributionModel]:
        config = self.config
        self._stage("Fits")
        direct = [kind for kind in config.models if kind is not ModelKind.MIXED]
        fits, failures = distfit.fit_all(betas, direct, constrain_mean=True, n_dof=config.n_dof)
        for kind, message in failures.items():
            self._warn(report, f"fit {kind.value}", message)

        if config.fit_kappa or ModelKind.MIXED in config.models:
            callback = self.progress.create_callback() if self.progress else None
            try:
                mixed = distfit.fit_kappa(betas, n_dof=config.n_dof, step=config.kappa_step, progress=callback)
                fits[ModelKind.MIXED] = mixed
                report.kappa = self._kappa_section(mixed)
            except FitError as e:
                logger.warning(f"Mixed fit failed: {str(e)}")
                self._warn(report, "fit Mixed", str(e))

        if not fits:
            raise FitError("No volatility model could be fitted: " + "; ".join(report.errors))

        # Mixed nests both endpoint laws; it competes only when no direct fit exists
        candidates = {k: m for k, m in fits.items() if k is not ModelKind.MIXED} or fits
        preferred = distfit.select_preferred(candidates)
        report.preferred_model = preferred.value
        report.fits = {
            kind.value: {
                "params": dict(model.params),
                "fit_stats": {k: v for k, v in model.fit_stats.items() if k != "profile"},
                "mean": model.mean,
                "inverse_mean": distfit.inverse_mean(model),
            }
            for kind, model in fits.items()
        }
        self._done("Fits", f"preferred {preferred.value}")
        return fits

    def _kappa_section(self, mixed: DistributionModel) -> Dict[str, object]:
        section: Dict[str, object] = {
            "kappa": mixed.params["kappa"],
            "x0_s": mixed.params["x0_s"],
            "n_dof": mixed.params["n_dof"],
            "ks": mixed.fit_stats["ks"],
            "profile": mixed.fit_stats.get("profile"),
        }
        if 0.0 < mixed.params["kappa"] < 1.0:
            # cross-check of the quadrature density against sampled draws
            points = np.asarray(distfit.quantile(mixed, np.linspace(0.1, 0.9, 9)))
            exact = np.asarray(distfit.density(mixed, points))
            sampled = distfit.mixed_density_monte_carlo(mixed, points, MONTE_CARLO_DRAWS, self.config.seed)
            section["monte_carlo_deviation"] = float(np.max(np.abs(sampled - exact) / exact))
        return section

    def _marginals(
        self, returns: ReturnSeries, fits: Dict[ModelKind, DistributionModel], report: AnalysisReport
    ) -> pd.DataFrame:
        config = self.config
        u_max = max(5.0, math.ceil(float(np.max(np.abs(returns.values)))))
        grid = np.linspace(-u_max, u_max, config.u_grid_points)
        parts: List[pd.DataFrame] = []

        for kind, model in fits.items():
            entry: Dict[str, object] = {"direct": dict(model.params)}
            try:
                density = marginal.integrate_marginal(model, grid)
                parts.append(_marginal_frame(grid, kind, "direct", density.values))
                entry["normalization"] = density.normalization
                entry["direct_log_likelihood"] = marginal.marginal_log_likelihood(model, returns)
            except (MarginalError, FitError, ValueError) as e:
                logger.warning(f"{kind.value} marginal failed: {str(e)}")
                self._warn(report, f"marginal {kind.value}", str(e))
            if kind is ModelKind.CHI2:
                parts.append(_marginal_frame(grid, kind, "closed_form", marginal.student_t_marginal(model, grid)))

            if config.amended:
                try:
                    amended = marginal.amended_fit(returns, kind, reference=model, n_dof=config.n_dof)
                    entry["amended"] = dict(amended.params)
                    entry.update(
                        {k: v for k, v in amended.fit_stats.items() if k in ("divergence", "log_likelihood_gain")}
                    )
                    entry["amended_log_likelihood"] = amended.fit_stats["amended_log_likelihood"]
                    parts.append(
                        _marginal_frame(grid, kind, "amended", marginal.integrate_marginal(amended, grid).values)
                    )
                except (MarginalError, FitError, ValueError) as e:
                    logger.warning(f"Amended {kind.value} fit failed: {str(e)}")
                    self._warn(report, f"amended {kind.value}", str(e))
            report.marginal_fits[kind.value] = entry

        if not parts:
            return pd.DataFrame(columns=["u", "model", "variant", "p"])
        return pd.concat(parts, ignore_index=True)

    def _correlations(
        self, series: PriceSeries, returns: ReturnSeries, betas: BetaSeries, report: AnalysisReport
    ) -> Dict[str, pd.DataFrame]:
        config = self.config
        frames: Dict[str, pd.DataFrame] = {}

        u_lag = min(config.max_lag, len(returns) - 2)
        corr_u = correlation.autocorrelation(returns.values, u_lag)
        frames["corr_u.csv"] = corr_u.to_frame()
        report.correlations["u"] = self._decay_entry(corr_u, "C_u", report)

        beta_lag = min(config.max_lag_beta or max(len(betas) // 4, 1), len(betas) - 2)
        if beta_lag < 1:
            self._warn(report, "C_beta", f"only {len(betas)} betas")
            return frames
        corr_beta = correlation.autocorrelation(betas.betas, beta_lag)
        entry: Dict[str, object] = {}
        period = correlation.default_period(betas.window_size, list(series.session_lengths()))
        if period is not None and series.resolution is Resolution.INTRADAY:
            try:
                corr_beta = correlation.deseasonalize(corr_beta, period)
                entry["deseasonalized_period"] = period
            except CorrelationError as e:
                logger.warning(f"Deseasonalization skipped: {str(e)}")
                self._warn(report, "deseasonalize", str(e))
        frames["corr_beta.csv"] = corr_beta.to_frame()
        entry.update(self._decay_entry(corr_beta, "C_beta", report))
        report.correlations["beta"] = entry

        fit = entry.get("fit")
        if isinstance(fit, dict):
            frames["decay_table.csv"] = pd.DataFrame(
                [
                    {
                        "share": config.label or series.source_label,
                        "sector": config.sector,
                        "resolution": series.resolution.value,
                        "form": fit["form"],
                        "gamma": fit["rate_gamma"],
                        "alpha": fit["exponent_alpha"],
                    }
                ]
            )
        return frames

    def _decay_entry(self, corr: CorrelationFunction, name: str, report: AnalysisReport) -> Dict[str, object]:
        entry: Dict[str, object] = {"max_lag": corr.max_lag, "noise_floor": corr.noise_floor}
        try:
            entry["fit"] = correlation.fit_decay(corr).to_dict()
        except CorrelationError as e:
            logger.info(f"No decay fit for {name}: {str(e)}")
            self._warn(report, f"decay {name}", str(e))
        return entry

    def _scan(self, series: PriceSeries, report: AnalysisReport, result: AnalysisResult) -> None:
        config = self.config
        self._stage("Kappa scan")
        try:
            scan = kappa_scan(
                series,
                sorted(config.scan_taus),
                candidates=config.window_grid,
                shifts=config.shifts,
                window=config.window,
                n_dof=config.n_dof,
                step=config.kappa_step,
            )
        except (FitError, ReturnsError, WindowingError, ValueError) as e:
            logger.warning(f"Kappa scan failed: {str(e)}")
            self._warn(report, "kappa scan", str(e))
            return
        result.frames["kappa_scan.csv"] = scan.to_frame()
        report.kappa = dict(report.kappa or {})
        report.kappa["scan"] = scan.to_dict()

    def _stage(self, name: str) -> None:
        logger.info(f"Stage: {name}")
        if self.progress:
            self.progress.start_stage(name)

    def _done(self, name: str, message: str) -> None:
        if self.progress:
            self.progress.report_success(name, message)

    def _warn(self, report: AnalysisReport, item: str, message: str) -> None:
        report.add_error(f"{item}: {message}")
        if self.progress:
            self.progress.report_warning(item, message)


def fit_curves(fits: Dict[ModelKind, DistributionModel], edges: np.ndarray) -> pd.DataFrame:
    """Fitted densities on a grid spanning the histogram, long format ``beta,model,density``."""
    lo = max(float(edges[0]), float(edges[-1]) * 1e-4)
    grid = np.linspace(lo, float(edges[-1]), BETA_CURVE_POINTS)
    parts = [
        pd.DataFrame({"beta": grid, "model": kind.value, "density": distfit.density(model, grid)})
        for kind, model in fits.items()
    ]
    return pd.concat(parts, ignore_index=True)


def _returns_histogram(u: np.ndarray) -> pd.DataFrame:
    densities, edges = np.histogram(u, bins="fd", density=True)
    return pd.DataFrame({"bin_left": edges[:-1], "bin_right": edges[1:], "density": densities})


def _marginal_frame(grid: np.ndarray, kind: ModelKind, variant: str, values: np.ndarray) -> pd.DataFrame:
    return pd.DataFrame({"u": grid, "model": kind.value, "variant": variant, "p": values})


def _sanitize(report: AnalysisReport) -> None:
    """Replace non-finite numbers by None in every report section."""
    report.input_summary = json_ready(report.input_summary)
    report.window = json_ready(report.window)
    report.beta_stats = json_ready(report.beta_stats)
    report.fits = json_ready(report.fits)
    report.marginal_fits = json_ready(report.marginal_fits)
    report.correlations = json_ready(report.correlations)
    report.kappa = json_ready(report.kappa) if report.kappa is not None else None
