"""
superstat - superstatistical analysis of financial time series.

This package extracts the local volatility parameter of a return series,
fits candidate laws to it, integrates the implied return densities, classifies
the decay of correlations and simulates the hybrid lognormal/chi-square
volatility model used to validate the whole chain.
"""

__version__ = "0.1.0"
__description__ = "Superstatistical analysis of price series"

from .models import (
    AnalysisConfig,
    AnalysisReport,
    BetaSeries,
    CorrelationFunction,
    DecayFit,
    DistributionModel,
    ModelKind,
    PriceSeries,
    ReturnSeries,
    SynthConfig,
    SynthOutput,
    WindowScan,
)

__all__ = [
    "AnalysisConfig",
    "AnalysisReport",
    "BetaSeries",
    "CorrelationFunction",
    "DecayFit",
    "DistributionModel",
    "ModelKind",
    "PriceSeries",
    "ReturnSeries",
    "SynthConfig",
    "SynthOutput",
    "WindowScan",
]
