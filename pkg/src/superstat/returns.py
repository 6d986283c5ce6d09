"""
Log returns at lag tau with overnight-gap removal, and normalization to
zero mean and unit variance.
"""

import logging
from typing import Union

import numpy as np

from .models import PriceSeries, RawReturns, Resolution, ReturnSeries


logger = logging.getLogger(__name__)


class ReturnsError(Exception):
    """Base exception for return computation errors."""
    pass


class SeriesTooShort(ReturnsError):
    """Exception raised when a series has too few points for the requested operation."""

    def __init__(self, message: str, length: int = 0, required: int = 0):
        super().__init__(message)
        self.length = length
        self.required = required


class ZeroVariance(ReturnsError):
    """Exception raised when returns have no spread to normalize by."""
    pass


def log_returns(series: PriceSeries, tau: int = 1) -> RawReturns:
    """
    Compute lag-tau log returns ``log(S[i+tau] / S[i])``.

    At intraday resolution pairs whose endpoints lie in different sessions are
    omitted and counted; at daily resolution every pair is kept.

    Args:
        series: Source prices
        tau: Lag in ticks of the source resolution

    Returns:
        RawReturns with the kept values and the dropped-pair count

    Raises:
        SeriesTooShort: If the series has no more than tau records
    """
    if tau < 1:
        raise ValueError(f"tau must be a positive integer, got {tau}")
    n = len(series)
    if n <= tau:
        raise SeriesTooShort(
            f"Series of length {n} is too short for lag {tau}", length=n, required=tau + 1
        )

    log_prices = np.log(series.prices)
    values = log_prices[tau:] - log_prices[:-tau]
    start_sessions = series.session_ids[:-tau]

    if series.resolution is Resolution.DAILY:
        keep = np.ones(values.shape[0], dtype=bool)
    else:
        keep = start_sessions == series.session_ids[tau:]

    dropped = int(values.shape[0] - np.count_nonzero(keep))
    if dropped:
        logger.info(f"Dropped {dropped} returns spanning session boundaries at lag {tau}")
    return RawReturns(
        values=values[keep],
        lag_tau=tau,
        dropped_count=dropped,
        session_ids=start_sessions[keep],
    )


def normalize(raw: Union[RawReturns, np.ndarray]) -> ReturnSeries:
    """
    Rescale returns to ``(R - <R>) / sqrt(<R^2> - <R>^2)`` with population moments.

    Raises:
        SeriesTooShort: If fewer than two returns are given
        ZeroVariance: If all returns are equal
    """
    if isinstance(raw, RawReturns):
        values, tau, dropped, sessions = raw.values, raw.lag_tau, raw.dropped_count, raw.session_ids
    else:
        values, tau, dropped, sessions = np.asarray(raw, dtype=float), 1, 0, None

    if values.shape[0] < 2:
        raise SeriesTooShort(
            f"Need at least 2 returns to normalize, got {values.shape[0]}",
            length=int(values.shape[0]),
            required=2,
        )
    if not np.all(np.isfinite(values)):
        raise ReturnsError("Returns contain non-finite values")

    raw_mean = float(np.mean(values))
    raw_std = float(np.std(values))
    if np.ptp(values) == 0 or not raw_std > 0:
        raise ZeroVariance("Returns have zero variance and cannot be normalized")

    u = (values - raw_mean) / raw_std
    # second pass removes the rounding left by the first
    u = u - np.mean(u)
    u = u / np.std(u)

    return ReturnSeries(
        values=u,
        lag_tau=tau,
        raw_mean=raw_mean,
        raw_std=raw_std,
        dropped_count=dropped,
        session_ids=sessions,
    )


def returns_at_lag(series: PriceSeries, tau: int = 1) -> ReturnSeries:
    """Normalized lag-tau returns of a price series."""
    return normalize(log_returns(series, tau))
