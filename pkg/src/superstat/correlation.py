"""
Autocorrelation of returns and of the volatility series, and classification
of its decay as exponential or power law.
"""

import logging
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import fft

from .models import CorrelationFunction, DecayFit, DecayForm


logger = logging.getLogger(__name__)

MIN_FIT_POINTS = 5
ESTIMATORS = ("literal", "centered")


class CorrelationError(Exception):
    """Base exception for correlation analysis errors."""
    pass


class SeriesTooShort(CorrelationError):
    """Exception raised when a series is too short for the requested lags."""

    def __init__(self, message: str, length: int = 0, required: int = 0):
        super().__init__(message)
        self.length = length
        self.required = required


class TooFewPoints(CorrelationError):
    """Exception raised when too few lags are usable for a decay fit."""

    def __init__(self, message: str, points: int = 0):
        super().__init__(message)
        self.points = points


class AllBelowFloor(CorrelationError):
    """Exception raised when no lag rises above the noise floor."""

    def __init__(self, message: str, floor: float = 0.0):
        super().__init__(message)
        self.floor = floor


class PeriodTooLong(CorrelationError):
    """Exception raised when the lag range does not cover two periods."""
    pass


class NoDecay(CorrelationError):
    """Exception raised when no candidate form gives a decaying fit."""
    pass


def autocorrelation(
    x: Union[Sequence[float], np.ndarray], max_lag: int, estimator: str = "literal"
) -> CorrelationFunction:
    """
    Autocovariance for lags 0..max_lag.

    ``literal``: (1/(M-t)) sum x_i x_{i+t} - mean(x)^2
    ``centered``: (1/(M-t)) sum (x_i - mean)(x_{i+t} - mean)

    Both agree at lag 0, where they give the biased sample variance. Lagged
    products are summed by FFT.

    Raises:
        SeriesTooShort: If len(x) <= max_lag + 1
    """
    if estimator not in ESTIMATORS:
        raise ValueError(f"Unknown estimator {estimator!r}; choose from {ESTIMATORS}")
    if max_lag < 1:
        raise ValueError(f"max_lag must be positive, got {max_lag}")
    values = np.asarray(x, dtype=float)
    m = values.shape[0]
    if m <= max_lag + 1:
        raise SeriesTooShort(
            f"Series of length {m} is too short for max_lag {max_lag}", length=m, required=max_lag + 2
        )

    mean = values.mean()
    y = values - mean
    size = fft.next_fast_len(2 * m)
    spectrum = fft.rfft(y, size)
    sums = fft.irfft(spectrum * np.conj(spectrum), size)[: max_lag + 1]
    sums[0] = np.dot(y, y)
    if sums[0] <= 0:
        raise CorrelationError("Series has zero variance")

    lags = np.arange(max_lag + 1)
    counts = m - lags
    covariance = sums / counts
    if estimator == "literal":
        # x_i x_{i+t} - mean^2 = y_i y_{i+t} + mean (y_i + y_{i+t})
        prefix = np.concatenate(([0.0], np.cumsum(y)))
        head = prefix[m - lags]
        tail = prefix[m] - prefix[lags]
        covariance = covariance + mean * (head + tail) / counts
        covariance[0] = sums[0] / m

    return CorrelationFunction(lags=lags, values=covariance, sample_size=m, estimator=estimator)


def fit_decay(
    corr: CorrelationFunction,
    candidates: Iterable[Union[str, DecayForm]] = (DecayForm.EXPONENTIAL, DecayForm.POWER_LAW),
    fit_range: Optional[Tuple[int, int]] = None,
    floor: Optional[float] = None,
) -> DecayFit:
    """
    Fit exponential and power-law decay to a correlation function.

    Lags from 1 (or within fit_range) whose normalized value exceeds the noise
    floor 2/sqrt(M) enter log-domain least squares: log C against t for the
    exponential, log C against log t for the power law. The form with the lower
    RMS log-residual is preferred; the others are attached as alternatives.

    Args:
        corr: Correlation function
        candidates: Forms to try
        fit_range: Optional inclusive lag interval
        floor: Noise floor override

    Returns:
        Preferred DecayFit

    Raises:
        AllBelowFloor: If no lag exceeds the floor
        TooFewPoints: If fewer than 5 lags exceed the floor
        NoDecay: If no form has a positive rate or exponent
    """
    forms = [DecayForm(c) for c in candidates]
    if not forms:
        raise ValueError("At least one decay form is required")
    floor = corr.noise_floor if floor is None else floor
    normalized = corr.normalized
    lags = corr.lags

    in_range = lags >= 1
    if fit_range is not None:
        in_range &= (lags >= max(fit_range[0], 1)) & (lags <= fit_range[1])
    nonpositive = int(np.count_nonzero(in_range & (normalized <= 0)))
    usable = in_range & (normalized > max(floor, 0.0))

    points = int(np.count_nonzero(usable))
    if points == 0:
        raise AllBelowFloor(f"No lag exceeds the noise floor {floor:.4g}", floor)
    if points < MIN_FIT_POINTS:
        raise TooFewPoints(
            f"Only {points} lags exceed the noise floor; need {MIN_FIT_POINTS}", points
        )

    t = lags[usable].astype(float)
    log_c = np.log(normalized[usable])
    span = (int(t.min()), int(t.max()))

    fits: List[DecayFit] = []
    for form in forms:
        abscissa = t if form is DecayForm.EXPONENTIAL else np.log(t)
        slope, intercept = np.polyfit(abscissa, log_c, 1)
        residual = float(np.sqrt(np.mean((log_c - (slope * abscissa + intercept)) ** 2)))
        if not -slope > 0:
            logger.debug(f"{form.value} fit has non-negative slope {slope:.4g}; skipped")
            continue
        fits.append(
            DecayFit(
                form=form,
                fit_range=span,
                residual=residual,
                intercept=float(intercept),
                rate_gamma=float(-slope) if form is DecayForm.EXPONENTIAL else None,
                exponent_alpha=float(-slope) if form is DecayForm.POWER_LAW else None,
                points_used=points,
                excluded_nonpositive=nonpositive,
            )
        )

    if not fits:
        raise NoDecay("No candidate form describes a decaying correlation")

    best = min(fits, key=lambda f: f.residual)
    best.preferred = True
    best.alternatives = [f for f in fits if f is not best]
    logger.info(
        f"Decay fit over lags {span[0]}..{span[1]}: {best.form.value} "
        f"({best.parameter:.4g}, residual {best.residual:.3g})"
    )
    return best


def deseasonalize(corr: CorrelationFunction, period: int, max_rounds: int = 20) -> CorrelationFunction:
    """
    Remove a periodic modulation from a correlation function.

    Works on log C at positive lags: fit a power-law trend, average the
    residuals per phase (lag mod period), subtract that profile and refit
    until the profile settles. Lag 0 and non-positive values are untouched.
    The input is kept as ``original`` on the result.

    Raises:
        PeriodTooLong: If max_lag < 2 * period
    """
    if period < 2:
        raise ValueError(f"Period must be at least 2, got {period}")
    if corr.max_lag < 2 * period:
        raise PeriodTooLong(f"max_lag {corr.max_lag} does not cover two periods of {period}")

    positive = (corr.lags >= 1) & (corr.values > 0)
    if np.count_nonzero(positive) < 2:
        return CorrelationFunction(corr.lags, corr.values.copy(), corr.sample_size, corr.estimator, corr)

    t = corr.lags[positive]
    log_t = np.log(t.astype(float))
    log_c = np.log(corr.values[positive])
    phases = t % period
    present = np.unique(phases)

    profile = np.zeros(period)
    for round_index in range(max_rounds):
        slope, intercept = np.polyfit(log_t, log_c - profile[phases], 1)
        residual = log_c - (slope * log_t + intercept)
        updated = np.zeros(period)
        for phase in present:
            updated[phase] = residual[phases == phase].mean()
        updated[present] -= updated[present].mean()
        change = float(np.max(np.abs(updated - profile)))
        profile = updated
        if change < 1e-12:
            break
    logger.debug(f"Deseasonalized with period {period} after {round_index + 1} rounds")

    values = corr.values.copy()
    values[positive] = np.exp(log_c - profile[phases])
    return CorrelationFunction(
        lags=corr.lags, values=values, sample_size=corr.sample_size, estimator=corr.estimator, original=corr
    )


def default_period(window_size: int, session_lengths: Sequence[int]) -> Optional[int]:
    """Windows per trading session, or None when a session holds fewer than two windows."""
    lengths = np.asarray(session_lengths)
    if lengths.size == 0 or window_size < 1:
        return None
    period = int(round(float(np.median(lengths)) / window_size))
    return period if period >= 2 else None
