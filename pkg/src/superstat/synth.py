"""
Simulation of the hybrid superstatistical Langevin model.

Gaussian factors X0..Xn are driven by Ornstein-Uhlenbeck processes and set the
volatility parameter

    beta = kappa * exp(X0) + (1 - kappa) * (X1^2 + ... + Xn^2)

which is refreshed every ``beta_update_interval`` ticks. Between refreshes the
returns follow a linear Langevin equation whose stationary variance is 1/beta.
All Ornstein-Uhlenbeck transitions use the exact discretization.
"""

import logging
import math
from pathlib import Path
from typing import Callable, Optional, Sequence, Union

import numpy as np
import pandas as pd
from scipy.signal import lfilter

from .distfit import DomainError, fit_kappa
from .models import (
    ConfigError,
    DistributionModel,
    KappaScanResult,
    PriceSeries,
    Resolution,
    ReturnSeries,
    SynthConfig,
    SynthOutput,
)
from .returns import returns_at_lag
from .settings import load_json_file
from .windowing import extract_betas, find_optimal_window


logger = logging.getLogger(__name__)

ReturnSource = Union[PriceSeries, SynthConfig, Callable[[int], ReturnSeries]]
ProgressCallback = Callable[[int, int, str], None]

SYNTHETIC_START = "2000-01-03 09:30"
SYNTHETIC_PRICE = 100.0
SYNTHETIC_RETURN_SCALE = 0.01


def ou_step(x, drag: float, noise: float, dt: float, draw):
    """
    Exact Ornstein-Uhlenbeck transition over a time step dt.

    x' = x exp(-drag dt) + noise * sqrt((1 - exp(-2 drag dt)) / (2 drag)) * draw

    Args:
        x: Current state (scalar or array)
        drag: Mean-reversion rate
        noise: Noise amplitude (zero gives deterministic decay)
        dt: Time step
        draw: Standard normal draw(s)

    Raises:
        DomainError: If drag or dt is not positive, or noise is negative
    """
    if not drag > 0 or not dt > 0:
        raise DomainError(f"drag and dt must be positive, got drag={drag}, dt={dt}")
    if noise < 0:
        raise DomainError(f"noise must be non-negative, got {noise}")
    decay = math.exp(-drag * dt)
    return x * decay + noise * math.sqrt(-math.expm1(-2.0 * drag * dt) / (2.0 * drag)) * draw


def ou_path(
    x0: Union[float, np.ndarray], drag: float, noise: float, dt: float, steps: int, rng: np.random.Generator
) -> np.ndarray:
    """
    Iterate ou_step ``steps`` times from x0.

    Returns an array of shape (steps + 1,) + shape(x0) starting with x0.
    """
    if not drag > 0 or not dt > 0:
        raise DomainError(f"drag and dt must be positive, got drag={drag}, dt={dt}")
    start = np.atleast_1d(np.asarray(x0, dtype=float))
    decay = math.exp(-drag * dt)
    amplitude = noise * math.sqrt(-math.expm1(-2.0 * drag * dt) / (2.0 * drag))
    draws = rng.standard_normal((steps,) + start.shape)
    path, _ = lfilter([amplitude], [1.0, -decay], draws, axis=0, zi=(decay * start)[None, ...])
    path = np.concatenate((start[None, ...], path), axis=0)
    return path[:, 0] if np.ndim(x0) == 0 else path


def beta_from_factors(x: Union[Sequence[float], np.ndarray], config: SynthConfig):
    """
    Volatility parameter from factors (X0, X1, ..., Xn).

    Accepts a single factor vector or an array whose last axis holds the factors.
    """
    factors = np.asarray(x, dtype=float)
    if factors.shape[-1] != config.n_dof + 1:
        raise ValueError(f"Expected {config.n_dof + 1} factors, got {factors.shape[-1]}")
    beta = config.kappa * np.exp(factors[..., 0]) + (1.0 - config.kappa) * np.sum(
        factors[..., 1:] ** 2, axis=-1
    )
    return float(beta) if beta.ndim == 0 else beta


def beta_law(config: SynthConfig) -> DistributionModel:
    """Stationary law of beta implied by a configuration."""
    return DistributionModel.mixed(
        config.kappa, config.n_dof, config.x0_mean, config.stationary_x0_std, config.stationary_xi_std ** 2
    )


def sample_betas(config: SynthConfig, size: int, rng: np.random.Generator) -> np.ndarray:
    """Independent draws of beta from the stationary factor law."""
    factors = np.empty((size, config.n_dof + 1))
    factors[:, 0] = rng.normal(config.x0_mean, config.stationary_x0_std, size)
    factors[:, 1:] = rng.normal(0.0, config.stationary_xi_std, (size, config.n_dof))
    return beta_from_factors(factors, config)


def langevin_sigma(beta, gamma: float):
    """Noise amplitude sqrt(2 gamma / beta), which gives returns a stationary variance of 1/beta."""
    return np.sqrt(2.0 * gamma / np.asarray(beta, dtype=float))


def _factor_path(config: SynthConfig, segments: int, rng: np.random.Generator) -> np.ndarray:
    """
    OU driver values at each refresh, shape (segments, n_dof + 1), started from stationarity.

    Each driver has drag factor_drag and noise factor_noise, so its stationary
    standard deviation is factor_noise / sqrt(2 factor_drag).
    """
    start = config.factor_std * rng.standard_normal(config.n_dof + 1)
    if segments == 1:
        return start[None, :]
    interval = float(config.beta_update_interval)
    return ou_path(start, config.factor_drag, config.factor_noise, interval, segments - 1, rng)


def simulate(config: SynthConfig, rescale: bool = True) -> SynthOutput:
    """
    Simulate returns and the volatility in force at each tick.

    A burn-in of whole refresh segments covering ten relaxation times is
    simulated and discarded.

    Args:
        config: Model parameters
        rescale: Rescale returns to unit variance; beta_truth is expressed in
            the same units and the raw standard deviation is stored

    Returns:
        SynthOutput; identical for identical configurations
    """
    config.validate()
    rng = np.random.default_rng(config.seed)
    interval = config.beta_update_interval
    burn_in = config.burn_in_ticks
    ticks = burn_in + config.total_ticks
    segments = -(-ticks // interval)

    drivers = _factor_path(config, segments, rng)
    factors = np.empty_like(drivers)
    factors[:, 0] = config.x0_mean + config.x0_std * drivers[:, 0]
    factors[:, 1:] = config.xi_std * drivers[:, 1:]
    segment_betas = beta_from_factors(factors, config)
    if not np.all(segment_betas > 0):
        raise ConfigError("Configuration produced a non-positive beta", {"kappa": "degenerate factors"})
    beta = np.repeat(np.atleast_1d(segment_betas), interval)[:ticks]

    # exact OU step of du = -gamma u dt + sigma dW over one tick
    gamma = config.langevin_gamma
    decay = math.exp(-gamma)
    start = rng.standard_normal() / math.sqrt(beta[0])
    sigma = langevin_sigma(beta, gamma)
    shocks = sigma * math.sqrt(-math.expm1(-2.0 * gamma) / (2.0 * gamma)) * rng.standard_normal(ticks)
    u, _ = lfilter([1.0], [1.0, -decay], shocks, zi=[decay * start])

    u = u[burn_in:]
    beta = beta[burn_in:]
    raw_std = 1.0
    if rescale:
        raw_std = float(np.std(u))
        u = u / raw_std
        beta = beta * raw_std ** 2

    logger.info(
        f"Simulated {config.total_ticks} ticks (kappa={config.kappa}, interval={interval}, "
        f"burn-in {burn_in}), raw std {raw_std:.4f}"
    )
    return SynthOutput(u_series=u, beta_truth=beta, model_truth=config, raw_std=raw_std)


def synthetic_prices(output: SynthOutput) -> PriceSeries:
    """
    Price path for simulated returns: one-minute stamps in a single session,
    price = 100 * exp(cumsum(0.01 * u)), one more record than returns.
    """
    count = len(output) + 1
    timestamps = pd.Timestamp(SYNTHETIC_START) + pd.to_timedelta(np.arange(count), unit="min")
    log_prices = np.concatenate(([0.0], np.cumsum(SYNTHETIC_RETURN_SCALE * output.u_series)))
    return PriceSeries(
        timestamps=timestamps.to_numpy(),
        prices=SYNTHETIC_PRICE * np.exp(log_prices),
        session_ids=np.zeros(count, dtype=np.int64),
        resolution=Resolution.INTRADAY,
        source_label=f"synthetic seed {output.model_truth.seed}",
    )


def scale_schedule_source(
    base_config: SynthConfig, kappa_at_tau: Callable[[int], float]
) -> Callable[[int], ReturnSeries]:
    """
    Return source whose mixing weight depends on the lag.

    At lag tau the base configuration is simulated with kappa = kappa_at_tau(tau)
    and the seed offset by tau.
    """

    def source(tau: int) -> ReturnSeries:
        config = base_config.replace(kappa=float(kappa_at_tau(tau)), seed=base_config.seed + tau)
        output = simulate(config)
        return ReturnSeries(values=output.u_series, lag_tau=tau, raw_std=output.raw_std)

    return source


def kappa_scan(
    source: ReturnSource,
    tau_values: Sequence[int],
    candidates: Optional[Sequence[int]] = None,
    shifts: Optional[Sequence[int]] = None,
    window: Optional[int] = None,
    n_dof: int = 4,
    step: float = 0.01,
    progress: Optional[ProgressCallback] = None,
) -> KappaScanResult:
    """
    Fit kappa at each return lag tau and a trend kappa = a + b * ln(tau).

    Args:
        source: Prices (returns rebuilt at each lag), a simulation config
            (simulated once, then treated as prices) or a callable tau -> returns
        tau_values: Ascending positive lags
        candidates: Window sizes for the kurtosis scan
        shifts: Shifts for the kurtosis scan
        window: Fixed window size; skips the kurtosis scan
        n_dof: Chi-square degrees of freedom of the Mixed model
        step: kappa grid spacing
        progress: Optional callback ``(current, total, label)``

    Returns:
        KappaScanResult; the trend is omitted for a single lag
    """
    taus = [int(t) for t in tau_values]
    if not taus:
        raise ValueError("At least one tau value is required")
    if any(t < 1 for t in taus) or any(b <= a for a, b in zip(taus, taus[1:])):
        raise ValueError(f"tau values must be positive and ascending, got {taus}")

    if isinstance(source, SynthConfig):
        source = synthetic_prices(simulate(source))

    result = KappaScanResult()
    for index, tau in enumerate(taus, 1):
        if isinstance(source, PriceSeries):
            returns = returns_at_lag(source, tau)
        else:
            returns = source(tau)
        size = window or find_optimal_window(returns, candidates, shifts).optimal_window
        betas = extract_betas(returns, size)
        model = fit_kappa(betas, n_dof=n_dof, step=step)
        result.taus.append(tau)
        result.kappas.append(float(model.params["kappa"]))
        result.ks.append(float(model.fit_stats["ks"]))
        result.windows.append(int(size))
        logger.info(f"tau={tau}: T={size}, kappa={model.params['kappa']:.3f}")
        if progress:
            progress(index, len(taus), f"tau={tau}")

    if len(taus) >= 2:
        slope, intercept = np.polyfit(np.log(np.asarray(taus, dtype=float)), result.kappas, 1)
        result.slope, result.intercept = float(slope), float(intercept)
        logger.info(f"Scan trend: {result.trend_text()}")
    else:
        result.note = "fit omitted: fewer than two tau values"
    return result


def load_synth_config(path: Union[str, Path]) -> SynthConfig:
    """
    Load a simulation config from JSON; missing keys take their defaults.

    Raises:
        FileNotFoundError: If the file does not exist
        ConfigError: With field-level messages for unknown keys or invalid values
    """
    data = load_json_file(path)
    try:
        return SynthConfig.from_dict(data)
    except TypeError as e:
        raise ConfigError(f"Invalid simulation config: {str(e)}") from e
