"""
Shared test configuration and fixtures for pytest.

This module contains common fixtures and configuration used across all tests.
"""

import json
import math
import shutil
import tempfile
from importlib import resources
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from superstat.models import ReturnSeries, SynthConfig
from superstat.synth import simulate, synthetic_prices


@pytest.fixture
def temp_dir():
    """Create a temporary directory for testing."""
    temp_path = tempfile.mkdtemp()
    yield temp_path
    shutil.rmtree(temp_path)


@pytest.fixture(scope="session")
def report_schema():
    """The shipped JSON schema of report.json."""
    return json.loads(resources.files("superstat").joinpath("schemas/report.schema.json").read_text())


@pytest.fixture
def rng():
    """Seeded random generator."""
    return np.random.default_rng(20240601)


@pytest.fixture
def intraday_price_file(temp_dir):
    """Two trading days of one-minute prices with a header row."""
    lines = ["timestamp,price"]
    price = 100.0
    steps = np.random.default_rng(7).normal(0.0, 0.001, 120)
    for day, start in enumerate(("2024-01-02 09:30", "2024-01-03 09:30")):
        stamps = pd.date_range(start, periods=60, freq="min")
        for i, stamp in enumerate(stamps):
            price *= math.exp(steps[day * 60 + i])
            lines.append(f"{stamp:%Y-%m-%d %H:%M:%S},{price:.6f}")
    path = Path(temp_dir) / "intraday.csv"
    path.write_text("\n".join(lines) + "\n")
    return path


@pytest.fixture
def daily_price_file(temp_dir):
    """Thirty daily closes without a header."""
    stamps = pd.date_range("2023-03-01", periods=30, freq="D")
    prices = 50.0 * np.exp(np.cumsum(np.random.default_rng(11).normal(0.0, 0.01, 30)))
    path = Path(temp_dir) / "daily.csv"
    path.write_text("".join(f"{s:%Y-%m-%d},{p:.6f}\n" for s, p in zip(stamps, prices)))
    return path


@pytest.fixture
def small_synth_config():
    """Short chi-square regime simulation for fast tests."""
    return SynthConfig(kappa=0.0, xi_std=1.0, total_ticks=20_000, seed=99)


@pytest.fixture(scope="session")
def chi2_output():
    """Long pure chi-square simulation (kappa = 0, four factors, refresh every 50 ticks)."""
    return simulate(SynthConfig(kappa=0.0, n_dof=4, xi_std=1.0, total_ticks=200_000, seed=2024))


@pytest.fixture(scope="session")
def chi2_returns(chi2_output):
    """Normalized returns of the chi-square simulation."""
    return chi2_output.to_return_series()


@pytest.fixture
def synthetic_price_file(temp_dir, small_synth_config):
    """Price file built from a short simulation, ready for the analyze command."""
    series = synthetic_prices(simulate(small_synth_config))
    frame = pd.DataFrame(
        {
            "timestamp": pd.to_datetime(series.timestamps).strftime("%Y-%m-%d %H:%M:%S"),
            "price": series.prices,
            "session": series.session_ids,
        }
    )
    path = Path(temp_dir) / "synthetic.csv"
    frame.to_csv(path, index=False)
    return path


def gaussian_returns(size: int, seed: int = 3) -> ReturnSeries:
    """Unit-variance Gaussian returns."""
    values = np.random.default_rng(seed).standard_normal(size)
    values = (values - values.mean()) / values.std()
    return ReturnSeries(values=values, lag_tau=1)
