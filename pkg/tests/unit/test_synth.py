"""
Unit tests for the hybrid Langevin simulator.
"""

import json
import math
from pathlib import Path

import numpy as np
import pytest
from scipy import stats

from superstat.distfit import DomainError, frozen_distribution
from superstat.models import ConfigError, KappaScanResult, ReturnSeries, SynthConfig
from superstat.synth import (
    SYNTHETIC_PRICE,
    beta_from_factors,
    beta_law,
    kappa_scan,
    langevin_sigma,
    load_synth_config,
    ou_path,
    ou_step,
    sample_betas,
    scale_schedule_source,
    simulate,
    synthetic_prices,
)


class TestOrnsteinUhlenbeck:
    """Test cases for the exact Ornstein-Uhlenbeck transition."""

    def test_noiseless_step_decays(self):
        """Test that zero noise gives exponential decay."""
        assert ou_step(2.0, 0.5, 0.0, 2.0, 1.7) == pytest.approx(2.0 * math.exp(-1.0))

    def test_step_variance_term(self):
        """Test the noise amplitude of one step from zero."""
        expected = 1.5 * math.sqrt((1.0 - math.exp(-0.4)) / 0.4)

        assert ou_step(0.0, 0.2, 1.5, 1.0, 1.0) == pytest.approx(expected)

    @pytest.mark.parametrize("drag,noise,dt", [(0.0, 1.0, 1.0), (0.1, 1.0, 0.0), (0.1, -1.0, 1.0)])
    def test_domain(self, drag, noise, dt):
        """Test the parameter domain."""
        with pytest.raises(DomainError):
            ou_step(0.0, drag, noise, dt, 0.0)

    def test_noiseless_path(self, rng):
        """Test that a noiseless path is deterministic decay."""
        path = ou_path(3.0, 0.1, 0.0, 1.0, 20, rng)

        assert path.shape == (21,)
        assert np.allclose(path, 3.0 * np.exp(-0.1 * np.arange(21)))

    def test_stationary_moments(self):
        """Test the stationary variance and autocorrelation of many paths."""
        rng = np.random.default_rng(31)
        drag, noise = 0.2, 1.0
        path = ou_path(np.zeros(400), drag, noise, 1.0, 3000, rng)[1000:]

        assert path.shape == (2001, 400)
        assert np.var(path) == pytest.approx(noise ** 2 / (2.0 * drag), rel=0.05)
        lagged = np.mean(path[5:] * path[:-5]) / np.mean(path * path)
        assert lagged == pytest.approx(math.exp(-1.0), abs=0.03)

    def test_autocorrelation_of_long_path(self):
        """Test that one long path decorrelates as exp(-drag * t)."""
        drag = 0.5
        path = ou_path(0.0, drag, 1.0, 1.0, 1_000_000, np.random.default_rng(17))
        variance = np.mean(path * path)

        for lag in range(1, 6):
            observed = np.mean(path[lag:] * path[:-lag]) / variance
            assert observed == pytest.approx(math.exp(-drag * lag), abs=0.01)


class TestFactors:
    """Test cases for the volatility factors."""

    def test_beta_from_factors(self):
        """Test the mixing formula on one factor vector."""
        config = SynthConfig(kappa=0.5, n_dof=2)

        assert beta_from_factors([0.0, 1.0, 2.0], config) == pytest.approx(3.0)

    def test_beta_from_factor_matrix(self):
        """Test that rows are mixed independently."""
        config = SynthConfig(kappa=0.0, n_dof=2)
        beta = beta_from_factors(np.array([[5.0, 1.0, 1.0], [5.0, 0.0, 3.0]]), config)

        assert np.allclose(beta, [2.0, 9.0])

    def test_wrong_factor_count(self):
        """Test that the factor count must be n_dof + 1."""
        with pytest.raises(ValueError, match="Expected 5 factors"):
            beta_from_factors([1.0, 2.0], SynthConfig())

    def test_sample_mean_matches_law(self, rng):
        """Test that sampled betas follow the stationary law."""
        config = SynthConfig(kappa=0.3, xi_std=0.8)

        assert np.mean(sample_betas(config, 200_000, rng)) == pytest.approx(beta_law(config).mean, rel=0.01)

    @pytest.mark.parametrize("kappa", [0.0, 1.0])
    def test_endpoint_laws(self, kappa):
        """Test that stationary draws at kappa = 0 and 1 follow the scaled chi-square and lognormal laws."""
        config = SynthConfig(kappa=kappa)
        x = sample_betas(config, 100_000, np.random.default_rng(41))

        assert stats.kstest(x, frozen_distribution(beta_law(config)).cdf).pvalue > 0.01

    def test_langevin_sigma(self):
        """Test the noise amplitude for a stationary variance of 1/beta."""
        assert langevin_sigma(2.0, 2.0) == pytest.approx(math.sqrt(2.0))
        assert np.allclose(langevin_sigma(np.array([1.0, 4.0]), 0.5), [1.0, 0.5])

    def test_law_follows_factor_noise(self):
        """Test that the stationary law widens with the OU noise."""
        law = beta_law(SynthConfig(kappa=0.2, x0_std=0.5, xi_std=0.5, factor_noise=2.0 * math.sqrt(0.1)))

        assert law.params["x0_s"] == pytest.approx(1.0)
        assert law.params["chi_scale"] == pytest.approx(1.0)


class TestSimulate:
    """Test cases for simulate."""

    def test_deterministic(self, small_synth_config):
        """Test that equal configurations give equal output."""
        first = simulate(small_synth_config)
        second = simulate(small_synth_config)

        assert np.array_equal(first.u_series, second.u_series)
        assert np.array_equal(first.beta_truth, second.beta_truth)

    def test_seed_changes_output(self, small_synth_config):
        """Test that a different seed gives a different path."""
        other = simulate(small_synth_config.replace(seed=100))

        assert not np.array_equal(simulate(small_synth_config).u_series, other.u_series)

    def test_length_and_scale(self, small_synth_config):
        """Test the recorded length and the unit rescaling."""
        output = simulate(small_synth_config)

        assert len(output) == 20_000
        assert np.std(output.u_series) == pytest.approx(1.0)
        assert output.raw_std > 0
        assert output.model_truth is small_synth_config

    def test_beta_piecewise_constant(self, small_synth_config):
        """Test that beta changes only at refresh boundaries."""
        beta = simulate(small_synth_config).beta_truth
        changes = np.flatnonzero(np.diff(beta)) + 1

        assert changes.size > 0
        assert np.all(changes % small_synth_config.beta_update_interval == 0)

    def test_conditional_variance(self, small_synth_config):
        """Test that returns have variance 1/beta given beta."""
        output = simulate(small_synth_config, rescale=False)

        assert output.raw_std == 1.0
        assert np.mean(output.u_series ** 2 * output.beta_truth) == pytest.approx(1.0, abs=0.05)

    @pytest.mark.parametrize("scale", [1.0, 2.0])
    def test_factor_noise_sets_volatility_spread(self, scale):
        """Test that the OU noise amplitude sets the spread of log(beta) at kappa = 1."""
        config = SynthConfig(
            kappa=1.0, x0_std=0.5, factor_noise=scale * math.sqrt(0.1), total_ticks=200_000, seed=8
        )
        output = simulate(config, rescale=False)
        log_beta = np.log(output.beta_truth[:: config.beta_update_interval])

        assert np.std(log_beta) == pytest.approx(0.5 * scale, rel=0.1)
        assert np.mean(log_beta) == pytest.approx(config.x0_mean, abs=0.1 * scale)

    def test_chi2_marginal_is_student_t(self, chi2_output):
        """Test that kappa = 0 gives Student-t returns with n_dof degrees of freedom."""
        config = chi2_output.model_truth
        beta0 = config.n_dof * config.xi_std ** 2
        u = chi2_output.u_series[:: config.beta_update_interval] * chi2_output.raw_std
        result = stats.kstest(u, stats.t(df=config.n_dof, scale=1.0 / math.sqrt(beta0)).cdf)

        assert result.statistic < 0.03

    def test_synthetic_prices(self, small_synth_config):
        """Test the price path built from returns."""
        output = simulate(small_synth_config)
        series = synthetic_prices(output)
        steps = np.diff(series.timestamps).astype("timedelta64[s]").astype(int)

        assert len(series) == len(output) + 1
        assert series.prices[0] == SYNTHETIC_PRICE
        assert np.allclose(np.diff(np.log(series.prices)), 0.01 * output.u_series)
        assert np.all(steps == 60)
        assert series.session_count == 1


class TestKappaScan:
    """Test cases for kappa_scan."""

    def test_schedule_source(self, small_synth_config):
        """Test that the schedule sets kappa and offsets the seed by tau."""
        source = scale_schedule_source(small_synth_config, lambda tau: tau / 4.0)
        returns = source(3)
        expected = simulate(small_synth_config.replace(kappa=0.75, seed=small_synth_config.seed + 3))

        assert isinstance(returns, ReturnSeries)
        assert returns.lag_tau == 3
        assert np.array_equal(returns.values, expected.u_series)

    def test_single_tau_omits_trend(self, small_synth_config):
        """Test that one lag gives a note instead of a trend."""
        source = scale_schedule_source(small_synth_config, lambda tau: 0.5)
        result = kappa_scan(source, [1], window=50, step=0.25)

        assert isinstance(result, KappaScanResult)
        assert result.slope is None
        assert result.note == "fit omitted: fewer than two tau values"
        assert result.windows == [50]
        assert 0.0 <= result.kappas[0] <= 1.0

    def test_trend_over_prices(self, small_synth_config):
        """Test the logarithmic trend over lags of a price series."""
        prices = synthetic_prices(simulate(small_synth_config))
        calls = []
        result = kappa_scan(prices, [1, 2], window=50, step=0.25, progress=lambda *a: calls.append(a))

        assert result.taus == [1, 2]
        assert result.slope is not None
        assert result.intercept == pytest.approx(result.kappas[0])
        assert calls[-1] == (2, 2, "tau=2")

    @pytest.mark.parametrize("taus", [[], [2, 1], [0, 1]])
    def test_invalid_taus(self, taus):
        """Test the lag validation."""
        with pytest.raises(ValueError, match="tau"):
            kappa_scan(SynthConfig(total_ticks=100), taus)


class TestLoadSynthConfig:
    """Test cases for load_synth_config."""

    def test_partial_config(self, temp_dir):
        """Test that missing keys take their defaults."""
        path = Path(temp_dir) / "synth.json"
        path.write_text(json.dumps({"kappa": 0.2, "seed": 7}))
        config = load_synth_config(path)

        assert config.kappa == 0.2
        assert config.seed == 7
        assert config.n_dof == SynthConfig().n_dof

    def test_unknown_key(self, temp_dir):
        """Test that unknown keys are rejected."""
        path = Path(temp_dir) / "synth.json"
        path.write_text(json.dumps({"kapa": 0.2}))

        with pytest.raises(ConfigError) as excinfo:
            load_synth_config(path)

        assert "kapa" in excinfo.value.field_errors

    def test_invalid_value(self, temp_dir):
        """Test that invalid values name their field."""
        path = Path(temp_dir) / "synth.json"
        path.write_text(json.dumps({"beta_update_interval": 1}))

        with pytest.raises(ConfigError) as excinfo:
            load_synth_config(path)

        assert "beta_update_interval" in excinfo.value.field_errors

    def test_missing_file(self, temp_dir):
        """Test that a missing file raises FileNotFoundError."""
        with pytest.raises(FileNotFoundError):
            load_synth_config(Path(temp_dir) / "absent.json")
