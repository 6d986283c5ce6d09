"""
Unit tests for the models module.
"""

import math

import numpy as np
import pandas as pd
import pytest

from superstat.models import (
    AnalysisConfig,
    AnalysisReport,
    BetaHistogram,
    BetaSeries,
    ConfigError,
    CorrelationFunction,
    DecayFit,
    DecayForm,
    DistributionModel,
    KappaScanResult,
    KurtosisRow,
    ModelKind,
    PriceSeries,
    Resolution,
    ReturnSeries,
    SynthConfig,
    WindowScan,
    finite_or_none,
)


def _stamps(count):
    return pd.date_range("2024-01-02 09:30", periods=count, freq="min").to_numpy()


class TestPriceSeries:
    """Test cases for PriceSeries."""

    def test_valid_series(self):
        """Test creating a valid series."""
        series = PriceSeries(_stamps(3), [1.0, 2.0, 3.0], [0, 0, 1])

        assert len(series) == 3
        assert series.resolution is Resolution.INTRADAY
        assert series.session_count == 2
        assert list(series.session_lengths()) == [2, 1]

    def test_non_positive_price(self):
        """Test that zero prices are rejected."""
        with pytest.raises(ValueError, match="strictly positive"):
            PriceSeries(_stamps(2), [1.0, 0.0], [0, 0])

    def test_unsorted_timestamps(self):
        """Test that timestamps must increase."""
        stamps = _stamps(2)[::-1]
        with pytest.raises(ValueError, match="strictly increasing"):
            PriceSeries(stamps, [1.0, 2.0], [0, 0])

    def test_decreasing_sessions(self):
        """Test that session ids may not decrease."""
        with pytest.raises(ValueError, match="non-decreasing"):
            PriceSeries(_stamps(2), [1.0, 2.0], [1, 0])

    def test_with_sessions(self):
        """Test relabeling sessions keeps the data."""
        series = PriceSeries(_stamps(2), [1.0, 2.0], [0, 0], Resolution.DAILY, "x")
        relabeled = series.with_sessions(np.array([0, 1]))

        assert relabeled.session_count == 2
        assert relabeled.resolution is Resolution.DAILY
        assert relabeled.source_label == "x"


class TestReturnSeries:
    """Test cases for ReturnSeries."""

    def test_defaults(self):
        """Test default bookkeeping fields."""
        returns = ReturnSeries(values=[0.5, -0.5])

        assert returns.lag_tau == 1
        assert returns.dropped_count == 0
        assert len(returns) == 2

    def test_invalid_raw_std(self):
        """Test that the raw scale must be positive."""
        with pytest.raises(ValueError, match="raw_std"):
            ReturnSeries(values=[1.0, -1.0], raw_std=0.0)


class TestWindowScan:
    """Test cases for WindowScan."""

    def _row(self, size, values):
        return KurtosisRow(size, list(range(len(values))), values, [10] * len(values), 0.01)

    def test_curve_and_frame(self):
        """Test shift averaging and long-format output."""
        scan = WindowScan(rows=[self._row(4, [2.0, 2.2]), self._row(6, [3.2, 3.4])], crossing=5.0)
        frame = scan.to_frame()

        assert np.allclose(scan.curve, [2.1, 3.3])
        assert list(frame.columns) == ["dt", "shift", "kurtosis"]
        assert len(frame) == 4
        assert scan.optimal_window == 5

    def test_optimal_window_without_crossing(self):
        """Test that no crossing gives no window."""
        assert WindowScan(rows=[self._row(4, [2.0])]).optimal_window is None

    def test_kurtosis_below_one(self):
        """Test that impossible kurtosis values are rejected."""
        with pytest.raises(ValueError, match="below 1"):
            WindowScan(rows=[self._row(4, [0.5])])

    def test_row_spread(self):
        """Test the across-shift spread."""
        assert self._row(4, [2.0]).spread == 0.0
        assert self._row(4, [2.0, 4.0]).spread == pytest.approx(math.sqrt(2.0))


class TestBetaSeries:
    """Test cases for BetaSeries."""

    def test_beta0_is_mean(self):
        """Test that beta0 is the sample mean."""
        assert BetaSeries(betas=[1.0, 2.0, 3.0], window_size=10).beta0 == pytest.approx(2.0)

    def test_non_positive_beta(self):
        """Test that betas must be positive."""
        with pytest.raises(ValueError, match="strictly positive"):
            BetaSeries(betas=[1.0, -2.0], window_size=10)

    def test_empty(self):
        """Test that an empty series is rejected."""
        with pytest.raises(ValueError, match="empty"):
            BetaSeries(betas=[], window_size=10)


class TestModelKind:
    """Test cases for ModelKind."""

    @pytest.mark.parametrize("text,kind", [
        ("chi2", ModelKind.CHI2),
        ("InvChi2", ModelKind.INV_CHI2),
        (" lognormal ", ModelKind.LOGNORMAL),
        ("MIXED", ModelKind.MIXED),
    ])
    def test_parse(self, text, kind):
        """Test case-insensitive parsing."""
        assert ModelKind.parse(text) is kind

    def test_parse_unknown(self):
        """Test that unknown names are rejected."""
        with pytest.raises(ValueError, match="Unknown model kind"):
            ModelKind.parse("F")


class TestDistributionModel:
    """Test cases for DistributionModel."""

    def test_factories_and_means(self):
        """Test the analytic means of each family."""
        assert DistributionModel.chi2(4.0, 2.5).mean == 2.5
        assert DistributionModel.inv_chi2(3.0, 1.5).mean == 1.5
        assert DistributionModel.lognormal_with_mean(0.7, 3.0).mean == pytest.approx(3.0)
        mixed = DistributionModel.mixed_matched(0.3, 4, 0.5, 2.0)
        assert mixed.mean == pytest.approx(2.0)

    def test_mixed_mean_formula(self):
        """Test the mixed mean with unmatched components."""
        model = DistributionModel.mixed(0.25, 3, 0.1, 0.4, 0.5)
        expected = 0.25 * math.exp(0.1 + 0.08) + 0.75 * 3 * 0.5
        assert model.mean == pytest.approx(expected)

    def test_missing_parameter(self):
        """Test that every parameter is required."""
        with pytest.raises(ValueError, match="missing parameters"):
            DistributionModel(ModelKind.CHI2, {"d1": 2.0})

    def test_unexpected_parameter(self):
        """Test that foreign parameters are rejected."""
        with pytest.raises(ValueError, match="unexpected parameters"):
            DistributionModel(ModelKind.LOGNORMAL, {"s": 1.0, "mu": 0.0, "d1": 1.0})

    def test_non_positive_shape(self):
        """Test that shapes must be positive."""
        with pytest.raises(ValueError, match="must be positive"):
            DistributionModel.chi2(0.0, 1.0)

    def test_kappa_range(self):
        """Test the kappa domain."""
        with pytest.raises(ValueError, match="kappa"):
            DistributionModel.mixed(1.5, 4, 0.0, 1.0, 1.0)

    def test_dict_round_trip(self):
        """Test serialization keeps kind, parameters and statistics."""
        model = DistributionModel.chi2(4.0, 2.0)
        model.fit_stats["ks"] = 0.01
        restored = DistributionModel.from_dict(model.to_dict())

        assert restored.kind is ModelKind.CHI2
        assert restored.params == model.params
        assert restored.fit_stats == {"ks": 0.01}


class TestBetaHistogram:
    """Test cases for BetaHistogram."""

    def test_mass_and_frame(self):
        """Test total mass and tabular output."""
        hist = BetaHistogram(bin_edges=[0.0, 1.0, 3.0], densities=[0.5, 0.25], count=10)

        assert hist.total_mass == pytest.approx(1.0)
        assert list(hist.centers) == [0.5, 2.0]
        assert list(hist.to_frame().columns) == ["bin_left", "bin_right", "density"]

    def test_edge_count(self):
        """Test the edge/density length relation."""
        with pytest.raises(ValueError, match="one more edge"):
            BetaHistogram(bin_edges=[0.0, 1.0], densities=[0.5, 0.5], count=2)


class TestCorrelationFunction:
    """Test cases for CorrelationFunction."""

    def test_normalized_and_floor(self):
        """Test normalization and the noise floor."""
        corr = CorrelationFunction(lags=[0, 1, 2], values=[2.0, 1.0, 0.5], sample_size=400)

        assert list(corr.normalized) == [1.0, 0.5, 0.25]
        assert corr.noise_floor == pytest.approx(0.1)
        assert corr.max_lag == 2
        assert list(corr.to_frame().columns) == ["lag", "c", "c_normalized"]

    def test_must_start_at_zero(self):
        """Test that lag 0 is required."""
        with pytest.raises(ValueError, match="lag 0"):
            CorrelationFunction(lags=[1, 2], values=[1.0, 0.5], sample_size=10)


class TestDecayFit:
    """Test cases for DecayFit."""

    def test_parameter_by_form(self):
        """Test the form-specific parameter."""
        exp_fit = DecayFit(DecayForm.EXPONENTIAL, (1, 10), 0.01, rate_gamma=0.2)
        pow_fit = DecayFit("PowerLaw", (1, 10), 0.01, exponent_alpha=0.7)

        assert exp_fit.parameter == 0.2
        assert pow_fit.parameter == 0.7
        assert pow_fit.to_dict()["form"] == "PowerLaw"

    def test_positive_rate_required(self):
        """Test that a decaying fit needs a positive rate."""
        with pytest.raises(ValueError, match="positive rate"):
            DecayFit(DecayForm.EXPONENTIAL, (1, 10), 0.01, rate_gamma=-0.1)

    def test_fit_range_excludes_lag_zero(self):
        """Test that lag 0 cannot enter a fit."""
        with pytest.raises(ValueError, match="lag 0"):
            DecayFit(DecayForm.POWER_LAW, (0, 10), 0.01, exponent_alpha=1.0)


class TestSynthConfig:
    """Test cases for SynthConfig."""

    def test_defaults(self):
        """Test the documented defaults."""
        config = SynthConfig()

        assert config.kappa == 0.5
        assert config.n_dof == 4
        assert config.factor_noise == pytest.approx(math.sqrt(0.1))
        assert config.factor_std == pytest.approx(1.0)
        assert config.total_ticks == 100_000

    def test_burn_in_whole_segments(self):
        """Test burn-in covers ten relaxation times in whole segments."""
        config = SynthConfig(factor_drag=0.05, beta_update_interval=30)

        assert config.burn_in_ticks == 210
        assert config.burn_in_ticks % 30 == 0

    def test_stationary_factor_stds(self):
        """Test that the OU noise scales the factor standard deviations."""
        config = SynthConfig(x0_std=0.5, xi_std=0.25, factor_drag=0.05, factor_noise=2.0 * math.sqrt(0.1))

        assert config.factor_std == pytest.approx(2.0)
        assert config.stationary_x0_std == pytest.approx(1.0)
        assert config.stationary_xi_std == pytest.approx(0.5)

    def test_all_field_errors_reported(self):
        """Test that every invalid field is reported at once."""
        with pytest.raises(ConfigError) as excinfo:
            SynthConfig(kappa=2.0, n_dof=0, total_ticks=-1)

        assert set(excinfo.value.field_errors) == {"kappa", "n_dof", "total_ticks"}

    def test_from_dict_unknown_key(self):
        """Test that unknown keys are rejected."""
        with pytest.raises(ConfigError, match="Unknown") as excinfo:
            SynthConfig.from_dict({"kappa": 0.2, "bogus": 1})

        assert "bogus" in excinfo.value.field_errors

    def test_replace(self):
        """Test copying with changes."""
        config = SynthConfig().replace(kappa=0.1, seed=3)

        assert config.kappa == 0.1
        assert config.seed == 3


class TestKappaScanResult:
    """Test cases for KappaScanResult."""

    def test_trend_text(self):
        """Test the printed trend."""
        result = KappaScanResult(taus=[1, 10], kappas=[0.9, 0.8], ks=[0.01, 0.02], intercept=0.9, slope=-0.0434)

        assert result.trend_text() == "kappa = 0.9000 - 0.0434*log(tau)"
        assert list(result.to_frame().columns) == ["tau", "kappa", "ks"]

    def test_trend_omitted(self):
        """Test the note when the trend is omitted."""
        result = KappaScanResult(taus=[1], kappas=[0.9], ks=[0.01], note="fit omitted")

        assert result.trend_text() == "fit omitted"


class TestAnalysisConfig:
    """Test cases for AnalysisConfig."""

    def test_models_parsed(self):
        """Test that model names are parsed."""
        config = AnalysisConfig(models=["chi2", "mixed"])

        assert config.models == (ModelKind.CHI2, ModelKind.MIXED)

    @pytest.mark.parametrize("changes,field_name", [
        ({"tau": 0}, "tau"),
        ({"window": 3}, "window"),
        ({"kappa_step": 0.0}, "kappa_step"),
        ({"scan_taus": [0, 2]}, "scan_taus"),
    ])
    def test_invalid_values(self, changes, field_name):
        """Test field-level validation."""
        with pytest.raises(ConfigError) as excinfo:
            AnalysisConfig(**changes)

        assert field_name in excinfo.value.field_errors


class TestAnalysisReport:
    """Test cases for AnalysisReport."""

    def test_validate_preferred_in_fits(self):
        """Test that the preferred model must be fitted."""
        report = AnalysisReport(fits={"Chi2": {"params": {}}}, preferred_model="LogNormal")

        with pytest.raises(ValueError, match="not among the fits"):
            report.validate()

    def test_validate_non_finite(self):
        """Test that non-finite numbers are located."""
        report = AnalysisReport(beta_stats={"beta0": float("inf")})

        with pytest.raises(ValueError, match="beta_stats.beta0"):
            report.validate()

    def test_to_dict_sections(self):
        """Test that every section is serialized."""
        report = AnalysisReport()
        report.add_error("decay C_u: none")
        data = report.to_dict()

        assert data["schema_version"] == "1.0"
        assert data["errors"] == ["decay C_u: none"]
        assert "Preferred model" in str(report)


def test_finite_or_none():
    """Test mapping of non-finite numbers."""
    assert finite_or_none(float("nan")) is None
    assert finite_or_none(np.float64(2.5)) == 2.5
    assert finite_or_none(np.int64(3)) == 3
    assert finite_or_none("x") == "x"
