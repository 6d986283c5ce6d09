"""
Unit tests for integrated return densities.
"""

import math
from unittest.mock import patch

import numpy as np
import pytest
from scipy import integrate, stats

from superstat.distfit import DomainError, TooFewSamples, draw, inverse_mean
from superstat.marginal import (
    MIXED_QUADRATURE_TOLERANCE,
    QUADRATURE_TOLERANCE,
    QuadratureFailure,
    _PointIntegrator,
    amended_fit,
    gaussian_conditional,
    integrate_marginal,
    marginal_log_likelihood,
    marginal_second_moment,
    marginal_values,
    point_tolerance,
    student_t_marginal,
)
from superstat.models import DistributionModel, ModelKind, ReturnSeries


GRID = np.linspace(-8.0, 8.0, 401)


def _returns_from(model, size, seed):
    rng = np.random.default_rng(seed)
    betas = draw(model, size, rng)
    return rng.standard_normal(size) / np.sqrt(betas)


class TestGaussianConditional:
    """Test cases for gaussian_conditional."""

    def test_normalized(self):
        """Test that the local Gaussian integrates to one."""
        value, _ = integrate.quad(lambda u: gaussian_conditional(u, 2.5), -np.inf, np.inf)

        assert value == pytest.approx(1.0)

    def test_matches_normal(self):
        """Test against the normal density with variance 1/beta."""
        u = np.array([-1.0, 0.0, 0.7])

        assert np.allclose(gaussian_conditional(u, 4.0), stats.norm.pdf(u, scale=0.5))

    def test_domain(self):
        """Test that beta must be positive."""
        with pytest.raises(DomainError):
            gaussian_conditional(1.0, 0.0)


class TestIntegrateMarginal:
    """Test cases for integrate_marginal."""

    def test_chi2_is_student_t(self):
        """Test that a Chi2 law integrates to the Student-t density."""
        model = DistributionModel.chi2(5.0, 1.7)
        density = integrate_marginal(model, GRID)

        assert np.allclose(density.values, student_t_marginal(model, GRID), rtol=1e-6, atol=0)

    @pytest.mark.parametrize("model", [
        DistributionModel.chi2(4.0, 2.0),
        DistributionModel.inv_chi2(5.0, 1.5),
        DistributionModel.lognormal_with_mean(0.5, 1.0),
        DistributionModel.mixed_matched(0.5, 4, 0.5, 1.0),
    ], ids=lambda m: m.kind.value)
    def test_normalized_and_symmetric(self, model):
        """Test unit mass and p(u) = p(-u)."""
        density = integrate_marginal(model, GRID)
        half = np.array([0.25, 1.0, 2.5])
        mirrored = integrate_marginal(model, np.concatenate((-half[::-1], half))).values

        assert density.normalization == pytest.approx(1.0, abs=1e-4)
        assert np.array_equal(mirrored, mirrored[::-1])
        assert density.quadrature_tol <= 1e-5

    @pytest.mark.parametrize("model", [
        DistributionModel.chi2(4.0, 2.0),
        DistributionModel.inv_chi2(5.0, 1.5),
        DistributionModel.lognormal_with_mean(0.5, 1.0),
        DistributionModel.mixed_matched(0.5, 4, 0.5, 1.0),
    ], ids=lambda m: m.kind.value)
    def test_tail_decreasing(self, model):
        """Test that p(u) falls monotonically away from the origin."""
        half = GRID[GRID >= 0]
        values = integrate_marginal(model, half).values

        assert np.all(np.diff(values) < 0)

    @pytest.mark.parametrize("model", [
        DistributionModel.chi2(4.0, 2.0),
        DistributionModel.inv_chi2(5.0, 1.5),
        DistributionModel.lognormal_with_mean(0.5, 1.0),
    ], ids=lambda m: m.kind.value)
    def test_closed_form_laws_meet_tight_tolerance(self, model):
        """Test that every point of a closed-form law is accurate to 1e-8."""
        density = integrate_marginal(model, GRID)

        assert density.quadrature_tol <= QUADRATURE_TOLERANCE == 1e-8

    def test_point_tolerance(self):
        """Test the accepted per-point error of each law."""
        assert point_tolerance(DistributionModel.chi2(4.0, 1.0)) == QUADRATURE_TOLERANCE
        assert point_tolerance(DistributionModel.mixed_matched(0.0, 4, 0.5, 1.0)) == QUADRATURE_TOLERANCE
        assert point_tolerance(DistributionModel.mixed_matched(0.5, 4, 0.5, 1.0)) == MIXED_QUADRATURE_TOLERANCE

    def test_error_between_tolerances(self):
        """Test that an error of 1e-7 fails a closed-form law and passes an interior Mixed law."""
        with patch.object(_PointIntegrator, "density", return_value=(1.0, 1e-7)):
            with pytest.raises(QuadratureFailure) as excinfo:
                integrate_marginal(DistributionModel.chi2(4.0, 1.0), [0.0, 1.0])
            density = integrate_marginal(DistributionModel.mixed_matched(0.5, 4, 0.5, 1.0), [0.0, 1.0])

        assert excinfo.value.achieved == pytest.approx(1e-7)
        assert density.quadrature_tol == pytest.approx(1e-7)

    def test_frame(self):
        """Test the tabular output."""
        density = integrate_marginal(DistributionModel.chi2(4.0, 1.0), [0.0, 1.0])

        assert list(density.to_frame().columns) == ["u", "p"]
        assert density.values[0] > density.values[1]

    def test_invalid_grid(self):
        """Test that the grid must be finite and non-empty."""
        with pytest.raises(ValueError, match="u grid"):
            integrate_marginal(DistributionModel.chi2(4.0, 1.0), [])
        with pytest.raises(ValueError, match="u grid"):
            integrate_marginal(DistributionModel.chi2(4.0, 1.0), [0.0, np.inf])

    def test_quadrature_failure(self):
        """Test that a point missing the tolerance is reported."""
        with patch.object(_PointIntegrator, "density", return_value=(1.0, 0.1)):
            with pytest.raises(QuadratureFailure) as excinfo:
                integrate_marginal(DistributionModel.chi2(4.0, 1.0), [0.0, 1.0])

        assert excinfo.value.achieved == pytest.approx(0.1)

    def test_student_t_only_for_chi2(self):
        """Test that the closed form is limited to Chi2."""
        with pytest.raises(ValueError, match="Chi2"):
            student_t_marginal(DistributionModel.lognormal(0.5, 0.0), 1.0)


class TestMoments:
    """Test cases for the variance of the return density."""

    @pytest.mark.parametrize("model", [
        DistributionModel.chi2(6.0, 1.0),
        DistributionModel.lognormal_with_mean(0.4, 1.0),
    ], ids=lambda m: m.kind.value)
    def test_second_moment_is_inverse_mean(self, model):
        """Test that <u^2> equals E[1/beta]."""
        assert marginal_second_moment(model) == pytest.approx(inverse_mean(model), rel=1e-5)


class TestMarginalValues:
    """Test cases for the fixed-rule evaluation."""

    @pytest.mark.parametrize("model", [
        DistributionModel.inv_chi2(5.0, 1.5),
        DistributionModel.lognormal_with_mean(0.5, 1.0),
        DistributionModel.mixed_matched(0.3, 4, 0.6, 1.0),
    ], ids=lambda m: m.kind.value)
    def test_agrees_with_adaptive(self, model):
        """Test the fixed rule against adaptive quadrature."""
        u = np.array([0.0, 0.5, 1.5, 3.0])

        assert np.allclose(marginal_values(model, u), integrate_marginal(model, u).values, rtol=1e-3)

    def test_chi2_log_likelihood(self, rng):
        """Test the Student-t shortcut for Chi2 likelihoods."""
        model = DistributionModel.chi2(5.0, 1.0)
        u = rng.standard_t(5, 200)
        expected = np.sum(stats.t.logpdf(u, df=5.0))

        assert marginal_log_likelihood(model, ReturnSeries(values=u)) == pytest.approx(expected)


class TestAmendedFit:
    """Test cases for amended_fit."""

    def test_chi2_from_student_t(self):
        """Test that Student-t returns give back the Chi2 law."""
        u = 0.8 * np.random.default_rng(17).standard_t(5.0, 20_000)
        model = amended_fit(u, "chi2")

        assert model.kind is ModelKind.CHI2
        assert model.params["d1"] == pytest.approx(5.0, rel=0.2)
        assert model.params["beta0"] == pytest.approx(1.0 / 0.64, rel=0.05)
        assert "amended_log_likelihood" in model.fit_stats

    def test_lognormal_with_reference(self):
        """Test the lognormal recovery and the comparison against a direct fit."""
        truth = DistributionModel.lognormal_with_mean(0.6, 1.0)
        u = _returns_from(truth, 20_000, seed=23)
        reference = DistributionModel.lognormal_with_mean(0.4, 1.0)

        model = amended_fit(u, ModelKind.LOGNORMAL, reference=reference)

        assert model.params["s"] == pytest.approx(0.6, rel=0.3)
        assert set(model.fit_stats["divergence"]) == {"s", "mu"}
        assert model.fit_stats["log_likelihood_gain"] == pytest.approx(
            model.fit_stats["amended_log_likelihood"] - model.fit_stats["direct_log_likelihood"]
        )
        assert model.fit_stats["log_likelihood_gain"] >= 0.0

    def test_too_few_returns(self):
        """Test the minimum sample count."""
        with pytest.raises(TooFewSamples):
            amended_fit(np.random.default_rng(1).standard_normal(500), "lognormal")

    def test_second_moment_finite_for_lognormal(self):
        """Test that the lognormal return variance is finite."""
        assert math.isfinite(marginal_second_moment(DistributionModel.lognormal(0.3, 0.0)))
