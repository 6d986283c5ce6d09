"""
Integrated return densities.

The return density is the average of local Gaussians with inverse variance
beta weighted by the volatility law f(beta):

    p(u) = integral of sqrt(beta / 2 pi) exp(-beta u^2 / 2) f(beta) dbeta

Integrals run in log(beta) so that laws with most of their mass near zero
and heavy right tails stay well conditioned.
"""

import logging
import math
import warnings
from typing import Callable, Dict, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import integrate, optimize, special, stats

from . import distfit
from .distfit import DomainError, OptimizationFailure, TooFewSamples
from .models import DistributionModel, MarginalDensity, ModelKind, ReturnSeries


logger = logging.getLogger(__name__)

MIN_AMENDED_SAMPLES = 1000
QUADRATURE_TOLERANCE = 1e-8
# interior Mixed densities are spline interpolated to about 1e-4
MIXED_QUADRATURE_TOLERANCE = 1e-5
_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


class MarginalError(Exception):
    """Base exception for marginal density errors."""
    pass


class QuadratureFailure(MarginalError):
    """Exception raised when quadrature does not reach its tolerance."""

    def __init__(self, message: str, worst_point: float, achieved: float):
        super().__init__(message)
        self.worst_point = worst_point
        self.achieved = achieved


def gaussian_conditional(u: Union[float, np.ndarray], beta: Union[float, np.ndarray]):
    """
    Local Gaussian density sqrt(beta / 2 pi) * exp(-beta * u^2 / 2).

    Raises:
        DomainError: If beta is not strictly positive
    """
    if not np.all(np.asarray(beta) > 0):
        raise DomainError("beta must be strictly positive")
    return np.sqrt(beta / (2.0 * np.pi)) * np.exp(-0.5 * beta * np.square(u))


def student_t_marginal(model: DistributionModel, u: Union[float, np.ndarray]):
    """Closed-form return density of a Chi2 law: Student-t, d1 dof, scale 1/sqrt(beta0)."""
    if model.kind is not ModelKind.CHI2:
        raise ValueError(f"Closed form exists only for Chi2 models, got {model.kind.value}")
    return stats.t.pdf(u, df=model["d1"], scale=1.0 / math.sqrt(model["beta0"]))


def _log_pdf_function(model: DistributionModel) -> Callable[[np.ndarray], np.ndarray]:
    if model.kind is not ModelKind.MIXED or model["kappa"] in (0.0, 1.0):
        return distfit.frozen_distribution(model).logpdf
    grid = distfit._mixed_grid(*distfit._mixed_key(model))

    def log_pdf(beta: np.ndarray) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log(grid.pdf(np.atleast_1d(beta)))

    return log_pdf


def _log_range(model: DistributionModel, tail: float = 1e-12) -> Tuple[float, float]:
    lo, hi = distfit.quantile(model, np.array([tail, 1.0 - tail]))
    return math.log(max(float(lo), 1e-300)), math.log(float(hi))


class _PointIntegrator:
    """Adaptive quadrature of beta-weighted quantities over log(beta)."""

    def __init__(self, model: DistributionModel, epsrel: float = 1e-10):
        self.model = model
        self.log_pdf = _log_pdf_function(model)
        self.y_lo, self.y_hi = _log_range(model)
        self.y_median = math.log(distfit.quantile(model, 0.5))
        self.epsrel = epsrel

    def _quad(self, integrand: Callable[[float], float], extra_point: Optional[float]) -> Tuple[float, float]:
        points = [self.y_median]
        if extra_point is not None and self.y_lo < extra_point < self.y_hi:
            points.append(extra_point)
        points = sorted(p for p in set(points) if self.y_lo < p < self.y_hi)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            value, error = integrate.quad(
                integrand,
                self.y_lo,
                self.y_hi,
                points=points or None,
                epsabs=0.0,
                epsrel=self.epsrel,
                limit=400,
            )
        return value, error

    def density(self, u: float) -> Tuple[float, float]:
        """p(u) and its estimated absolute error."""
        u2 = u * u

        def integrand(y: float) -> float:
            beta = math.exp(y)
            log_f = float(self.log_pdf(np.array([beta]))[0])
            return math.exp(1.5 * y - _LOG_SQRT_2PI - 0.5 * beta * u2 + log_f)

        peak = -math.log(u2) if u2 > 0 else None
        return self._quad(integrand, peak)

    def tail(self, threshold: float) -> float:
        """P(U > threshold) = E[erfc(threshold * sqrt(beta / 2)) / 2]."""

        def integrand(y: float) -> float:
            beta = math.exp(y)
            log_f = float(self.log_pdf(np.array([beta]))[0])
            return 0.5 * special.erfc(threshold * math.sqrt(0.5 * beta)) * math.exp(y + log_f)

        peak = -2.0 * math.log(abs(threshold)) if threshold != 0 else None
        return self._quad(integrand, peak)[0]


def point_tolerance(model: DistributionModel) -> float:
    """Largest relative quadrature error accepted at a grid point."""
    if model.kind is ModelKind.MIXED and 0.0 < model["kappa"] < 1.0:
        return MIXED_QUADRATURE_TOLERANCE
    return QUADRATURE_TOLERANCE


def integrate_marginal(
    model: DistributionModel, u_grid: Sequence[float], epsrel: float = 1e-10
) -> MarginalDensity:
    """
    Integrate the return density on a grid.

    The density is computed once per distinct |u| so that p(u) = p(-u)
    holds exactly. Probability beyond the ends of the grid is added
    analytically from the Gaussian tails.

    Args:
        model: Volatility law
        u_grid: Finite grid of return values
        epsrel: Requested relative tolerance per point

    Returns:
        MarginalDensity with the achieved relative tolerance

    Raises:
        QuadratureFailure: If a point misses a relative accuracy of 1e-8 (1e-5
            for a Mixed law with 0 < kappa < 1)
    """
    grid = np.asarray(u_grid, dtype=float)
    if grid.size == 0 or not np.all(np.isfinite(grid)):
        raise ValueError("u grid must be non-empty and finite")

    integrator = _PointIntegrator(model, epsrel)
    magnitudes, inverse = np.unique(np.abs(grid), return_inverse=True)
    values = np.empty(magnitudes.shape[0])
    worst_point, worst_tol = 0.0, 0.0
    for i, magnitude in enumerate(magnitudes):
        value, error = integrator.density(float(magnitude))
        values[i] = value
        achieved = error / value if value > 0 else math.inf
        if achieved > worst_tol:
            worst_point, worst_tol = float(magnitude), achieved

    if worst_tol > point_tolerance(model):
        raise QuadratureFailure(
            f"Quadrature reached relative error {worst_tol:.2e} at u = {worst_point}",
            worst_point=worst_point,
            achieved=worst_tol,
        )

    tail_mass = integrator.tail(float(grid.max())) + integrator.tail(float(-grid.min()))
    logger.debug(f"Integrated {model.kind.value} marginal on {grid.size} points, tol {worst_tol:.1e}")
    return MarginalDensity(
        model=model,
        grid=grid,
        values=values[inverse.reshape(grid.shape)],
        quadrature_tol=float(max(worst_tol, epsrel)),
        tail_mass=float(tail_mass),
    )


def marginal_second_moment(model: DistributionModel) -> float:
    """
    Second moment of the return density, computed from p(u) by quadrature.

    Equals E[1/beta] under the volatility law whenever that is finite.
    """
    integrator = _PointIntegrator(model, epsrel=1e-9)

    def integrand(u: float) -> float:
        return 2.0 * u * u * integrator.density(u)[0]

    scale = math.sqrt(distfit.inverse_mean(model)) if math.isfinite(distfit.inverse_mean(model)) else 1.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        head, _ = integrate.quad(integrand, 0.0, 10.0 * scale, limit=200, epsrel=1e-8)
        tail, _ = integrate.quad(integrand, 10.0 * scale, math.inf, limit=200, epsrel=1e-8)
    return head + tail


# Fixed composite Gauss-Legendre rule on [0, 1] for vectorized likelihood work.
_NODES, _WEIGHTS = np.polynomial.legendre.leggauss(10)
_PANELS = 48
_EDGES = np.linspace(0.0, 1.0, _PANELS + 1)
_UNIT_Y = (0.5 * (_EDGES[1:] + _EDGES[:-1])[:, None] + 0.5 * np.diff(_EDGES)[:, None] * _NODES).ravel()
_UNIT_W = (0.5 * np.diff(_EDGES)[:, None] * _WEIGHTS).ravel()


def marginal_values(model: DistributionModel, u: np.ndarray) -> np.ndarray:
    """
    Return density at many points with a fixed quadrature rule.

    Faster and less accurate than integrate_marginal; used for likelihoods.
    """
    u = np.abs(np.asarray(u, dtype=float))
    if model.kind is ModelKind.CHI2:
        return student_t_marginal(model, u)
    y_lo, y_hi = _log_range(model)
    y = y_lo + (y_hi - y_lo) * _UNIT_Y
    w = (y_hi - y_lo) * _UNIT_W
    beta = np.exp(y)
    log_f = _log_pdf_function(model)(beta)
    log_terms = 1.5 * y[None, :] - _LOG_SQRT_2PI - 0.5 * beta[None, :] * (u * u)[:, None] + log_f[None, :]
    return np.exp(log_terms) @ w


def marginal_log_likelihood(model: DistributionModel, u: Union[ReturnSeries, np.ndarray]) -> float:
    """Log-likelihood of returns under the integrated density of a volatility law."""
    x = np.abs(u.values if isinstance(u, ReturnSeries) else np.asarray(u, dtype=float))
    if model.kind is ModelKind.CHI2:
        return float(np.sum(stats.t.logpdf(x, df=model["d1"], scale=1.0 / math.sqrt(model["beta0"]))))
    grid = _abs_grid(float(x.max()))
    with np.errstate(divide="ignore"):
        log_p = np.log(marginal_values(model, grid))
    return float(np.sum(np.interp(x, grid, log_p)))


def _abs_grid(u_max: float, points: int = 120) -> np.ndarray:
    """sinh-spaced grid on [0, u_max], dense near zero."""
    return np.sinh(np.linspace(0.0, math.asinh(1.01 * u_max + 1e-12), points))


def _amended_parameters(kind: ModelKind, v: np.ndarray, n_dof: int) -> DistributionModel:
    if kind is ModelKind.INV_CHI2:
        return DistributionModel.inv_chi2(math.exp(v[0]), math.exp(v[1]))
    if kind is ModelKind.LOGNORMAL:
        return DistributionModel.lognormal(math.exp(v[0]), float(v[1]))
    return DistributionModel.mixed_matched(float(special.expit(v[0])), n_dof, math.exp(v[1]), math.exp(v[2]))


def _amended_start(kind: ModelKind, reference: Optional[DistributionModel]) -> np.ndarray:
    if reference is not None and reference.kind is kind:
        p = reference.params
        if kind is ModelKind.INV_CHI2:
            return np.array([math.log(p["d2"]), math.log(p["beta0"])])
        if kind is ModelKind.LOGNORMAL:
            return np.array([math.log(p["s"]), p["mu"]])
        kappa = min(max(p["kappa"], 0.02), 0.98)
        beta0 = reference.mean
        return np.array([special.logit(kappa), math.log(p["x0_s"]), math.log(beta0)])
    if kind is ModelKind.INV_CHI2:
        return np.array([math.log(4.0), 0.0])
    if kind is ModelKind.LOGNORMAL:
        return np.array([math.log(0.5), 0.125])
    return np.array([0.0, math.log(0.5), 0.0])


def amended_fit(
    u: Union[ReturnSeries, np.ndarray],
    kind: Union[str, ModelKind],
    reference: Optional[DistributionModel] = None,
    n_dof: int = distfit.DEFAULT_N_DOF,
) -> DistributionModel:
    """
    Fit the volatility-law parameters to the returns themselves.

    The parameters maximize the likelihood of the observed returns under the
    integrated density, without reference to the extracted betas.

    Args:
        u: Normalized returns
        kind: Model kind
        reference: Fit of the same kind to the betas; when given, the result
            reports the relative divergence of each parameter from it
        n_dof: Chi-square degrees of freedom for Mixed models

    Returns:
        Model whose ``fit_stats`` holds the amended log-likelihood and,
        with a reference, the direct log-likelihood, the gain and the divergence

    Raises:
        TooFewSamples: With fewer than 1000 returns
        OptimizationFailure: If the likelihood optimization fails
    """
    kind = ModelKind.parse(kind)
    x = np.asarray(u.values if isinstance(u, ReturnSeries) else u, dtype=float)
    if x.shape[0] < MIN_AMENDED_SAMPLES:
        raise TooFewSamples(
            f"Need at least {MIN_AMENDED_SAMPLES} returns for an amended fit, got {x.shape[0]}",
            count=int(x.shape[0]),
            required=MIN_AMENDED_SAMPLES,
        )

    if kind is ModelKind.CHI2:
        df, _, scale = stats.t.fit(x, floc=0)
        model = DistributionModel.chi2(df, 1.0 / (scale * scale))
    else:
        def objective(v: np.ndarray) -> float:
            try:
                candidate = _amended_parameters(kind, v, n_dof)
                value = -marginal_log_likelihood(candidate, x)
            except (ValueError, FloatingPointError):
                return 1e300
            return value if np.isfinite(value) else 1e300

        result = optimize.minimize(
            objective,
            _amended_start(kind, reference),
            method="Nelder-Mead",
            options={"xatol": 1e-4, "fatol": 1e-6, "maxiter": 2000},
        )
        if not result.success or result.fun >= 1e300:
            raise OptimizationFailure(
                f"Amended {kind.value} fit did not converge: {result.message}",
                {"message": str(result.message), "fun": float(result.fun), "nit": int(result.nit)},
            )
        model = _amended_parameters(kind, result.x, n_dof)

    loglik = marginal_log_likelihood(model, x)
    if not math.isfinite(loglik):
        raise OptimizationFailure(f"Non-finite likelihood for amended {kind.value} fit", dict(model.params))
    model.fit_stats = {"amended_log_likelihood": loglik, "n_samples": int(x.shape[0])}

    if reference is not None and reference.kind is kind:
        direct = marginal_log_likelihood(reference, x)
        model.fit_stats["direct_log_likelihood"] = direct
        model.fit_stats["log_likelihood_gain"] = loglik - direct
        model.fit_stats["divergence"] = _divergence(model, reference)

    logger.info(f"Amended {kind.value} fit: " + ", ".join(f"{k} = {v:.4g}" for k, v in model.params.items()))
    return model


def _divergence(amended: DistributionModel, direct: DistributionModel) -> Dict[str, float]:
    result = {}
    for name, value in direct.params.items():
        if name == "n_dof":
            continue
        scale = abs(value) if value != 0 else 1.0
        result[name] = abs(amended.params[name] - value) / scale
    return result
