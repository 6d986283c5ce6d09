"""
Volatility densities and their fitting.

Four candidate laws for the volatility parameter beta are supported:

* ``Chi2``: gamma law with shape d1/2 and mean beta0
* ``InvChi2``: inverse-gamma law with shape d2/2 + 1 and mean beta0
* ``LogNormal``: lognormal law with log-mean mu and log-std s
* ``Mixed``: law of ``kappa*exp(X0) + (1 - kappa)*(X1^2 + ... + Xn^2)``

The mixed law has no closed form. It is evaluated as the convolution of its
lognormal and scaled chi-square parts by composite Gauss-Legendre quadrature
in a variable that removes the chi-square endpoint singularity. Fits go
through a cached log-spaced grid with spline interpolation.
"""

import logging
import math
from functools import lru_cache
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import integrate, optimize, stats
from scipy.interpolate import CubicSpline, PchipInterpolator

from .models import BetaHistogram, BetaSeries, DistributionModel, ModelKind


logger = logging.getLogger(__name__)

ArrayLike = Union[float, Sequence[float], np.ndarray]
ProgressCallback = Callable[[int, int, str], None]

MIN_FIT_SAMPLES = 30
MIN_KAPPA_SAMPLES = 100
DEFAULT_N_DOF = 4
MIXED_GRID_POINTS = 512
KAPPA_CRITERIA = ("likelihood", "ks")


class FitError(Exception):
    """Base exception for distribution fitting errors."""
    pass


class DomainError(FitError):
    """Exception raised for arguments outside a function's domain."""
    pass


class TooFewSamples(FitError):
    """Exception raised when a fit has too few samples."""

    def __init__(self, message: str, count: int = 0, required: int = 0):
        super().__init__(message)
        self.count = count
        self.required = required


class OptimizationFailure(FitError):
    """Exception raised when a likelihood optimization does not produce a usable optimum."""

    def __init__(self, message: str, diagnostics: Optional[Dict[str, object]] = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


# Composite Gauss-Legendre rule on [0, 1]: geometric panels near 0, uniform above.
def _unit_rule(order: int = 16) -> Tuple[np.ndarray, np.ndarray]:
    nodes, weights = np.polynomial.legendre.leggauss(order)
    edges = np.concatenate(([0.0], 1e-4 * 2.0 ** np.arange(9), np.linspace(0.05, 1.0, 20)))
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    return (
        (mid[:, None] + half[:, None] * nodes[None, :]).ravel(),
        (half[:, None] * weights[None, :]).ravel(),
    )


_UNIT_NODES, _UNIT_WEIGHTS = _unit_rule()


class _MixedLaw:
    """Exact evaluation of the mixed law for 0 < kappa < 1."""

    GAUSSIAN_SPAN = 10.0
    TAIL = 1e-12

    def __init__(self, kappa: float, n_dof: float, x0_mu: float, x0_s: float, chi_scale: float):
        self.log_mean_a = math.log(kappa) + x0_mu
        self.s = x0_s
        self.part_a = stats.lognorm(s=x0_s, scale=math.exp(self.log_mean_a))
        self.part_b = stats.gamma(a=0.5 * n_dof, scale=2.0 * (1.0 - kappa) * chi_scale)
        self.b_lo = float(self.part_b.ppf(self.TAIL))
        self.b_hi = float(self.part_b.isf(self.TAIL))

    def _limits(self, beta: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        # z runs over ln(a) = ln(beta) - z^2 with a the lognormal part
        log_beta = np.log(beta)
        centre = log_beta - self.log_mean_a
        span = self.GAUSSIAN_SPAN * self.s
        z_lo = np.sqrt(np.maximum(centre - span, 0.0))
        z_hi = np.sqrt(np.maximum(centre + span, 0.0))
        with np.errstate(divide="ignore", invalid="ignore"):
            zb_lo = np.where(self.b_lo < beta, np.sqrt(-np.log1p(-self.b_lo / beta)), np.inf)
            zb_hi = np.where(self.b_hi < beta, np.sqrt(-np.log1p(-self.b_hi / beta)), np.inf)
        return np.maximum(z_lo, zb_lo), np.minimum(z_hi, zb_hi)

    def _integrate(self, beta: np.ndarray, cumulative: bool) -> np.ndarray:
        lower, upper = self._limits(beta)
        active = upper > lower
        result = np.zeros(beta.shape[0])
        if active.any():
            b = beta[active][:, None]
            width = (upper - lower)[active][:, None]
            z = lower[active][:, None] + width * _UNIT_NODES[None, :]
            weights = width * _UNIT_WEIGHTS[None, :]
            z2 = z * z
            log_gauss = stats.norm.logpdf(np.log(b) - z2, self.log_mean_a, self.s) + np.log(2.0 * z)
            rest = -b * np.expm1(-z2)
            if cumulative:
                integrand = np.exp(log_gauss) * self.part_b.cdf(rest)
            else:
                integrand = np.exp(log_gauss + self.part_b.logpdf(rest))
            result[active] = np.sum(weights * integrand, axis=1)
        if cumulative:
            # beyond the upper limit the chi-square part has all its mass below beta - a
            upper = np.where(np.isfinite(upper), upper, 0.0)
            result += stats.norm.cdf((np.log(beta) - upper * upper - self.log_mean_a) / self.s)
        return result

    def pdf(self, beta: np.ndarray) -> np.ndarray:
        return self._integrate(beta, cumulative=False)

    def cdf(self, beta: np.ndarray) -> np.ndarray:
        return np.clip(self._integrate(beta, cumulative=True), 0.0, 1.0)

    def support(self) -> Tuple[float, float]:
        lo = min(float(self.part_a.ppf(1e-10)), float(self.part_b.ppf(1e-10)))
        hi = float(self.part_a.isf(self.TAIL)) + self.b_hi
        return lo, hi


class _MixedGrid:
    """Spline interpolation of the mixed law on a log-spaced grid."""

    def __init__(self, law: _MixedLaw, points: int = MIXED_GRID_POINTS):
        self.law = law
        lo, hi = law.support()
        self.log_lo, self.log_hi = math.log(lo), math.log(hi)
        self.log_grid = np.linspace(self.log_lo, self.log_hi, points)
        grid = np.exp(self.log_grid)
        log_pdf = np.log(np.maximum(law.pdf(grid), 1e-300))
        self._log_pdf = CubicSpline(self.log_grid, log_pdf)
        self._cdf: Optional[PchipInterpolator] = None
        self._cdf_values: Optional[np.ndarray] = None

    def _inside(self, beta: np.ndarray) -> np.ndarray:
        log_beta = np.log(beta)
        return (log_beta >= self.log_lo) & (log_beta <= self.log_hi)

    def pdf(self, beta: np.ndarray) -> np.ndarray:
        inside = self._inside(beta)
        result = np.empty(beta.shape[0])
        result[inside] = np.exp(self._log_pdf(np.log(beta[inside])))
        if not inside.all():
            result[~inside] = self.law.pdf(beta[~inside])
        return result

    def cdf_values(self) -> np.ndarray:
        if self._cdf_values is None:
            values = np.maximum.accumulate(self.law.cdf(np.exp(self.log_grid)))
            self._cdf_values = values
            self._cdf = PchipInterpolator(self.log_grid, values)
        return self._cdf_values

    def cdf(self, beta: np.ndarray) -> np.ndarray:
        self.cdf_values()
        inside = self._inside(beta)
        result = np.empty(beta.shape[0])
        result[inside] = self._cdf(np.log(beta[inside]))
        if not inside.all():
            result[~inside] = self.law.cdf(beta[~inside])
        return np.clip(result, 0.0, 1.0)

    def quantile(self, q: np.ndarray) -> np.ndarray:
        values = self.cdf_values()
        return np.exp(np.interp(q, values, self.log_grid))


@lru_cache(maxsize=256)
def _mixed_grid(kappa: float, n_dof: float, x0_mu: float, x0_s: float, chi_scale: float) -> _MixedGrid:
    return _MixedGrid(_MixedLaw(kappa, n_dof, x0_mu, x0_s, chi_scale))


def _mixed_key(model: DistributionModel) -> Tuple[float, ...]:
    p = model.params
    return (p["kappa"], p["n_dof"], p["x0_mu"], p["x0_s"], p["chi_scale"])


def frozen_distribution(model: DistributionModel):
    """
    Return the scipy frozen distribution for a closed-form model.

    Mixed models qualify only at the endpoints kappa = 0 (scaled chi-square)
    and kappa = 1 (lognormal).

    Raises:
        ValueError: For a Mixed model with 0 < kappa < 1
    """
    p = model.params
    if model.kind is ModelKind.CHI2:
        return stats.gamma(a=0.5 * p["d1"], scale=2.0 * p["beta0"] / p["d1"])
    if model.kind is ModelKind.INV_CHI2:
        return stats.invgamma(a=0.5 * p["d2"] + 1.0, scale=0.5 * p["d2"] * p["beta0"])
    if model.kind is ModelKind.LOGNORMAL:
        return stats.lognorm(s=p["s"], scale=math.exp(p["mu"]))
    if p["kappa"] == 0.0:
        return stats.gamma(a=0.5 * p["n_dof"], scale=2.0 * p["chi_scale"])
    if p["kappa"] == 1.0:
        return stats.lognorm(s=p["x0_s"], scale=math.exp(p["x0_mu"]))
    raise ValueError("Mixed model with 0 < kappa < 1 has no closed form")


def _has_closed_form(model: DistributionModel) -> bool:
    return model.kind is not ModelKind.MIXED or model.params["kappa"] in (0.0, 1.0)


def _as_positive(beta: ArrayLike) -> Tuple[np.ndarray, bool]:
    scalar = np.ndim(beta) == 0
    values = np.atleast_1d(np.asarray(beta, dtype=float))
    if not np.all(values > 0):
        raise DomainError("beta must be strictly positive")
    return values, scalar


def density(model: DistributionModel, beta: ArrayLike) -> Union[float, np.ndarray]:
    """
    Evaluate the density f(beta).

    Mixed models with 0 < kappa < 1 are evaluated by direct quadrature of the
    convolution (relative accuracy well below 1e-4 in the bulk).

    Raises:
        DomainError: If any beta is not strictly positive
    """
    values, scalar = _as_positive(beta)
    if _has_closed_form(model):
        result = frozen_distribution(model).pdf(values)
    else:
        result = _MixedLaw(*_mixed_key(model)).pdf(values)
    return float(result[0]) if scalar else result


def cdf(model: DistributionModel, beta: ArrayLike) -> Union[float, np.ndarray]:
    """Cumulative distribution function; zero for beta <= 0."""
    scalar = np.ndim(beta) == 0
    values = np.atleast_1d(np.asarray(beta, dtype=float))
    result = np.zeros(values.shape[0])
    positive = values > 0
    if positive.any():
        if _has_closed_form(model):
            result[positive] = frozen_distribution(model).cdf(values[positive])
        else:
            result[positive] = _MixedLaw(*_mixed_key(model)).cdf(values[positive])
    return float(result[0]) if scalar else result


def quantile(model: DistributionModel, q: ArrayLike) -> Union[float, np.ndarray]:
    """Inverse CDF; Mixed models are inverted on their interpolation grid."""
    scalar = np.ndim(q) == 0
    values = np.atleast_1d(np.asarray(q, dtype=float))
    if _has_closed_form(model):
        result = frozen_distribution(model).ppf(values)
    else:
        result = _mixed_grid(*_mixed_key(model)).quantile(values)
    return float(result[0]) if scalar else result


def draw(model: DistributionModel, size: int, rng: np.random.Generator) -> np.ndarray:
    """Draw independent samples from a model."""
    if _has_closed_form(model):
        return frozen_distribution(model).rvs(size=size, random_state=rng)
    p = model.params
    part_a = p["kappa"] * np.exp(rng.normal(p["x0_mu"], p["x0_s"], size))
    part_b = (1.0 - p["kappa"]) * p["chi_scale"] * rng.chisquare(p["n_dof"], size)
    return part_a + part_b


def mixed_density_monte_carlo(
    model: DistributionModel, beta: ArrayLike, draws: int = 200_000, seed: int = 0
) -> np.ndarray:
    """
    Monte Carlo estimate of a Mixed density by a Gaussian kernel estimate in log(beta).

    Used to cross-check the quadrature evaluation.
    """
    if model.kind is not ModelKind.MIXED:
        raise ValueError(f"Expected a Mixed model, got {model.kind.value}")
    values, _ = _as_positive(beta)
    samples = draw(model, draws, np.random.default_rng(seed))
    kernel = stats.gaussian_kde(np.log(samples))
    return kernel(np.log(values)) / values


def _fast_pdf(model: DistributionModel, x: np.ndarray) -> np.ndarray:
    if _has_closed_form(model):
        return frozen_distribution(model).pdf(x)
    return _mixed_grid(*_mixed_key(model)).pdf(x)


def _fast_cdf(model: DistributionModel, x: np.ndarray) -> np.ndarray:
    if _has_closed_form(model):
        return frozen_distribution(model).cdf(x)
    return _mixed_grid(*_mixed_key(model)).cdf(x)


def log_likelihood(model: DistributionModel, x: np.ndarray) -> float:
    """Sum of log densities of the samples."""
    with np.errstate(divide="ignore"):
        return float(np.sum(np.log(_fast_pdf(model, np.asarray(x, dtype=float)))))


def inverse_mean(model: DistributionModel) -> float:
    """
    E[1/beta], the variance of returns under the model.

    Returns inf where the expectation diverges (Chi2 with d1 <= 2).
    """
    p = model.params
    if model.kind is ModelKind.CHI2:
        d = p["d1"]
        return d / (p["beta0"] * (d - 2.0)) if d > 2.0 else math.inf
    if model.kind is ModelKind.INV_CHI2:
        d = p["d2"]
        return (d + 2.0) / (d * p["beta0"])
    if model.kind is ModelKind.LOGNORMAL:
        return math.exp(-p["mu"] + 0.5 * p["s"] ** 2)
    if p["kappa"] == 0.0:
        n = p["n_dof"]
        return 1.0 / (p["chi_scale"] * (n - 2.0)) if n > 2.0 else math.inf
    if p["kappa"] == 1.0:
        return math.exp(-p["x0_mu"] + 0.5 * p["x0_s"] ** 2)

    law = _MixedLaw(*_mixed_key(model))
    lo, hi = law.support()
    # with y = ln(beta), f(beta)/beta dbeta = f(e^y) dy
    value, _ = integrate.quad(
        lambda y: law.pdf(np.array([math.exp(y)]))[0],
        math.log(lo),
        math.log(hi),
        limit=200,
        epsrel=1e-8,
    )
    return value


def _samples(betas: Union[BetaSeries, np.ndarray]) -> np.ndarray:
    values = betas.betas if isinstance(betas, BetaSeries) else np.asarray(betas, dtype=float)
    if not np.all(values > 0):
        raise DomainError("All beta samples must be strictly positive")
    return values


def _goodness(model: DistributionModel, x: np.ndarray, free_parameters: int) -> Dict[str, float]:
    loglik = log_likelihood(model, x)
    ks = stats.kstest(x, lambda v: _fast_cdf(model, np.asarray(v, dtype=float)))
    return {
        "log_likelihood": loglik,
        "aic": 2.0 * free_parameters - 2.0 * loglik,
        "ks": float(ks.statistic),
        "ks_pvalue": float(ks.pvalue),
        "n_samples": int(x.shape[0]),
        "free_parameters": free_parameters,
    }


def _bounded_scalar(objective: Callable[[float], float], lo: float, hi: float, label: str) -> float:
    """Minimize over [lo, hi] and fail if the optimum sits on a bound."""
    result = optimize.minimize_scalar(objective, bounds=(lo, hi), method="bounded", options={"xatol": 1e-6})
    diagnostics = {"parameter": label, "x": float(result.x), "fun": float(result.fun), "bounds": (lo, hi)}
    if not np.isfinite(result.fun):
        raise OptimizationFailure(f"Non-finite likelihood while fitting {label}", diagnostics)
    if min(result.x - lo, hi - result.x) < 1e-4 * (hi - lo):
        diagnostics["bound_hit"] = True
        raise OptimizationFailure(f"Optimum for {label} lies on a search bound", diagnostics)
    return float(result.x)


def _fit_chi2(x: np.ndarray, constrain_mean: bool) -> DistributionModel:
    if not constrain_mean:
        a, _, scale = stats.gamma.fit(x, floc=0)
        return DistributionModel.chi2(2.0 * a, a * scale)
    beta0 = float(x.mean())
    log_d = _bounded_scalar(
        lambda v: -log_likelihood(DistributionModel.chi2(math.exp(v), beta0), x),
        math.log(1e-3),
        math.log(1e4),
        "d1",
    )
    return DistributionModel.chi2(math.exp(log_d), beta0)


def _fit_inv_chi2(x: np.ndarray, constrain_mean: bool) -> DistributionModel:
    if constrain_mean:
        beta0 = float(x.mean())
        log_d = _bounded_scalar(
            lambda v: -log_likelihood(DistributionModel.inv_chi2(math.exp(v), beta0), x),
            math.log(1e-3),
            math.log(1e4),
            "d2",
        )
        return DistributionModel.inv_chi2(math.exp(log_d), beta0)

    # start from the generic inverse-gamma fit, pushed into the finite-mean region
    a, _, scale = stats.invgamma.fit(x, floc=0)
    a = max(a, 1.05)
    start = np.array([math.log(2.0 * (a - 1.0)), math.log(scale / (a - 1.0))])
    bounds = [(math.log(1e-3), math.log(1e4)), (math.log(x.min()) - 10.0, math.log(x.max()) + 10.0)]

    def objective(v: np.ndarray) -> float:
        value = -log_likelihood(DistributionModel.inv_chi2(math.exp(v[0]), math.exp(v[1])), x)
        return value if np.isfinite(value) else 1e300

    result = optimize.minimize(objective, start, method="L-BFGS-B", bounds=bounds)
    diagnostics = {"success": bool(result.success), "message": str(result.message), "fun": float(result.fun)}
    if result.fun >= 1e300:
        raise OptimizationFailure("Non-finite likelihood while fitting InvChi2", diagnostics)
    if any(min(v - lo, hi - v) < 1e-6 for v, (lo, hi) in zip(result.x, bounds)):
        diagnostics["bound_hit"] = True
        raise OptimizationFailure("InvChi2 optimum lies on a search bound", diagnostics)
    return DistributionModel.inv_chi2(math.exp(result.x[0]), math.exp(result.x[1]))


def _fit_lognormal_s(x: np.ndarray, beta0: float) -> float:
    """Log-std of the lognormal with mean beta0 that maximizes the likelihood."""
    log_x = np.log(x)

    def objective(v: float) -> float:
        s = math.exp(v)
        mu = math.log(beta0) - 0.5 * s * s
        return float(log_x.shape[0] * v + np.sum((log_x - mu) ** 2) / (2.0 * s * s))

    return math.exp(_bounded_scalar(objective, math.log(1e-3), math.log(10.0), "s"))


def _fit_lognormal(x: np.ndarray, constrain_mean: bool) -> DistributionModel:
    if not constrain_mean:
        log_x = np.log(x)
        return DistributionModel.lognormal(float(log_x.std()), float(log_x.mean()))
    return DistributionModel.lognormal_with_mean(_fit_lognormal_s(x, float(x.mean())), float(x.mean()))


_FREE_PARAMETERS = {ModelKind.CHI2: 2, ModelKind.INV_CHI2: 2, ModelKind.LOGNORMAL: 2}


def fit_mle(
    betas: Union[BetaSeries, np.ndarray],
    kind: Union[str, ModelKind],
    constrain_mean: bool = False,
    n_dof: int = DEFAULT_N_DOF,
) -> DistributionModel:
    """
    Fit a volatility law by maximum likelihood.

    Args:
        betas: Volatility samples
        kind: Model kind; Mixed delegates to fit_kappa
        constrain_mean: Fix beta0 to the sample mean and fit only the shape
        n_dof: Chi-square degrees of freedom for the Mixed model

    Returns:
        Fitted model; ``fit_stats`` holds log-likelihood, AIC and the KS statistic

    Raises:
        TooFewSamples: With fewer than 30 samples
        OptimizationFailure: For degenerate samples or an optimum on a search bound
    """
    kind = ModelKind.parse(kind)
    x = _samples(betas)
    if x.shape[0] < MIN_FIT_SAMPLES:
        raise TooFewSamples(
            f"Need at least {MIN_FIT_SAMPLES} samples to fit, got {x.shape[0]}",
            count=int(x.shape[0]),
            required=MIN_FIT_SAMPLES,
        )
    if np.ptp(x) == 0:
        raise OptimizationFailure("All samples are equal; the fit is degenerate", {"reason": "zero spread"})
    if kind is ModelKind.MIXED:
        return fit_kappa(x, n_dof=n_dof)

    fitters = {ModelKind.CHI2: _fit_chi2, ModelKind.INV_CHI2: _fit_inv_chi2, ModelKind.LOGNORMAL: _fit_lognormal}
    model = fitters[kind](x, constrain_mean)
    free = _FREE_PARAMETERS[kind] - (1 if constrain_mean else 0)
    model.fit_stats = _goodness(model, x, free)
    model.fit_stats["constrained_mean"] = constrain_mean
    if not math.isfinite(model.fit_stats["log_likelihood"]):
        raise OptimizationFailure(
            f"Non-finite likelihood for fitted {kind.value} model", {"params": dict(model.params)}
        )
    if kind is ModelKind.INV_CHI2:
        model.fit_stats["variance_finite"] = model.params["d2"] > 2.0
        if model.params["d2"] <= 2.0:
            logger.warning(f"InvChi2 fit d2 = {model.params['d2']:.3f} <= 2: variance of beta is infinite")
    logger.info(
        f"{kind.value} fit: {_format_params(model)} (KS = {model.fit_stats['ks']:.4f})"
    )
    return model


def _mixed_at(x: np.ndarray, kappa: float, n_dof: int, beta0: float) -> DistributionModel:
    """Best mean-matched Mixed model at fixed kappa, x0_s fitted by likelihood."""
    if kappa == 0.0:
        # pure chi-square part; x0_s plays no role
        return DistributionModel.mixed_matched(0.0, n_dof, 1.0, beta0)
    if kappa == 1.0:
        return DistributionModel.mixed_matched(1.0, n_dof, _fit_lognormal_s(x, beta0), beta0)

    def objective(v: float) -> float:
        model = DistributionModel.mixed_matched(kappa, n_dof, math.exp(v), beta0)
        value = -log_likelihood(model, x)
        return value if np.isfinite(value) else 1e300

    result = optimize.minimize_scalar(
        objective, bounds=(math.log(0.02), math.log(4.0)), method="bounded", options={"xatol": 1e-3}
    )
    return DistributionModel.mixed_matched(kappa, n_dof, math.exp(result.x), beta0)


def _ks(model: DistributionModel, x: np.ndarray) -> float:
    return float(stats.kstest(x, lambda v: _fast_cdf(model, np.asarray(v, dtype=float))).statistic)


def fit_kappa(
    betas: Union[BetaSeries, np.ndarray],
    n_dof: int = DEFAULT_N_DOF,
    step: float = 0.01,
    refine: bool = True,
    criterion: str = "likelihood",
    progress: Optional[ProgressCallback] = None,
) -> DistributionModel:
    """
    Fit the mixing weight kappa of the Mixed model by a grid search over [0, 1].

    Both parts of the mixture are held at the sample mean beta0 (lognormal log-mean
    ``ln beta0 - x0_s^2/2`` and chi-square scale ``beta0/n_dof``), so every kappa
    gives the observed mean. At each kappa the lognormal width x0_s is fitted by
    maximum likelihood. With ``criterion="likelihood"`` the kappa of the largest
    profile likelihood wins; with ``criterion="ks"`` the smallest KS statistic wins.
    The winner is refined by a parabola through its neighbours.

    Args:
        betas: Volatility samples
        n_dof: Number of squared Gaussian factors in the chi-square part
        step: Grid spacing for kappa in [0, 1]
        refine: Apply the quadratic refinement at the optimum
        criterion: ``"likelihood"`` or ``"ks"``
        progress: Optional callback ``(current, total, label)``

    Returns:
        Mixed model; ``fit_stats["profile"]`` holds the kappa grid with the KS
        statistic and the negative log-likelihood at each point

    Raises:
        TooFewSamples: With fewer than 100 samples
        OptimizationFailure: If no kappa gives a finite likelihood
    """
    x = _samples(betas)
    if x.shape[0] < MIN_KAPPA_SAMPLES:
        raise TooFewSamples(
            f"Need at least {MIN_KAPPA_SAMPLES} samples to fit kappa, got {x.shape[0]}",
            count=int(x.shape[0]),
            required=MIN_KAPPA_SAMPLES,
        )
    if not 0 < step <= 0.5:
        raise ValueError(f"kappa step must lie in (0, 0.5], got {step}")
    if criterion not in KAPPA_CRITERIA:
        raise ValueError(f"Unknown kappa criterion {criterion!r}, expected one of {KAPPA_CRITERIA}")
    beta0 = float(x.mean())
    grid = np.linspace(0.0, 1.0, int(round(1.0 / step)) + 1)

    models: List[DistributionModel] = []
    ks_values: List[float] = []
    nll_values: List[float] = []
    for index, kappa in enumerate(grid, 1):
        model = _mixed_at(x, float(kappa), n_dof, beta0)
        models.append(model)
        ks_values.append(_ks(model, x))
        nll_values.append(-log_likelihood(model, x))
        logger.debug(
            f"kappa={kappa:.3f}: x0_s={model.params['x0_s']:.4f}, KS={ks_values[-1]:.5f}, "
            f"-logL={nll_values[-1]:.3f}"
        )
        if progress:
            progress(index, len(grid), f"kappa={kappa:.2f}")

    scores = np.asarray(nll_values if criterion == "likelihood" else ks_values)
    if not np.isfinite(scores).any():
        raise OptimizationFailure("No kappa gives a finite likelihood", {"kappa_grid": len(grid)})
    scores = np.where(np.isfinite(scores), scores, np.inf)

    best = int(np.argmin(scores))
    best_model, best_score = models[best], float(scores[best])

    if refine and 0 < best < len(grid) - 1:
        s_minus, s_zero, s_plus = scores[best - 1], scores[best], scores[best + 1]
        curvature = s_plus - 2.0 * s_zero + s_minus
        if np.isfinite(curvature) and curvature > 0:
            h = grid[1] - grid[0]
            vertex = float(np.clip(grid[best] - 0.5 * h * (s_plus - s_minus) / curvature,
                                   grid[best - 1], grid[best + 1]))
            if 0.0 < vertex < 1.0 and vertex != grid[best]:
                candidate = _mixed_at(x, vertex, n_dof, beta0)
                score = -log_likelihood(candidate, x) if criterion == "likelihood" else _ks(candidate, x)
                if score < best_score:
                    best_model, best_score = candidate, score

    best_model.fit_stats = _goodness(best_model, x, free_parameters=2)
    best_model.fit_stats["profile"] = {
        "kappa": [float(k) for k in grid],
        "ks": ks_values,
        "neg_log_likelihood": nll_values,
    }
    best_model.fit_stats["beta0"] = beta0
    best_model.fit_stats["criterion"] = criterion
    logger.info(
        f"Mixed fit: kappa = {best_model.params['kappa']:.3f} "
        f"(KS = {best_model.fit_stats['ks']:.4f}, by {criterion})"
    )
    return best_model


def histogram(betas: Union[BetaSeries, np.ndarray], binning: Union[str, int] = "fd") -> BetaHistogram:
    """
    Density-normalized histogram.

    Args:
        betas: Volatility samples
        binning: ``"fd"`` (Freedman-Diaconis), ``"log"`` (Freedman-Diaconis on
            log(beta) with geometric edges) or an explicit bin count

    Raises:
        TooFewSamples: With fewer than 2 samples
    """
    x = _samples(betas)
    if x.shape[0] < 2:
        raise TooFewSamples(f"Need at least 2 samples for a histogram, got {x.shape[0]}", int(x.shape[0]), 2)

    if isinstance(binning, str) and binning.lower() == "log":
        edges = np.exp(np.histogram_bin_edges(np.log(x), bins="fd"))
    elif isinstance(binning, str) and binning.lower() == "fd":
        edges = np.histogram_bin_edges(x, bins="fd")
    elif isinstance(binning, (int, np.integer)) and not isinstance(binning, bool) and binning > 0:
        edges = np.histogram_bin_edges(x, bins=int(binning))
    else:
        raise ValueError(f"Unknown binning rule: {binning!r}")

    densities, edges = np.histogram(x, bins=edges, density=True)
    return BetaHistogram(bin_edges=edges, densities=densities, count=int(x.shape[0]))


def fit_all(
    betas: Union[BetaSeries, np.ndarray],
    kinds: Sequence[Union[str, ModelKind]] = (ModelKind.CHI2, ModelKind.INV_CHI2, ModelKind.LOGNORMAL),
    constrain_mean: bool = True,
    n_dof: int = DEFAULT_N_DOF,
    kappa_step: float = 0.01,
    progress: Optional[ProgressCallback] = None,
) -> Tuple[Dict[ModelKind, DistributionModel], Dict[ModelKind, str]]:
    """
    Fit several models, continuing past individual failures.

    Returns:
        Tuple of (fitted models by kind, error messages by kind)
    """
    fits: Dict[ModelKind, DistributionModel] = {}
    failures: Dict[ModelKind, str] = {}
    for kind in (ModelKind.parse(k) for k in kinds):
        try:
            if kind is ModelKind.MIXED:
                fits[kind] = fit_kappa(betas, n_dof=n_dof, step=kappa_step, progress=progress)
            else:
                fits[kind] = fit_mle(betas, kind, constrain_mean=constrain_mean)
        except FitError as e:
            logger.warning(f"{kind.value} fit failed: {str(e)}")
            failures[kind] = str(e)
    return fits, failures


def select_preferred(fits: Dict[ModelKind, DistributionModel]) -> Optional[ModelKind]:
    """Kind with the smallest KS statistic."""
    if not fits:
        return None
    return min(fits, key=lambda kind: fits[kind].fit_stats.get("ks", math.inf))


def _format_params(model: DistributionModel) -> str:
    return ", ".join(f"{name} = {value:.4g}" for name, value in model.params.items())
