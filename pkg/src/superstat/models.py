"""
Data models for superstat.

This module contains the data classes used throughout the package for price and
return series, window scans, volatility series, distribution models, correlation
functions, simulation configuration and the analysis report.
"""

import math
from dataclasses import dataclass, field, fields
from datetime import datetime
from enum import Enum
from typing import Any, Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd


REPORT_SCHEMA_VERSION = "1.0"


class ConfigError(ValueError):
    """Exception raised for invalid configuration values."""

    def __init__(self, message: str, field_errors: Optional[Dict[str, str]] = None):
        super().__init__(message)
        self.field_errors = field_errors or {}


class Resolution(str, Enum):
    """Sampling resolution of a price series."""

    DAILY = "daily"
    INTRADAY = "intraday"


@dataclass(frozen=True)
class PriceRecord:
    """A single timestamped price."""

    timestamp: datetime
    price: float
    session_id: int

    def __post_init__(self):
        if not self.price > 0:
            raise ValueError(f"Price must be strictly positive, got {self.price}")


@dataclass
class PriceSeries:
    """Ordered prices with session labels, stored column-wise."""

    timestamps: np.ndarray
    prices: np.ndarray
    session_ids: np.ndarray
    resolution: Resolution = Resolution.INTRADAY
    source_label: str = ""

    def __post_init__(self):
        """Validate the series after initialization."""
        self.timestamps = np.asarray(self.timestamps, dtype="datetime64[ns]")
        self.prices = np.asarray(self.prices, dtype=float)
        self.session_ids = np.asarray(self.session_ids, dtype=np.int64)
        self.resolution = Resolution(self.resolution)
        self.validate()

    def validate(self) -> None:
        """Validate the series invariants."""
        n = self.prices.shape[0]
        if n == 0:
            raise ValueError("Price series must contain at least one record")
        if self.timestamps.shape[0] != n or self.session_ids.shape[0] != n:
            raise ValueError("Timestamps, prices and session ids must have equal length")
        if not np.all(self.prices > 0):
            raise ValueError("All prices must be strictly positive")
        if n > 1:
            if not np.all(np.diff(self.timestamps.astype(np.int64)) > 0):
                raise ValueError("Timestamps must be strictly increasing")
            if not np.all(np.diff(self.session_ids) >= 0):
                raise ValueError("Session ids must be non-decreasing")

    def __len__(self) -> int:
        return int(self.prices.shape[0])

    @property
    def dates(self) -> np.ndarray:
        """Calendar date of each record."""
        return self.timestamps.astype("datetime64[D]")

    @property
    def session_count(self) -> int:
        """Number of distinct sessions."""
        return int(np.unique(self.session_ids).shape[0])

    def session_lengths(self) -> np.ndarray:
        """Number of records in each session, in session order."""
        _, counts = np.unique(self.session_ids, return_counts=True)
        return counts

    def with_sessions(self, session_ids: np.ndarray) -> "PriceSeries":
        """Return a copy carrying new session labels."""
        return PriceSeries(
            timestamps=self.timestamps,
            prices=self.prices,
            session_ids=session_ids,
            resolution=self.resolution,
            source_label=self.source_label,
        )


@dataclass
class IngestConfig:
    """Options for loading price files."""

    resolution: Optional[Resolution] = None  # auto-detected when None
    has_header: Optional[bool] = None  # auto-detected when None
    source_label: str = ""

    def __post_init__(self):
        if self.resolution is not None:
            self.resolution = Resolution(self.resolution)


@dataclass
class RawReturns:
    """Lag-tau log returns before normalization."""

    values: np.ndarray
    lag_tau: int
    dropped_count: int = 0
    session_ids: Optional[np.ndarray] = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.lag_tau < 1:
            raise ValueError(f"Lag must be a positive integer, got {self.lag_tau}")
        if self.dropped_count < 0:
            raise ValueError("Dropped count cannot be negative")

    def __len__(self) -> int:
        return int(self.values.shape[0])


@dataclass
class ReturnSeries:
    """Normalized returns with zero mean and unit variance."""

    values: np.ndarray
    lag_tau: int = 1
    raw_mean: float = 0.0
    raw_std: float = 1.0
    dropped_count: int = 0
    session_ids: Optional[np.ndarray] = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if not self.raw_std > 0:
            raise ValueError(f"raw_std must be positive, got {self.raw_std}")
        if self.lag_tau < 1:
            raise ValueError(f"Lag must be a positive integer, got {self.lag_tau}")

    def __len__(self) -> int:
        return int(self.values.shape[0])


@dataclass
class KurtosisRow:
    """Average window kurtosis for one window size across translational shifts."""

    window_size: int
    shift_offsets: List[int]
    values: List[float]  # one average kurtosis per shift
    window_counts: List[int]
    stderr: float  # across-window standard error, averaged over shifts

    @property
    def mean(self) -> float:
        """Shift-averaged kurtosis."""
        return float(np.mean(self.values))

    @property
    def spread(self) -> float:
        """Standard deviation across shifts (zero for a single shift)."""
        if len(self.values) < 2:
            return 0.0
        return float(np.std(self.values, ddof=1))


@dataclass
class WindowScan:
    """Average kurtosis as a function of window size and shift."""

    rows: List[KurtosisRow] = field(default_factory=list)
    crossing: Optional[float] = None
    crossing_uncertainty: Optional[float] = None

    def __post_init__(self):
        for row in self.rows:
            if any(value < 1.0 - 1e-12 for value in row.values):
                raise ValueError(f"Kurtosis below 1 at window size {row.window_size}")

    @property
    def window_sizes(self) -> List[int]:
        return [row.window_size for row in self.rows]

    @property
    def mean_kurtosis(self) -> List[List[float]]:
        return [list(row.values) for row in self.rows]

    @property
    def shift_offsets(self) -> List[List[int]]:
        return [list(row.shift_offsets) for row in self.rows]

    @property
    def curve(self) -> np.ndarray:
        """Shift-averaged kurtosis per window size."""
        return np.array([row.mean for row in self.rows])

    @property
    def optimal_window(self) -> Optional[int]:
        """Crossing rounded to the nearest integer window size."""
        if self.crossing is None:
            return None
        return max(int(round(self.crossing)), 1)

    def to_frame(self) -> pd.DataFrame:
        """Long-format table with columns dt, shift, kurtosis."""
        records = [
            (row.window_size, shift, value)
            for row in self.rows
            for shift, value in zip(row.shift_offsets, row.values)
        ]
        return pd.DataFrame(records, columns=["dt", "shift", "kurtosis"])


@dataclass
class BetaSeries:
    """Per-window volatility parameters."""

    betas: np.ndarray
    window_size: int
    offset: int = 0
    beta0: float = field(init=False)

    def __post_init__(self):
        self.betas = np.asarray(self.betas, dtype=float)
        if self.betas.size == 0:
            raise ValueError("Beta series must not be empty")
        if not np.all(self.betas > 0):
            raise ValueError("All betas must be strictly positive")
        if self.window_size < 1:
            raise ValueError(f"Window size must be positive, got {self.window_size}")
        self.beta0 = float(np.mean(self.betas))

    def __len__(self) -> int:
        return int(self.betas.shape[0])


class ModelKind(str, Enum):
    """Candidate volatility densities."""

    CHI2 = "Chi2"
    INV_CHI2 = "InvChi2"
    LOGNORMAL = "LogNormal"
    MIXED = "Mixed"

    @classmethod
    def parse(cls, value: "str | ModelKind") -> "ModelKind":
        """Parse a model kind, ignoring case."""
        if isinstance(value, cls):
            return value
        for kind in cls:
            if kind.value.lower() == str(value).strip().lower():
                return kind
        raise ValueError(f"Unknown model kind: {value}. Choose from {[k.value for k in cls]}")


PARAMETER_NAMES: Dict[ModelKind, Tuple[str, ...]] = {
    ModelKind.CHI2: ("d1", "beta0"),
    ModelKind.INV_CHI2: ("d2", "beta0"),
    ModelKind.LOGNORMAL: ("s", "mu"),
    ModelKind.MIXED: ("kappa", "n_dof", "x0_mu", "x0_s", "chi_scale"),
}

_POSITIVE_PARAMETERS = {"d1", "d2", "beta0", "s", "x0_s", "chi_scale"}


@dataclass
class DistributionModel:
    """A tagged parameter set for one of the volatility densities."""

    kind: ModelKind
    params: Dict[str, float]
    fit_stats: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        """Validate the parameter set after initialization."""
        self.kind = ModelKind.parse(self.kind)
        self.params = {name: float(value) for name, value in self.params.items()}
        self.validate()

    def validate(self) -> None:
        expected = PARAMETER_NAMES[self.kind]
        missing = [name for name in expected if name not in self.params]
        if missing:
            raise ValueError(f"{self.kind.value} model is missing parameters: {missing}")
        extra = [name for name in self.params if name not in expected]
        if extra:
            raise ValueError(f"{self.kind.value} model got unexpected parameters: {extra}")
        for name, value in self.params.items():
            if not math.isfinite(value):
                raise ValueError(f"Parameter {name} must be finite, got {value}")
            if name in _POSITIVE_PARAMETERS and value <= 0:
                raise ValueError(f"Parameter {name} must be positive, got {value}")
        if self.kind is ModelKind.MIXED:
            if not 0.0 <= self.params["kappa"] <= 1.0:
                raise ValueError(f"kappa must lie in [0, 1], got {self.params['kappa']}")
            n_dof = self.params["n_dof"]
            if n_dof < 1 or n_dof != int(n_dof):
                raise ValueError(f"n_dof must be a positive integer, got {n_dof}")

    def __getitem__(self, name: str) -> float:
        return self.params[name]

    @classmethod
    def chi2(cls, d1: float, beta0: float) -> "DistributionModel":
        return cls(ModelKind.CHI2, {"d1": d1, "beta0": beta0})

    @classmethod
    def inv_chi2(cls, d2: float, beta0: float) -> "DistributionModel":
        return cls(ModelKind.INV_CHI2, {"d2": d2, "beta0": beta0})

    @classmethod
    def lognormal(cls, s: float, mu: float) -> "DistributionModel":
        return cls(ModelKind.LOGNORMAL, {"s": s, "mu": mu})

    @classmethod
    def lognormal_with_mean(cls, s: float, beta0: float) -> "DistributionModel":
        """Lognormal whose mean equals beta0 (mu = ln beta0 - s^2/2)."""
        return cls.lognormal(s, math.log(beta0) - 0.5 * s * s)

    @classmethod
    def mixed(
        cls, kappa: float, n_dof: int, x0_mu: float, x0_s: float, chi_scale: float
    ) -> "DistributionModel":
        return cls(
            ModelKind.MIXED,
            {"kappa": kappa, "n_dof": n_dof, "x0_mu": x0_mu, "x0_s": x0_s, "chi_scale": chi_scale},
        )

    @classmethod
    def mixed_matched(cls, kappa: float, n_dof: int, x0_s: float, beta0: float) -> "DistributionModel":
        """Mixed model whose lognormal and chi-square components both have mean beta0."""
        return cls.mixed(kappa, n_dof, math.log(beta0) - 0.5 * x0_s * x0_s, x0_s, beta0 / n_dof)

    @property
    def mean(self) -> float:
        """Analytic mean of the distribution."""
        p = self.params
        if self.kind in (ModelKind.CHI2, ModelKind.INV_CHI2):
            return p["beta0"]
        if self.kind is ModelKind.LOGNORMAL:
            return math.exp(p["mu"] + 0.5 * p["s"] ** 2)
        return (
            p["kappa"] * math.exp(p["x0_mu"] + 0.5 * p["x0_s"] ** 2)
            + (1.0 - p["kappa"]) * p["n_dof"] * p["chi_scale"]
        )

    def to_dict(self) -> Dict[str, Any]:
        return {"kind": self.kind.value, "params": dict(self.params), "fit_stats": dict(self.fit_stats)}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "DistributionModel":
        return cls(data["kind"], dict(data["params"]), dict(data.get("fit_stats", {})))


@dataclass
class BetaHistogram:
    """Density-normalized histogram of volatility parameters."""

    bin_edges: np.ndarray
    densities: np.ndarray
    count: int

    def __post_init__(self):
        self.bin_edges = np.asarray(self.bin_edges, dtype=float)
        self.densities = np.asarray(self.densities, dtype=float)
        if self.bin_edges.shape[0] != self.densities.shape[0] + 1:
            raise ValueError("Histogram needs one more edge than densities")
        if not np.all(np.diff(self.bin_edges) > 0):
            raise ValueError("Bin edges must be strictly ascending")
        if np.any(self.densities < 0):
            raise ValueError("Densities cannot be negative")

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.bin_edges)

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.bin_edges[1:] + self.bin_edges[:-1])

    @property
    def total_mass(self) -> float:
        return float(np.sum(self.densities * self.widths))

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {"bin_left": self.bin_edges[:-1], "bin_right": self.bin_edges[1:], "density": self.densities}
        )


@dataclass
class MarginalDensity:
    """Integrated return density p(u) on a symmetric grid."""

    model: DistributionModel
    grid: np.ndarray
    values: np.ndarray
    quadrature_tol: float
    tail_mass: float = 0.0  # probability beyond the grid, from the Gaussian tails

    @property
    def normalization(self) -> float:
        """Grid mass plus analytic tail mass."""
        from scipy.integrate import simpson

        return float(simpson(self.values, x=self.grid)) + self.tail_mass

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"u": self.grid, "p": self.values})


@dataclass
class CorrelationFunction:
    """Autocorrelation estimates for lags 0..max_lag."""

    lags: np.ndarray
    values: np.ndarray
    sample_size: int
    estimator: str = "literal"
    original: Optional["CorrelationFunction"] = None

    def __post_init__(self):
        self.lags = np.asarray(self.lags, dtype=np.int64)
        self.values = np.asarray(self.values, dtype=float)
        if self.lags.shape != self.values.shape:
            raise ValueError("Lags and values must have equal length")
        if self.lags.size == 0 or self.lags[0] != 0:
            raise ValueError("Correlation function must start at lag 0")
        if not self.values[0] > 0:
            raise ValueError("Lag-0 covariance must be positive")

    @property
    def normalized(self) -> np.ndarray:
        normalized = self.values / self.values[0]
        normalized[0] = 1.0
        return normalized

    @property
    def max_lag(self) -> int:
        return int(self.lags[-1])

    @property
    def noise_floor(self) -> float:
        """Significance threshold 2/sqrt(M) for the normalized values."""
        return 2.0 / math.sqrt(self.sample_size)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"lag": self.lags, "c": self.values, "c_normalized": self.normalized})


class DecayForm(str, Enum):
    """Functional forms for correlation decay."""

    EXPONENTIAL = "Exponential"
    POWER_LAW = "PowerLaw"


@dataclass
class DecayFit:
    """Exponential or power-law fit of a correlation function."""

    form: DecayForm
    fit_range: Tuple[int, int]
    residual: float
    intercept: float = 0.0
    rate_gamma: Optional[float] = None
    exponent_alpha: Optional[float] = None
    preferred: bool = False
    points_used: int = 0
    excluded_nonpositive: int = 0
    alternatives: List["DecayFit"] = field(default_factory=list)

    def __post_init__(self):
        self.form = DecayForm(self.form)
        if self.fit_range[0] < 1:
            raise ValueError("Fit range must exclude lag 0")
        if self.form is DecayForm.EXPONENTIAL and not (self.rate_gamma or 0) > 0:
            raise ValueError(f"Exponential fit needs a positive rate, got {self.rate_gamma}")
        if self.form is DecayForm.POWER_LAW and not (self.exponent_alpha or 0) > 0:
            raise ValueError(f"Power-law fit needs a positive exponent, got {self.exponent_alpha}")

    @property
    def parameter(self) -> float:
        return self.rate_gamma if self.form is DecayForm.EXPONENTIAL else self.exponent_alpha

    def to_dict(self) -> Dict[str, Any]:
        return {
            "form": self.form.value,
            "rate_gamma": self.rate_gamma,
            "exponent_alpha": self.exponent_alpha,
            "intercept": self.intercept,
            "fit_range": list(self.fit_range),
            "residual": self.residual,
            "preferred": self.preferred,
            "points_used": self.points_used,
            "excluded_nonpositive": self.excluded_nonpositive,
            "alternatives": [alt.to_dict() for alt in self.alternatives],
        }


@dataclass
class SynthConfig:
    """Parameters of the hybrid superstatistical Langevin model."""

    kappa: float = 0.5
    n_dof: int = 4
    x0_mean: float = -0.125
    x0_std: float = 0.5
    xi_std: float = 0.5
    factor_drag: float = 0.05
    factor_noise: float = math.sqrt(0.1)
    langevin_gamma: float = 2.0
    beta_update_interval: int = 50
    total_ticks: int = 100_000
    seed: int = 12345

    def __post_init__(self):
        """Validate configuration after initialization."""
        self.validate()

    def validate(self) -> None:
        """Validate all fields, reporting every problem at once."""
        errors: Dict[str, str] = {}
        if not isinstance(self.kappa, (int, float)) or not 0.0 <= self.kappa <= 1.0:
            errors["kappa"] = f"must lie in [0, 1], got {self.kappa!r}"
        if not _is_int(self.n_dof) or self.n_dof < 1:
            errors["n_dof"] = f"must be a positive integer, got {self.n_dof!r}"
        if not _is_real(self.x0_mean):
            errors["x0_mean"] = f"must be a finite number, got {self.x0_mean!r}"
        for name in ("x0_std", "xi_std", "factor_drag", "factor_noise", "langevin_gamma"):
            value = getattr(self, name)
            if not _is_real(value) or value <= 0:
                errors[name] = f"must be a positive number, got {value!r}"
        if not _is_int(self.beta_update_interval) or self.beta_update_interval < 2:
            errors["beta_update_interval"] = (
                f"must be an integer >= 2, got {self.beta_update_interval!r}"
            )
        if not _is_int(self.total_ticks) or self.total_ticks < 1:
            errors["total_ticks"] = f"must be a positive integer, got {self.total_ticks!r}"
        if not _is_int(self.seed) or self.seed < 0:
            errors["seed"] = f"must be a non-negative integer, got {self.seed!r}"
        if errors:
            details = "; ".join(f"{name}: {message}" for name, message in errors.items())
            raise ConfigError(f"Invalid simulation config ({details})", errors)

    @property
    def factor_std(self) -> float:
        """Stationary standard deviation of the OU drivers."""
        return self.factor_noise / math.sqrt(2.0 * self.factor_drag)

    @property
    def stationary_x0_std(self) -> float:
        """Standard deviation of X0; x0_std scales the OU driver."""
        return self.x0_std * self.factor_std

    @property
    def stationary_xi_std(self) -> float:
        """Standard deviation of each of X1..Xn."""
        return self.xi_std * self.factor_std

    @property
    def burn_in_ticks(self) -> int:
        """Ticks discarded before recording, rounded up to whole refresh segments."""
        relaxation = max(1.0 / self.factor_drag, 1.0 / self.langevin_gamma)
        ticks = math.ceil(10.0 * relaxation)
        segments = math.ceil(ticks / self.beta_update_interval)
        return segments * self.beta_update_interval

    def replace(self, **changes: Any) -> "SynthConfig":
        data = self.to_dict()
        data.update(changes)
        return SynthConfig(**data)

    def to_dict(self) -> Dict[str, Any]:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "SynthConfig":
        """Build a config from a mapping, rejecting unknown keys."""
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(
                f"Unknown simulation config keys: {unknown}",
                {name: "unknown key" for name in unknown},
            )
        return cls(**data)


def _is_int(value: Any) -> bool:
    return isinstance(value, (int, np.integer)) and not isinstance(value, bool)


def _is_real(value: Any) -> bool:
    return (
        isinstance(value, (int, float, np.integer, np.floating))
        and not isinstance(value, bool)
        and math.isfinite(value)
    )


@dataclass
class SynthOutput:
    """Simulated returns together with the volatility in force at each tick."""

    u_series: np.ndarray
    beta_truth: np.ndarray
    model_truth: SynthConfig
    raw_std: float = 1.0

    def __post_init__(self):
        if self.u_series.shape != self.beta_truth.shape:
            raise ValueError("Returns and beta truth must have equal length")
        if not np.all(self.beta_truth > 0):
            raise ValueError("Beta truth must be strictly positive")

    def __len__(self) -> int:
        return int(self.u_series.shape[0])

    def to_return_series(self) -> ReturnSeries:
        return ReturnSeries(values=self.u_series, lag_tau=1, raw_std=self.raw_std)


@dataclass
class KappaScanResult:
    """Fitted kappa per return lag, with an optional logarithmic trend."""

    taus: List[int] = field(default_factory=list)
    kappas: List[float] = field(default_factory=list)
    ks: List[float] = field(default_factory=list)
    windows: List[int] = field(default_factory=list)
    intercept: Optional[float] = None
    slope: Optional[float] = None
    note: str = ""

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"tau": self.taus, "kappa": self.kappas, "ks": self.ks})

    def trend_text(self) -> str:
        if self.slope is None or self.intercept is None:
            return self.note or "fit omitted"
        sign = "-" if self.slope < 0 else "+"
        return f"kappa = {self.intercept:.4f} {sign} {abs(self.slope):.4f}*log(tau)"

    def to_dict(self) -> Dict[str, Any]:
        return {
            "taus": list(self.taus),
            "kappas": list(self.kappas),
            "ks": list(self.ks),
            "windows": list(self.windows),
            "intercept": self.intercept,
            "slope": self.slope,
            "note": self.note,
        }


@dataclass
class AnalysisConfig:
    """Knobs for a full analysis run."""

    tau: int = 1
    window_grid: Optional[Sequence[int]] = None
    shifts: Optional[Sequence[int]] = None
    window: Optional[int] = None  # fixed T, bypasses the kurtosis scan
    max_lag: int = 200
    max_lag_beta: Optional[int] = None
    models: Sequence[ModelKind] = (ModelKind.CHI2, ModelKind.INV_CHI2, ModelKind.LOGNORMAL)
    fit_kappa: bool = True
    kappa_step: float = 0.01
    n_dof: int = 4
    bins: "str | int" = "fd"
    u_grid_points: int = 201
    amended: bool = True
    scan_taus: Optional[Sequence[int]] = None  # lags for an optional kappa(tau) table
    seed: int = 0
    label: str = ""
    sector: str = ""

    def __post_init__(self):
        """Validate configuration after initialization."""
        self.models = tuple(ModelKind.parse(kind) for kind in self.models)
        self.validate()

    def validate(self) -> None:
        if self.tau < 1:
            raise ConfigError("tau must be a positive integer", {"tau": "must be >= 1"})
        if self.max_lag < 1:
            raise ConfigError("max_lag must be a positive integer", {"max_lag": "must be >= 1"})
        if self.window is not None and self.window < 4:
            raise ConfigError("window must be at least 4", {"window": "must be >= 4"})
        if not 0 < self.kappa_step <= 0.5:
            raise ConfigError("kappa_step must lie in (0, 0.5]", {"kappa_step": "out of range"})
        if self.n_dof < 1:
            raise ConfigError("n_dof must be a positive integer", {"n_dof": "must be >= 1"})
        if self.u_grid_points < 3:
            raise ConfigError("u_grid_points must be at least 3", {"u_grid_points": "too small"})
        if self.max_lag_beta is not None and self.max_lag_beta < 1:
            raise ConfigError("max_lag_beta must be a positive integer", {"max_lag_beta": "must be >= 1"})
        if self.scan_taus is not None and any(t < 1 for t in self.scan_taus):
            raise ConfigError("scan taus must be positive", {"scan_taus": "must be >= 1"})


@dataclass
class AnalysisReport:
    """Summary of one analysis run."""

    input_summary: Dict[str, Any] = field(default_factory=dict)
    window: Dict[str, Any] = field(default_factory=dict)
    beta_stats: Dict[str, Any] = field(default_factory=dict)
    fits: Dict[str, Dict[str, Any]] = field(default_factory=dict)
    preferred_model: Optional[str] = None
    marginal_fits: Dict[str, Any] = field(default_factory=dict)
    correlations: Dict[str, Any] = field(default_factory=dict)
    kappa: Optional[Dict[str, Any]] = None
    errors: List[str] = field(default_factory=list)
    generated_at: str = ""
    schema_version: str = REPORT_SCHEMA_VERSION

    def add_error(self, error: str) -> None:
        """Add an error to the report."""
        self.errors.append(error)

    def validate(self) -> None:
        """Check that every number is finite and the preferred model was fitted."""
        if self.preferred_model is not None and self.preferred_model not in self.fits:
            raise ValueError(f"Preferred model {self.preferred_model} is not among the fits")
        bad = list(_non_finite_paths(self.to_dict()))
        if bad:
            raise ValueError(f"Report contains non-finite numbers at: {bad}")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "schema_version": self.schema_version,
            "generated_at": self.generated_at,
            "input_summary": self.input_summary,
            "window": self.window,
            "beta_stats": self.beta_stats,
            "fits": self.fits,
            "preferred_model": self.preferred_model,
            "marginal_fits": self.marginal_fits,
            "correlations": self.correlations,
            "kappa": self.kappa,
            "errors": list(self.errors),
        }

    def __str__(self) -> str:
        """String representation of the report."""
        window = self.window.get("T")
        return (
            f"Analysis Report:\n"
            f"  Returns: {self.input_summary.get('return_count', 0)}"
            f" (dropped {self.input_summary.get('dropped_count', 0)})\n"
            f"  Optimal window T: {window}\n"
            f"  Betas: {self.beta_stats.get('count', 0)}, beta0 = {self.beta_stats.get('beta0')}\n"
            f"  Preferred model: {self.preferred_model}\n"
            f"  Errors: {len(self.errors)}"
        )


def finite_or_none(value: Any) -> Any:
    """Map non-finite floats to None so that reports stay valid JSON."""
    if isinstance(value, (float, np.floating)):
        return float(value) if math.isfinite(value) else None
    if isinstance(value, np.integer):
        return int(value)
    return value


def _non_finite_paths(obj: Any, path: str = "") -> Iterator[str]:
    if isinstance(obj, dict):
        for key, value in obj.items():
            yield from _non_finite_paths(value, f"{path}.{key}" if path else str(key))
    elif isinstance(obj, (list, tuple)):
        for index, value in enumerate(obj):
            yield from _non_finite_paths(value, f"{path}[{index}]")
    elif isinstance(obj, (float, np.floating)) and not math.isfinite(obj):
        yield path
