"""
Window-size selection and volatility extraction.

The optimal window T is the window size at which the average kurtosis of the
returns inside non-overlapping windows equals 3, the Gaussian value. Per-window
inverse variances over windows of size T form the volatility series.
"""

import logging
from typing import Callable, List, Optional, Sequence, Union

import numpy as np

from .models import BetaSeries, KurtosisRow, ReturnSeries, WindowScan


logger = logging.getLogger(__name__)

MIN_WINDOW = 4
GAUSSIAN_KURTOSIS = 3.0

ProgressCallback = Callable[[int, int, str], None]


class WindowingError(Exception):
    """Base exception for windowing errors."""
    pass


class WindowTooSmall(WindowingError):
    """Exception raised for window sizes below the minimum of 4."""

    def __init__(self, message: str, window_size: int):
        super().__init__(message)
        self.window_size = window_size


class SeriesTooShort(WindowingError):
    """Exception raised when a series cannot fill a single window."""

    def __init__(self, message: str, length: int = 0, required: int = 0):
        super().__init__(message)
        self.length = length
        self.required = required


class DegenerateWindow(WindowingError):
    """Exception raised for a window with zero variance."""

    def __init__(self, message: str, window_index: int, window_size: int = 0):
        super().__init__(message)
        self.window_index = window_index
        self.window_size = window_size


class NoCrossing(WindowingError):
    """Exception raised when the kurtosis curve never reaches 3 on the scanned range."""

    def __init__(self, message: str, scan: WindowScan, closest_window: int, closest_kurtosis: float):
        super().__init__(message)
        self.scan = scan
        self.closest_window = closest_window
        self.closest_kurtosis = closest_kurtosis


def default_window_grid() -> List[int]:
    """Candidate window sizes 4, 6, ..., 100."""
    return list(range(MIN_WINDOW, 101, 2))


def default_shifts(dt: int) -> List[int]:
    """Translational offsets 0, dt/4, dt/2 and 3dt/4 (rounded down, deduplicated)."""
    return sorted({0, dt // 4, dt // 2, (3 * dt) // 4})


def window_kurtosis(u: Union[ReturnSeries, np.ndarray], dt: int, shift: int = 0) -> np.ndarray:
    """
    Kurtosis <u^4>/<u^2>^2 of each complete window, using raw (uncentered) moments.

    Args:
        u: Normalized returns
        dt: Window size
        shift: Offset of the first window, 0 <= shift < dt

    Returns:
        One kurtosis per window; NaN for windows whose second moment is zero

    Raises:
        WindowTooSmall: If dt < 4
        SeriesTooShort: If the series cannot hold one window after the shift
    """
    x = _as_array(u)
    _check_window(dt)
    if not 0 <= shift < dt:
        raise ValueError(f"Shift must satisfy 0 <= shift < dt, got shift={shift}, dt={dt}")
    if x.shape[0] < dt + shift:
        raise SeriesTooShort(
            f"Series of length {x.shape[0]} cannot hold a window of {dt} at shift {shift}",
            length=int(x.shape[0]),
            required=dt + shift,
        )

    blocks = _blocks(x, dt, shift)
    squared = blocks * blocks
    m2 = squared.mean(axis=1)
    m4 = (squared * squared).mean(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        kurtosis = m4 / (m2 * m2)
    kurtosis[m2 == 0] = np.nan
    return kurtosis


def mean_kurtosis(
    u: Union[ReturnSeries, np.ndarray], dt: int, shifts: Optional[Sequence[int]] = None
) -> KurtosisRow:
    """
    Average window kurtosis for one window size at each shift.

    Shifts at or beyond dt are ignored and shifts that leave no complete window
    are skipped. Windows with zero second moment are left out of the average.

    Raises:
        WindowTooSmall: If dt < 4
        SeriesTooShort: If no shift leaves a complete window
        DegenerateWindow: If every window at some shift has zero variance
    """
    x = _as_array(u)
    _check_window(dt)
    offsets = _resolve_shifts(dt, shifts)

    used: List[int] = []
    values: List[float] = []
    counts: List[int] = []
    errors: List[float] = []
    for shift in offsets:
        if x.shape[0] < dt + shift:
            logger.debug(f"Skipping shift {shift} at dt={dt}: series too short")
            continue
        kurtosis = window_kurtosis(x, dt, shift)
        valid = np.isfinite(kurtosis)
        excluded = int(kurtosis.shape[0] - np.count_nonzero(valid))
        if excluded:
            logger.warning(f"Excluded {excluded} zero-variance windows at dt={dt}, shift={shift}")
        if not valid.any():
            raise DegenerateWindow(
                f"All windows have zero variance at dt={dt}, shift={shift}", 0, dt
            )
        kept = kurtosis[valid]
        used.append(shift)
        values.append(float(kept.mean()))
        counts.append(int(kept.shape[0]))
        errors.append(float(kept.std(ddof=1) / np.sqrt(kept.shape[0])) if kept.shape[0] > 1 else 0.0)

    if not used:
        raise SeriesTooShort(
            f"Series of length {x.shape[0]} cannot hold a window of {dt}",
            length=int(x.shape[0]),
            required=dt,
        )

    row = KurtosisRow(
        window_size=dt,
        shift_offsets=used,
        values=values,
        window_counts=counts,
        stderr=float(np.mean(errors)),
    )
    logger.debug(f"dt={dt}: mean kurtosis {row.mean:.4f} +/- {row.spread:.4f} over {len(used)} shifts")
    return row


def find_optimal_window(
    u: Union[ReturnSeries, np.ndarray],
    candidates: Optional[Sequence[int]] = None,
    shifts: Optional[Sequence[int]] = None,
    progress: Optional[ProgressCallback] = None,
) -> WindowScan:
    """
    Scan window sizes and locate where the shift-averaged kurtosis crosses 3.

    The crossing is found by linear interpolation between the first pair of
    bracketing candidates. Its uncertainty is half the candidate spacing plus
    the across-shift spread divided by the local slope of the curve.

    Args:
        u: Normalized returns
        candidates: Ascending window sizes (default 4, 6, ..., 100)
        shifts: Offsets applied to every window size (default per window size)
        progress: Optional callback ``(current, total, label)``

    Returns:
        WindowScan with the per-shift curves and the crossing

    Raises:
        NoCrossing: If the curve stays on one side of 3 over the scanned range
        SeriesTooShort: If fewer than two candidates fit in the series
    """
    x = _as_array(u)
    candidates = list(candidates) if candidates is not None else default_window_grid()
    if len(candidates) < 2:
        raise ValueError("At least two candidate window sizes are required")
    if any(b <= a for a, b in zip(candidates, candidates[1:])):
        raise ValueError("Candidate window sizes must be strictly ascending")

    rows: List[KurtosisRow] = []
    for index, dt in enumerate(candidates, 1):
        if x.shape[0] < dt:
            logger.debug(f"Skipping window size {dt}: longer than the series")
            continue
        rows.append(mean_kurtosis(x, dt, shifts))
        if progress:
            progress(index, len(candidates), f"dt={dt}")

    if len(rows) < 2:
        raise SeriesTooShort(
            f"Series of length {x.shape[0]} fits fewer than two candidate windows",
            length=int(x.shape[0]),
            required=candidates[1],
        )

    scan = WindowScan(rows=rows)
    sizes = np.array(scan.window_sizes, dtype=float)
    curve = scan.curve
    offset = curve - GAUSSIAN_KURTOSIS

    for i in range(len(rows)):
        if offset[i] == 0:
            scan.crossing = float(sizes[i])
            scan.crossing_uncertainty = _uncertainty(sizes, curve, rows, i)
            break
        if i + 1 < len(rows) and offset[i] * offset[i + 1] < 0:
            slope = (curve[i + 1] - curve[i]) / (sizes[i + 1] - sizes[i])
            scan.crossing = float(sizes[i] + (GAUSSIAN_KURTOSIS - curve[i]) / slope)
            spread = 0.5 * (rows[i].spread + rows[i + 1].spread)
            scan.crossing_uncertainty = float(
                0.5 * (sizes[i + 1] - sizes[i]) + spread / abs(slope)
            )
            break

    if scan.crossing is None:
        closest = int(np.argmin(np.abs(offset)))
        raise NoCrossing(
            f"Average kurtosis never crosses 3 for window sizes {int(sizes[0])}..{int(sizes[-1])}; "
            f"closest approach {curve[closest]:.4f} at dt={int(sizes[closest])}",
            scan=scan,
            closest_window=int(sizes[closest]),
            closest_kurtosis=float(curve[closest]),
        )

    logger.info(f"Optimal window T = {scan.crossing:.2f} +/- {scan.crossing_uncertainty:.2f}")
    return scan


def extract_betas(u: Union[ReturnSeries, np.ndarray], T: int) -> BetaSeries:
    """
    Inverse within-window sample variance (ddof=1) for each complete window of size T.

    Raises:
        WindowTooSmall: If T < 4
        SeriesTooShort: If the series is shorter than T
        DegenerateWindow: If a window has zero variance
    """
    x = _as_array(u)
    _check_window(T)
    if x.shape[0] < T:
        raise SeriesTooShort(
            f"Series of length {x.shape[0]} is shorter than the window {T}",
            length=int(x.shape[0]),
            required=T,
        )

    variances = _blocks(x, T, 0).var(axis=1, ddof=1)
    degenerate = np.flatnonzero(variances <= 0)
    if degenerate.size:
        index = int(degenerate[0])
        raise DegenerateWindow(f"Window {index} of size {T} has zero variance", index, T)

    betas = BetaSeries(betas=1.0 / variances, window_size=T)
    logger.info(f"Extracted {len(betas)} betas at T={T}, beta0 = {betas.beta0:.4f}")
    return betas


def _as_array(u: Union[ReturnSeries, np.ndarray]) -> np.ndarray:
    values = u.values if isinstance(u, ReturnSeries) else u
    return np.asarray(values, dtype=float)


def _check_window(dt: int) -> None:
    if dt < MIN_WINDOW:
        raise WindowTooSmall(f"Window size must be at least {MIN_WINDOW}, got {dt}", dt)


def _blocks(x: np.ndarray, dt: int, shift: int) -> np.ndarray:
    count = (x.shape[0] - shift) // dt
    return x[shift:shift + count * dt].reshape(count, dt)


def _resolve_shifts(dt: int, shifts: Optional[Sequence[int]]) -> List[int]:
    if shifts is None:
        return default_shifts(dt)
    offsets = sorted({int(s) for s in shifts if 0 <= int(s) < dt})
    return offsets or [0]


def _uncertainty(sizes: np.ndarray, curve: np.ndarray, rows: List[KurtosisRow], i: int) -> float:
    """Uncertainty for a candidate that hits 3 exactly, from its neighbours."""
    lo = max(i - 1, 0)
    hi = min(i + 1, len(rows) - 1)
    spacing = (sizes[hi] - sizes[lo]) / max(hi - lo, 1)
    slope = (curve[hi] - curve[lo]) / (sizes[hi] - sizes[lo]) if hi > lo else 0.0
    if slope == 0:
        return float(0.5 * spacing)
    return float(0.5 * spacing + rows[i].spread / abs(slope))
