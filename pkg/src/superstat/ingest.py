"""
Price file ingestion.

This module loads ``timestamp,price[,session]`` CSV files (optionally
gzip-compressed) into PriceSeries objects and labels trading sessions so that
returns spanning an overnight gap can be removed later.
"""

import logging
import re
from pathlib import Path
from typing import Optional, Tuple, Union

import numpy as np
import pandas as pd

from .models import IngestConfig, PriceRecord, PriceSeries, Resolution


logger = logging.getLogger(__name__)


class IngestError(Exception):
    """Base exception for price ingestion errors."""
    pass


class ParseError(IngestError):
    """Exception raised for a malformed row."""

    def __init__(self, message: str, line_number: Optional[int] = None):
        super().__init__(message)
        self.line_number = line_number


class NonPositivePrice(IngestError):
    """Exception raised when a price is zero or negative."""

    def __init__(self, message: str, row_index: int, line_number: Optional[int] = None):
        super().__init__(message)
        self.row_index = row_index
        self.line_number = line_number


class DuplicateTimestamp(IngestError):
    """Exception raised when two rows share a timestamp."""

    def __init__(
        self,
        message: str,
        timestamp: Optional[str] = None,
        records: Tuple[PriceRecord, ...] = (),
    ):
        super().__init__(message)
        self.timestamp = timestamp
        self.records = records


class EmptyInput(IngestError):
    """Exception raised when a file holds no data rows."""
    pass


_LINE_PATTERN = re.compile(r"line (\d+)")


def load_csv(path: Union[str, Path], config: Optional[IngestConfig] = None) -> PriceSeries:
    """
    Load a price file into a PriceSeries.

    Args:
        path: CSV file path; a ``.gz`` suffix selects gzip decompression
        config: Ingest options (header and resolution are auto-detected when unset)

    Returns:
        PriceSeries sorted by timestamp with session labels

    Raises:
        FileNotFoundError: If the file does not exist
        ParseError: If a row cannot be parsed (line number reported)
        NonPositivePrice: If a price is not strictly positive
        DuplicateTimestamp: If two rows share a timestamp
        EmptyInput: If the file holds no data rows
    """
    config = config or IngestConfig()
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"Input file not found: {path}")

    logger.info(f"Loading prices from {path}")
    frame = _read_raw(path)

    # Line numbers are 1-based file lines; blank lines are kept so numbering stays exact.
    line_numbers = frame.index.to_numpy() + 1
    keep = ~frame.isna().all(axis=1).to_numpy()
    frame = frame.loc[keep].reset_index(drop=True)
    line_numbers = line_numbers[keep]
    if frame.empty:
        raise EmptyInput(f"No data rows in {path}")

    if frame.shape[1] < 2:
        raise ParseError("Expected at least timestamp and price columns", int(line_numbers[0]))
    if frame.shape[1] > 3:
        raise ParseError(
            f"Expected at most 3 columns (timestamp, price, session), found {frame.shape[1]}",
            int(line_numbers[0]),
        )

    has_header = config.has_header
    if has_header is None:
        has_header = not _is_number(frame.iloc[0, 1])
        if has_header:
            logger.debug(f"Detected header row: {list(frame.iloc[0].fillna(''))}")
    if has_header:
        frame = frame.iloc[1:].reset_index(drop=True)
        line_numbers = line_numbers[1:]
    if frame.empty:
        raise EmptyInput(f"No data rows in {path}")

    timestamps = _parse_timestamps(frame[0], line_numbers)
    prices = _parse_prices(frame[1], line_numbers)
    sessions = _parse_sessions(frame[2], line_numbers) if frame.shape[1] == 3 else None

    order = np.argsort(timestamps.astype(np.int64), kind="stable")
    timestamps = timestamps[order]
    prices = prices[order]
    if sessions is not None:
        sessions = sessions[order]

    if timestamps.shape[0] > 1:
        duplicated = np.flatnonzero(np.diff(timestamps.astype(np.int64)) == 0)
        if duplicated.size:
            first = int(duplicated[0])
            # unlabelled rows carry session 0 until assign_sessions runs
            clash = tuple(
                PriceRecord(
                    pd.Timestamp(timestamps[i]).to_pydatetime(),
                    float(prices[i]),
                    int(sessions[i]) if sessions is not None else 0,
                )
                for i in (first, first + 1)
            )
            stamp = str(pd.Timestamp(timestamps[first]))
            raise DuplicateTimestamp(
                f"Duplicate timestamp {stamp} in {path} (prices {clash[0].price:g} and {clash[1].price:g})",
                stamp,
                clash,
            )

    resolution = config.resolution or detect_resolution(timestamps)
    label = config.source_label or path.name

    if sessions is not None:
        if np.any(np.diff(sessions) < 0):
            raise IngestError("Session ids must be non-decreasing in timestamp order")
        series = PriceSeries(timestamps, prices, sessions, resolution, label)
    else:
        placeholder = np.zeros(timestamps.shape[0], dtype=np.int64)
        series = assign_sessions(PriceSeries(timestamps, prices, placeholder, resolution, label))

    logger.info(
        f"Loaded {len(series)} {series.resolution.value} records in "
        f"{series.session_count} sessions from {path.name}"
    )
    return series


def load_column(path: Union[str, Path], column: str) -> np.ndarray:
    """
    Load one numeric column of a headed CSV, such as ``betas.csv`` or ``returns.csv``.

    Raises:
        FileNotFoundError: If the file does not exist
        ParseError: If the column is missing or holds a non-numeric value
        EmptyInput: If the file holds no data rows
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"Input file not found: {path}")
    try:
        frame = pd.read_csv(path, dtype=str, compression="infer", skipinitialspace=True)
    except pd.errors.EmptyDataError as e:
        raise EmptyInput(f"No data rows in {path}") from e
    except pd.errors.ParserError as e:
        raise ParseError(f"Malformed row in {path}: {str(e).strip()}") from e
    if column not in frame.columns:
        raise ParseError(f"Column {column!r} not found in {path}; columns are {list(frame.columns)}", 1)
    if frame.empty:
        raise EmptyInput(f"No data rows in {path}")

    values = pd.to_numeric(frame[column].str.strip(), errors="coerce").to_numpy(dtype=float)
    bad = np.flatnonzero(~np.isfinite(values))
    if bad.size:
        line = int(bad[0]) + 2
        raise ParseError(f"Invalid value {frame[column].iloc[bad[0]]!r} at line {line}", line)
    logger.info(f"Loaded {values.shape[0]} values of {column!r} from {path.name}")
    return values


def assign_sessions(series: PriceSeries) -> PriceSeries:
    """
    Label sessions so that the id increments exactly when the calendar date changes.

    At daily resolution every date is its own session, so no return is ever
    treated as spanning a boundary there.
    """
    dates = series.dates
    changes = (dates[1:] != dates[:-1]).astype(np.int64)
    session_ids = np.concatenate(([0], np.cumsum(changes)))
    return series.with_sessions(session_ids)


def detect_resolution(timestamps: np.ndarray) -> Resolution:
    """Daily when every stamp is at midnight and dates are unique, intraday otherwise."""
    stamps = np.asarray(timestamps, dtype="datetime64[ns]")
    dates = stamps.astype("datetime64[D]")
    at_midnight = np.all(stamps == dates.astype("datetime64[ns]"))
    if at_midnight and np.unique(dates).shape[0] == dates.shape[0]:
        return Resolution.DAILY
    return Resolution.INTRADAY


def _read_raw(path: Path) -> pd.DataFrame:
    try:
        return pd.read_csv(
            path,
            header=None,
            dtype=str,
            compression="infer",
            skip_blank_lines=False,
            skipinitialspace=True,
        )
    except pd.errors.EmptyDataError as e:
        raise EmptyInput(f"No data rows in {path}") from e
    except pd.errors.ParserError as e:
        match = _LINE_PATTERN.search(str(e))
        line = int(match.group(1)) if match else None
        raise ParseError(f"Malformed row in {path}: {str(e).strip()}", line) from e
    except UnicodeDecodeError as e:
        raise ParseError(f"Cannot decode {path}: {str(e)}") from e


def _is_number(value: object) -> bool:
    try:
        float(str(value).strip())
        return True
    except ValueError:
        return False


def _parse_timestamps(column: pd.Series, line_numbers: np.ndarray) -> np.ndarray:
    text = column.astype("string").str.strip()
    try:
        parsed = pd.to_datetime(text, format="ISO8601", errors="coerce")
    except (ValueError, TypeError) as e:
        raise ParseError(f"Cannot parse timestamps: {str(e)}") from e
    if getattr(parsed.dt, "tz", None) is not None:
        parsed = parsed.dt.tz_localize(None)
    bad = np.flatnonzero(parsed.isna().to_numpy())
    if bad.size:
        line = int(line_numbers[bad[0]])
        raise ParseError(f"Invalid timestamp {column.iloc[bad[0]]!r} at line {line}", line)
    return parsed.to_numpy(dtype="datetime64[ns]")


def _parse_prices(column: pd.Series, line_numbers: np.ndarray) -> np.ndarray:
    values = pd.to_numeric(column.astype("string").str.strip(), errors="coerce").to_numpy(dtype=float)
    bad = np.flatnonzero(~np.isfinite(values))
    if bad.size:
        line = int(line_numbers[bad[0]])
        raise ParseError(f"Invalid price {column.iloc[bad[0]]!r} at line {line}", line)
    non_positive = np.flatnonzero(values <= 0)
    if non_positive.size:
        row = int(non_positive[0])
        line = int(line_numbers[row])
        raise NonPositivePrice(f"Non-positive price {values[row]} at line {line}", row, line)
    return values


def _parse_sessions(column: pd.Series, line_numbers: np.ndarray) -> np.ndarray:
    values = pd.to_numeric(column.astype("string").str.strip(), errors="coerce").to_numpy(dtype=float)
    bad = np.flatnonzero(~np.isfinite(values) | (values != np.round(values)))
    if bad.size:
        line = int(line_numbers[bad[0]])
        raise ParseError(f"Invalid session id {column.iloc[bad[0]]!r} at line {line}", line)
    return values.astype(np.int64)
