"""
Unit tests for price file ingestion.
"""

import gzip
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from superstat.ingest import (
    DuplicateTimestamp,
    EmptyInput,
    IngestError,
    NonPositivePrice,
    ParseError,
    assign_sessions,
    detect_resolution,
    load_column,
    load_csv,
)
from superstat.models import IngestConfig, PriceSeries, Resolution


def _write(temp_dir, name, text):
    path = Path(temp_dir) / name
    path.write_text(text)
    return path


class TestLoadCsv:
    """Test cases for load_csv."""

    def test_intraday_with_header(self, intraday_price_file):
        """Test loading minute data with a header row."""
        series = load_csv(intraday_price_file)

        assert len(series) == 120
        assert series.resolution is Resolution.INTRADAY
        assert series.session_count == 2
        assert list(series.session_lengths()) == [60, 60]
        assert series.source_label == "intraday.csv"

    def test_daily_without_header(self, daily_price_file):
        """Test loading daily closes with no header."""
        series = load_csv(daily_price_file)

        assert len(series) == 30
        assert series.resolution is Resolution.DAILY
        assert series.session_count == 30

    def test_config_overrides(self, daily_price_file):
        """Test explicit resolution and label."""
        config = IngestConfig(resolution="intraday", has_header=False, source_label="spx")
        series = load_csv(daily_price_file, config)

        assert series.resolution is Resolution.INTRADAY
        assert series.source_label == "spx"

    def test_rows_sorted(self, temp_dir):
        """Test that rows are put in timestamp order."""
        path = _write(temp_dir, "unsorted.csv", "2024-01-03,2.0\n2024-01-02,1.0\n2024-01-04,3.0\n")
        series = load_csv(path)

        assert list(series.prices) == [1.0, 2.0, 3.0]

    def test_gzip_input(self, temp_dir):
        """Test that gzip files are decompressed."""
        path = Path(temp_dir) / "prices.csv.gz"
        with gzip.open(path, "wt") as f:
            f.write("timestamp,price\n2024-01-02,10.0\n2024-01-03,11.0\n")

        series = load_csv(path)

        assert list(series.prices) == [10.0, 11.0]

    def test_session_column(self, temp_dir):
        """Test that a third column supplies session ids."""
        text = (
            "timestamp,price,session\n"
            "2024-01-02 09:30,1.0,0\n"
            "2024-01-02 09:31,1.1,0\n"
            "2024-01-02 09:32,1.2,1\n"
        )
        series = load_csv(_write(temp_dir, "sessions.csv", text))

        assert list(series.session_ids) == [0, 0, 1]

    def test_decreasing_session_column(self, temp_dir):
        """Test that sessions may not go backwards in time."""
        text = "2024-01-02 09:30,1.0,1\n2024-01-02 09:31,1.1,0\n"

        with pytest.raises(IngestError, match="non-decreasing"):
            load_csv(_write(temp_dir, "bad_sessions.csv", text))

    def test_missing_file(self, temp_dir):
        """Test that a missing file raises FileNotFoundError."""
        with pytest.raises(FileNotFoundError, match="Input file not found"):
            load_csv(Path(temp_dir) / "missing.csv")

    def test_empty_file(self, temp_dir):
        """Test that an empty file raises EmptyInput."""
        with pytest.raises(EmptyInput):
            load_csv(_write(temp_dir, "empty.csv", ""))

    def test_header_only(self, temp_dir):
        """Test that a header with no rows raises EmptyInput."""
        with pytest.raises(EmptyInput, match="No data rows"):
            load_csv(_write(temp_dir, "header.csv", "timestamp,price\n"))

    def test_invalid_price_line_number(self, temp_dir):
        """Test that parse errors report the file line."""
        text = "timestamp,price\n2024-01-02 09:30,1.0\n2024-01-02 09:31,abc\n"

        with pytest.raises(ParseError, match="line 3") as excinfo:
            load_csv(_write(temp_dir, "bad_price.csv", text))

        assert excinfo.value.line_number == 3

    def test_invalid_timestamp(self, temp_dir):
        """Test that unparseable timestamps are reported."""
        text = "2024-01-02,1.0\nyesterday,2.0\n"

        with pytest.raises(ParseError, match="Invalid timestamp") as excinfo:
            load_csv(_write(temp_dir, "bad_stamp.csv", text))

        assert excinfo.value.line_number == 2

    def test_non_positive_price_after_blank_line(self, temp_dir):
        """Test that blank lines do not shift reported line numbers."""
        text = "2024-01-02,1.0\n\n2024-01-03,-2.0\n"

        with pytest.raises(NonPositivePrice) as excinfo:
            load_csv(_write(temp_dir, "negative.csv", text))

        assert excinfo.value.line_number == 3
        assert excinfo.value.row_index == 1

    def test_zero_price(self, temp_dir):
        """Test that a zero price is rejected."""
        with pytest.raises(NonPositivePrice, match="Non-positive price"):
            load_csv(_write(temp_dir, "zero.csv", "2024-01-02,0\n2024-01-03,1.0\n"))

    def test_duplicate_timestamp(self, temp_dir):
        """Test that repeated timestamps are rejected."""
        text = "2024-01-02,1.0\n2024-01-02,1.5\n"

        with pytest.raises(DuplicateTimestamp) as excinfo:
            load_csv(_write(temp_dir, "dup.csv", text))

        assert excinfo.value.timestamp.startswith("2024-01-02")
        assert [r.price for r in excinfo.value.records] == [1.0, 1.5]
        assert "prices 1 and 1.5" in str(excinfo.value)

    def test_too_many_columns(self, temp_dir):
        """Test that extra columns are rejected."""
        with pytest.raises(ParseError, match="at most 3 columns"):
            load_csv(_write(temp_dir, "wide.csv", "2024-01-02,1.0,0,x\n"))


class TestLoadColumn:
    """Test cases for load_column."""

    def test_reads_named_column(self, temp_dir):
        """Test reading one column of a headed table."""
        path = _write(temp_dir, "betas.csv", "window,beta\n0,1.5\n1,2.5\n")

        assert list(load_column(path, "beta")) == [1.5, 2.5]

    def test_missing_column(self, temp_dir):
        """Test that a missing column is a parse error on line 1."""
        path = _write(temp_dir, "betas.csv", "window,beta\n0,1.5\n")

        with pytest.raises(ParseError, match="not found") as excinfo:
            load_column(path, "u")

        assert excinfo.value.line_number == 1

    def test_non_numeric_value(self, temp_dir):
        """Test that a bad value reports its line."""
        path = _write(temp_dir, "u.csv", "u\n0.1\nx\n")

        with pytest.raises(ParseError) as excinfo:
            load_column(path, "u")

        assert excinfo.value.line_number == 3

    def test_no_rows(self, temp_dir):
        """Test that a header-only table is empty input."""
        with pytest.raises(EmptyInput):
            load_column(_write(temp_dir, "u.csv", "u\n"), "u")


class TestSessions:
    """Test cases for session labelling and resolution detection."""

    def test_assign_sessions_by_date(self):
        """Test that the session id increments when the date changes."""
        stamps = pd.to_datetime(
            ["2024-01-02 15:59", "2024-01-02 16:00", "2024-01-03 09:30", "2024-01-05 09:30"]
        ).to_numpy()
        series = PriceSeries(stamps, [1.0, 1.0, 1.0, 1.0], np.zeros(4, dtype=np.int64))

        assert list(assign_sessions(series).session_ids) == [0, 0, 1, 2]

    def test_assign_sessions_idempotent(self):
        """Test that labelling an already labelled series changes nothing."""
        stamps = pd.to_datetime(
            ["2024-01-02 09:30", "2024-01-02 12:00", "2024-01-03 09:30", "2024-01-03 10:00"]
        ).to_numpy()
        once = assign_sessions(PriceSeries(stamps, [1.0, 1.1, 1.2, 1.3], np.zeros(4, dtype=np.int64)))
        twice = assign_sessions(once)

        assert np.array_equal(twice.session_ids, once.session_ids)
        assert np.array_equal(twice.prices, once.prices)

    def test_detect_daily(self):
        """Test that midnight stamps on distinct dates are daily."""
        stamps = pd.date_range("2024-01-01", periods=5, freq="D").to_numpy()

        assert detect_resolution(stamps) is Resolution.DAILY

    def test_detect_intraday(self):
        """Test that clock times mark intraday data."""
        stamps = pd.date_range("2024-01-01 09:30", periods=5, freq="min").to_numpy()

        assert detect_resolution(stamps) is Resolution.INTRADAY
