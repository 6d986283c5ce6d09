"""
Writing of analysis artifacts.

This module provides the ArtifactWriter class that manages the output
directory, writes CSV tables and JSON reports, and removes everything a run
wrote when the run fails.
"""

import json
import logging
import math
import os
import shutil
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import numpy as np
import pandas as pd

from .models import AnalysisReport, SynthOutput, finite_or_none


logger = logging.getLogger(__name__)

CSV_FLOAT_FORMAT = "%.12g"


class ArtifactError(Exception):
    """Exception raised when artifacts cannot be written."""

    def __init__(self, message: str, path: Optional[str] = None):
        super().__init__(message)
        self.path = path


class ArtifactWriter:
    """Writes the files of one run into an output directory."""

    def __init__(self, base_path: Union[str, Path], overwrite_existing: bool = True):
        """
        Initialize the writer and create the output directory.

        Args:
            base_path: Output directory
            overwrite_existing: Whether to replace files left by an earlier run

        Raises:
            ArtifactError: If the directory cannot be created
        """
        self.base_path = Path(base_path)
        self.overwrite_existing = overwrite_existing
        self.written: List[Path] = []
        self._backups: Dict[Path, Path] = {}
        self._created_dir = not self.base_path.exists()

        try:
            self.base_path.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            raise ArtifactError(f"Cannot create output directory {self.base_path}: {str(e)}", str(self.base_path)) from e
        if not os.access(self.base_path, os.W_OK):
            raise ArtifactError(f"Output directory is not writable: {self.base_path}", str(self.base_path))

        logger.debug(f"ArtifactWriter initialized with base path: {self.base_path}")

    def path_for(self, name: str) -> Path:
        """Full path of an artifact inside the output directory."""
        return self.base_path / sanitize_filename(name)

    def write_frame(self, name: str, frame: pd.DataFrame) -> Path:
        """
        Write a table as CSV without the index.

        Args:
            name: File name, e.g. ``kurtosis_scan.csv``
            frame: Table to write

        Returns:
            Path of the written file
        """
        path = self._prepare(name)
        try:
            frame.to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT, lineterminator="\n")
        except OSError as e:
            raise ArtifactError(f"Failed to write {path}: {str(e)}", str(path)) from e
        return self._record(path)

    def write_json(self, name: str, data: Dict[str, Any]) -> Path:
        """
        Write a JSON document with sorted keys; non-finite numbers become null.

        Returns:
            Path of the written file
        """
        path = self._prepare(name)
        try:
            text = json.dumps(json_ready(data), indent=2, sort_keys=True, allow_nan=False)
            path.write_text(text + "\n")
        except (OSError, TypeError, ValueError) as e:
            raise ArtifactError(f"Failed to write {path}: {str(e)}", str(path)) from e
        return self._record(path)

    def write_report(self, report: AnalysisReport, name: str = "report.json") -> Path:
        """Write an analysis report."""
        return self.write_json(name, report.to_dict())

    def write_synth_output(self, output: SynthOutput, prices: Optional[pd.DataFrame] = None) -> List[Path]:
        """
        Write simulated returns, the beta sidecar and optionally the price path.

        Args:
            output: Simulation result
            prices: Table with columns timestamp, price, session

        Returns:
            Paths of the written files
        """
        ticks = np.arange(len(output))
        paths = [
            self.write_frame("returns.csv", pd.DataFrame({"tick": ticks, "u": output.u_series})),
            self.write_frame("beta_truth.csv", pd.DataFrame({"tick": ticks, "beta": output.beta_truth})),
        ]
        if prices is not None:
            paths.append(self.write_frame("prices.csv", prices))
        return paths

    def commit(self) -> None:
        """Keep the written files and drop the backups of replaced ones."""
        for backup in self._backups.values():
            try:
                backup.unlink()
            except OSError as e:
                logger.debug(f"Could not remove backup {backup}: {str(e)}")
        self._backups.clear()

    def rollback(self) -> int:
        """
        Remove every file written by this writer and restore replaced ones.

        Returns:
            Number of files removed
        """
        removed = 0
        for path in reversed(self.written):
            try:
                path.unlink()
                removed += 1
            except FileNotFoundError:
                continue
            except OSError as e:
                logger.warning(f"Could not remove {path}: {str(e)}")
        for original, backup in self._backups.items():
            try:
                shutil.move(str(backup), str(original))
            except OSError as e:
                logger.warning(f"Could not restore {original} from {backup}: {str(e)}")
        self._backups.clear()
        self.written.clear()

        if self._created_dir:
            try:
                self.base_path.rmdir()
            except OSError:
                pass
        logger.info(f"Rolled back {removed} partial outputs in {self.base_path}")
        return removed

    def get_directory_stats(self) -> Dict[str, int]:
        """File count and total size of the artifacts written so far."""
        stats = {"total_files": 0, "total_size": 0}
        for path in self.written:
            try:
                stats["total_size"] += path.stat().st_size
                stats["total_files"] += 1
            except OSError:
                continue
        return stats

    def _prepare(self, name: str) -> Path:
        path = self.path_for(name)
        if path.exists() and path not in self.written:
            if not self.overwrite_existing:
                raise ArtifactError(f"File already exists and overwrite is disabled: {path}", str(path))
            backup = path.with_name(path.name + ".backup")
            counter = 1
            while backup.exists():
                backup = path.with_name(f"{path.name}.backup.{counter}")
                counter += 1
            try:
                shutil.move(str(path), str(backup))
            except OSError as e:
                raise ArtifactError(f"Cannot replace existing file {path}: {str(e)}", str(path)) from e
            self._backups[path] = backup
            logger.debug(f"Moved existing {path} to {backup}")
        return path

    def _record(self, path: Path) -> Path:
        if path not in self.written:
            self.written.append(path)
        logger.debug(f"Wrote {path}")
        return path


def json_ready(obj: Any) -> Any:
    """Convert numpy values and tuples to JSON types, mapping non-finite floats to None."""
    if isinstance(obj, dict):
        return {str(key): json_ready(value) for key, value in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [json_ready(value) for value in obj]
    if isinstance(obj, np.ndarray):
        return [json_ready(value) for value in obj.tolist()]
    if isinstance(obj, np.bool_):
        return bool(obj)
    if hasattr(obj, "value") and isinstance(getattr(obj, "value"), str):
        return obj.value
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return finite_or_none(obj)


def sanitize_filename(filename: str) -> str:
    """
    Sanitize a file name for file system compatibility.

    Args:
        filename: Original file name

    Returns:
        Name with path separators, reserved characters and spaces replaced by dashes
    """
    sanitized = filename
    for char in '<>:"/\\|?* ':
        sanitized = sanitized.replace(char, "-")
    sanitized = "".join(char for char in sanitized if ord(char) >= 32)
    while "--" in sanitized:
        sanitized = sanitized.replace("--", "-")
    sanitized = sanitized.strip("- ")
    return sanitized or "untitled"
