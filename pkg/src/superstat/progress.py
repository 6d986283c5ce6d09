"""
Progress reporting for superstat runs.

This module provides the ProgressReporter class that prints stage headers,
a progress bar for long scans and the final run summary.
"""

import os
import sys
import time
import logging
from dataclasses import dataclass
from datetime import datetime, timedelta
from typing import Callable, Dict, List, Optional, TextIO

from .models import AnalysisReport


logger = logging.getLogger(__name__)


@dataclass
class ProgressState:
    """Current state of progress tracking."""

    total_items: int = 0
    completed_items: int = 0
    current_item: str = ""
    start_time: Optional[datetime] = None


class ProgressReporter:
    """Handles progress output and the final summary of a run."""

    def __init__(self, verbose: bool = True, use_colors: bool = True, stream: Optional[TextIO] = None):
        """
        Initialize the progress reporter.

        Args:
            verbose: Whether to print anything at all
            use_colors: Whether to use colored output (if supported)
            stream: Output stream, stdout by default
        """
        self.verbose = verbose
        self.stream = stream or sys.stdout
        self.use_colors = use_colors and self._supports_color()
        self.state = ProgressState()
        self.warnings: List[str] = []
        self.run_start: Optional[datetime] = None
        self._last_update_time = 0.0
        self._update_interval = 0.5

        self.colors = {
            name: (code if self.use_colors else "")
            for name, code in {
                "green": "\033[92m",
                "red": "\033[91m",
                "yellow": "\033[93m",
                "blue": "\033[94m",
                "reset": "\033[0m",
                "bold": "\033[1m",
            }.items()
        }

    def start_run(self, title: str) -> None:
        """Print the run header and start the clock."""
        self.run_start = datetime.now()
        self._print(f"\n{self.colors['bold']}{title}{self.colors['reset']}")
        self._print("-" * 50)

    def start_stage(self, name: str, total_items: int = 0) -> None:
        """
        Start a stage, optionally with a known number of steps.

        Args:
            name: Stage name
            total_items: Number of steps for the progress bar (0 for none)
        """
        self.state = ProgressState(total_items=total_items, start_time=datetime.now())
        self._last_update_time = 0.0
        self._print(f"{self.colors['blue']}>{self.colors['reset']} {name}")

    def update_progress(self, current_item: str, completed: Optional[int] = None) -> None:
        """
        Update progress with the current step.

        Args:
            current_item: Description of the current step
            completed: Explicit completed count (auto-increments if None)
        """
        if completed is not None:
            self.state.completed_items = completed
        else:
            self.state.completed_items += 1
        self.state.current_item = current_item

        current_time = time.time()
        finished = self.state.completed_items >= self.state.total_items
        if not finished and current_time - self._last_update_time < self._update_interval:
            return
        self._last_update_time = current_time
        if self.verbose:
            self._display_progress()
            if finished:
                print("", file=self.stream)

    def report_warning(self, item: str, warning: str) -> None:
        """Print a warning for a stage; warnings are kept for the final summary."""
        self.warnings.append(f"{item}: {warning}")
        self._print(f"{self.colors['yellow']}WARNING:{self.colors['reset']} {item}: {warning}")

    def report_success(self, item: str, message: str = "") -> None:
        """Print the outcome of a stage."""
        line = f"{self.colors['green']}✓{self.colors['reset']} {item}"
        if message:
            line += f": {message}"
        self._print(line)

    def finish_run(self, report: Optional[AnalysisReport], out_dir: str, stats: Dict[str, int]) -> None:
        """
        Print the final summary.

        Args:
            report: Analysis report, or None for runs without one
            out_dir: Output directory
            stats: File count and total size from ArtifactWriter.get_directory_stats
        """
        if not self.verbose:
            return
        elapsed = datetime.now() - self.run_start if self.run_start else timedelta(0)

        print("\n" + "=" * 60, file=self.stream)
        print(f"{self.colors['bold']}ANALYSIS COMPLETE{self.colors['reset']}", file=self.stream)
        print("=" * 60, file=self.stream)
        if report is not None:
            window = report.window.get("T")
            print(f"Returns analyzed: {self._blue(report.input_summary.get('return_count', 0))}", file=self.stream)
            print(f"Optimal window T: {self._blue(window)}", file=self.stream)
            print(f"Betas extracted: {self._blue(report.beta_stats.get('count', 0))}", file=self.stream)
            print(
                f"Preferred model: {self.colors['green']}{report.preferred_model}{self.colors['reset']}",
                file=self.stream,
            )
            if report.kappa:
                print(f"Fitted kappa: {self._blue(report.kappa.get('kappa'))}", file=self.stream)
        print(
            f"Artifacts written: {self._blue(stats.get('total_files', 0))} "
            f"({self._format_size(stats.get('total_size', 0))}) in {out_dir}",
            file=self.stream,
        )
        print(f"Total time: {self._blue(self._format_duration(elapsed))}", file=self.stream)

        problems = report.errors if report is not None else self.warnings
        title = "Optional steps that failed" if report is not None else "Warnings"
        if problems:
            print(f"\n{self.colors['red']}{title}:{self.colors['reset']}", file=self.stream)
            for i, error in enumerate(problems[:10], 1):
                print(f"  {i}. {error}", file=self.stream)
            if len(problems) > 10:
                print(f"  ... and {len(problems) - 10} more", file=self.stream)
        print("=" * 60, file=self.stream)

    def create_callback(self) -> Callable[[int, int, str], None]:
        """
        Create a callback for the scans in the numerical modules.

        Returns:
            Callback ``(current, total, item_name)``
        """

        def progress_callback(current: int, total: int, item_name: str) -> None:
            self.state.total_items = total
            self.update_progress(item_name, current)

        return progress_callback

    def _display_progress(self) -> None:
        if self.state.total_items == 0:
            return
        percentage = 100.0 * self.state.completed_items / self.state.total_items
        bar_width = 30
        filled_width = int(bar_width * percentage / 100)
        bar = "█" * filled_width + "░" * (bar_width - filled_width)

        current_item = self.state.current_item
        if len(current_item) > 40:
            current_item = current_item[:37] + "..."
        line = (
            f"\r{self.colors['blue']}[{bar}]{self.colors['reset']} "
            f"{percentage:5.1f}% ({self.state.completed_items}/{self.state.total_items}) | {current_item}"
        )
        print(" " * 100, end="\r", file=self.stream)
        print(line, end="", flush=True, file=self.stream)

    def _print(self, text: str) -> None:
        if self.verbose:
            print(text, file=self.stream)

    def _blue(self, value: object) -> str:
        return f"{self.colors['blue']}{value}{self.colors['reset']}"

    def _format_size(self, size: int) -> str:
        if size < 1024:
            return f"{size} B"
        if size < 1024 * 1024:
            return f"{size / 1024:.1f} KB"
        return f"{size / (1024 * 1024):.1f} MB"

    def _format_duration(self, duration: timedelta) -> str:
        total_seconds = int(duration.total_seconds())
        hours, remainder = divmod(total_seconds, 3600)
        minutes, seconds = divmod(remainder, 60)
        if hours > 0:
            return f"{hours:02d}:{minutes:02d}:{seconds:02d}"
        return f"{minutes:02d}:{seconds:02d}"

    def _supports_color(self) -> bool:
        return (
            hasattr(self.stream, "isatty")
            and self.stream.isatty()
            and os.environ.get("TERM", "dumb") != "dumb"
        )
