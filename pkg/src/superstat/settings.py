"""
Settings discovery.

This module resolves the default output directory from the command line, the
environment or a per-user configuration file, and loads JSON configuration
files with field-level error reporting.
"""

import json
import logging
import os
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Union

from .models import ConfigError


logger = logging.getLogger(__name__)


class OutputDirResolver:
    """Resolves the output directory for analysis artifacts."""

    OUT_DIR_ENV_VAR = "SUPERSTAT_OUT_DIR"
    OUT_DIR_CONFIG_FILE = "~/.superstat_out"
    DEFAULT_OUT_DIR = "superstat-out"

    def __init__(self):
        """Initialize the resolver."""
        self.resolved_dir: Optional[Path] = None
        self.source: Optional[str] = None

    def resolve(self, cli_dir: Optional[str] = None) -> Tuple[Path, str]:
        """
        Resolve the output directory in priority order.

        Priority order:
        1. Command line argument
        2. Environment variable
        3. Configuration file (first line)
        4. ``./superstat-out``

        Args:
            cli_dir: Directory given with --out-dir

        Returns:
            Tuple of (directory, source_description)
        """
        if cli_dir:
            return self._remember(Path(cli_dir), "command line argument")

        env_dir = os.environ.get(self.OUT_DIR_ENV_VAR)
        if env_dir and env_dir.strip():
            return self._remember(Path(env_dir.strip()), f"environment variable ({self.OUT_DIR_ENV_VAR})")

        config_dir = self._read_config_file()
        if config_dir:
            return self._remember(Path(config_dir), f"configuration file ({self.OUT_DIR_CONFIG_FILE})")

        return self._remember(Path(self.DEFAULT_OUT_DIR), "default")

    def _remember(self, directory: Path, source: str) -> Tuple[Path, str]:
        directory = directory.expanduser()
        logger.debug(f"Output directory {directory} from {source}")
        self.resolved_dir = directory
        self.source = source
        return directory, source

    def _read_config_file(self) -> Optional[str]:
        """
        Read the directory from the configuration file.

        Returns:
            First non-empty line of the file, or None
        """
        try:
            config_path = Path(self.OUT_DIR_CONFIG_FILE).expanduser()
            if not config_path.is_file():
                logger.debug(f"Configuration file not found: {config_path}")
                return None
            content = config_path.read_text().strip()
            if not content:
                logger.warning(f"Configuration file is empty: {config_path}")
                return None
            return content.splitlines()[0].strip() or None
        except OSError as e:
            logger.warning(f"Error reading configuration file {self.OUT_DIR_CONFIG_FILE}: {str(e)}")
            return None


def load_json_file(path: Union[str, Path]) -> Dict[str, Any]:
    """
    Load a JSON object from a file.

    Raises:
        FileNotFoundError: If the file does not exist
        ConfigError: If the file is not valid JSON or not an object
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"Configuration file not found: {path}")
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise ConfigError(f"Invalid JSON in {path} at line {e.lineno}: {e.msg}") from e
    if not isinstance(data, dict):
        raise ConfigError(f"Configuration in {path} must be a JSON object")
    return data
