"""
Settings Manager Module.

This module handles the run defaults shared by the command line and the
scripts: simulation length, seeds, drift-classifier thresholds and the
report directory. Defaults are kept in a JSON file; user config files use
a flat key=value text format parsed by `parse_key_value_text`.
"""

import json
import logging
import os
from typing import Any, Dict, List, Optional

from src.core.errors import UsageError

logger = logging.getLogger(__name__)


def normalize_key(key: str) -> str:
    """Maps a flag or config key to its canonical form (`sample-stride` -> `sample_stride`)."""
    return key.strip().lstrip("-").replace("-", "_")


def parse_key_value_text(text: str) -> Dict[str, str]:
    """
    Parses flat key=value config text.

    One pair per line; blank lines and everything after `#` are ignored.
    Values stay strings, conversion happens where the key is consumed.

    Raises:
        UsageError: If a non-blank line has no `=` or an empty key.
    """
    values = {}
    for line_number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"config line {line_number}: expected key=value, got '{line}'")
        key, value = line.split("=", 1)
        key = normalize_key(key)
        if not key:
            raise UsageError(f"config line {line_number}: empty key")
        values[key] = value.strip()
    return values


class SettingsManager:
    """
    Manages the run defaults.

    Attributes:
        SETTINGS_FILE (str): The filename for the settings JSON file.
        DEFAULT_SETTINGS (Dict): Built-in defaults, used for any key the file lacks.
        settings_path (str): The full path to the settings file.
        settings (Dict): The current loaded settings.
    """
    SETTINGS_FILE = "settings.json"

    DEFAULT_SETTINGS = {
        "n_slots": 1_000_000,
        "seeds": [1, 2, 3],
        "sample_stride": 100,
        "window_count": 10,
        "drift_threshold": 1e-4,
        "exclusion_band": 0.01,
        "resolution": 200,
        "workers": 1,
        "output_dir": None,
    }

    def __init__(self, settings_dir: str = "."):
        """
        Initializes the SettingsManager.

        Args:
            settings_dir (str): The directory holding the settings file. Defaults to current directory.
        """
        self.settings_path = os.path.join(settings_dir, self.SETTINGS_FILE)
        self.settings = self.load_settings()

    def load_settings(self) -> Dict[str, Any]:
        """
        Loads settings from the JSON file, layered over the built-in defaults.

        Returns:
            Dict[str, Any]: The merged settings, or the defaults if the file doesn't exist or is invalid.
        """
        settings = dict(self.DEFAULT_SETTINGS)
        if not os.path.exists(self.settings_path):
            return settings

        try:
            with open(self.settings_path, 'r') as f:
                loaded = json.load(f)
        except (json.JSONDecodeError, IOError) as e:
            logger.warning("ignoring unreadable settings file %s: %s", self.settings_path, e)
            return settings

        if not isinstance(loaded, dict):
            logger.warning("ignoring settings file %s: not a JSON object", self.settings_path)
            return settings
        settings.update({normalize_key(k): v for k, v in loaded.items()})
        return settings

    def save_settings(self):
        """
        Saves the current settings to the JSON file.
        """
        try:
            with open(self.settings_path, 'w') as f:
                json.dump(self.settings, f, indent=4)
        except IOError as e:
            logger.error("could not save settings to %s: %s", self.settings_path, e)

    def get(self, key: str) -> Any:
        return self.settings.get(key, self.DEFAULT_SETTINGS.get(key))

    def get_n_slots(self) -> int:
        return int(self.get("n_slots"))

    def get_seeds(self) -> List[int]:
        """Returns the seeds used for majority voting."""
        return [int(s) for s in self.get("seeds")]

    def get_sample_stride(self) -> int:
        return int(self.get("sample_stride"))

    def get_window_count(self) -> int:
        return int(self.get("window_count"))

    def get_drift_threshold(self) -> float:
        return float(self.get("drift_threshold"))

    def get_exclusion_band(self) -> float:
        return float(self.get("exclusion_band"))

    def get_resolution(self) -> int:
        return int(self.get("resolution"))

    def get_workers(self) -> int:
        return int(self.get("workers"))

    def get_output_dir(self) -> Optional[str]:
        """Returns the configured report directory, or None to use the environment/default."""
        return self.get("output_dir")

    def set_value(self, key: str, value: Any):
        """Updates one setting and saves."""
        self.settings[normalize_key(key)] = value
        self.save_settings()
