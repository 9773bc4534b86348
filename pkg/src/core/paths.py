import os

from src.core.errors import ReportWriteError

# src/core/paths.py -> src/core -> src -> root
ROOT_DIR = os.path.dirname(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

CONFIG_DIR = os.path.join(ROOT_DIR, "config")

# Reports land here unless a command names an explicit output path.
OUTPUT_DIR_ENV = "RELAY_REGION_OUTPUT_DIR"
OUTPUT_DIR = os.environ.get(OUTPUT_DIR_ENV) or os.path.join(ROOT_DIR, "output")


def get_config_path(config_name):
    """Returns the absolute path for a config file in the config directory."""
    return os.path.join(CONFIG_DIR, config_name)


def get_output_dir():
    """
    Returns the directory reports are written to.

    The environment variable is read on every call so a test or a wrapper
    script can redirect output without re-importing this module.
    """
    return os.environ.get(OUTPUT_DIR_ENV) or OUTPUT_DIR


def get_output_path(file_name, output_dir=None):
    """Returns the absolute path for a report file, creating its directory."""
    directory = output_dir or get_output_dir()
    try:
        os.makedirs(directory, exist_ok=True)
    except OSError as e:
        raise ReportWriteError(f"cannot create output directory {directory}: {e}") from e
    return os.path.join(directory, file_name)
