import pytest
import os
import sys
import shutil
import tempfile

# Ensure src is in path
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from src.core.model import SystemParams
from src.core.settings_manager import SettingsManager

def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False,
                     help="Run the long Monte Carlo tests (10^6 slots per run)")

def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long Monte Carlo run, needs --runslow")

def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)

@pytest.fixture
def temp_dir():
    """
    Creates a temporary directory for testing.
    """
    temp_dir = tempfile.mkdtemp()
    yield temp_dir
    shutil.rmtree(temp_dir)

@pytest.fixture
def example_params():
    """
    The numerical illustration parameter set: q1=0.2, q2=0.3, p13=0.5, p12=0.9, p23=0.8.
    """
    return SystemParams.from_values(p13=0.5, p12=0.9, p23=0.8, q1=0.2, q2=0.3)

@pytest.fixture
def settings(temp_dir):
    """
    Creates a SettingsManager with a temporary config directory.
    """
    config_dir = os.path.join(temp_dir, "config")
    os.makedirs(config_dir)
    return SettingsManager(config_dir)
