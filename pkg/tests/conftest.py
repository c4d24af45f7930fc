"""Shared fixtures and the --runslow option."""
import sys
from pathlib import Path

import numpy as np
import pytest

ROOT = Path(__file__).resolve().parent.parent
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

from core import ParamVector, SiteSet  # noqa: E402
from study.engine import simulate_field  # noqa: E402


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run desk-scale acceptance studies")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running acceptance study")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


@pytest.fixture
def theta():
    return ParamVector(tau2=0.1, sigma2=1.0, range=0.1)


@pytest.fixture
def small_sites(rng, theta):
    """40 uniform sites on the unit square with exponential data."""
    sites = SiteSet(rng.uniform(0.0, 1.0, size=(40, 2)))
    return simulate_field(sites, "exponential", ParamVector(0.1, 1.0, 0.3), rng)
