"""Shared fixtures for testing the Ansteckung application."""

import sys
from pathlib import Path

# Add the project root to the Python path BEFORE any other imports
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

import numpy as np
import pytest
import shutil
import tempfile

from utils.config import config
from utils.logging_setup import configure_logging


def pytest_addoption(parser):
    parser.addoption(
        "--run-slow",
        action="store_true",
        default=False,
        help="Run the statistical replicate studies at full size"
    )


def pytest_collection_modifyitems(config, items):
    if config.getoption("--run-slow"):
        return
    skip_slow = pytest.mark.skip(reason="replicate study, use --run-slow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture(scope="session", autouse=True)
def quiet_logging():
    """Tests never write log files."""
    config.log_to_file = False
    configure_logging(level="WARNING", log_to_file=False)


@pytest.fixture
def temp_dir():
    """Create a temporary output directory for testing."""
    path = tempfile.mkdtemp()
    yield Path(path)
    shutil.rmtree(path)


@pytest.fixture
def unit_grid():
    """One unit-square tile, one interval (0, 100], offset 1."""
    from Ansteckung.grid import regular_grid
    return regular_grid(1, 1, 1.0, 100.0, 1, offset=1.0, populations=[100000.0])


@pytest.fixture
def homogeneous_history():
    """100 events on the unit square at distinct times in (0, 100]."""
    from Ansteckung.events import EventHistory
    rng = np.random.default_rng(7)
    times = np.sort(rng.uniform(0.0, 100.0, 100))
    xy = rng.uniform(0.0, 1.0, (100, 2))
    return EventHistory(times, xy, np.zeros(100, dtype=np.int64), ["1"])


@pytest.fixture
def endemic_spec():
    from Ansteckung.model_spec import ModelSpec
    return ModelSpec(types=["1"], epidemic=False)


@pytest.fixture
def square_grid():
    """3 x 3 tiles of 10 km, ten 10-day intervals, with a covariate and populations."""
    from Ansteckung.grid import regular_grid
    covariate = np.linspace(-1.0, 1.0, 90).reshape(10, 9)
    return regular_grid(3, 3, 10.0, 10.0, 10, offset=0.01, covariates={"density": covariate},
                        populations=[50000.0] * 9)


@pytest.fixture
def two_type_spec():
    from Ansteckung.interaction import InteractionSpec, SpatialFamily, TemporalFamily
    from Ansteckung.model_spec import ModelSpec
    return ModelSpec(
        types=["B", "C"],
        endemic_terms=["density"],
        epidemic=True,
        epidemic_terms=["type", "age"],
        interaction=InteractionSpec(temporal=TemporalFamily.EXPONENTIAL, spatial=SpatialFamily.GAUSSIAN, eps=10.0, delta=5.0),
        seed=11,
    )


@pytest.fixture
def two_type_history():
    """Clustered two-type events with an age mark on the 30 km square."""
    from Ansteckung.events import EventHistory
    rng = np.random.default_rng(3)
    n = 60
    times = np.sort(rng.uniform(0.5, 99.5, n))
    centers = np.array([[5.0, 5.0], [15.0, 25.0], [25.0, 12.0]])
    xy = centers[rng.integers(0, 3, n)] + rng.normal(0.0, 2.0, (n, 2))
    xy = np.clip(xy, 0.1, 29.9)
    types = rng.integers(0, 2, n)
    age = rng.uniform(0.0, 40.0, n).round()
    return EventHistory(times, xy, types, ["B", "C"], marks={"age": age})
