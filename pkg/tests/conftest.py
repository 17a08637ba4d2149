import numpy as np
import pytest

from slrc.signals import MGParams, downsample, mackey_glass
from slrc.timeseries import TimeSeries


@pytest.fixture(scope="session")
def mg_unit():
    """Mackey-Glass at one sample per model time unit, transient removed."""
    raw = mackey_glass(MGParams(), 40001)
    return downsample(TimeSeries(0.1, raw.values[10000:]), 10, prefilter=False)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
