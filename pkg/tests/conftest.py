import datetime as dt
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from expert_aggregation.core import ForecastPanel, StreamKey  # noqa: E402


def make_panel(X, y, names=None, key=None, start=dt.date(2021, 1, 1)):
    X = np.asarray(X, dtype=float)
    names = names or tuple(f"e{i}" for i in range(X.shape[1]))
    dates = tuple(start + dt.timedelta(days=i) for i in range(X.shape[0]))
    return ForecastPanel(tuple(names), dates, X, np.asarray(y, dtype=float), key)


def random_panel(rng, T=50, N=3, key=None):
    y = rng.normal(10.0, 3.0, T)
    X = y[:, None] + rng.normal(0.0, 1.0, (T, N)) + rng.normal(0.0, 1.0, N)
    return make_panel(X, y, key=key)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def key():
    return StreamKey("S1", 24)
