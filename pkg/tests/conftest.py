import datetime as dt
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from stockbot.market_data import OhlcBar, PriceSeries  # noqa: E402


def make_series(mid, symbol="SYN", start=dt.date(2015, 1, 1), spread=0.01):
    """Series whose mid equals ``mid`` exactly (high/low symmetric around it)."""
    bars = []
    for i, m in enumerate(np.asarray(mid, dtype=float)):
        half = spread * m
        bars.append(OhlcBar(start + dt.timedelta(days=i), m, m + half, m - half, m))
    return PriceSeries(symbol, tuple(bars))


def gbm_prices(rng, n, start=100.0, drift=0.0003, vol=0.015):
    return start * np.exp(np.cumsum(rng.normal(drift, vol, n)))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_csv(tmp_path):
    text = (
        "Date,Open,High,Low,Close\n"
        "2020-01-02,10,12,8,11\n"
        "2020-01-03,11,20,10,19\n"
    )
    p = tmp_path / "tiny.csv"
    p.write_text(text)
    return p
