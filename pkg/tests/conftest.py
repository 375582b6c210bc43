import datetime as dt

import numpy as np
import pytest

from sentiga.market_data import AlignedAssetSeries, NormalizedSentimentRecord, align, normalize, synth_generate
from sentiga.report import planted_chromosome

ACCEPTANCE_LINES = []


def day(k: int) -> dt.date:
    return dt.date(2011, 1, 3) + dt.timedelta(days=k)


def make_series(returns, sentiment=None, ticker="TST") -> AlignedAssetSeries:
    """Series with ``len(returns) + 1`` consecutive days; sentiment rows are
    (i_bull, i_bear, r_bull, r_bear) tuples or None."""
    n = len(returns) + 1
    dates = tuple(day(k) for k in range(n))
    if sentiment is None:
        sentiment = [None] * n
    recs = tuple(
        None if s is None else NormalizedSentimentRecord(dates[k], *s, n_total=1)
        for k, s in enumerate(sentiment)
    )
    return AlignedAssetSeries(ticker, dates, recs, np.asarray(returns, dtype=float))


def synth_series(seed: int, days: int = 250, edge: float = 0.003, planted=None):
    rng = np.random.default_rng(seed)
    planted = planted or planted_chromosome(rng)
    raw, prices = synth_generate(seed, days, planted, edge)
    series = align([normalize(r) for r in raw], prices, (prices[0].date, prices[-1].date), ticker=f"S{seed}")
    return series, planted


@pytest.fixture(scope="session")
def synth_suite():
    """Ten seeded 250-day planted-rule assets with edge 0.003."""
    return [synth_series(seed) for seed in range(10)]


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
