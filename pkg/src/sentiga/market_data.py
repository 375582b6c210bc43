"""Sentiment and price ingestion, calendar alignment and synthetic data.

Sentiment CSVs carry the raw vendor fields (0-4 intensities and message
counts); :func:`normalize` maps them onto the unit interval.  Price CSVs
carry adjusted daily closes.  :func:`align` joins both onto the price
calendar of a backtest window.
"""

from __future__ import annotations

import csv
import datetime as dt
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import DataError, MalformedRowError

SENTIMENT_COLUMNS = ("date", "i_bull_raw", "i_bear_raw", "n_bull", "n_bear", "n_total")
PRICE_COLUMNS = ("date", "close")
INTENSITY_SCALE = 4.0
SYNTH_NOISE_SIGMA = 0.01


@dataclass(frozen=True)
class RawSentimentRecord:
    date: dt.date
    I_bull: float
    I_bear: float
    n_bull: int
    n_bear: int
    n_total: int

    def __post_init__(self):
        for name in ("I_bull", "I_bear"):
            value = getattr(self, name)
            if not (0.0 <= value <= INTENSITY_SCALE):
                raise DataError(f"{name}={value} outside [0, 4] on {self.date}")
        if self.n_total < 1:
            raise DataError(f"n_total must be >= 1 on {self.date}")
        if self.n_bull < 0 or self.n_bear < 0:
            raise DataError(f"negative message count on {self.date}")
        if self.n_bull + self.n_bear > self.n_total:
            raise DataError(f"n_bull + n_bear exceeds n_total on {self.date}")


@dataclass(frozen=True)
class NormalizedSentimentRecord:
    date: dt.date
    i_bull: float
    i_bear: float
    r_bull: float
    r_bear: float
    n_total: int


@dataclass(frozen=True)
class PriceBar:
    date: dt.date
    close: float

    def __post_init__(self):
        if not self.close > 0:
            raise DataError(f"close must be positive on {self.date}, got {self.close}")


@dataclass(frozen=True, eq=False)
class AlignedAssetSeries:
    """One asset over a backtest window, on the price calendar.

    ``dates`` holds the T+1 trading days, ``returns[k]`` is the simple
    return earned on ``dates[k + 1]`` and ``sentiment[k]`` is the record
    observed on ``dates[k]`` (``None`` on days without one).
    """

    ticker: str
    dates: tuple[dt.date, ...]
    sentiment: tuple[Optional[NormalizedSentimentRecord], ...]
    returns: np.ndarray

    def __post_init__(self):
        if len(self.dates) < 2:
            raise DataError(f"{self.ticker}: need at least two trading days")
        if any(b <= a for a, b in zip(self.dates, self.dates[1:])):
            raise DataError(f"{self.ticker}: dates must be strictly increasing")
        if len(self.sentiment) != len(self.dates):
            raise DataError(f"{self.ticker}: sentiment length does not match dates")
        rets = np.array(self.returns, dtype=float)
        if rets.shape != (len(self.dates) - 1,):
            raise DataError(f"{self.ticker}: returns length must be len(dates) - 1")
        rets.setflags(write=False)
        object.__setattr__(self, "returns", rets)
        object.__setattr__(self, "_features", None)

    @property
    def T(self) -> int:
        return len(self.returns)

    @property
    def return_dates(self) -> tuple[dt.date, ...]:
        return self.dates[1:]

    def features(self) -> "SentimentFeatures":
        """Column view of the sentiment, NaN where no record exists."""
        if self._features is None:
            object.__setattr__(self, "_features", SentimentFeatures.from_records(self.sentiment))
        return self._features


@dataclass(frozen=True, eq=False)
class SentimentFeatures:
    i_bull: np.ndarray
    i_bear: np.ndarray
    r_bull: np.ndarray
    r_bear: np.ndarray

    @classmethod
    def from_records(cls, records: Sequence[Optional[NormalizedSentimentRecord]]):
        cols = np.full((4, len(records)), np.nan)
        for k, rec in enumerate(records):
            if rec is not None:
                cols[:, k] = (rec.i_bull, rec.i_bear, rec.r_bull, rec.r_bear)
        cols.setflags(write=False)
        return cls(*cols)

    def __len__(self):
        return len(self.i_bull)


def _parse_date(text: str) -> dt.date:
    return dt.date.fromisoformat(text.strip())


def _read_rows(path, columns):
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise MalformedRowError(path, 1, "missing header")
        header = [h.strip() for h in header]
        if tuple(header) != columns:
            raise MalformedRowError(path, 1, f"expected header {','.join(columns)}")
        for row in reader:
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(columns):
                raise MalformedRowError(path, reader.line_num, f"expected {len(columns)} fields")
            yield reader.line_num, [cell.strip() for cell in row]


def _check_unique_sorted(records, path):
    records.sort(key=lambda rec: rec.date)
    for a, b in zip(records, records[1:]):
        if a.date == b.date:
            raise DataError(f"{path}: duplicate date {a.date}")
    return records


def parse_sentiment_csv(path) -> list[RawSentimentRecord]:
    records = []
    for line, row in _read_rows(path, SENTIMENT_COLUMNS):
        try:
            date = _parse_date(row[0])
            i_bull, i_bear = float(row[1]), float(row[2])
            n_bull, n_bear, n_total = (int(x) for x in row[3:])
        except ValueError as exc:
            raise MalformedRowError(path, line, str(exc)) from None
        if not (math.isfinite(i_bull) and math.isfinite(i_bear)):
            raise MalformedRowError(path, line, "non-finite intensity")
        try:
            records.append(RawSentimentRecord(date, i_bull, i_bear, n_bull, n_bear, n_total))
        except DataError as exc:
            raise MalformedRowError(path, line, str(exc)) from None
    return _check_unique_sorted(records, path)


def normalize(raw: RawSentimentRecord) -> NormalizedSentimentRecord:
    return NormalizedSentimentRecord(
        date=raw.date,
        i_bull=raw.I_bull / INTENSITY_SCALE,
        i_bear=raw.I_bear / INTENSITY_SCALE,
        r_bull=raw.n_bull / raw.n_total,
        r_bear=raw.n_bear / raw.n_total,
        n_total=raw.n_total,
    )


def parse_price_csv(path) -> list[PriceBar]:
    bars = []
    for line, row in _read_rows(path, PRICE_COLUMNS):
        try:
            date, close = _parse_date(row[0]), float(row[1])
        except ValueError as exc:
            raise MalformedRowError(path, line, str(exc)) from None
        if not math.isfinite(close):
            raise MalformedRowError(path, line, "non-finite close")
        try:
            bars.append(PriceBar(date, close))
        except DataError as exc:
            raise MalformedRowError(path, line, str(exc)) from None
    return _check_unique_sorted(bars, path)


def compute_returns(bars: Sequence[PriceBar]) -> list[tuple[dt.date, float]]:
    if len(bars) < 2:
        raise DataError("need at least two price bars to compute returns")
    return [(b.date, b.close / a.close - 1.0) for a, b in zip(bars, bars[1:])]


def align(
    sentiment: Iterable[NormalizedSentimentRecord],
    prices: Sequence[PriceBar],
    window: tuple[dt.date, dt.date],
    ticker: str = "",
) -> AlignedAssetSeries:
    """Join sentiment onto the trading days of ``prices`` inside ``window``.

    The window is inclusive at both ends.  Sentiment dated on a day with no
    price bar is dropped.
    """
    start, end = window
    bars = sorted((b for b in prices if start <= b.date <= end), key=lambda b: b.date)
    if not bars:
        raise DataError(f"{ticker or 'series'}: no trading days in {start}..{end}")
    if len(bars) < 2:
        raise DataError(f"{ticker or 'series'}: only one trading day in {start}..{end}")
    by_date = {rec.date: rec for rec in sentiment}
    dates = tuple(b.date for b in bars)
    return AlignedAssetSeries(
        ticker=ticker,
        dates=dates,
        sentiment=tuple(by_date.get(d) for d in dates),
        returns=np.array([r for _, r in compute_returns(bars)]),
    )


def _business_days(start: dt.date, count: int) -> list[dt.date]:
    days = []
    day = start
    while len(days) < count:
        if day.weekday() < 5:
            days.append(day)
        day += dt.timedelta(days=1)
    return days


def synth_generate(
    seed: int,
    days: int,
    planted,
    edge: float,
    start: dt.date = dt.date(2010, 1, 1),
    max_messages: int = 20,
) -> tuple[list[RawSentimentRecord], list[PriceBar]]:
    """Synthetic asset whose returns carry ``edge`` while ``planted`` is long.

    Raw intensities are stored at four decimals, the precision written to
    CSV, so positions recomputed from parsed files match the generator's.
    Daily returns are ``edge * long_t + N(0, 0.01)``; the first close is 100.
    """
    from .strategy import decode, simulate

    if days < 30:
        raise DataError("synthetic series needs at least 30 days")
    if not (0.0 <= edge < 0.05):
        raise DataError("edge must lie in [0, 0.05)")
    rng = np.random.default_rng(seed)
    dates = _business_days(start, days)

    raw = []
    for date in dates:
        I_bull, I_bear = np.round(rng.uniform(0.0, INTENSITY_SCALE, size=2), 4)
        n_total = int(rng.integers(1, max_messages + 1))
        n_bull = int(rng.integers(0, n_total + 1))
        n_bear = int(rng.integers(0, n_total - n_bull + 1))
        raw.append(RawSentimentRecord(date, float(I_bull), float(I_bear), n_bull, n_bear, n_total))

    noise = rng.normal(0.0, SYNTH_NOISE_SIGMA, size=days - 1)
    placeholder = AlignedAssetSeries(
        ticker="",
        dates=tuple(dates),
        sentiment=tuple(normalize(r) for r in raw),
        returns=np.zeros(days - 1),
    )
    long_ = simulate(decode(planted), placeholder)[1:]
    rets = np.maximum(noise + edge * long_, -0.99)
    closes = 100.0 * np.cumprod(np.concatenate(([1.0], 1.0 + rets)))
    prices = [PriceBar(d, float(c)) for d, c in zip(dates, closes)]
    return raw, prices


def write_sentiment_csv(path, records: Iterable[RawSentimentRecord]) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SENTIMENT_COLUMNS)
        for r in records:
            w.writerow([r.date.isoformat(), f"{r.I_bull:.4f}", f"{r.I_bear:.4f}", r.n_bull, r.n_bear, r.n_total])


def write_price_csv(path, bars: Iterable[PriceBar]) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PRICE_COLUMNS)
        for b in bars:
            w.writerow([b.date.isoformat(), f"{b.close:.6f}"])
