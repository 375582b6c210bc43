"""Pipeline commands and the files they read and write.

Output layout under the run directory::

    manifest.json                      synth: tickers and planted rules
    <TICKER>_sentiment.csv / _prices.csv
    strategies/<TICKER>.json           optimize: best rule + in-sample metrics
    logs/<TICKER>_ga.csv               optimize: per-generation trajectory
    optimize_summary.csv               optimize: long-only vs strategy r, sigma, s
    backtest_<TICKER>.json             backtest: train and test reports
    comparison.json, risk_metrics.csv, wealth_curves.csv,
    markowitz_weights.csv, in_sample.csv                  compare

Every file is a deterministic function of the inputs and the seed.
"""

from __future__ import annotations

import csv
import datetime as dt
import hashlib
import json
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from . import market_data as md
from . import metrics
from .errors import DataError
from .evolution import GAConfig, evolve
from .metrics import MetricsReport, full_report
from .portfolio import (
    QPProblem,
    ReturnPanel,
    compose_equal_weight,
    estimate_inputs,
    one_over_n,
    portfolio_returns,
    solve_markowitz,
)
from .strategy import VALID_FLAGS, Chromosome, decode, simulate, strategy_returns

log = logging.getLogger(__name__)

DEFAULT_TRAIN = (dt.date(2010, 1, 1), dt.date(2013, 12, 31))
DEFAULT_TEST = (dt.date(2014, 1, 1), dt.date(2014, 12, 31))

RISK_ROWS = (
    ("Semi Deviation", "semi_dev"),
    ("Downside Deviation (Rf=0%)", "downside_dev"),
    ("Maximum Drawdown", "max_drawdown"),
    ("Historical VaR (95%)", "var_alpha"),
    ("Historical ES (95%)", "es_alpha"),
)
PORTFOLIOS = ("markowitz", "one_over_n", "evolutionary")
SUMMARY_COLUMNS = ("ticker", "long_r", "long_sigma", "long_s", "strategy_r", "strategy_sigma", "strategy_s", "chromosome")


def derive_seed(master: int, ticker: str) -> int:
    digest = hashlib.sha256(f"{master}:{ticker}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


def parse_window(text: str) -> tuple[dt.date, dt.date]:
    start, sep, end = text.partition(":")
    if not sep:
        raise ValueError(f"window must look like FROM:TO, got {text!r}")
    a, b = dt.date.fromisoformat(start.strip()), dt.date.fromisoformat(end.strip())
    if b < a:
        raise ValueError(f"window {text!r} ends before it starts")
    return a, b


def format_window(w: tuple[dt.date, dt.date]) -> str:
    return f"{w[0].isoformat()}:{w[1].isoformat()}"


def _num(x: Optional[float]) -> str:
    return "" if x is None else f"{x:.6g}"


def _dump_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _write_csv(path: Path, header, rows) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


@dataclass(frozen=True)
class AssetPaths:
    sentiment: Path
    prices: Path


@dataclass(frozen=True)
class RunConfig:
    assets: dict = field(default_factory=dict)  # ticker -> AssetPaths
    train: tuple = DEFAULT_TRAIN
    test: tuple = DEFAULT_TEST
    ga: GAConfig = field(default_factory=GAConfig)
    alpha: float = metrics.DEFAULT_ALPHA
    out: Path = Path("out")
    seed: int = 0
    target: Optional[float] = None  # Markowitz return target; None = mean of expected returns
    long_only: bool = True

    def __post_init__(self):
        (a0, a1), (b0, b1) = self.train, self.test
        if not a1 < b0:
            raise ValueError("train window must end before the test window starts")
        if a1 < a0 or b1 < b0:
            raise ValueError("window ends before it starts")

    @classmethod
    def from_json(cls, path) -> "RunConfig":
        path = Path(path)
        data = json.loads(path.read_text(encoding="utf-8"))
        base = path.parent
        assets = {}
        if "data_dir" in data:
            assets.update(discover_assets(base / data["data_dir"]))
        for ticker, entry in data.get("assets", {}).items():
            assets[ticker] = AssetPaths(base / entry["sentiment"], base / entry["prices"])
        if "tickers" in data:
            assets = {t: assets.get(t, AssetPaths(base / f"{t}_sentiment.csv", base / f"{t}_prices.csv"))
                      for t in data["tickers"]}
        kwargs = {"assets": assets}
        for key in ("train", "test"):
            if key in data:
                kwargs[key] = parse_window(data[key])
        if "ga" in data:
            kwargs["ga"] = GAConfig(**data["ga"])
        for key in ("alpha", "seed", "target", "long_only"):
            if key in data:
                kwargs[key] = data[key]
        if "out" in data:
            kwargs["out"] = base / data["out"]
        return cls(**kwargs)

    def to_json(self) -> dict:
        return {
            "assets": {t: {"sentiment": str(p.sentiment), "prices": str(p.prices)} for t, p in self.assets.items()},
            "train": format_window(self.train),
            "test": format_window(self.test),
            "ga": self.ga.to_json(),
            "alpha": self.alpha,
            "seed": self.seed,
            "target": self.target,
            "long_only": self.long_only,
        }

    def with_overrides(self, **kw) -> "RunConfig":
        return replace(self, **{k: v for k, v in kw.items() if v is not None})


def discover_assets(data_dir) -> dict:
    """Tickers from a synth manifest if present, else from ``*_sentiment.csv`` names."""
    data_dir = Path(data_dir)
    manifest = data_dir / "manifest.json"
    if manifest.exists():
        entries = json.loads(manifest.read_text(encoding="utf-8"))["assets"]
        return {e["ticker"]: AssetPaths(data_dir / e["sentiment"], data_dir / e["prices"]) for e in entries}
    tickers = sorted(p.name[: -len("_sentiment.csv")] for p in data_dir.glob("*_sentiment.csv"))
    return {t: AssetPaths(data_dir / f"{t}_sentiment.csv", data_dir / f"{t}_prices.csv") for t in tickers}


def load_asset(paths: AssetPaths):
    for p in (paths.sentiment, paths.prices):
        if not Path(p).exists():
            raise DataError(f"missing data file {p}")
    sentiment = [md.normalize(r) for r in md.parse_sentiment_csv(paths.sentiment)]
    return sentiment, md.parse_price_csv(paths.prices)


def load_series(ticker: str, paths: AssetPaths, window) -> md.AlignedAssetSeries:
    sentiment, prices = load_asset(paths)
    return md.align(sentiment, prices, window, ticker=ticker)


# synth -------------------------------------------------------------------

def planted_chromosome(rng: np.random.Generator) -> Chromosome:
    """Random valid rule with thresholds kept away from the extremes."""
    flags = VALID_FLAGS[int(rng.integers(len(VALID_FLAGS)))]
    return Chromosome.from_genes(flags, np.round(rng.uniform(0.2, 0.8, size=4), 4))


def cmd_synth(seed: int, n_assets: int, days: int, edge: float, out,
              start: dt.date = DEFAULT_TRAIN[0]) -> dict:
    if n_assets < 1:
        raise DataError("n_assets must be >= 1")
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    entries = []
    for k in range(n_assets):
        ticker = f"SYN{k + 1:02d}"
        rng = np.random.default_rng(derive_seed(seed, ticker))
        planted = planted_chromosome(rng)
        raw, prices = md.synth_generate(int(rng.integers(2**63)), days, planted, edge, start=start)
        sent_name, price_name = f"{ticker}_sentiment.csv", f"{ticker}_prices.csv"
        md.write_sentiment_csv(out / sent_name, raw)
        md.write_price_csv(out / price_name, prices)
        entries.append({"ticker": ticker, "planted": str(planted), "sentiment": sent_name, "prices": price_name})
    manifest = {"seed": seed, "days": days, "edge": edge, "start": start.isoformat(), "assets": entries}
    _dump_json(out / "manifest.json", manifest)
    return manifest


# optimize ------------------------------------------------------------------

@dataclass(frozen=True)
class StrategyResult:
    ticker: str
    chromosome: Chromosome
    fitness: float
    in_sample: MetricsReport
    long_only: MetricsReport
    generations: int

    def to_json(self, cfg: RunConfig) -> dict:
        c = self.chromosome
        return {
            "ticker": self.ticker,
            "chromosome": str(c),
            "flags": list(c.flags),
            "thresholds": list(c.thresholds),
            "fitness": None if math.isinf(self.fitness) else self.fitness,
            "objective": str(cfg.ga.objective),
            "seed": derive_seed(cfg.seed, self.ticker),
            "generations_run": self.generations,
            "train": format_window(cfg.train),
            "in_sample": self.in_sample.to_json(),
            "long_only": self.long_only.to_json(),
        }


def read_strategy(path) -> Chromosome:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    return Chromosome.from_genes(data["flags"], data["thresholds"])


def optimize_asset(ticker: str, cfg: RunConfig):
    series = load_series(ticker, cfg.assets[ticker], cfg.train)
    ga = replace(cfg.ga, seed=derive_seed(cfg.seed, ticker), alpha=cfg.alpha)
    result = evolve(ga, series)
    best = result.best
    res = StrategyResult(ticker, best.chromosome, best.fitness, best.metrics,
                         full_report(series.returns, cfg.alpha), len(result.history))
    return res, result


def cmd_optimize(cfg: RunConfig) -> tuple[dict, list[str]]:
    """Optimise every ticker; returns results and the tickers that failed."""
    out = Path(cfg.out)
    (out / "strategies").mkdir(parents=True, exist_ok=True)
    (out / "logs").mkdir(parents=True, exist_ok=True)
    results, failed = {}, []
    for ticker in sorted(cfg.assets):
        try:
            res, ga_result = optimize_asset(ticker, cfg)
        except DataError as exc:
            log.warning("skipping %s: %s", ticker, exc)
            failed.append(ticker)
            continue
        _dump_json(out / "strategies" / f"{ticker}.json", res.to_json(cfg))
        (out / "logs" / f"{ticker}_ga.csv").write_text(ga_result.log_csv(), encoding="utf-8")
        results[ticker] = res
        log.info("%s: %s fitness %.6g", ticker, res.chromosome, res.fitness)
    rows = []
    for t, r in results.items():
        lo, st = r.long_only, r.in_sample
        rows.append([t, _num(lo.cum_return), _num(lo.std_dev), _num(lo.sharpe_like),
                     _num(st.cum_return), _num(st.std_dev), _num(st.sharpe_like), str(r.chromosome)])
    _write_csv(out / "optimize_summary.csv", SUMMARY_COLUMNS, rows)
    return results, failed


# backtest --------------------------------------------------------------------

def backtest_chromosome(chrom: Chromosome, series: md.AlignedAssetSeries, alpha: float) -> MetricsReport:
    pos = simulate(decode(chrom), series)
    return full_report(strategy_returns(pos, series), alpha)


def cmd_backtest(cfg: RunConfig, chrom: Chromosome, ticker: str) -> dict:
    if ticker not in cfg.assets:
        raise DataError(f"no data configured for {ticker}")
    sentiment, prices = load_asset(cfg.assets[ticker])
    out = {"ticker": ticker, "chromosome": str(chrom)}
    for name, window in (("train", cfg.train), ("test", cfg.test)):
        series = md.align(sentiment, prices, window, ticker=ticker)
        out[name] = backtest_chromosome(chrom, series, cfg.alpha).to_json()
        out[f"{name}_window"] = format_window(window)
    Path(cfg.out).mkdir(parents=True, exist_ok=True)
    _dump_json(Path(cfg.out) / f"backtest_{ticker}.json", out)
    return out


# compare ---------------------------------------------------------------------

@dataclass
class ComparisonReport:
    test_dates: tuple
    reports: dict  # portfolio name -> MetricsReport
    returns: dict  # portfolio name -> ndarray on test_dates
    weights: object  # PortfolioWeights of the Markowitz portfolio
    in_sample: list = field(default_factory=list)  # per-asset in-sample summary rows
    dropped_dates: int = 0

    def to_json(self) -> dict:
        return {
            "test_start": self.test_dates[0].isoformat(),
            "test_end": self.test_dates[-1].isoformat(),
            "days": len(self.test_dates),
            "dropped_dates": self.dropped_dates,
            "portfolios": {k: self.reports[k].to_json() for k in PORTFOLIOS},
            "markowitz_weights": {t: float(f"{w:.6g}") for t, w in self.weights.as_dict().items()},
            "markowitz_kkt_residual": float(f"{self.weights.kkt_residual:.3g}"),
            "rebalancing": {"markowitz": "buy-and-hold", "one_over_n": "daily", "evolutionary": "daily"},
        }


def _common_panel(series: dict, label: str):
    """Panel on the return dates shared by every asset."""
    common = sorted(set.intersection(*(set(s.return_dates) for s in series.values())))
    if not common:
        raise DataError(f"no common {label} dates across assets")
    dropped = max(len(s.return_dates) for s in series.values()) - len(common)
    if dropped:
        log.warning("%s calendars differ; using %d shared dates (%d dropped)", label, len(common), dropped)
    keep = set(common)
    cols, idx = [], {}
    for t, s in series.items():
        idx[t] = [k for k, d in enumerate(s.return_dates) if d in keep]
        cols.append(s.returns[idx[t]])
    return ReturnPanel(tuple(common), tuple(series), np.column_stack(cols)), idx, dropped


def cmd_compare(cfg: RunConfig, strategies_dir=None) -> ComparisonReport:
    strategies_dir = Path(strategies_dir or Path(cfg.out) / "strategies")
    chroms = {}
    for ticker in sorted(cfg.assets):
        path = strategies_dir / f"{ticker}.json"
        if path.exists():
            chroms[ticker] = read_strategy(path)
        else:
            log.warning("no strategy for %s in %s", ticker, strategies_dir)
    if not chroms:
        raise DataError(f"no strategies found in {strategies_dir}")

    train, test = {}, {}
    for t in chroms:
        sentiment, prices = load_asset(cfg.assets[t])
        train[t] = md.align(sentiment, prices, cfg.train, ticker=t)
        test[t] = md.align(sentiment, prices, cfg.test, ticker=t)
    train_panel, _, _ = _common_panel(train, "train")
    test_panel, idx, dropped = _common_panel(test, "test")
    if test_panel.dates[0] <= cfg.train[1]:
        raise DataError("test series overlaps the training window")

    r, C = estimate_inputs(train_panel)
    weights = solve_markowitz(QPProblem(r, C, cfg.target, cfg.long_only), tickers=train_panel.tickers)
    mask = np.column_stack([simulate(decode(chroms[t]), test[t])[1:][idx[t]] for t in chroms])
    rets = {
        "markowitz": portfolio_returns(weights, test_panel),
        "one_over_n": one_over_n(test_panel),
        "evolutionary": compose_equal_weight(mask, test_panel),
    }
    reports = {k: full_report(v, cfg.alpha) for k, v in rets.items()}

    in_sample = []
    for t in chroms:
        lo = full_report(train[t].returns, cfg.alpha)
        st = backtest_chromosome(chroms[t], train[t], cfg.alpha)
        in_sample.append([t, _num(lo.cum_return), _num(lo.std_dev), _num(lo.sharpe_like),
                          _num(st.cum_return), _num(st.std_dev), _num(st.sharpe_like), str(chroms[t])])
    report = ComparisonReport(test_panel.dates, reports, rets, weights, in_sample, dropped)
    write_comparison(report, Path(cfg.out))
    return report


def write_comparison(report: ComparisonReport, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    _dump_json(out / "comparison.json", report.to_json())
    _write_csv(out / "risk_metrics.csv", ("metric", *PORTFOLIOS),
               [[label, *(_num(getattr(report.reports[p], key)) for p in PORTFOLIOS)] for label, key in RISK_ROWS])
    wealth = {p: np.cumprod(1.0 + report.returns[p]) for p in PORTFOLIOS}
    _write_csv(out / "wealth_curves.csv", ("date", *PORTFOLIOS),
               [[d.isoformat(), *(f"{wealth[p][k]:.6g}" for p in PORTFOLIOS)] for k, d in enumerate(report.test_dates)])
    report.weights.to_csv(out / "markowitz_weights.csv")
    _write_csv(out / "in_sample.csv", SUMMARY_COLUMNS, report.in_sample)


def read_risk_metrics(path) -> dict:
    """Inverse of the ``risk_metrics.csv`` writer: {portfolio: {metric label: value}}."""
    with Path(path).open(newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    return {p: {row["metric"]: float(row[p]) for row in rows} for p in PORTFOLIOS}
