"""Evolved sentiment trading rules and their portfolio comparison."""

from .errors import DataError, DegenerateSeriesError, InfeasibleError, InvalidChromosomeError
from .evolution import GAConfig, Objective, evolve, grid_oracle, run
from .market_data import AlignedAssetSeries, align, normalize, parse_price_csv, parse_sentiment_csv, synth_generate
from .metrics import MetricsReport, full_report
from .portfolio import QPProblem, ReturnPanel, solve_markowitz
from .strategy import Chromosome, decode, repair, simulate, strategy_returns

__version__ = "0.1.0"

__all__ = [
    "AlignedAssetSeries", "Chromosome", "DataError", "DegenerateSeriesError", "GAConfig",
    "InfeasibleError", "InvalidChromosomeError", "MetricsReport", "Objective", "QPProblem",
    "ReturnPanel", "align", "decode", "evolve", "full_report", "grid_oracle", "normalize",
    "parse_price_csv", "parse_sentiment_csv", "repair", "run", "simulate", "solve_markowitz",
    "strategy_returns", "synth_generate",
]
