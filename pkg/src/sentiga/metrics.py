"""Performance and risk statistics of daily simple-return series.

All statistics are in daily units, no annualisation and no risk-free
rate.  Each scalar function has a row-wise ``*_rows`` kernel so that the
optimiser can score thousands of strategies in one call; the scalar
versions delegate to the kernels, so both paths agree bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields
from typing import Iterable, Optional

import numpy as np

from .errors import DegenerateSeriesError, InsufficientDataError

DEFAULT_ALPHA = 0.05
# Guards ceil() against alpha * n landing a hair above an integer.
_QUANTILE_EPS = 1e-9


def _rows(a) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    return a[None, :] if a.ndim == 1 else a


def _series(rs, min_len: int = 1) -> np.ndarray:
    a = np.asarray(rs, dtype=float)
    if a.ndim != 1:
        raise ValueError("expected a one-dimensional return series")
    if len(a) < min_len:
        raise InsufficientDataError(f"need at least {min_len} returns, got {len(a)}")
    return a


def tail_count(n: int, alpha: float) -> int:
    """Order statistic index (1-based) of the lower empirical alpha-quantile."""
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    return max(1, math.ceil(alpha * n - _QUANTILE_EPS))


def min_length(alpha: float) -> int:
    return math.ceil(1.0 / alpha - _QUANTILE_EPS)


# Row kernels --------------------------------------------------------------

def cum_return_rows(R) -> np.ndarray:
    return np.prod(1.0 + _rows(R), axis=1) - 1.0


def mean_rows(R) -> np.ndarray:
    return _rows(R).mean(axis=1)


def std_dev_rows(R) -> np.ndarray:
    R = _rows(R)
    sd = R.std(axis=1, ddof=1)
    # Constant rows are exactly zero; floating means could leave ~1e-18.
    return np.where(np.ptp(R, axis=1) == 0.0, 0.0, sd)


def sharpe_like_rows(R) -> np.ndarray:
    """Mean over sample std per row; NaN where the row is constant."""
    R = _rows(R)
    sd = std_dev_rows(R)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(sd > 0.0, R.mean(axis=1) / sd, np.nan)


def max_drawdown_rows(R) -> np.ndarray:
    R = _rows(R)
    wealth = np.cumprod(1.0 + R, axis=1)
    peak = np.maximum(np.maximum.accumulate(wealth, axis=1), 1.0)
    return np.maximum((1.0 - wealth / peak).max(axis=1), 0.0)


def hist_var_rows(R, alpha: float = DEFAULT_ALPHA) -> np.ndarray:
    R = _rows(R)
    k = tail_count(R.shape[1], alpha)
    return np.partition(R, k - 1, axis=1)[:, k - 1]


def hist_es_rows(R, alpha: float = DEFAULT_ALPHA) -> np.ndarray:
    R = _rows(R)
    var = hist_var_rows(R, alpha)[:, None]
    tail = R <= var
    es = np.where(tail, R, 0.0).sum(axis=1) / tail.sum(axis=1)
    # The tail mean cannot exceed its own upper bound; summation rounding can.
    return np.minimum(es, var[:, 0])


def downside_dev_rows(R, mar=0.0) -> np.ndarray:
    R = _rows(R)
    mar = np.asarray(mar, dtype=float).reshape(-1, 1) if np.ndim(mar) else mar
    short = np.minimum(R - mar, 0.0)
    return np.sqrt((short * short).mean(axis=1))


def semi_dev_rows(R) -> np.ndarray:
    R = _rows(R)
    return downside_dev_rows(R, R.mean(axis=1))


# Scalar API ----------------------------------------------------------------

def cum_return(rs) -> float:
    return float(cum_return_rows(_series(rs))[0])


def std_dev(rs) -> float:
    return float(std_dev_rows(_series(rs, 2))[0])


def sharpe_like(rs) -> float:
    s = float(sharpe_like_rows(_series(rs, 2))[0])
    if math.isnan(s):
        raise DegenerateSeriesError("standard deviation is zero")
    return s


def max_drawdown(rs) -> float:
    return float(max_drawdown_rows(_series(rs))[0])


def hist_var(rs, alpha: float = DEFAULT_ALPHA) -> float:
    return float(hist_var_rows(_series(rs, min_length(alpha)), alpha)[0])


def hist_es(rs, alpha: float = DEFAULT_ALPHA) -> float:
    return float(hist_es_rows(_series(rs, min_length(alpha)), alpha)[0])


def downside_dev(rs, mar: float = 0.0) -> float:
    return float(downside_dev_rows(_series(rs), mar)[0])


def semi_dev(rs) -> float:
    return float(semi_dev_rows(_series(rs))[0])


# Report ---------------------------------------------------------------------

def _sig(x: Optional[float], digits: int = 6) -> Optional[float]:
    if x is None:
        return None
    return float(f"{x:.{digits}g}")


@dataclass(frozen=True)
class MetricsReport:
    cum_return: float
    std_dev: float
    sharpe_like: Optional[float]  # None when std_dev == 0
    max_drawdown: float
    var_alpha: float
    es_alpha: float
    semi_dev: float
    downside_dev: float
    alpha: float = DEFAULT_ALPHA

    @property
    def degenerate(self) -> bool:
        return self.sharpe_like is None

    @property
    def _tail_suffix(self) -> str:
        return f"{round(100 * (1 - self.alpha)):d}"

    def to_json(self) -> dict:
        """Flat dict with fixed keys, reals at 6 significant digits."""
        sfx = self._tail_suffix
        out = {
            "cum_return": _sig(self.cum_return),
            "std_dev": _sig(self.std_dev),
            "sharpe_like": _sig(self.sharpe_like),
            "max_drawdown": _sig(self.max_drawdown),
            f"var_{sfx}": _sig(self.var_alpha),
            f"es_{sfx}": _sig(self.es_alpha),
            "semi_dev": _sig(self.semi_dev),
            "downside_dev": _sig(self.downside_dev),
        }
        if self.alpha != DEFAULT_ALPHA:
            out["alpha"] = self.alpha
        return out

    @classmethod
    def from_json(cls, data: dict) -> "MetricsReport":
        alpha = float(data.get("alpha", DEFAULT_ALPHA))
        sfx = f"{round(100 * (1 - alpha)):d}"
        s = data["sharpe_like"]
        return cls(
            cum_return=float(data["cum_return"]),
            std_dev=float(data["std_dev"]),
            sharpe_like=None if s is None else float(s),
            max_drawdown=float(data["max_drawdown"]),
            var_alpha=float(data[f"var_{sfx}"]),
            es_alpha=float(data[f"es_{sfx}"]),
            semi_dev=float(data["semi_dev"]),
            downside_dev=float(data["downside_dev"]),
            alpha=alpha,
        )

    def rounded(self) -> "MetricsReport":
        return MetricsReport.from_json(self.to_json())

    def as_dict(self) -> dict:
        return asdict(self)


REPORT_FIELDS = tuple(f.name for f in fields(MetricsReport) if f.name != "alpha")


def report_columns(R, alpha: float = DEFAULT_ALPHA, names: Iterable[str] = REPORT_FIELDS) -> dict:
    """Selected report fields as arrays over the rows of ``R``."""
    R = _rows(R)
    kernels = {
        "cum_return": cum_return_rows,
        "std_dev": std_dev_rows,
        "sharpe_like": sharpe_like_rows,
        "max_drawdown": max_drawdown_rows,
        "var_alpha": lambda X: hist_var_rows(X, alpha),
        "es_alpha": lambda X: hist_es_rows(X, alpha),
        "semi_dev": semi_dev_rows,
        "downside_dev": lambda X: downside_dev_rows(X, 0.0),
    }
    return {name: kernels[name](R) for name in names}


def reports_from_columns(cols: dict, alpha: float = DEFAULT_ALPHA) -> list[MetricsReport]:
    n = len(next(iter(cols.values())))
    out = []
    for k in range(n):
        row = {name: float(cols[name][k]) for name in REPORT_FIELDS}
        if math.isnan(row["sharpe_like"]):
            row["sharpe_like"] = None
        out.append(MetricsReport(alpha=alpha, **row))
    return out


def full_report(rs, alpha: float = DEFAULT_ALPHA) -> MetricsReport:
    a = _series(rs, max(2, min_length(alpha)))
    return reports_from_columns(report_columns(a, alpha), alpha)[0]
