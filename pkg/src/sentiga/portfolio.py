"""Portfolio construction: equal-weight strategy book, 1/N and Markowitz.

The Markowitz problem

    minimise    x' C x
    subject to  r' x >= mu,   sum(x) = 1,   x >= 0 (long-only, default)

is solved with a primal active-set method.  The final working set is
re-solved as one equality-constrained KKT system, so the returned weights
carry exact multipliers and a KKT residual that callers can check.
"""

from __future__ import annotations

import csv
import datetime as dt
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np

from .errors import CalendarMismatchError, DataError, InfeasibleError, InsufficientDataError, NotPSDError
from .market_data import AlignedAssetSeries

log = logging.getLogger(__name__)

SYMMETRY_TOL = 1e-12
PSD_TOL = 1e-10
DIAGONAL_LOADING = 1e-10
FEAS_TOL = 1e-12
STEP_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class ReturnPanel:
    """Simple returns on a shared calendar, rows are dates, columns tickers."""

    dates: tuple[dt.date, ...]
    tickers: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float).reshape(len(self.dates), len(self.tickers))
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        if len(set(self.tickers)) != len(self.tickers):
            raise DataError("duplicate tickers in panel")

    @classmethod
    def from_assets(cls, assets: Mapping[str, AlignedAssetSeries]) -> "ReturnPanel":
        if not assets:
            raise DataError("empty asset universe")
        tickers = tuple(assets)
        dates = assets[tickers[0]].return_dates
        for t in tickers[1:]:
            if assets[t].return_dates != dates:
                raise CalendarMismatchError(f"{t} does not share the calendar of {tickers[0]}")
        return cls(dates, tickers, np.column_stack([assets[t].returns for t in tickers]))

    @property
    def shape(self):
        return self.values.shape

    def window(self, start: dt.date, end: dt.date) -> "ReturnPanel":
        keep = [k for k, d in enumerate(self.dates) if start <= d <= end]
        return ReturnPanel(tuple(self.dates[k] for k in keep), self.tickers, self.values[keep])

    def to_csv(self, path) -> None:
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["date", *self.tickers])
            for d, row in zip(self.dates, self.values):
                w.writerow([d.isoformat(), *(repr(float(x)) for x in row)])

    @classmethod
    def from_csv(cls, path) -> "ReturnPanel":
        with Path(path).open(newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
        if not rows or rows[0][0].strip() != "date" or len(rows[0]) < 2:
            raise DataError(f"{path}: header must be date,<ticker>,...")
        tickers = tuple(h.strip() for h in rows[0][1:])
        dates, values = [], []
        for line, row in enumerate(rows[1:], start=2):
            if len(row) != len(tickers) + 1:
                raise DataError(f"{path}:{line}: expected {len(tickers) + 1} fields")
            try:
                dates.append(dt.date.fromisoformat(row[0].strip()))
                values.append([float(x) for x in row[1:]])
            except ValueError as exc:
                raise DataError(f"{path}:{line}: {exc}") from None
        if any(b <= a for a, b in zip(dates, dates[1:])):
            raise DataError(f"{path}: dates must be strictly increasing")
        return cls(tuple(dates), tickers, np.array(values).reshape(len(dates), len(tickers)))


def _check_mask(long_mask, panel: ReturnPanel) -> np.ndarray:
    mask = np.asarray(long_mask, dtype=bool)
    if mask.shape != panel.shape:
        raise CalendarMismatchError(f"positions of shape {mask.shape} do not match panel {panel.shape}")
    return mask


def compose_equal_weight(long_mask, panel: ReturnPanel) -> np.ndarray:
    """Daily mean return of the assets that are long that day, 0 when none are."""
    mask = _check_mask(long_mask, panel)
    k = mask.sum(axis=1)
    total = np.where(mask, panel.values, 0.0).sum(axis=1)
    return np.where(k > 0, total / np.maximum(k, 1), 0.0)


def daily_allocation(long_mask, panel: ReturnPanel) -> np.ndarray:
    """Weight matrix 1/k over the k long assets per day (rows of zeros = cash)."""
    mask = _check_mask(long_mask, panel)
    k = mask.sum(axis=1, keepdims=True)
    return np.where(mask, 1.0 / np.maximum(k, 1), 0.0)


def one_over_n(panel: ReturnPanel) -> np.ndarray:
    if panel.values.shape[1] == 0:
        raise DataError("empty asset universe")
    return panel.values.mean(axis=1)


def estimate_inputs(panel: ReturnPanel, window: Optional[tuple[dt.date, dt.date]] = None):
    """Sample means and sample covariance (n - 1 divisor) of the panel."""
    if window is not None:
        panel = panel.window(*window)
    if panel.values.shape[0] < 2:
        raise InsufficientDataError("need at least two observations per asset")
    X = panel.values
    means = X.mean(axis=0)
    dev = X - means
    cov = dev.T @ dev / (X.shape[0] - 1)
    return means, (cov + cov.T) / 2.0


@dataclass(frozen=True, eq=False)
class QPProblem:
    expected_returns: np.ndarray
    covariance: np.ndarray
    target: Optional[float] = None  # defaults to mean(expected_returns)
    long_only: bool = True

    def __post_init__(self):
        r = np.asarray(self.expected_returns, dtype=float).ravel()
        C = np.atleast_2d(np.asarray(self.covariance, dtype=float))
        if C.shape != (len(r), len(r)) or len(r) == 0:
            raise ValueError(f"covariance shape {C.shape} does not match {len(r)} expected returns")
        if not np.allclose(C, C.T, rtol=0.0, atol=SYMMETRY_TOL):
            raise NotPSDError("covariance is not symmetric")
        object.__setattr__(self, "expected_returns", r)
        object.__setattr__(self, "covariance", (C + C.T) / 2.0)
        if self.target is None:
            object.__setattr__(self, "target", float(r.mean()))

    @property
    def n(self) -> int:
        return len(self.expected_returns)


@dataclass(frozen=True, eq=False)
class PortfolioWeights:
    weights: np.ndarray
    tickers: Optional[tuple[str, ...]] = None
    kkt_residual: float = 0.0
    multipliers: dict = field(default_factory=dict)
    variance: float = float("nan")
    loaded: bool = False  # diagonal loading was needed

    def as_dict(self) -> dict:
        names = self.tickers or tuple(f"asset{k}" for k in range(len(self.weights)))
        return dict(zip(names, (float(w) for w in self.weights)))

    def to_csv(self, path) -> None:
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["ticker", "weight"])
            for t, x in self.as_dict().items():
                w.writerow([t, f"{x:.6g}"])

    @staticmethod
    def read_csv(path) -> dict:
        with Path(path).open(newline="", encoding="utf-8") as fh:
            return {row["ticker"]: float(row["weight"]) for row in csv.DictReader(fh)}


def kkt_residual(p: QPProblem, x, lam_eq: float, lam_ret: float, nu) -> float:
    """Largest violation among stationarity, feasibility, dual sign, complementarity."""
    C, r, mu = p.covariance, p.expected_returns, p.target
    x = np.asarray(x, dtype=float)
    nu = np.asarray(nu, dtype=float) if p.long_only else np.zeros(p.n)
    stat = 2.0 * C @ x - lam_eq - lam_ret * r - nu
    slack = float(r @ x - mu)
    parts = [
        np.abs(stat).max(),
        abs(x.sum() - 1.0),
        max(0.0, -slack),
        max(0.0, -lam_ret),
        abs(lam_ret * slack),
    ]
    if p.long_only:
        parts += [max(0.0, -x.min()), max(0.0, -nu.min()), np.abs(nu * x).max()]
    return float(max(parts))


def _check_psd(C: np.ndarray) -> float:
    eig = np.linalg.eigvalsh(C)
    scale = max(1.0, float(np.abs(eig).max()))
    if eig.min() < -PSD_TOL * scale:
        raise NotPSDError(f"covariance has eigenvalue {eig.min():.3g}")
    return float(eig.min())


def _constraints(p: QPProblem):
    """Inequality rows a_j' x >= b_j: return target first, then bounds."""
    rows = [p.expected_returns]
    rhs = [p.target]
    if p.long_only:
        rows += list(np.eye(p.n))
        rhs += [0.0] * p.n
    return np.array(rows), np.array(rhs)


def _start(p: QPProblem):
    r, mu = p.expected_returns, p.target
    k = int(np.argmax(r))
    tol = FEAS_TOL * max(1.0, abs(mu))
    if r[k] >= mu - tol:
        x = np.zeros(p.n)
        x[k] = 1.0
        working = [1 + j for j in range(p.n) if j != k] if p.long_only else []
        return x, working
    if p.long_only or np.ptp(r) == 0.0:
        raise InfeasibleError(f"target {mu:.6g} exceeds the best expected return {r[k]:.6g}")
    j = int(np.argmin(r))
    t = (mu - r[k]) / (r[k] - r[j])
    x = np.zeros(p.n)
    x[k], x[j] = 1.0 + t, -t
    return x, []


def _kkt_solve(G, A_eq, rhs_lin, rhs_eq):
    """Solve [G -A'; A 0][y; lam] = [rhs_lin; rhs_eq]."""
    n, m = G.shape[0], A_eq.shape[0]
    K = np.zeros((n + m, n + m))
    K[:n, :n] = G
    K[:n, n:] = -A_eq.T
    K[n:, :n] = A_eq
    sol = np.linalg.solve(K, np.concatenate([rhs_lin, rhs_eq]))
    if not np.all(np.isfinite(sol)) or np.linalg.cond(K) > 1e14:
        raise np.linalg.LinAlgError("ill-conditioned KKT system")
    return sol[:n], sol[n:]


def _active_set(p: QPProblem, G: np.ndarray, max_iter: int):
    A, b = _constraints(p)
    ones = np.ones((1, p.n))
    x, working = _start(p)
    for _ in range(max_iter):
        A_w = np.vstack([ones, A[working]]) if working else ones
        step, lam = _kkt_solve(G, A_w, -G @ x, np.zeros(A_w.shape[0]))
        # Relative test: a fully pinned working set can leave ~1e-11 of noise.
        if np.abs(step).max() <= STEP_TOL * max(1.0, np.abs(x).max()):
            ineq = lam[1:]
            if len(ineq) == 0 or ineq.min() >= -1e-14:
                return working
            working.pop(int(np.argmin(ineq)))
            continue
        alpha, block = 1.0, None
        for j in range(len(b)):
            if j in working:
                continue
            ap = A[j] @ step
            if ap < -1e-15:
                t = (b[j] - A[j] @ x) / ap
                if t < alpha:
                    alpha, block = max(t, 0.0), j
        x = x + alpha * step
        if block is not None:
            working.append(block)
    raise InfeasibleError("active-set iteration limit reached")


def _polish(p: QPProblem, G: np.ndarray, working: list[int]):
    A, b = _constraints(p)
    A_w = np.vstack([np.ones((1, p.n)), A[working]]) if working else np.ones((1, p.n))
    b_w = np.concatenate([[1.0], b[working]])
    x, lam = _kkt_solve(G, A_w, np.zeros(p.n), b_w)
    lam_eq = float(lam[0])
    lam_ret = 0.0
    nu = np.zeros(p.n)
    for j, l in zip(working, lam[1:]):
        if j == 0:
            lam_ret = float(l)
        else:
            nu[j - 1] = float(l)
            x[j - 1] = 0.0
    return x, lam_eq, lam_ret, nu


def solve_markowitz(p: QPProblem, tickers: Optional[Sequence[str]] = None) -> PortfolioWeights:
    _check_psd(p.covariance)
    loaded = False
    G = 2.0 * p.covariance
    for attempt in range(2):
        try:
            working = _active_set(p, G, max_iter=50 * (p.n + 2))
            x, lam_eq, lam_ret, nu = _polish(p, G, working)
            break
        except np.linalg.LinAlgError:
            if attempt:
                raise
            log.info("singular KKT system, retrying with diagonal loading")
            loaded = True
            G = 2.0 * (p.covariance + DIAGONAL_LOADING * np.eye(p.n))
    res = kkt_residual(p, x, lam_eq, lam_ret, nu)
    return PortfolioWeights(
        weights=x,
        tickers=tuple(tickers) if tickers is not None else None,
        kkt_residual=res,
        multipliers={"budget": lam_eq, "target": lam_ret, "bounds": nu.tolist()},
        variance=float(x @ p.covariance @ x),
        loaded=loaded,
    )


def portfolio_returns(x, panel: ReturnPanel) -> np.ndarray:
    """Buy-and-hold returns: holdings start at ``x`` and are never rebalanced."""
    w = np.asarray(getattr(x, "weights", x), dtype=float)
    if w.shape != (panel.values.shape[1],):
        raise CalendarMismatchError(f"{len(w)} weights for {panel.values.shape[1]} assets")
    growth = np.cumprod(1.0 + panel.values, axis=0)
    value = np.concatenate([[w.sum()], growth @ w])
    return value[1:] / value[:-1] - 1.0


@dataclass(frozen=True, eq=False)
class FrontierPoint:
    target: float
    variance: Optional[float]
    weights: Optional[PortfolioWeights]
    error: Optional[str] = None


def frontier_from_inputs(r, C, targets: Sequence[float], long_only: bool = True,
                         tickers: Optional[Sequence[str]] = None) -> list[FrontierPoint]:
    out = []
    for mu in targets:
        try:
            w = solve_markowitz(QPProblem(r, C, float(mu), long_only), tickers)
        except InfeasibleError as exc:
            out.append(FrontierPoint(float(mu), None, None, str(exc)))
            continue
        out.append(FrontierPoint(float(mu), w.variance, w))
    return out


def frontier(panel: ReturnPanel, targets: Sequence[float], long_only: bool = True,
             window: Optional[tuple[dt.date, dt.date]] = None) -> list[FrontierPoint]:
    r, C = estimate_inputs(panel, window)
    return frontier_from_inputs(r, C, targets, long_only, panel.tickers)
