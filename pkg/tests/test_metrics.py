import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sentiga import metrics as m
from sentiga.errors import DegenerateSeriesError, InsufficientDataError
from sentiga.metrics import MetricsReport, full_report

import oracles


def test_cum_return():
    assert m.cum_return([0.1, 0.1]) == pytest.approx(0.21, abs=1e-15)
    assert m.cum_return([0.0] * 5) == 0.0
    assert m.cum_return([0.10, -0.20, 0.05]) == pytest.approx(-0.076, abs=1e-15)
    with pytest.raises(InsufficientDataError):
        m.cum_return([])


def test_std_dev():
    assert m.std_dev([0.01] * 7) == 0.0
    assert m.std_dev([0, 0.02]) == pytest.approx(0.0141421356237, abs=1e-12)
    assert m.std_dev([0.3, -0.1, 0.2]) == m.std_dev([0.2, 0.3, -0.1])
    with pytest.raises(InsufficientDataError):
        m.std_dev([0.1])


def test_sharpe_like():
    assert m.sharpe_like([-0.01, 0.01, 0.03]) == pytest.approx(0.01 / 0.02, abs=1e-12)
    with pytest.raises(DegenerateSeriesError):
        m.sharpe_like([0.0] * 10)
    rs = np.array([0.01, -0.004, 0.02, 0.003])
    assert m.sharpe_like(rs * 3.7) == pytest.approx(m.sharpe_like(rs), rel=1e-13)


def test_max_drawdown():
    assert m.max_drawdown([0.01, 0.0, 0.02]) == 0.0
    assert m.max_drawdown([0.10, -0.20, 0.05]) == pytest.approx(0.20, abs=1e-15)
    assert m.max_drawdown([-0.5]) == 0.5


def test_hist_var():
    rs = [0.01 * k for k in range(1, 20)] + [-0.08]
    assert m.hist_var(rs) == -0.08
    assert m.hist_var([0.01 + 0.001 * k for k in range(20)]) > 0
    r40 = np.random.default_rng(1).normal(0, 0.01, 40)
    assert m.hist_var(np.concatenate([r40, r40])) == m.hist_var(r40)
    with pytest.raises(InsufficientDataError):
        m.hist_var([0.0] * 19)


def test_tail_count_is_lower_quantile():
    assert m.tail_count(20, 0.05) == 1
    assert m.tail_count(21, 0.05) == 2
    assert m.tail_count(60, 0.05) == 3
    assert m.tail_count(250, 0.05) == 13


def test_hist_es():
    rs = [0.01 * k for k in range(1, 20)] + [-0.08]
    assert m.hist_es(rs) == -0.08
    assert m.hist_es([0.003] * 25) == m.hist_var([0.003] * 25) == 0.003
    ties = [-0.02, -0.02, -0.02] + [0.01] * 37
    assert m.hist_var(ties) == -0.02 and m.hist_es(ties) == -0.02


def test_downside_and_semi():
    assert m.downside_dev([0.01, 0.02]) == 0.0
    assert m.downside_dev([-0.01, 0.03]) == pytest.approx(math.sqrt(0.0001 / 2), abs=1e-15)
    rs = [0.02, -0.01, 0.005, 0.0]
    assert m.semi_dev(rs) == pytest.approx(m.downside_dev(rs, float(np.mean(rs))), abs=1e-16)


def test_full_report_zero_series():
    rep = full_report(np.zeros(30))
    assert rep.degenerate and rep.sharpe_like is None
    assert rep.cum_return == 0 and rep.max_drawdown == 0 and rep.semi_dev == 0 and rep.downside_dev == 0
    assert rep.std_dev == 0


def test_full_report_consistency():
    rs = np.random.default_rng(3).normal(0.001, 0.01, 300)
    rep = full_report(rs)
    assert rep.cum_return == m.cum_return(rs)
    assert rep.std_dev == m.std_dev(rs)
    assert rep.sharpe_like == m.sharpe_like(rs)
    assert rep.max_drawdown == m.max_drawdown(rs)
    assert rep.var_alpha == m.hist_var(rs)
    assert rep.es_alpha == m.hist_es(rs)
    assert rep.semi_dev == m.semi_dev(rs)
    assert rep.downside_dev == m.downside_dev(rs)


def test_report_json_keys_and_round_trip():
    rep = full_report(np.random.default_rng(4).normal(0, 0.01, 100))
    js = rep.to_json()
    assert set(js) == {"cum_return", "std_dev", "sharpe_like", "max_drawdown", "var_95", "es_95", "semi_dev", "downside_dev"}
    back = MetricsReport.from_json(js)
    for name in m.REPORT_FIELDS:
        assert getattr(back, name) == pytest.approx(getattr(rep, name), rel=5e-6)
    assert back.to_json() == js
    assert MetricsReport.from_json(full_report(np.zeros(20)).to_json()).sharpe_like is None


returns = st.lists(st.floats(-0.5, 0.5, allow_subnormal=False), min_size=20, max_size=300)


def _close(a, b, tol=1e-12):
    return abs(a - b) <= tol


@settings(max_examples=150)
@given(returns)
def test_metrics_match_oracles(rs):
    assert _close(m.cum_return(rs), oracles.cum_return(rs), 1e-11 * max(1, abs(oracles.cum_return(rs))))
    assert _close(m.std_dev(rs), oracles.std_dev(rs))
    assert _close(m.max_drawdown(rs), oracles.max_drawdown(rs))
    assert m.hist_var(rs) == oracles.hist_var(rs)
    assert _close(m.hist_es(rs), oracles.hist_es(rs))
    assert _close(m.downside_dev(rs, 0.0), oracles.downside_dev(rs, 0.0))
    assert _close(m.semi_dev(rs), oracles.semi_dev(rs))


@given(returns)
def test_report_invariants(rs):
    rep = full_report(rs)
    assert rep.es_alpha <= rep.var_alpha
    assert 0.0 <= rep.max_drawdown <= 1.0
    assert rep.downside_dev <= math.sqrt(np.mean(np.square(rs))) + 1e-15
    wealth = np.cumprod(1 + np.array(rs))
    nondecreasing = bool(np.all(np.diff(np.concatenate([[1.0], wealth])) >= 0))
    assert (rep.max_drawdown == 0.0) == nondecreasing


@given(st.lists(st.floats(-0.1, 0.1), min_size=1, max_size=100), st.lists(st.floats(-0.1, 0.1), min_size=1, max_size=100))
def test_cum_return_concatenation(a, b):
    lhs = m.cum_return(a + b)
    rhs = (1 + m.cum_return(a)) * (1 + m.cum_return(b)) - 1
    assert abs(lhs - rhs) <= 1e-12


def test_row_kernels_match_scalars():
    R = np.random.default_rng(5).normal(0, 0.02, (7, 64))
    cols = m.report_columns(R)
    for k, row in enumerate(R):
        rep = full_report(row)
        for name in m.REPORT_FIELDS:
            assert cols[name][k] == pytest.approx(getattr(rep, name), rel=1e-14, abs=1e-18)
