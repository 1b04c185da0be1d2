import math

import numpy as np
import pytest

from frmkit import backtest
from frmkit.backtest import BacktestConfig, effective_n, rebalance_rows, sharpe
from frmkit.errors import InsufficientOverlap, MissingFrmWindow, ZeroVolatility
from frmkit.frm_engine import run_frm
from frmkit.market_data import ReturnPanel, WindowSpec
from frmkit.synth import SynthConfig, generate

COV_ONLY = ("MinVar", "IVP", "HRP", "EqualWeight")


def make_panel(R, caps=None):
    T, J = R.shape
    caps = np.tile(np.arange(J, 0, -1.0), (T, 1)) if caps is None else caps
    dates = np.datetime64("2022-01-03", "D") + np.arange(T)
    return ReturnPanel(dates, tuple(f"A{k}" for k in range(J)), (), R, caps)


def test_effective_n_examples():
    assert effective_n(np.full(25, 1 / 25)) == 25.0
    assert effective_n([1.0, 0.0, 0.0]) == 1.0
    assert effective_n([0.5, 0.5]) == 2.0
    with pytest.raises(ValueError):
        effective_n([0.5, 0.6])


def test_sharpe_examples():
    with pytest.raises(ZeroVolatility):
        sharpe([0.01] * 10)
    assert sharpe([1.0, -1.0] * 5) == 0.0
    assert sharpe([2.0, 4.0]) == pytest.approx(3 / math.sqrt(2), abs=1e-12)
    assert sharpe([2.0, 4.0]) == pytest.approx(2.1213, abs=1e-4)


def test_rebalance_rows():
    assert rebalance_rows(100, 63, 30) == [62, 92]
    assert rebalance_rows(64, 63, 30) == [62]
    assert rebalance_rows(63, 63, 30) == []


def test_config_validation():
    with pytest.raises(ValueError):
        BacktestConfig(rebalance_days=0)
    with pytest.raises(ValueError):
        BacktestConfig(strategies=("Bogus",))
    with pytest.raises(ValueError):
        BacktestConfig(taus=(1.5,))
    with pytest.raises(ValueError):
        BacktestConfig(return_mode="arith")
    cfg = BacktestConfig(taus=(0.05, 0.25))
    assert cfg.labels() == ["MinVar", "IVP", "HRP", "InvLambda@0.05", "InvLambda@0.25", "upHRP@0.05", "upHRP@0.25"]
    assert cfg.needs_frm and not BacktestConfig(strategies=("IVP",)).needs_frm


def test_single_asset_returns_pass_through():
    R = np.random.default_rng(0).normal(size=(90, 1)) * 0.01
    report = backtest.run(make_panel(R), None, BacktestConfig(10, COV_ONLY), WindowSpec(length_n=30))
    for s in report.strategies.values():
        assert np.array_equal(s.returns, np.expm1(R[30:, 0]))
        assert s.effective_n == 1.0


def test_identical_assets_give_identical_series():
    x = np.random.default_rng(1).normal(size=90) * 0.01
    R = np.column_stack([x, x, x])
    report = backtest.run(make_panel(R), None, BacktestConfig(10, COV_ONLY), WindowSpec(length_n=30, top_j=3))
    for s in report.strategies.values():
        assert np.allclose(s.returns, np.expm1(x[30:]), atol=1e-15)


def test_equal_weight_stats_match_direct_computation():
    R = np.random.default_rng(2).normal(size=(150, 6)) * 0.01
    spec = WindowSpec(length_n=40, top_j=6)
    s = backtest.run(make_panel(R), None, BacktestConfig(20, ("EqualWeight",)), spec).strategies["EqualWeight"]
    direct = np.expm1(R[40:]).mean(axis=1)
    assert np.allclose(s.returns, direct, atol=1e-15)
    assert s.mean == pytest.approx(direct.mean(), abs=1e-12)
    assert s.std == pytest.approx(direct.std(ddof=1), abs=1e-12)
    assert s.sharpe == pytest.approx(direct.mean() / direct.std(ddof=1), abs=1e-12)
    assert np.allclose(s.cumulative, np.cumprod(1 + direct) - 1, atol=1e-12)


def test_log_mode():
    R = np.random.default_rng(3).normal(size=(80, 4)) * 0.01
    spec = WindowSpec(length_n=30, top_j=4)
    s = backtest.run(make_panel(R), None, BacktestConfig(10, ("EqualWeight",), return_mode="log"), spec)
    s = s.strategies["EqualWeight"]
    assert np.allclose(s.returns, R[30:].mean(axis=1), atol=1e-15)
    assert np.allclose(s.log_growth, np.cumsum(s.returns), atol=1e-15)


def test_weights_held_between_rebalances():
    R = np.random.default_rng(4).normal(size=(100, 5)) * 0.01
    spec = WindowSpec(length_n=30, top_j=5)
    report = backtest.run(make_panel(R), None, BacktestConfig(25, ("IVP",)), spec)
    rows = rebalance_rows(100, 30, 25)
    assert report.rebalance_dates == [make_panel(R).dates[r] for r in rows]
    s = report.strategies["IVP"]
    assert s.returns.size == 100 - 30
    w0 = report.allocations[("IVP", report.rebalance_dates[0])].weights
    assert np.allclose(s.returns[:25], np.expm1(R[30:55]) @ w0, atol=1e-15)
    cov = np.cov(R[0:30], rowvar=False)
    assert np.allclose(w0, (1 / np.diag(cov)) / np.sum(1 / np.diag(cov)), atol=1e-15)


def test_universe_is_top_j_at_window_start():
    R = np.random.default_rng(5).normal(size=(60, 4)) * 0.01
    caps = np.tile([1.0, 4.0, 3.0, 2.0], (60, 1))
    report = backtest.run(make_panel(R, caps), None, BacktestConfig(10, ("IVP",)), WindowSpec(length_n=30, top_j=2))
    assert {r.ticker for r in report.weights} == {"A1", "A2"}


@pytest.fixture(scope="module")
def synthetic():
    panel = generate(SynthConfig(seed=5, days=120)).panel()
    spec = WindowSpec(length_n=40, top_j=8)
    frm = {0.05: {r.date: r for r in run_frm(panel, spec, grid_size=15, workers=1)}}
    return panel, spec, frm


def test_all_strategies_on_synthetic_data(synthetic):
    panel, spec, frm = synthetic
    report = backtest.run(panel, frm, BacktestConfig(15), spec)
    assert set(report.strategies) == {"MinVar", "IVP", "HRP", "InvLambda@0.05", "upHRP@0.05"}
    for label, s in report.strategies.items():
        assert 1.0 <= s.effective_n <= 8
        assert s.sharpe == pytest.approx(s.mean / s.std, abs=1e-15)
        assert s.returns.size == panel.T - 40
    for alloc in report.allocations.values():
        assert alloc.weights.sum() == pytest.approx(1.0, abs=1e-12) and np.all(alloc.weights >= 0)
    inv = report.allocations[("InvLambda@0.05", report.rebalance_dates[0])]
    lam = frm[0.05][report.rebalance_dates[0]].lambdas
    assert np.allclose(inv.weights, (1 / lam) / np.sum(1 / lam), atol=1e-15)


def test_missing_frm_window(synthetic):
    panel, spec, frm = synthetic
    with pytest.raises(MissingFrmWindow):
        backtest.run(panel, None, BacktestConfig(15, ("upHRP",)), spec)
    first = min(frm[0.05])
    partial = {0.05: {d: r for d, r in frm[0.05].items() if d != first}}
    with pytest.raises(MissingFrmWindow) as err:
        backtest.run(panel, partial, BacktestConfig(15, ("InvLambda",)), spec)
    assert err.value.tau == 0.05 and err.value.date == str(first)
    with pytest.raises(MissingFrmWindow):
        backtest.run(panel, frm, BacktestConfig(15, ("InvLambda",), taus=(0.25,)), spec)


def test_too_short_panel():
    with pytest.raises(InsufficientOverlap):
        backtest.run(make_panel(np.zeros((30, 3))), None, BacktestConfig(5, ("IVP",)), WindowSpec(length_n=30))
