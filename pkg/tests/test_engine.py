"""Engine timing, settlement arithmetic, kill-switch scan, determinism."""
from __future__ import annotations

import numpy as np
import pytest

from driftgate.data_model import SyntheticMarketConfig, generate_synthetic, restrict
from driftgate.engine import (CostModel, _first_trigger, benchmark_returns,
                              build_signal_bundle, run_backtest)
from driftgate.errors import DataError, InvariantError
from driftgate.risk_controls import (KillSwitchConfig, KillSwitchState, TriggerType,
                                     kill_switch_step)
from driftgate.signals import SignalParams
from tests.conftest import make_panel

SMALL = SignalParams(drift_window=2, reversal_lookback=2)


def pair_panel(close_a, close_b, tickers=("AAA", "BBB")):
    close = np.column_stack([np.asarray(close_a, float), np.asarray(close_b, float)])
    return make_panel(close, tickers=tickers)


def constant_edge(panel, long_col=0):
    edge = np.full((panel.n_dates, panel.n_tickers), -1.0)
    edge[:, long_col] = 1.0
    return edge


def test_settlement_arithmetic_hand_case():
    a = [100.0, 102.0, 101.0, 103.0, 104.0, 105.0, 104.0, 106.0]
    b = [50.0, 49.0, 50.0, 51.0, 50.0, 49.0, 50.0, 51.0]
    panel = pair_panel(a, b)
    cost = CostModel(rate_per_unit=0.001, slippage_per_unit=0.0005)
    res = run_backtest(panel, SMALL, cost=cost, kill_switch=None,
                       edge_override=constant_edge(panel))

    ra = np.array(a)[1:] / np.array(a)[:-1] - 1.0
    rb = np.array(b)[1:] / np.array(b)[:-1] - 1.0
    # constant book +0.5/-0.5 formed at row 0; row t earns row t's returns
    # with the previous row's weights, so the first row realizes nothing
    want_gross = np.zeros(8)
    want_gross[1:] = 0.5 * ra - 0.5 * rb
    np.testing.assert_array_equal(res.gross_returns, want_gross)

    want_turnover = np.zeros(8)
    want_turnover[1] = 1.0  # initial position build, charged one row later
    np.testing.assert_array_equal(res.turnover, want_turnover)
    np.testing.assert_array_equal(res.costs, 0.0015 * want_turnover)
    np.testing.assert_array_equal(res.daily_returns, want_gross - 0.0015 * want_turnover)
    np.testing.assert_array_equal(res.equity, np.cumprod(1.0 + res.daily_returns))
    assert np.all(res.weights == np.tile([0.5, -0.5], (8, 1)))


def test_missing_returns_realize_at_zero():
    a = [100.0, 102.0, 101.0, 103.0, 104.0, 105.0]
    b = [50.0, 49.0, 50.0, 51.0, np.nan, np.nan]  # delists after day 3
    panel = pair_panel(a, b)
    res = run_backtest(panel, SMALL, cost=CostModel(0.0), kill_switch=None,
                       edge_override=constant_edge(panel))
    ra = np.array(a)[1:] / np.array(a)[:-1] - 1.0
    assert res.gross_returns[4] == pytest.approx(0.5 * ra[3])  # only the live leg pays
    assert res.gross_returns[5] == pytest.approx(0.5 * ra[4])


def test_first_row_is_always_zero(rng):
    panel = generate_synthetic(SyntheticMarketConfig(n_stocks=10, n_days=200, seed=2))
    res = run_backtest(panel, kill_switch=None)
    assert res.gross_returns[0] == 0.0
    assert res.turnover[0] == 0.0
    assert res.daily_returns[0] == 0.0


def test_close_mode_shifts_pnl_one_row():
    a = [100.0, 102.0, 101.0, 103.0, 104.0, 105.0, 104.0, 106.0]
    b = [50.0, 49.0, 50.0, 51.0, 50.0, 49.0, 50.0, 51.0]
    panel = pair_panel(a, b)
    edge = constant_edge(panel)
    nxt = run_backtest(panel, SMALL, kill_switch=None, edge_override=edge)
    cls = run_backtest(panel, SMALL, kill_switch=None, edge_override=edge,
                       execution="close")
    # constant book: same-day execution earns each return one row earlier
    np.testing.assert_array_equal(cls.gross_returns[1:], nxt.gross_returns[1:])
    assert cls.turnover[0] == 1.0 and nxt.turnover[0] == 0.0
    assert nxt.turnover[1] == 1.0


def test_scale_doubles_pnl_exactly():
    panel = generate_synthetic(SyntheticMarketConfig(n_stocks=12, n_days=260, seed=3))
    one = run_backtest(panel, kill_switch=None, scale=1.0)
    two = run_backtest(panel, kill_switch=None, scale=2.0)
    np.testing.assert_array_equal(two.weights, 2.0 * one.weights)
    np.testing.assert_array_equal(two.daily_returns, 2.0 * one.daily_returns)
    np.testing.assert_array_equal(two.turnover, 2.0 * one.turnover)


def test_costs_only_lower_net():
    panel = generate_synthetic(SyntheticMarketConfig(n_stocks=12, n_days=260, seed=4))
    free = run_backtest(panel, kill_switch=None, cost=CostModel(0.0))
    paid = run_backtest(panel, kill_switch=None, cost=CostModel(0.0005))
    np.testing.assert_array_equal(free.gross_returns, paid.gross_returns)
    assert np.all(paid.daily_returns <= free.daily_returns)
    assert paid.daily_returns[free.turnover > 0].max() < free.daily_returns[free.turnover > 0].max()
    assert free.turnover.sum() > 0


def test_no_lookahead_under_truncation():
    panel = generate_synthetic(SyntheticMarketConfig(n_stocks=15, n_days=300, seed=5))
    full = run_backtest(panel, kill_switch=None)
    for cut in (120, 200, 280):
        trunc = restrict(panel, None, panel.calendar.dates[cut])
        assert trunc.n_dates == cut
        res = run_backtest(trunc, kill_switch=None)
        np.testing.assert_array_equal(res.weights, full.weights[:cut])
        np.testing.assert_array_equal(res.daily_returns, full.daily_returns[:cut])
        np.testing.assert_array_equal(res.equity, full.equity[:cut])


def test_bundle_reuse_is_identical_and_validated():
    panel = generate_synthetic(SyntheticMarketConfig(n_stocks=8, n_days=150, seed=6))
    params = SignalParams()
    bundle = build_signal_bundle(panel, params)
    a = run_backtest(panel, params, kill_switch=None)
    b = run_backtest(panel, params, kill_switch=None, bundle=bundle)
    np.testing.assert_array_equal(a.daily_returns, b.daily_returns)
    other = generate_synthetic(SyntheticMarketConfig(n_stocks=8, n_days=150, seed=7))
    with pytest.raises(ValueError, match="different panel"):
        run_backtest(other, params, kill_switch=None, bundle=bundle)
    with pytest.raises(ValueError, match="different panel"):
        run_backtest(panel, SignalParams(alpha=0.5), kill_switch=None, bundle=bundle)


def test_argument_validation():
    panel = generate_synthetic(SyntheticMarketConfig(n_stocks=8, n_days=150, seed=8))
    with pytest.raises(ValueError, match="execution"):
        run_backtest(panel, execution="open")
    with pytest.raises(ValueError, match="scale"):
        run_backtest(panel, scale=0.0)
    with pytest.raises(DataError, match="no tradable dates"):
        run_backtest(panel, date_range=(panel.calendar.dates[0], panel.calendar.dates[30]))
    with pytest.raises(DataError, match="empty"):
        run_backtest(panel, date_range=(panel.calendar.dates[30], panel.calendar.dates[30]))


def test_benchmark_returns_hand_case():
    panel = pair_panel([100.0, 110.0, 121.0], [50.0, 50.0, np.nan])
    bench = benchmark_returns(panel)
    np.testing.assert_allclose(bench, [0.0, 0.05, 0.10], rtol=1e-12)


def test_weights_respect_side_budgets_after_scaling():
    panel = generate_synthetic(SyntheticMarketConfig(n_stocks=20, n_days=300, seed=9))
    res = run_backtest(panel, kill_switch=None, scale=0.8)
    live = np.abs(res.weights).sum(axis=1) > 0
    longs = np.where(res.weights > 0, res.weights, 0.0).sum(axis=1)[live]
    shorts = np.where(res.weights < 0, res.weights, 0.0).sum(axis=1)[live]
    np.testing.assert_allclose(longs, 0.4, atol=1e-10)
    np.testing.assert_allclose(shorts, -0.4, atol=1e-10)


# ---------------------------------------------------------------------------
# kill-switch: vectorized scan vs day-by-day reference

def first_trigger_by_stepping(net, bench, config, target_vol):
    state = KillSwitchState()
    equity = np.cumprod(1.0 + net)
    for t in range(len(net)):
        state = kill_switch_step(state, equity[: t + 1], net[: t + 1],
                                 None if bench is None else bench[: t + 1],
                                 config, target_vol)
        if not state.active:
            return t, state.trigger_type, state.metric_value, state.threshold
    return None


def test_scan_matches_stepping_on_random_series(rng):
    config = KillSwitchConfig(abs_dd_threshold=-0.12, rolling_loss_threshold=-0.06,
                              rolling_window=10, vol_multiple=2.0, vol_window=6,
                              corr_threshold=0.6, corr_window=8)
    n_hit = 0
    for i in range(200):
        n = int(rng.integers(5, 90))
        net = rng.normal(0.0, 0.015, size=n)
        if rng.random() < 0.4:  # splice in a crash to provoke triggers
            k = int(rng.integers(0, n))
            net[k] -= rng.uniform(0.05, 0.3)
        bench = None
        if rng.random() < 0.5:
            bench = 0.7 * net + rng.normal(0.0, 0.01, size=n)
        scan = _first_trigger(net, bench, config, 0.12)
        step = first_trigger_by_stepping(net, bench, config, 0.12)
        if step is None:
            assert scan is None
        else:
            n_hit += 1
            assert scan is not None
            assert scan[0] == step[0], "trigger day differs"
            assert scan[1] is step[1], "trigger type differs"
            assert scan[2] == pytest.approx(step[2], rel=1e-9, abs=1e-12)
            assert scan[3] == pytest.approx(step[3], rel=1e-12)
    assert n_hit > 30  # the battery actually exercised the trigger path


def test_engine_kill_switch_flattens_book():
    a = [100.0] * 3 + [100.0, 20.0, 20.0, 20.0, 20.0, 20.0]  # -80% crash on row 4
    b = [50.0] * 9
    panel = pair_panel(a, b)
    res = run_backtest(panel, SMALL, cost=CostModel(0.001), kill_switch=KillSwitchConfig(),
                       edge_override=constant_edge(panel))
    assert len(res.kill_log) == 1
    trig = res.kill_log[0]
    assert trig.trigger_type is TriggerType.ABSOLUTE_DRAWDOWN
    assert trig.date == panel.calendar.dates[4]
    assert trig.metric_value == pytest.approx(-0.4006)  # 0.5 * -80% plus cost drag
    # formation stops on the trigger row: the crash row still realizes the
    # loss, the next row pays liquidation costs, then everything is flat
    assert np.all(res.weights[4:] == 0.0)
    assert res.turnover[5] == pytest.approx(1.0)
    assert res.daily_returns[5] == pytest.approx(-0.001)
    np.testing.assert_array_equal(res.daily_returns[6:], 0.0)
    assert res.equity[-1] == pytest.approx(res.equity[5])


def test_engine_kill_switch_close_mode_zeroes_next_row():
    a = [100.0] * 3 + [100.0, 20.0, 20.0, 20.0, 20.0, 20.0]
    b = [50.0] * 9
    panel = pair_panel(a, b)
    res = run_backtest(panel, SMALL, cost=CostModel(0.001), kill_switch=KillSwitchConfig(),
                       edge_override=constant_edge(panel), execution="close")
    assert len(res.kill_log) == 1
    t = 4
    assert np.all(res.weights[t + 1:] == 0.0)
    assert np.any(res.weights[t] != 0.0)  # the trigger day itself was held


def test_benign_run_never_triggers():
    panel = generate_synthetic(SyntheticMarketConfig(n_stocks=25, n_days=400, seed=10))
    res = run_backtest(panel, kill_switch=KillSwitchConfig(), scale=0.5)
    assert res.kill_log == []
    assert np.abs(res.weights).sum() > 0
