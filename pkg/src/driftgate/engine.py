"""Backtest engine: weights to daily P&L with costs and the kill-switch.

Timing (default next_close execution): weights formed at the close of
row t-1 earn row t's returns.  Row t of a run therefore holds

    gross[t]    = sum_i weights[t-1, i] * r[t, i]
    turnover[t] = sum_i |weights[t-1, i] - weights[t-2, i]|
    costs[t]    = (rate + slippage) * turnover[t]
    net[t]      = gross[t] - costs[t]
    equity      = cumprod(1 + net), starting from 1.0

so the trade executed at close t-1 is charged against row t, the first
row of every run is all-zero, and truncating the panel after any date
leaves everything up to that date bit-identical.  execution="close" is
a deliberate-lookahead diagnostic where weights earn same-day returns.

The kill-switch scan is vectorized over the whole run and is equivalent
to stepping day by day: zeroing weights from the trigger row's formation
onward only alters rows strictly after the trigger.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from . import signals as sig
from .data_model import PricePanel, aligned_returns, as_datetime64
from .errors import DataError
from .metrics import TRADING_DAYS
from .portfolio import WeightFrame, build_weight_matrix
from .risk_controls import KillSwitchConfig, KillTrigger, TriggerType

EXECUTION_MODES = ("next_close", "close")


@dataclass(frozen=True)
class CostModel:
    """Linear costs in fraction-of-notional per unit of turnover."""

    rate_per_unit: float = 0.00006  # 0.6bp per unit traded
    slippage_per_unit: float = 0.0

    def __post_init__(self) -> None:
        if self.rate_per_unit < 0 or self.slippage_per_unit < 0:
            raise ValueError("cost rates must be >= 0")

    @property
    def per_unit(self) -> float:
        return self.rate_per_unit + self.slippage_per_unit


@dataclass(frozen=True)
class SignalBundle:
    """All per-panel signal matrices, computed once and shared across runs.

    Rows align with panel dates, columns with panel tickers; NaN marks
    missing.  The trial battery reuses one bundle for every permutation,
    which is what makes thousand-trial runs cheap.
    """

    panel: PricePanel
    params: sig.SignalParams
    ret: np.ndarray
    value: np.ndarray
    reversal: np.ndarray
    base: np.ndarray
    up_frac: np.ndarray
    mask: np.ndarray
    bench: np.ndarray


def build_signal_bundle(panel: PricePanel, params: sig.SignalParams) -> SignalBundle:
    ret = aligned_returns(panel)
    value = sig.value_matrix(panel.close)
    reversal = sig.reversal_matrix(ret, params.reversal_lookback)
    base = sig.base_matrix(value, reversal, params.alpha)
    up_frac = sig.up_fraction_matrix(ret, params.drift_window)
    mask = sig.mask_matrix(up_frac, params.up_threshold)
    live = np.isfinite(ret)
    counts = live.sum(axis=1)
    with np.errstate(invalid="ignore"):
        means = np.nansum(ret, axis=1) / counts
    bench = np.where(counts > 0, means, 0.0)
    for m in (ret, value, reversal, base, up_frac, mask, bench):
        m.flags.writeable = False
    return SignalBundle(panel=panel, params=params, ret=ret, value=value,
                        reversal=reversal, base=base, up_frac=up_frac,
                        mask=mask, bench=bench)


def benchmark_returns(panel: PricePanel, date_range: tuple[object, object] | None = None) -> np.ndarray:
    """Equal-weight mean daily return across live names; empty days are 0."""
    ret = aligned_returns(panel)
    i0, i1 = (0, panel.n_dates) if date_range is None else panel.calendar.range_indices(*date_range)
    ret = ret[i0:i1]
    live = np.isfinite(ret)
    counts = live.sum(axis=1)
    with np.errstate(invalid="ignore"):
        means = np.nansum(ret, axis=1) / counts
    return np.where(counts > 0, means, 0.0)


def _settle(weights: np.ndarray, ret: np.ndarray, per_unit: float,
            next_close: bool) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Weights + returns -> (gross, turnover, costs, net), fully vectorized."""
    held = np.zeros_like(weights)
    prev = np.zeros_like(weights)
    if next_close:
        held[1:] = weights[:-1]
        prev[2:] = weights[:-2]
    else:
        held[:] = weights
        prev[1:] = weights[:-1]
    gross = np.nansum(held * ret, axis=1)  # missing returns realize at zero
    turnover = np.abs(held - prev).sum(axis=1)
    costs = per_unit * turnover
    return gross, turnover, costs, gross - costs


def _first_trigger(net: np.ndarray, bench: np.ndarray | None, config: KillSwitchConfig,
                   target_vol: float) -> tuple[int, TriggerType, float, float] | None:
    """First row where any trigger fires on the always-active series."""
    T = len(net)
    equity = np.cumprod(1.0 + net)
    peak = np.maximum(np.maximum.accumulate(equity), 1.0)
    dd = equity / peak - 1.0
    trig_a = dd <= config.abs_dd_threshold

    trig_b = np.zeros(T, dtype=bool)
    val_b = np.zeros(T)
    w = config.rolling_window
    if T >= w:
        padded = np.concatenate([[1.0], equity])
        trailing = equity[w - 1:] / padded[: T - w + 1] - 1.0
        val_b[w - 1:] = trailing
        trig_b[w - 1:] = trailing <= config.rolling_loss_threshold

    trig_c = np.zeros(T, dtype=bool)
    val_c = np.zeros(T)
    vw = config.vol_window
    if T >= vw:
        vol = sliding_window_view(net, vw).std(axis=-1, ddof=1) * math.sqrt(TRADING_DAYS)
        val_c[vw - 1:] = vol
        trig_c[vw - 1:] = vol >= config.vol_multiple * target_vol

    trig_d = np.zeros(T, dtype=bool)
    val_d = np.zeros(T)
    cw = config.corr_window
    if bench is not None and T >= cw:
        wx = sliding_window_view(net, cw)
        wy = sliding_window_view(bench, cw)
        dx = wx - wx.mean(axis=-1, keepdims=True)
        dy = wy - wy.mean(axis=-1, keepdims=True)
        sxx = (dx * dx).sum(axis=-1)
        syy = (dy * dy).sum(axis=-1)
        ok = (sxx > 0) & (syy > 0)
        corr = np.zeros(len(sxx))
        with np.errstate(invalid="ignore", divide="ignore"):
            corr = np.where(ok, (dx * dy).sum(axis=-1) / np.sqrt(sxx * syy), 0.0)
        val_d[cw - 1:] = corr
        trig_d[cw - 1:] = ok & (np.abs(corr) > config.corr_threshold)

    any_trig = trig_a | trig_b | trig_c | trig_d
    if not any_trig.any():
        return None
    t = int(any_trig.argmax())
    # Fixed evaluation order breaks same-day ties.
    if trig_a[t]:
        return t, TriggerType.ABSOLUTE_DRAWDOWN, float(dd[t]), config.abs_dd_threshold
    if trig_b[t]:
        return t, TriggerType.ROLLING_LOSS, float(val_b[t]), config.rolling_loss_threshold
    if trig_c[t]:
        return t, TriggerType.VOL_SPIKE, float(val_c[t]), config.vol_multiple * target_vol
    return t, TriggerType.CORRELATION_BREAK, float(val_d[t]), config.corr_threshold


@dataclass
class BacktestResult:
    """Arrays over the run's realization rows; weights are formation rows."""

    dates: np.ndarray
    tickers: tuple[str, ...]
    weights: np.ndarray
    gross_returns: np.ndarray
    turnover: np.ndarray
    costs: np.ndarray
    daily_returns: np.ndarray
    equity: np.ndarray
    benchmark: np.ndarray
    scale: float
    execution: str
    kill_log: list[KillTrigger] = field(default_factory=list)

    @cached_property
    def weights_history(self) -> list[WeightFrame]:
        out = []
        for t in range(len(self.dates)):
            row = self.weights[t]
            live = np.flatnonzero(row != 0.0)
            out.append(WeightFrame(
                date=self.dates[t],
                weights={self.tickers[j]: float(row[j]) for j in live},
            ))
        return out


def run_backtest(panel: PricePanel, params: sig.SignalParams | None = None, *,
                 scale: float = 1.0, cost: CostModel | None = None,
                 kill_switch: KillSwitchConfig | None = None,
                 date_range: tuple[object, object] | None = None,
                 execution: str = "next_close", target_vol: float = 0.12,
                 max_weight: float | None = None, gated: bool = True,
                 bundle: SignalBundle | None = None,
                 edge_override: np.ndarray | None = None) -> BacktestResult:
    """Run the strategy over a date range of the panel.

    `scale` multiplies the unit-gross weight book (pass a frozen training
    scale for test legs).  `kill_switch=None` disables the risk scan.
    `edge_override` substitutes a full-panel edge matrix (trial battery);
    `gated=False` drops the regime gate (attribution).
    """
    params = params or sig.SignalParams()
    cost = cost or CostModel()
    if execution not in EXECUTION_MODES:
        raise ValueError(f"execution must be one of {EXECUTION_MODES}")
    if not scale > 0:
        raise ValueError("scale must be positive")
    if bundle is None:
        bundle = build_signal_bundle(panel, params)
    elif bundle.panel is not panel or bundle.params != params:
        raise ValueError("bundle was built for a different panel or params")

    i0, i1 = (0, panel.n_dates) if date_range is None else panel.calendar.range_indices(*date_range)
    if i1 <= i0:
        raise DataError(f"empty backtest range {date_range}")
    warmup = params.warmup_days
    if i1 <= warmup:
        raise DataError(
            f"no tradable dates: range ends before signals exist "
            f"(need {warmup} panel dates of history, range covers indices [{i0}, {i1}))"
        )

    if edge_override is not None:
        if edge_override.shape != bundle.base.shape:
            raise ValueError("edge_override shape must match the panel")
        edge = edge_override[i0:i1]
    elif gated:
        edge = bundle.base[i0:i1] * bundle.mask[i0:i1]
    else:
        edge = bundle.base[i0:i1]

    weights = build_weight_matrix(edge, max_weight=max_weight, check=True)
    if scale != 1.0:
        weights = scale * weights
    ret = bundle.ret[i0:i1]
    bench = bundle.bench[i0:i1]
    next_close = execution == "next_close"
    per_unit = cost.per_unit

    gross, turnover, costs, net = _settle(weights, ret, per_unit, next_close)
    kill_log: list[KillTrigger] = []
    if kill_switch is not None:
        hit = _first_trigger(net, bench, kill_switch, target_vol)
        if hit is not None:
            t, kind, value, threshold = hit
            dates = panel.calendar.dates[i0:i1]
            kill_log.append(KillTrigger(date=dates[t], trigger_type=kind,
                                        metric_value=value, threshold=threshold))
            zero_from = t if next_close else t + 1
            weights = weights.copy()
            weights[zero_from:] = 0.0
            gross, turnover, costs, net = _settle(weights, ret, per_unit, next_close)

    return BacktestResult(
        dates=panel.calendar.dates[i0:i1],
        tickers=panel.tickers,
        weights=weights,
        gross_returns=gross,
        turnover=turnover,
        costs=costs,
        daily_returns=net,
        equity=np.cumprod(1.0 + net),
        benchmark=bench,
        scale=float(scale),
        execution=execution,
        kill_log=kill_log,
    )
