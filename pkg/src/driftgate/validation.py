"""Walk-forward validation, parameter sweeps, and return decomposition.

Each window trains on [anchor - train_years, anchor) at unit scale with
the kill-switch off, freezes the risk scale from training net returns,
then runs [anchor, anchor + test_years) at that scale with the
kill-switch live.  Test legs concatenate into the combined out-of-sample
series everything downstream (battery, stress, capacity) consumes.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from datetime import date as _date, timedelta

import numpy as np

from . import metrics
from .data_model import PricePanel, TradingCalendar, as_datetime64
from .engine import (BacktestResult, CostModel, SignalBundle,
                     build_signal_bundle, run_backtest)
from .errors import DataError
from .risk_controls import KillSwitchConfig, KillTrigger, ScaleFactor, compute_scale_factor
from .signals import SignalParams

SWEEP_OFFSETS = (-0.30, -0.15, 0.0, 0.15, 0.30)


def add_years(day: _date, years: int) -> _date:
    """Calendar-year shift; Feb 29 falls back to Feb 28."""
    try:
        return day.replace(year=day.year + years)
    except ValueError:
        return day.replace(year=day.year + years, day=28)


@dataclass(frozen=True)
class WindowSpec:
    label: str
    train_start: np.datetime64
    train_end: np.datetime64  # == test_start (the anchor)
    test_start: np.datetime64
    test_end: np.datetime64


def make_windows(calendar: TradingCalendar, anchors: list[object],
                 train_years: int = 5, test_years: int = 1) -> list[WindowSpec]:
    """Window specs from test-start anchor dates; half-open date ranges."""
    if train_years < 1 or test_years < 1:
        raise ValueError("train_years and test_years must be >= 1")
    if not anchors:
        raise ValueError("need at least one anchor date")
    out = []
    first, last = calendar.dates[0], calendar.dates[-1]
    for k, raw in enumerate(anchors):
        label = f"W{k + 1}"
        anchor64 = as_datetime64(raw)
        anchor = anchor64.astype(_date)
        train_start = as_datetime64(add_years(anchor, -train_years))
        test_end = as_datetime64(add_years(anchor, test_years))
        if train_start < first:
            raise DataError(
                f"window {label}: training start {train_start} precedes "
                f"first panel date {first}"
            )
        t0, t1 = calendar.range_indices(train_start, anchor64)
        if t1 <= t0:
            raise DataError(f"window {label}: empty training range [{train_start}, {anchor64})")
        s0, s1 = calendar.range_indices(anchor64, test_end)
        if s1 <= s0:
            raise DataError(f"window {label}: empty test range [{anchor64}, {test_end})")
        out.append(WindowSpec(label=label, train_start=train_start, train_end=anchor64,
                              test_start=anchor64, test_end=test_end))
    return out


def derive_anchors(calendar: TradingCalendar, warmup_days: int,
                   train_years: int, test_years: int,
                   max_windows: int = 3) -> list[np.datetime64]:
    """Earliest feasible anchor after warmup + training span, then
    contiguous test spans, up to `max_windows` full windows."""
    if warmup_days >= len(calendar):
        raise DataError("panel shorter than the signal warm-up")
    first_signal = calendar.dates[warmup_days].astype(_date)
    last = calendar.dates[-1].astype(_date)
    anchors: list[np.datetime64] = []
    anchor = add_years(first_signal, train_years)
    for _ in range(max_windows):
        # test range is half-open, so test_end may sit one day past the data
        if add_years(anchor, test_years) > last + timedelta(days=1):
            break
        anchors.append(as_datetime64(anchor))
        anchor = add_years(anchor, test_years)
    if not anchors:
        raise DataError(
            f"panel too short for a {train_years}y train / {test_years}y test window "
            f"after {warmup_days} warm-up days; supply explicit anchors or more data"
        )
    return anchors


@dataclass
class WindowResult:
    spec: WindowSpec
    train_sharpe: float | None
    scale: ScaleFactor
    test: BacktestResult
    test_stats: metrics.PerfStats | None
    bench_stats: metrics.PerfStats | None


@dataclass
class WalkForwardReport:
    windows: list[WindowResult]
    combined_dates: np.ndarray
    combined_returns: np.ndarray
    combined_benchmark: np.ndarray
    combined_gross: np.ndarray
    combined_turnover: np.ndarray
    combined_stats: metrics.PerfStats | None
    combined_bench_stats: metrics.PerfStats | None
    kill_log: list[tuple[str, KillTrigger]]
    wealth_rows: list[tuple[str, float, float]]  # label, strategy $, benchmark $

    @property
    def combined_sharpe(self) -> float | None:
        return metrics.sharpe_ratio(self.combined_returns)


def run_walk_forward(panel: PricePanel, windows: list[WindowSpec],
                     params: SignalParams | None = None, *,
                     cost: CostModel | None = None,
                     kill_switch: KillSwitchConfig | None = KillSwitchConfig(),
                     vol_cap: float = 0.12, dd_cap: float = 0.15,
                     target_vol: float | None = None,
                     execution: str = "next_close",
                     max_weight: float | None = None,
                     gated: bool = True,
                     bundle: SignalBundle | None = None,
                     edge_override: np.ndarray | None = None,
                     collect_stats: bool = True,
                     initial_wealth: float = 1_000_000.0) -> WalkForwardReport:
    """Train/freeze-scale/test over every window; concatenate test legs."""
    params = params or SignalParams()
    cost = cost or CostModel()
    if target_vol is None:
        target_vol = vol_cap
    if not windows:
        raise ValueError("need at least one window")
    if bundle is None:
        bundle = build_signal_bundle(panel, params)

    results: list[WindowResult] = []
    kill_log: list[tuple[str, KillTrigger]] = []
    for w in windows:
        try:
            train = run_backtest(panel, params, scale=1.0, cost=cost, kill_switch=None,
                                 date_range=(w.train_start, w.train_end),
                                 execution=execution, max_weight=max_weight,
                                 gated=gated, bundle=bundle, edge_override=edge_override)
            scale = compute_scale_factor(train.daily_returns, vol_cap=vol_cap, dd_cap=dd_cap)
            test = run_backtest(panel, params, scale=scale.value, cost=cost,
                                kill_switch=kill_switch, target_vol=target_vol,
                                date_range=(w.test_start, w.test_end),
                                execution=execution, max_weight=max_weight,
                                gated=gated, bundle=bundle, edge_override=edge_override)
        except (DataError, ValueError) as exc:
            raise type(exc)(f"[{w.label}] {exc}") from exc
        for trigger in test.kill_log:
            kill_log.append((w.label, trigger))
        results.append(WindowResult(
            spec=w,
            train_sharpe=metrics.sharpe_ratio(train.daily_returns),
            scale=scale,
            test=test,
            test_stats=metrics.perf_stats(test.daily_returns, test.benchmark) if collect_stats else None,
            bench_stats=metrics.perf_stats(test.benchmark) if collect_stats else None,
        ))

    combined = np.concatenate([r.test.daily_returns for r in results])
    bench = np.concatenate([r.test.benchmark for r in results])
    wealth_rows = []
    strat_wealth = bench_wealth = initial_wealth
    for r in results:
        strat_wealth *= float(np.prod(1.0 + r.test.daily_returns))
        bench_wealth *= float(np.prod(1.0 + r.test.benchmark))
        wealth_rows.append((r.spec.label, strat_wealth, bench_wealth))

    return WalkForwardReport(
        windows=results,
        combined_dates=np.concatenate([r.test.dates for r in results]),
        combined_returns=combined,
        combined_benchmark=bench,
        combined_gross=np.concatenate([r.test.gross_returns for r in results]),
        combined_turnover=np.concatenate([r.test.turnover for r in results]),
        combined_stats=metrics.perf_stats(combined, bench) if collect_stats else None,
        combined_bench_stats=metrics.perf_stats(bench) if collect_stats else None,
        kill_log=kill_log,
        wealth_rows=wealth_rows,
    )


# ---------------------------------------------------------------------------
# one-at-a-time parameter sweep
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SweepCell:
    offset: float
    value: float
    sharpe: float | None
    ann_return: float | None
    error: str | None = None  # set when the cell could not run at all


@dataclass
class SweepRow:
    parameter: str
    cells: list[SweepCell]

    @property
    def sharpe_range(self) -> tuple[float, float]:
        vals = [c.sharpe for c in cells_with_sharpe(self.cells)]
        return (min(vals), max(vals)) if vals else (float("nan"), float("nan"))


def cells_with_sharpe(cells: list[SweepCell]) -> list[SweepCell]:
    return [c for c in cells if c.sharpe is not None]


@dataclass
class SweepReport:
    rows: list[SweepRow]
    base_sharpe: float | None


def parameter_sweep(panel: PricePanel, windows: list[WindowSpec],
                    params: SignalParams | None = None, *,
                    cost: CostModel | None = None,
                    kill_switch: KillSwitchConfig | None = KillSwitchConfig(),
                    offsets: tuple[float, ...] = SWEEP_OFFSETS,
                    **wf_kwargs) -> SweepReport:
    """One-at-a-time relative offsets on drift window, gate threshold,
    value/reversal blend, and cost rate; combined Sharpe per cell.

    The zero-offset cell reuses the base run's signal bundle, so its
    numbers are bit-identical to the headline walk-forward.
    """
    params = params or SignalParams()
    cost = cost or CostModel()
    base_bundle = build_signal_bundle(panel, params)

    def run(p: SignalParams, c: CostModel, bundle: SignalBundle | None) -> metrics.PerfStats:
        report = run_walk_forward(panel, windows, p, cost=c, kill_switch=kill_switch,
                                  bundle=bundle, **wf_kwargs)
        return report.combined_stats

    rows: list[SweepRow] = []
    base_stats: metrics.PerfStats | None = None

    def cell(offset: float, value: float, p: SignalParams, c: CostModel) -> SweepCell:
        nonlocal base_stats
        reusable = p == params
        if offset == 0.0 and reusable and c == cost and base_stats is not None:
            stats = base_stats
        else:
            try:
                stats = run(p, c, base_bundle if reusable else None)
            except (DataError, ValueError) as exc:
                # A harsh perturbation can leave a training leg with no trades
                # at all (gate never opens).  That is a finding, not a crash:
                # the cell reports empty.
                return SweepCell(offset=offset, value=value, sharpe=None,
                                 ann_return=None, error=str(exc))
        if offset == 0.0 and reusable and c == cost:
            base_stats = stats
        return SweepCell(offset=offset, value=value, sharpe=stats.sharpe,
                         ann_return=stats.ann_return)

    specs: list[tuple[str, object]] = [
        ("drift_window", lambda off: replace(
            params, drift_window=max(1, int(round(params.drift_window * (1.0 + off)))))),
        ("up_threshold", lambda off: replace(
            params, up_threshold=params.up_threshold * (1.0 + off))),
        ("alpha", lambda off: replace(params, alpha=params.alpha * (1.0 + off))),
    ]
    for name, perturb in specs:
        cells = []
        for off in offsets:
            p = perturb(off)
            value = float(getattr(p, name))
            cells.append(cell(off, value, p, cost))
        rows.append(SweepRow(parameter=name, cells=cells))

    cost_cells = []
    for off in offsets:
        c = CostModel(rate_per_unit=cost.rate_per_unit * (1.0 + off),
                      slippage_per_unit=cost.slippage_per_unit)
        cost_cells.append(cell(off, c.rate_per_unit, params, c))
    rows.append(SweepRow(parameter="cost_rate", cells=cost_cells))

    return SweepReport(rows=rows, base_sharpe=None if base_stats is None else base_stats.sharpe)


# ---------------------------------------------------------------------------
# gate / blend decomposition
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AttributionRun:
    name: str
    sharpe: float | None
    ann_return: float


@dataclass
class AttributionReport:
    runs: list[AttributionRun]
    interaction_sharpe: float | None
    interaction_ann_return: float


def attribution_decomposition(panel: PricePanel, windows: list[WindowSpec],
                              params: SignalParams | None = None, *,
                              cost: CostModel | None = None,
                              kill_switch: KillSwitchConfig | None = KillSwitchConfig(),
                              **wf_kwargs) -> AttributionReport:
    """Four walk-forwards isolating the blend and the gate.

    value_gated (alpha=1), reversal_gated (alpha=0), combined_ungated
    (gate off), combined_gated (the strategy).  The interaction term is
    combined_gated - (value_gated + reversal_gated - combined_ungated).
    """
    params = params or SignalParams()
    cost = cost or CostModel()
    setups = [
        ("value_gated", replace(params, alpha=1.0), True),
        ("reversal_gated", replace(params, alpha=0.0), True),
        ("combined_ungated", params, False),
        ("combined_gated", params, True),
    ]
    runs: list[AttributionRun] = []
    for name, p, gated in setups:
        report = run_walk_forward(panel, windows, p, cost=cost, kill_switch=kill_switch,
                                  gated=gated, **wf_kwargs)
        stats = report.combined_stats
        runs.append(AttributionRun(name=name, sharpe=stats.sharpe, ann_return=stats.ann_return))

    by_name = {r.name: r for r in runs}
    parts = [by_name["value_gated"], by_name["reversal_gated"],
             by_name["combined_ungated"], by_name["combined_gated"]]
    if any(r.sharpe is None for r in parts):
        inter_sharpe = None
    else:
        inter_sharpe = (by_name["combined_gated"].sharpe
                        - (by_name["value_gated"].sharpe
                           + by_name["reversal_gated"].sharpe
                           - by_name["combined_ungated"].sharpe))
    inter_ret = (by_name["combined_gated"].ann_return
                 - (by_name["value_gated"].ann_return
                    + by_name["reversal_gated"].ann_return
                    - by_name["combined_ungated"].ann_return))
    return AttributionReport(runs=runs, interaction_sharpe=inter_sharpe,
                             interaction_ann_return=inter_ret)
