"""Command-line interface.

    driftgate [-c run.toml] [--set key=value ...] [--output-dir DIR]
              [--threads N] <command>

Commands: synth, backtest, walkforward, sweep, attribution, randomize,
stress, capacity, report.  Every configuration field has a default
except the data source: point data.source at a CSV or configure
[data.synthetic].  --set overrides any dotted key.  Outputs land in
--output-dir > config output_dir > $DRIFTGATE_OUTPUT_DIR > ./driftgate_out,
and every output file starts with a '#' header carrying the sha256 of
the resolved configuration (location and thread count excluded, since
neither may change results).

Exit codes: 2 config error, 3 data error, 4 internal invariant breach.
"""
from __future__ import annotations

import argparse
import hashlib
import os
import sys
from dataclasses import dataclass
from datetime import date as _date

import numpy as np

from . import reports
from ._toml import load_toml, parse_value, set_path
from .data_model import (PricePanel, SyntheticMarketConfig, generate_synthetic,
                         load_panel, save_panel)
from .engine import (CostModel, build_signal_bundle, run_backtest)
from .errors import ConfigError, DataError, InvariantError
from .metrics import perf_stats
from .risk_controls import KillSwitchConfig
from .robustness import (CrisisConfig, ImpactModel, StressConfig, TrialConfig,
                         TrialMode, capacity_curve, fit_impact_model,
                         randomization_test, stress_run)
from .signals import SignalParams
from .validation import (attribution_decomposition, derive_anchors, make_windows,
                         parameter_sweep, run_walk_forward)

ENV_OUTPUT_DIR = "DRIFTGATE_OUTPUT_DIR"
DEFAULT_OUTPUT_DIR = "driftgate_out"

_MISSING = object()


class _Section:
    """Pop-and-validate view over one config table; leftovers are errors."""

    def __init__(self, data: object, path: str = ""):
        if not isinstance(data, dict):
            raise ConfigError(f"{path or 'config'} must be a table, got {type(data).__name__}")
        self._data = dict(data)
        self._path = path

    def _name(self, key: str) -> str:
        return f"{self._path}.{key}" if self._path else key

    def has(self, key: str) -> bool:
        return key in self._data

    def raw(self, key: str, default: object = _MISSING) -> object:
        if key in self._data:
            return self._data.pop(key)
        if default is _MISSING:
            raise ConfigError(f"missing required key {self._name(key)}")
        return default

    def number(self, key: str, default: object = _MISSING) -> float:
        v = self.raw(key, default)
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ConfigError(f"{self._name(key)} must be a number, got {v!r}")
        return float(v)

    def integer(self, key: str, default: object = _MISSING) -> int:
        v = self.raw(key, default)
        if isinstance(v, bool) or not isinstance(v, int):
            raise ConfigError(f"{self._name(key)} must be an integer, got {v!r}")
        return v

    def string(self, key: str, default: object = _MISSING) -> str:
        v = self.raw(key, default)
        if not isinstance(v, str):
            raise ConfigError(f"{self._name(key)} must be a string, got {v!r}")
        return v

    def boolean(self, key: str, default: object = _MISSING) -> bool:
        v = self.raw(key, default)
        if not isinstance(v, bool):
            raise ConfigError(f"{self._name(key)} must be true or false, got {v!r}")
        return v

    def day(self, key: str, default: object = _MISSING) -> _date | None:
        v = self.raw(key, default)
        if v is None or isinstance(v, _date):
            return v
        raise ConfigError(f"{self._name(key)} must be a date (YYYY-MM-DD), got {v!r}")

    def date_list(self, key: str, default: object = _MISSING) -> list[_date] | None:
        v = self.raw(key, default)
        if v is None:
            return None
        if not isinstance(v, list) or not all(isinstance(x, _date) for x in v):
            raise ConfigError(f"{self._name(key)} must be an array of dates")
        return v

    def number_list(self, key: str, default: object = _MISSING) -> list[float]:
        v = self.raw(key, default)
        if not isinstance(v, list) or any(isinstance(x, bool) or not isinstance(x, (int, float)) for x in v):
            raise ConfigError(f"{self._name(key)} must be an array of numbers")
        return [float(x) for x in v]

    def table(self, key: str) -> "_Section":
        v = self.raw(key, {})
        return _Section(v, self._name(key))

    def finish(self) -> None:
        if self._data:
            names = ", ".join(sorted(self._name(k) for k in self._data))
            raise ConfigError(f"unknown key(s): {names}")


def _build(path: str, factory, **kwargs):
    try:
        return factory(**kwargs)
    except ValueError as exc:
        raise ConfigError(f"[{path}] {exc}") from None


@dataclass
class Settings:
    resolved: dict
    config_hash: str
    master_seed: int
    execution: str
    data_mode: str  # "file" or "synthetic"
    source: str | None
    delimiter: str
    schema: dict[str, str] | None
    synthetic: SyntheticMarketConfig | None
    signal: SignalParams
    max_weight: float | None
    cost: CostModel
    kill_switch: KillSwitchConfig | None
    vol_cap: float
    dd_cap: float
    target_vol: float
    anchors: list[_date] | None
    train_years: int
    test_years: int
    max_windows: int
    bt_start: _date | None
    bt_end: _date | None
    bt_scale: float
    trial_config: TrialConfig
    stress: StressConfig
    stress_seed: int
    impact: ImpactModel
    aum_levels: list[float]
    calibration: tuple[list[float], list[float]] | None
    config_output_dir: str | None

    def header_lines(self) -> list[str]:
        return [f"config_sha256 {self.config_hash}"]


def _canonical(obj: object) -> str:
    if isinstance(obj, dict):
        inner = ",".join(f"{k}:{_canonical(v)}" for k, v in sorted(obj.items()))
        return "{" + inner + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ",".join(_canonical(v) for v in obj) + "]"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, _date):
        return obj.isoformat()
    if isinstance(obj, float):
        return repr(obj)
    if obj is None:
        return "null"
    return repr(obj)


def resolve_config(raw: dict, need_data: bool = True) -> Settings:
    """Defaults + validation + canonical hash from the raw config dict."""
    root = _Section(raw)
    master_seed = root.integer("master_seed", 0)
    if master_seed < 0:
        raise ConfigError("master_seed must be >= 0")
    execution = root.string("execution", "next_close")
    if execution not in ("next_close", "close"):
        raise ConfigError(f"execution must be next_close or close, got {execution!r}")
    config_output_dir = root.string("output_dir", "") or None

    data = root.table("data")
    source = data.string("source", "") or None
    delimiter = data.string("delimiter", ",")
    columns = data.table("columns")
    schema = {}
    for logical in ("date", "ticker", "close", "volume", "sector"):
        if columns.has(logical):
            schema[logical] = columns.string(logical)
    columns.finish()
    synth_present = data.has("synthetic")
    synth_section = data.table("synthetic")
    synthetic = None
    if source and synth_present:
        raise ConfigError("set either data.source or [data.synthetic], not both")
    data_mode = "file" if source else "synthetic"
    if data_mode == "synthetic":
        if not synth_present and need_data:
            raise ConfigError("no data configured: set data.source or [data.synthetic]")
        d = SyntheticMarketConfig()
        synthetic = _build("data.synthetic", SyntheticMarketConfig,
                           n_stocks=synth_section.integer("n_stocks", d.n_stocks),
                           n_days=synth_section.integer("n_days", d.n_days),
                           seed=synth_section.integer("seed", master_seed),
                           base_vol=synth_section.number("base_vol", d.base_vol),
                           drift_regime_fraction=synth_section.number(
                               "drift_regime_fraction", d.drift_regime_fraction),
                           drift_strength=synth_section.number("drift_strength", d.drift_strength),
                           reversal_strength=synth_section.number(
                               "reversal_strength", d.reversal_strength),
                           episode_length=synth_section.number("episode_length", d.episode_length),
                           reversal_lookback=synth_section.integer(
                               "reversal_lookback", d.reversal_lookback),
                           start=synth_section.string("start", d.start))
    synth_section.finish()
    data.finish()

    signal_section = root.table("signal")
    signal = _build("signal", SignalParams,
                    alpha=signal_section.number("alpha", 0.70),
                    reversal_lookback=signal_section.integer("reversal_lookback", 10),
                    drift_window=signal_section.integer("drift_window", 63),
                    up_threshold=signal_section.number("up_threshold", 0.60))
    signal_section.finish()

    portfolio_section = root.table("portfolio")
    max_weight = None
    if portfolio_section.has("max_weight"):
        max_weight = portfolio_section.number("max_weight")
        if max_weight <= 0:
            raise ConfigError("portfolio.max_weight must be positive")
    portfolio_section.finish()

    cost_section = root.table("cost")
    cost = _build("cost", CostModel,
                  rate_per_unit=cost_section.number("rate_per_unit", 0.00006),
                  slippage_per_unit=cost_section.number("slippage_per_unit", 0.0))
    cost_section.finish()

    ks_section = root.table("kill_switch")
    ks_enabled = ks_section.boolean("enabled", True)
    kill_switch = _build("kill_switch", KillSwitchConfig,
                         abs_dd_threshold=ks_section.number("abs_dd_threshold", -0.30),
                         rolling_loss_threshold=ks_section.number("rolling_loss_threshold", -0.10),
                         rolling_window=ks_section.integer("rolling_window", 63),
                         vol_multiple=ks_section.number("vol_multiple", 3.0),
                         vol_window=ks_section.integer("vol_window", 21),
                         corr_threshold=ks_section.number("corr_threshold", 0.5),
                         corr_window=ks_section.integer("corr_window", 63))
    ks_section.finish()
    ks_or_none = kill_switch if ks_enabled else None

    risk_section = root.table("risk")
    vol_cap = risk_section.number("vol_cap", 0.12)
    dd_cap = risk_section.number("dd_cap", 0.15)
    target_vol = risk_section.number("target_vol", vol_cap)
    if vol_cap <= 0 or dd_cap <= 0 or target_vol <= 0:
        raise ConfigError("risk caps and target_vol must be positive")
    risk_section.finish()

    windows_section = root.table("windows")
    anchors = windows_section.date_list("anchors", None)
    train_years = windows_section.integer("train_years", 5)
    test_years = windows_section.integer("test_years", 1)
    max_windows = windows_section.integer("max_windows", 3)
    if train_years < 1 or test_years < 1 or max_windows < 1:
        raise ConfigError("windows.train_years, test_years, max_windows must be >= 1")
    windows_section.finish()

    bt_section = root.table("backtest")
    bt_start = bt_section.day("start", None)
    bt_end = bt_section.day("end", None)
    bt_scale = bt_section.number("scale", 1.0)
    if bt_scale <= 0:
        raise ConfigError("backtest.scale must be positive")
    bt_section.finish()

    robustness_section = root.table("robustness")
    mode_text = robustness_section.string("mode", "random_regime")
    try:
        mode = TrialMode(mode_text)
    except ValueError:
        raise ConfigError(
            f"robustness.mode must be one of {[m.value for m in TrialMode]}, got {mode_text!r}"
        ) from None
    trial_config = _build("robustness", TrialConfig,
                          n_trials=robustness_section.integer("n_trials", 1000),
                          seed=robustness_section.integer("seed", master_seed),
                          mode=mode)
    robustness_section.finish()

    stress_section = root.table("stress")
    stress_seed = stress_section.integer("seed", master_seed)
    crisis_section = stress_section.table("crisis")
    crisis = _build("stress.crisis", CrisisConfig,
                    depth_reduction=crisis_section.number("depth_reduction", 0.60),
                    spread_multiplier=crisis_section.number("spread_multiplier", 2.0),
                    slippage_bp=crisis_section.number("slippage_bp", 10.0),
                    vol_multiplier=crisis_section.number("vol_multiplier", 1.0),
                    participation=crisis_section.number("participation", 0.10))
    crisis_section.finish()
    stress = _build("stress", StressConfig,
                    noise_bp_daily=stress_section.number("noise_bp_daily", 50.0),
                    cost_multiplier=stress_section.number("cost_multiplier", 2.0),
                    slippage_bp=stress_section.number("slippage_bp", 10.0),
                    crisis=crisis)
    stress_section.finish()

    capacity_section = root.table("capacity")
    impact = _build("capacity", ImpactModel,
                    c=capacity_section.number("impact_c", 50.0),
                    gamma=capacity_section.number("impact_gamma", 0.5))
    aum_levels = capacity_section.number_list(
        "aum_levels", [1e7, 5e7, 1e8, 5e8, 1e9, 5e9, 1e10])
    cal_p = capacity_section.number_list(
        "calibration_participation", [0.02, 0.04, 0.10, 0.20, 0.40, 0.80])
    cal_bp = capacity_section.number_list(
        "calibration_impact_bp", [3.0, 8.0, 15.0, 28.0, 52.0, 95.0])
    if len(cal_p) != len(cal_bp):
        raise ConfigError("capacity calibration arrays must have equal length")
    calibration = (cal_p, cal_bp) if len(cal_p) >= 2 else None
    capacity_section.finish()

    root.finish()

    resolved = {
        "master_seed": master_seed,
        "execution": execution,
        "data": {
            "mode": data_mode,
            "source": source,
            "delimiter": delimiter,
            "columns": schema,
            "synthetic": None if synthetic is None else {
                "n_stocks": synthetic.n_stocks, "n_days": synthetic.n_days,
                "seed": synthetic.seed, "base_vol": synthetic.base_vol,
                "drift_regime_fraction": synthetic.drift_regime_fraction,
                "drift_strength": synthetic.drift_strength,
                "reversal_strength": synthetic.reversal_strength,
                "episode_length": synthetic.episode_length,
                "reversal_lookback": synthetic.reversal_lookback,
                "start": synthetic.start,
            },
        },
        "signal": {"alpha": signal.alpha, "reversal_lookback": signal.reversal_lookback,
                   "drift_window": signal.drift_window, "up_threshold": signal.up_threshold},
        "portfolio": {"max_weight": max_weight},
        "cost": {"rate_per_unit": cost.rate_per_unit, "slippage_per_unit": cost.slippage_per_unit},
        "kill_switch": {"enabled": ks_enabled, "abs_dd_threshold": kill_switch.abs_dd_threshold,
                        "rolling_loss_threshold": kill_switch.rolling_loss_threshold,
                        "rolling_window": kill_switch.rolling_window,
                        "vol_multiple": kill_switch.vol_multiple,
                        "vol_window": kill_switch.vol_window,
                        "corr_threshold": kill_switch.corr_threshold,
                        "corr_window": kill_switch.corr_window},
        "risk": {"vol_cap": vol_cap, "dd_cap": dd_cap, "target_vol": target_vol},
        "windows": {"anchors": anchors, "train_years": train_years,
                    "test_years": test_years, "max_windows": max_windows},
        "backtest": {"start": bt_start, "end": bt_end, "scale": bt_scale},
        "robustness": {"n_trials": trial_config.n_trials, "seed": trial_config.seed,
                       "mode": trial_config.mode.value},
        "stress": {"seed": stress_seed, "noise_bp_daily": stress.noise_bp_daily,
                   "cost_multiplier": stress.cost_multiplier, "slippage_bp": stress.slippage_bp,
                   "crisis": {"depth_reduction": crisis.depth_reduction,
                              "spread_multiplier": crisis.spread_multiplier,
                              "slippage_bp": crisis.slippage_bp,
                              "vol_multiplier": crisis.vol_multiplier,
                              "participation": crisis.participation}},
        "capacity": {"impact_c": impact.c, "impact_gamma": impact.gamma,
                     "aum_levels": aum_levels,
                     "calibration_participation": cal_p,
                     "calibration_impact_bp": cal_bp},
    }
    config_hash = hashlib.sha256(_canonical(resolved).encode()).hexdigest()

    return Settings(
        resolved=resolved, config_hash=config_hash, master_seed=master_seed,
        execution=execution, data_mode=data_mode, source=source, delimiter=delimiter,
        schema=schema or None, synthetic=synthetic, signal=signal, max_weight=max_weight,
        cost=cost, kill_switch=ks_or_none, vol_cap=vol_cap, dd_cap=dd_cap,
        target_vol=target_vol, anchors=anchors, train_years=train_years,
        test_years=test_years, max_windows=max_windows, bt_start=bt_start,
        bt_end=bt_end, bt_scale=bt_scale, trial_config=trial_config, stress=stress,
        stress_seed=stress_seed, impact=impact, aum_levels=aum_levels,
        calibration=calibration, config_output_dir=config_output_dir,
    )


# ---------------------------------------------------------------------------
# command plumbing
# ---------------------------------------------------------------------------


def _load_panel(settings: Settings) -> PricePanel:
    if settings.data_mode == "file":
        return load_panel(settings.source, schema=settings.schema,
                          delimiter=settings.delimiter)
    return generate_synthetic(settings.synthetic)


def _windows(settings: Settings, panel: PricePanel):
    anchors = settings.anchors
    if anchors is None:
        anchors = derive_anchors(panel.calendar, settings.signal.warmup_days,
                                 settings.train_years, settings.test_years,
                                 settings.max_windows)
    return make_windows(panel.calendar, list(anchors),
                        settings.train_years, settings.test_years)


def _wf_kwargs(settings: Settings) -> dict:
    return dict(cost=settings.cost, kill_switch=settings.kill_switch,
                vol_cap=settings.vol_cap, dd_cap=settings.dd_cap,
                target_vol=settings.target_vol, execution=settings.execution,
                max_weight=settings.max_weight)


def _write_text(path: str, header_lines: list[str], text: str) -> None:
    with open(path, "w") as handle:
        for line in header_lines:
            handle.write(f"# {line}\n")
        handle.write(text)


def _out(outdir: str, name: str) -> str:
    return os.path.join(outdir, name)


def cmd_synth(settings: Settings, outdir: str, args) -> int:
    if settings.data_mode != "synthetic":
        raise ConfigError("synth generates data: configure [data.synthetic], not data.source")
    panel = generate_synthetic(settings.synthetic)
    path = _out(outdir, "panel.csv")
    save_panel(panel, path, header_lines=tuple(settings.header_lines()))
    ret = panel.close[1:] / panel.close[:-1] - 1.0
    lines = [
        f"synthetic panel: {panel.n_tickers} tickers x {panel.n_dates} dates "
        f"({panel.calendar.dates[0]} .. {panel.calendar.dates[-1]})",
        f"seed {settings.synthetic.seed}   pooled daily return "
        f"mean {ret.mean():.6f} std {ret.std(ddof=1):.6f}",
    ]
    text = "\n".join(lines) + "\n"
    _write_text(_out(outdir, "summary.txt"), settings.header_lines(), text)
    print(text, end="")
    print(f"wrote {path}")
    return 0


def cmd_backtest(settings: Settings, outdir: str, args) -> int:
    panel = _load_panel(settings)
    date_range = None
    if settings.bt_start is not None or settings.bt_end is not None:
        date_range = (settings.bt_start, settings.bt_end)
    result = run_backtest(panel, settings.signal, scale=settings.bt_scale,
                          cost=settings.cost, kill_switch=settings.kill_switch,
                          date_range=date_range, execution=settings.execution,
                          target_vol=settings.target_vol, max_weight=settings.max_weight)
    header = settings.header_lines()
    reports.write_daily_csv(_out(outdir, "daily.csv"), header, result.dates, {
        "gross": result.gross_returns, "cost": result.costs, "turnover": result.turnover,
        "net": result.daily_returns, "equity": result.equity, "benchmark": result.benchmark,
    })
    reports.write_weights_csv(_out(outdir, "weights.csv"), header, result.dates,
                              result.tickers, result.weights)
    stats = perf_stats(result.daily_returns, result.benchmark)
    lines = reports.stats_lines("backtest", stats)
    if result.kill_log:
        for trig in result.kill_log:
            lines.append(f"kill-switch {trig.date}: {trig.trigger_type.value} "
                         f"metric {trig.metric_value:.4f} threshold {trig.threshold:.4f}")
    else:
        lines.append("kill-switch triggers: none")
    text = "\n".join(lines) + "\n"
    _write_text(_out(outdir, "summary.txt"), header, text)
    print(text, end="")
    return 0


def _run_walkforward(settings: Settings, panel: PricePanel, windows, bundle=None,
                     collect_stats: bool = True):
    return run_walk_forward(panel, windows, settings.signal, bundle=bundle,
                            collect_stats=collect_stats, **_wf_kwargs(settings))


def _write_walkforward(settings: Settings, outdir: str, report) -> None:
    header = settings.header_lines()
    reports.write_per_window_csv(_out(outdir, "per_window.csv"), header, report)
    equity = np.cumprod(1.0 + report.combined_returns)
    reports.write_daily_csv(_out(outdir, "combined.csv"), header, report.combined_dates, {
        "net": report.combined_returns, "gross": report.combined_gross,
        "turnover": report.combined_turnover, "equity": equity,
        "benchmark": report.combined_benchmark,
    })
    reports.write_kill_log_csv(_out(outdir, "killlog.csv"), header, report)
    _write_text(_out(outdir, "report.txt"), header, reports.render_walk_forward(report))


def cmd_walkforward(settings: Settings, outdir: str, args) -> int:
    panel = _load_panel(settings)
    windows = _windows(settings, panel)
    report = _run_walkforward(settings, panel, windows)
    _write_walkforward(settings, outdir, report)
    print(reports.render_walk_forward(report), end="")
    return 0


def cmd_sweep(settings: Settings, outdir: str, args) -> int:
    panel = _load_panel(settings)
    windows = _windows(settings, panel)
    report = parameter_sweep(panel, windows, settings.signal, **_wf_kwargs(settings))
    header = settings.header_lines()
    reports.write_sweep_csv(_out(outdir, "sweep.csv"), header, report)
    text = reports.render_sweep(report)
    _write_text(_out(outdir, "sweep.txt"), header, text)
    print(text, end="")
    return 0


def cmd_attribution(settings: Settings, outdir: str, args) -> int:
    panel = _load_panel(settings)
    windows = _windows(settings, panel)
    kwargs = _wf_kwargs(settings)
    report = attribution_decomposition(panel, windows, settings.signal, **kwargs)
    header = settings.header_lines()
    reports.write_attribution_csv(_out(outdir, "attribution.csv"), header, report)
    text = reports.render_attribution(report)
    _write_text(_out(outdir, "attribution.txt"), header, text)
    print(text, end="")
    return 0


def cmd_randomize(settings: Settings, outdir: str, args) -> int:
    panel = _load_panel(settings)
    windows = _windows(settings, panel)
    report = randomization_test(panel, windows, settings.signal,
                                trial_config=settings.trial_config,
                                threads=args.threads, **_wf_kwargs(settings))
    header = settings.header_lines()
    reports.write_trials_csv(_out(outdir, "trials.csv"), header, report)
    text = reports.render_randomization(report)
    _write_text(_out(outdir, "randomization.txt"), header, text)
    print(text, end="")
    return 0


def cmd_stress(settings: Settings, outdir: str, args) -> int:
    panel = _load_panel(settings)
    windows = _windows(settings, panel)
    base = _run_walkforward(settings, panel, windows)
    report = stress_run(panel, windows, settings.signal, stress=settings.stress,
                        impact=settings.impact, seed=settings.stress_seed,
                        base_report=base, **_wf_kwargs(settings))
    header = settings.header_lines()
    reports.write_stress_csv(_out(outdir, "stress.csv"), header, report)
    text = reports.render_stress(report)
    _write_text(_out(outdir, "stress.txt"), header, text)
    print(text, end="")
    return 0


def _capacity_reports(settings: Settings, report, panel: PricePanel):
    configured = capacity_curve(report, panel, settings.aum_levels,
                                cost=settings.cost, model=settings.impact)
    calibrated = None
    if settings.calibration is not None:
        fitted = fit_impact_model(np.array(settings.calibration[0]),
                                  np.array(settings.calibration[1]))
        calibrated = capacity_curve(report, panel, settings.aum_levels,
                                    cost=settings.cost, model=fitted)
    return configured, calibrated


def cmd_capacity(settings: Settings, outdir: str, args) -> int:
    panel = _load_panel(settings)
    windows = _windows(settings, panel)
    base = _run_walkforward(settings, panel, windows)
    configured, calibrated = _capacity_reports(settings, base, panel)
    header = settings.header_lines()
    reports.write_capacity_csv(_out(outdir, "capacity.csv"), header, configured)
    text = "configured impact model\n" + reports.render_capacity(configured)
    if calibrated is not None:
        reports.write_capacity_csv(_out(outdir, "capacity_calibrated.csv"), header, calibrated)
        text += "\ncalibrated impact model (least-squares on reference curve)\n"
        text += reports.render_capacity(calibrated)
    _write_text(_out(outdir, "capacity.txt"), header, text)
    print(text, end="")
    return 0


def cmd_report(settings: Settings, outdir: str, args) -> int:
    panel = _load_panel(settings)
    windows = _windows(settings, panel)
    bundle = build_signal_bundle(panel, settings.signal)
    header = settings.header_lines()

    wf = _run_walkforward(settings, panel, windows, bundle=bundle)
    _write_walkforward(settings, outdir, wf)

    rand = randomization_test(panel, windows, settings.signal,
                              trial_config=settings.trial_config,
                              threads=args.threads, bundle=bundle,
                              base_report=wf, **_wf_kwargs(settings))
    reports.write_trials_csv(_out(outdir, "trials.csv"), header, rand)

    stress = stress_run(panel, windows, settings.signal, stress=settings.stress,
                        impact=settings.impact, seed=settings.stress_seed,
                        base_report=wf, **_wf_kwargs(settings))
    reports.write_stress_csv(_out(outdir, "stress.csv"), header, stress)

    configured, calibrated = _capacity_reports(settings, wf, panel)
    reports.write_capacity_csv(_out(outdir, "capacity.csv"), header, configured)
    if calibrated is not None:
        reports.write_capacity_csv(_out(outdir, "capacity_calibrated.csv"), header, calibrated)

    attribution = attribution_decomposition(panel, windows, settings.signal,
                                            **_wf_kwargs(settings))
    reports.write_attribution_csv(_out(outdir, "attribution.csv"), header, attribution)

    sweep = parameter_sweep(panel, windows, settings.signal, **_wf_kwargs(settings))
    reports.write_sweep_csv(_out(outdir, "sweep.csv"), header, sweep)

    sections = [
        reports.render_walk_forward(wf),
        reports.render_randomization(rand),
        reports.render_stress(stress),
        "configured impact model\n" + reports.render_capacity(configured),
    ]
    if calibrated is not None:
        sections.append("calibrated impact model\n" + reports.render_capacity(calibrated))
    sections.append(reports.render_attribution(attribution))
    sections.append(reports.render_sweep(sweep))
    text = "\n".join(sections)
    _write_text(_out(outdir, "report.txt"), header, text)
    print(text, end="")
    return 0


_COMMANDS = {
    "synth": cmd_synth,
    "backtest": cmd_backtest,
    "walkforward": cmd_walkforward,
    "sweep": cmd_sweep,
    "attribution": cmd_attribution,
    "randomize": cmd_randomize,
    "stress": cmd_stress,
    "capacity": cmd_capacity,
    "report": cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="driftgate",
        description="Regime-gated cross-sectional reversal backtester.",
    )
    parser.add_argument("-c", "--config", help="TOML run configuration")
    parser.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a dotted config key (repeatable)")
    parser.add_argument("--output-dir", help="where output files go")
    parser.add_argument("--threads", type=int, default=1,
                        help="worker threads for the trial battery")
    parser.add_argument("command", choices=sorted(_COMMANDS))
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        raw = load_toml(args.config) if args.config else {}
        for override in args.set:
            if "=" not in override:
                raise ConfigError(f"--set needs KEY=VALUE, got {override!r}")
            key, _, value_text = override.partition("=")
            set_path(raw, key.strip(), parse_value(value_text, where=f"--set {key.strip()}"))
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        settings = resolve_config(raw, need_data=args.command != "synth")
        outdir = (args.output_dir or settings.config_output_dir
                  or os.environ.get(ENV_OUTPUT_DIR) or DEFAULT_OUTPUT_DIR)
        os.makedirs(outdir, exist_ok=True)
        return _COMMANDS[args.command](settings, outdir, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except InvariantError as exc:
        print(f"internal invariant breach: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
