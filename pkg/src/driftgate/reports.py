"""Rendering: result objects to text tables and CSV files.

CSV numeric cells use repr() so files are reproducible byte-for-byte;
text tables round for reading.  Every writer takes header comment lines
(the CLI passes the config hash) emitted as leading '#' rows.
"""
from __future__ import annotations

import csv
from typing import Iterable

import numpy as np

from .metrics import PerfStats
from .robustness import CapacityReport, RandomizationReport, StressReport
from .validation import AttributionReport, SweepReport, WalkForwardReport


def _num(x: object) -> str:
    if x is None:
        return ""
    return repr(float(x))


def _fmt(x: float | None, nd: int = 2) -> str:
    return "n/a" if x is None else f"{x:.{nd}f}"


def _pct(x: float | None, nd: int = 1) -> str:
    return "n/a" if x is None else f"{100.0 * x:.{nd}f}%"


def _open(path: str, header_lines: Iterable[str]):
    handle = open(path, "w", newline="")
    for line in header_lines:
        handle.write(f"# {line}\n")
    return handle


def stats_lines(name: str, stats: PerfStats) -> list[str]:
    return [
        f"{name}",
        f"  days {stats.n_days}   sharpe {_fmt(stats.sharpe)}   "
        f"ann return {_pct(stats.ann_return)} (arith {_pct(stats.ann_return_arith)})   "
        f"ann vol {_pct(stats.ann_vol)}",
        f"  max drawdown {_pct(stats.max_drawdown)}   win rate {_pct(stats.win_rate)}   "
        f"best {_pct(stats.best_day, 2)}   worst {_pct(stats.worst_day, 2)}   "
        f"skew {_fmt(stats.skewness)}   corr vs bench {_fmt(stats.correlation_vs_benchmark)}",
    ]


def render_walk_forward(report: WalkForwardReport) -> str:
    lines = ["WALK-FORWARD VALIDATION", ""]
    header = (f"{'window':8s} {'train':>23s} {'test':>23s} {'train SR':>9s} "
              f"{'scale':>7s} {'test SR':>8s} {'test ret':>9s} {'maxDD':>8s}")
    lines.append(header)
    for w in report.windows:
        s = w.test_stats
        lines.append(
            f"{w.spec.label:8s} {str(w.spec.train_start):>11s}..{str(w.spec.train_end):s} "
            f"{str(w.spec.test_start):>11s}..{str(w.spec.test_end):s} "
            f"{_fmt(w.train_sharpe):>9s} {w.scale.value:7.3f} "
            f"{_fmt(None if s is None else s.sharpe):>8s} "
            f"{_pct(None if s is None else s.ann_return):>9s} "
            f"{_pct(None if s is None else s.max_drawdown):>8s}"
        )
    lines.append("")
    if report.combined_stats is not None:
        lines += stats_lines("combined out-of-sample", report.combined_stats)
        if report.combined_bench_stats is not None:
            lines += stats_lines("equal-weight benchmark", report.combined_bench_stats)
    lines.append("")
    lines.append("growth of $1,000,000 (compounded across test legs)")
    for label, strat, bench in report.wealth_rows:
        lines.append(f"  after {label}: strategy ${strat:,.0f}   benchmark ${bench:,.0f}")
    lines.append("")
    if report.kill_log:
        lines.append("kill-switch triggers")
        for label, trig in report.kill_log:
            lines.append(
                f"  {label} {trig.date}: {trig.trigger_type.value} "
                f"metric {trig.metric_value:.4f} threshold {trig.threshold:.4f}"
            )
    else:
        lines.append("kill-switch triggers: none")
    return "\n".join(lines) + "\n"


def render_sweep(report: SweepReport) -> str:
    lines = ["PARAMETER SENSITIVITY (one at a time)", ""]
    lines.append(f"base combined sharpe {_fmt(report.base_sharpe)}")
    for row in report.rows:
        lines.append("")
        lines.append(f"{row.parameter}")
        for cell in row.cells:
            tag = "base" if cell.offset == 0.0 else f"{cell.offset:+.0%}"
            note = "  (no trades)" if cell.error is not None else ""
            lines.append(
                f"  {tag:>5s}  value {cell.value:<12.6g} sharpe {_fmt(cell.sharpe)}  "
                f"ann return {_pct(cell.ann_return)}{note}"
            )
    return "\n".join(lines) + "\n"


def render_attribution(report: AttributionReport) -> str:
    lines = ["RETURN DECOMPOSITION", ""]
    total = next((r.sharpe for r in report.runs if r.name == "combined_gated"), None)
    for run in report.runs:
        share = ""
        if total not in (None, 0.0) and run.sharpe is not None:
            share = f"  ({100.0 * run.sharpe / total:.0f}% of combined sharpe)"
        lines.append(
            f"  {run.name:18s} sharpe {_fmt(run.sharpe):>7s}  "
            f"ann return {_pct(run.ann_return):>8s}{share}"
        )
    lines.append(
        f"  {'interaction':18s} sharpe {_fmt(report.interaction_sharpe):>7s}  "
        f"ann return {_pct(report.interaction_ann_return):>8s}"
        "  [combined_gated - (value_gated + reversal_gated - combined_ungated)]"
    )
    return "\n".join(lines) + "\n"


def render_randomization(report: RandomizationReport) -> str:
    trials = report.trial_sharpes[np.isfinite(report.trial_sharpes)]
    lines = [
        "RANDOMIZATION BATTERY",
        "",
        f"mode {report.mode.value}   trials {report.n_trials}",
        f"true combined sharpe {report.true_sharpe:.3f}",
        f"p-value {report.p_value:.6f}  (add-one rule)",
    ]
    if len(trials):
        q = np.quantile(trials, [0.05, 0.25, 0.5, 0.75, 0.95])
        lines.append(
            f"trial sharpe: mean {trials.mean():.3f} std {trials.std(ddof=1):.3f}  "
            f"q05 {q[0]:.3f} q25 {q[1]:.3f} med {q[2]:.3f} q75 {q[3]:.3f} q95 {q[4]:.3f} "
            f"max {trials.max():.3f}"
        )
    return "\n".join(lines) + "\n"


def render_stress(report: StressReport) -> str:
    lines = ["STRESS SCENARIOS", ""]
    b = report.base_stats
    lines.append(f"  {'base':14s} sharpe {_fmt(b.sharpe):>7s}  ann return {_pct(b.ann_return):>8s}  "
                 f"maxDD {_pct(b.max_drawdown):>7s}")
    for s in report.scenarios:
        st = s.stats
        lines.append(
            f"  {s.name:14s} sharpe {_fmt(st.sharpe):>7s}  ann return {_pct(st.ann_return):>8s}  "
            f"maxDD {_pct(st.max_drawdown):>7s}  [{s.description}]"
        )
    return "\n".join(lines) + "\n"


def render_capacity(report: CapacityReport) -> str:
    lines = [
        "CAPACITY CURVE",
        "",
        f"impact model: {report.model.c:.4g} * participation^{report.model.gamma:.4g} bp",
        f"aggregate traded ADV ${report.aggregate_adv:,.0f}   "
        f"mean daily turnover {report.mean_turnover:.3f}",
        "",
        f"{'AUM':>15s} {'participation':>14s} {'impact bp':>10s} {'sharpe':>8s} "
        f"{'ann ret':>9s}  viability",
    ]
    for p in report.points:
        lines.append(
            f"{p.aum:15,.0f} {p.participation:14.5f} {p.impact_bp:10.2f} "
            f"{_fmt(p.net_sharpe):>8s} {_pct(p.net_ann_return):>9s}  {p.viability}"
        )
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# CSV writers
# ---------------------------------------------------------------------------


def write_daily_csv(path: str, header_lines: Iterable[str], dates: np.ndarray,
                    columns: dict[str, np.ndarray]) -> None:
    with _open(path, header_lines) as handle:
        writer = csv.writer(handle)
        writer.writerow(["date", *columns.keys()])
        for t in range(len(dates)):
            writer.writerow([str(dates[t]), *(_num(col[t]) for col in columns.values())])


def write_weights_csv(path: str, header_lines: Iterable[str], dates: np.ndarray,
                      tickers: tuple[str, ...], weights: np.ndarray) -> None:
    with _open(path, header_lines) as handle:
        writer = csv.writer(handle)
        writer.writerow(["date", "ticker", "weight"])
        for t in range(len(dates)):
            for j in np.flatnonzero(weights[t] != 0.0):
                writer.writerow([str(dates[t]), tickers[j], _num(weights[t, j])])


def write_per_window_csv(path: str, header_lines: Iterable[str], report: WalkForwardReport) -> None:
    with _open(path, header_lines) as handle:
        writer = csv.writer(handle)
        writer.writerow(["window", "train_start", "train_end", "test_start", "test_end",
                         "train_sharpe", "scale", "training_vol", "training_maxdd",
                         "test_sharpe", "test_ann_return", "test_ann_vol", "test_max_drawdown",
                         "test_win_rate", "test_total_return", "bench_sharpe", "bench_ann_return"])
        for w in report.windows:
            s, b = w.test_stats, w.bench_stats
            writer.writerow([
                w.spec.label, str(w.spec.train_start), str(w.spec.train_end),
                str(w.spec.test_start), str(w.spec.test_end),
                _num(w.train_sharpe), _num(w.scale.value), _num(w.scale.training_vol),
                _num(w.scale.training_maxdd),
                _num(None if s is None else s.sharpe), _num(None if s is None else s.ann_return),
                _num(None if s is None else s.ann_vol), _num(None if s is None else s.max_drawdown),
                _num(None if s is None else s.win_rate), _num(None if s is None else s.total_return),
                _num(None if b is None else b.sharpe), _num(None if b is None else b.ann_return),
            ])


def write_kill_log_csv(path: str, header_lines: Iterable[str], report: WalkForwardReport) -> None:
    with _open(path, header_lines) as handle:
        writer = csv.writer(handle)
        writer.writerow(["window", "date", "trigger_type", "metric_value", "threshold"])
        for label, trig in report.kill_log:
            writer.writerow([label, str(trig.date), trig.trigger_type.value,
                             _num(trig.metric_value), _num(trig.threshold)])


def write_trials_csv(path: str, header_lines: Iterable[str], report: RandomizationReport) -> None:
    with _open(path, header_lines) as handle:
        handle.write("trial_sharpe\n")
        for s in report.trial_sharpes:
            handle.write(f"{_num(s)}\n")


def write_sweep_csv(path: str, header_lines: Iterable[str], report: SweepReport) -> None:
    with _open(path, header_lines) as handle:
        writer = csv.writer(handle)
        writer.writerow(["parameter", "offset", "value", "sharpe", "ann_return"])
        for row in report.rows:
            for c in row.cells:
                writer.writerow([row.parameter, _num(c.offset), _num(c.value),
                                 _num(c.sharpe), _num(c.ann_return)])


def write_attribution_csv(path: str, header_lines: Iterable[str], report: AttributionReport) -> None:
    with _open(path, header_lines) as handle:
        writer = csv.writer(handle)
        writer.writerow(["run", "sharpe", "ann_return"])
        for run in report.runs:
            writer.writerow([run.name, _num(run.sharpe), _num(run.ann_return)])
        writer.writerow(["interaction", _num(report.interaction_sharpe),
                         _num(report.interaction_ann_return)])


def write_stress_csv(path: str, header_lines: Iterable[str], report: StressReport) -> None:
    with _open(path, header_lines) as handle:
        writer = csv.writer(handle)
        writer.writerow(["scenario", "description", "sharpe", "ann_return", "ann_vol",
                         "max_drawdown", "win_rate"])
        rows = [("base", "unperturbed combined run", report.base_stats)]
        rows += [(s.name, s.description, s.stats) for s in report.scenarios]
        for name, desc, st in rows:
            writer.writerow([name, desc, _num(st.sharpe), _num(st.ann_return),
                             _num(st.ann_vol), _num(st.max_drawdown), _num(st.win_rate)])


def write_capacity_csv(path: str, header_lines: Iterable[str], report: CapacityReport) -> None:
    with _open(path, header_lines) as handle:
        writer = csv.writer(handle)
        writer.writerow(["aum", "participation", "impact_bp", "net_sharpe",
                         "net_ann_return", "viability"])
        for p in report.points:
            writer.writerow([_num(p.aum), _num(p.participation), _num(p.impact_bp),
                             _num(p.net_sharpe), _num(p.net_ann_return), p.viability])
