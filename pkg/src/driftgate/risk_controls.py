"""Risk scaling and the latching kill-switch.

Scale factor: s = min(vol_cap / training_vol, dd_cap / |training_maxdd|),
computed once per window from training-period net returns and frozen for
the test period.  A zero-drawdown training leg skips the drawdown term.

Kill-switch: four latching triggers checked daily in a fixed order:
  (a) drawdown from the running equity peak (seeded at 1.0) <= abs_dd,
  (b) trailing `rolling_window`-day compounded return <= rolling_loss,
      evaluated once that many days exist (equity before the start is 1),
  (c) trailing `vol_window`-day realized vol, annualized, >= vol_multiple
      times the vol target,
  (d) |trailing `corr_window`-day correlation vs the benchmark| strictly
      above corr_threshold, requiring nonzero dispersion on both sides.
Once any trigger fires the book is flat for the rest of the run.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .metrics import TRADING_DAYS, correlation, max_drawdown


@dataclass(frozen=True)
class ScaleFactor:
    value: float
    training_vol: float
    training_maxdd: float

    def __post_init__(self) -> None:
        if not self.value > 0:
            raise ValueError(f"scale must be positive, got {self.value}")


def compute_scale_factor(training_returns: np.ndarray, vol_cap: float = 0.12,
                         dd_cap: float = 0.15) -> ScaleFactor:
    """Position scale from training-period net returns (see module doc)."""
    r = np.asarray(training_returns, dtype=float)
    if len(r) < 2:
        raise ValueError("need at least 2 training returns")
    if vol_cap <= 0 or dd_cap <= 0:
        raise ValueError("caps must be positive")
    vol = float(r.std(ddof=1)) * math.sqrt(TRADING_DAYS)
    if vol == 0.0:
        raise ValueError("training volatility is zero; scale undefined")
    mdd = max_drawdown(r)
    scale = vol_cap / vol
    if mdd < 0.0:
        scale = min(scale, dd_cap / abs(mdd))
    return ScaleFactor(value=scale, training_vol=vol, training_maxdd=mdd)


class TriggerType(enum.Enum):
    ABSOLUTE_DRAWDOWN = "absolute_drawdown"
    ROLLING_LOSS = "rolling_loss"
    VOL_SPIKE = "vol_spike"
    CORRELATION_BREAK = "correlation_break"


@dataclass(frozen=True)
class KillSwitchConfig:
    abs_dd_threshold: float = -0.30
    rolling_loss_threshold: float = -0.10
    rolling_window: int = 63
    vol_multiple: float = 3.0
    vol_window: int = 21
    corr_threshold: float = 0.5
    corr_window: int = 63

    def __post_init__(self) -> None:
        if not self.abs_dd_threshold < 0:
            raise ValueError("abs_dd_threshold must be negative")
        if not self.rolling_loss_threshold < 0:
            raise ValueError("rolling_loss_threshold must be negative")
        if not self.vol_multiple > 0:
            raise ValueError("vol_multiple must be positive")
        if not self.corr_threshold > 0:
            raise ValueError("corr_threshold must be positive")
        if self.rolling_window < 2 or self.vol_window < 2 or self.corr_window < 2:
            raise ValueError("trigger windows must be >= 2 days")


@dataclass(frozen=True)
class KillSwitchState:
    active: bool = True
    triggered_on: np.datetime64 | None = None
    trigger_type: TriggerType | None = None
    metric_value: float | None = None
    threshold: float | None = None


@dataclass(frozen=True)
class KillTrigger:
    """One row of the kill-switch log."""

    date: np.datetime64
    trigger_type: TriggerType
    metric_value: float
    threshold: float


def kill_switch_step(state: KillSwitchState, equity_curve: np.ndarray,
                     daily_returns: np.ndarray, benchmark_returns: np.ndarray | None,
                     config: KillSwitchConfig, target_vol: float,
                     today: object = None) -> KillSwitchState:
    """Evaluate all triggers on the history through today; first hit latches.

    `equity_curve`/`daily_returns` run from the start of the live period
    through today inclusive.  Day-by-day reference implementation; the
    engine's vectorized scan is pinned against it in tests.
    """
    if not state.active:
        return state
    equity = np.asarray(equity_curve, dtype=float)
    r = np.asarray(daily_returns, dtype=float)
    if len(equity) != len(r) or len(equity) == 0:
        raise ValueError("equity and returns must be aligned and non-empty")
    t = len(equity) - 1

    hit: tuple[TriggerType, float, float] | None = None

    peak = max(1.0, float(equity.max()))
    dd = float(equity[t]) / peak - 1.0
    if dd <= config.abs_dd_threshold:
        hit = (TriggerType.ABSOLUTE_DRAWDOWN, dd, config.abs_dd_threshold)

    if hit is None and t + 1 >= config.rolling_window:
        base = 1.0 if t - config.rolling_window < 0 else float(equity[t - config.rolling_window])
        trailing = float(equity[t]) / base - 1.0
        if trailing <= config.rolling_loss_threshold:
            hit = (TriggerType.ROLLING_LOSS, trailing, config.rolling_loss_threshold)

    if hit is None and t + 1 >= config.vol_window:
        vol = float(np.std(r[t + 1 - config.vol_window: t + 1], ddof=1)) * math.sqrt(TRADING_DAYS)
        if vol >= config.vol_multiple * target_vol:
            hit = (TriggerType.VOL_SPIKE, vol, config.vol_multiple * target_vol)

    if hit is None and benchmark_returns is not None and t + 1 >= config.corr_window:
        b = np.asarray(benchmark_returns, dtype=float)
        corr = correlation(r[t + 1 - config.corr_window: t + 1],
                           b[t + 1 - config.corr_window: t + 1])
        if corr is not None and abs(corr) > config.corr_threshold:
            hit = (TriggerType.CORRELATION_BREAK, corr, config.corr_threshold)

    if hit is None:
        return state
    kind, value, threshold = hit
    return KillSwitchState(
        active=False,
        triggered_on=None if today is None else np.datetime64(today, "D"),
        trigger_type=kind,
        metric_value=value,
        threshold=threshold,
    )
