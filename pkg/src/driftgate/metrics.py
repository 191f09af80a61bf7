"""Performance statistics for daily return series.

Conventions: 252 trading days per year; Sharpe uses the sample std and
no risk-free rate; ann_return is geometric (wealth^(252/n) - 1) with the
arithmetic mean * 252 carried alongside as ann_return_arith; drawdowns
measure equity against its running peak including the starting point 1.0;
win rate counts strictly positive days; skewness is the bias-adjusted
Fisher-Pearson statistic.  Undefined statistics come back as None, never
as a silent 0.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

TRADING_DAYS = 252


@dataclass(frozen=True)
class PerfStats:
    n_days: int
    ann_return: float
    ann_return_arith: float
    ann_vol: float
    sharpe: float | None
    max_drawdown: float
    win_rate: float
    best_day: float
    worst_day: float
    skewness: float | None
    total_return: float
    wealth_multiple: float
    correlation_vs_benchmark: float | None = None


def wealth_curve(returns: np.ndarray, initial: float = 1.0) -> np.ndarray:
    """Compounded equity, one point per day, starting from `initial`."""
    if initial <= 0:
        raise ValueError("initial wealth must be positive")
    return initial * np.cumprod(1.0 + np.asarray(returns, dtype=float))


def max_drawdown(returns: np.ndarray) -> float:
    """Most negative equity/peak - 1, peak seeded with the starting 1.0."""
    equity = wealth_curve(returns)
    peak = np.maximum(np.maximum.accumulate(equity), 1.0)
    return float(np.min(equity / peak - 1.0))


def _skewness(x: np.ndarray) -> float | None:
    n = len(x)
    if n < 3:
        return None
    mean = x.mean()
    m2 = np.mean((x - mean) ** 2)
    if m2 <= 0.0:
        return None
    m3 = np.mean((x - mean) ** 3)
    g1 = m3 / m2 ** 1.5
    return float(math.sqrt(n * (n - 1)) / (n - 2) * g1)


def correlation(x: np.ndarray, y: np.ndarray) -> float | None:
    """Sample correlation; None when either side has zero dispersion."""
    if len(x) != len(y):
        raise ValueError(f"series lengths differ: {len(x)} vs {len(y)}")
    if len(x) < 2:
        return None
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(np.dot(dx, dx))
    syy = float(np.dot(dy, dy))
    if sxx <= 0.0 or syy <= 0.0:
        return None
    return float(np.dot(dx, dy) / math.sqrt(sxx * syy))


def perf_stats(returns: np.ndarray, benchmark: np.ndarray | None = None) -> PerfStats:
    """Full statistics block for a daily return series.

    Needs at least 2 observations (vol-based statistics are meaningless
    below that).  A benchmark, when given, must be aligned day-for-day.
    """
    r = np.asarray(returns, dtype=float)
    if r.ndim != 1 or len(r) == 0:
        raise ValueError("returns must be a non-empty 1-d array")
    if len(r) < 2:
        raise ValueError("need at least 2 returns for volatility-based stats")
    if not np.all(np.isfinite(r)):
        raise ValueError("returns contain non-finite values")

    n = len(r)
    mean = float(r.mean())
    sd = float(r.std(ddof=1))
    wealth = float(np.prod(1.0 + r))
    ann_vol = sd * math.sqrt(TRADING_DAYS)
    # Same expression as sharpe_ratio, so the two paths agree bit for bit.
    sharpe = None if sd == 0.0 else mean / sd * math.sqrt(TRADING_DAYS)
    # Geometric annualization needs positive terminal wealth; a wiped-out
    # series pins at -100%.
    ann_return = wealth ** (TRADING_DAYS / n) - 1.0 if wealth > 0 else -1.0
    corr = None
    if benchmark is not None:
        b = np.asarray(benchmark, dtype=float)
        corr = correlation(r, b)
    return PerfStats(
        n_days=n,
        ann_return=ann_return,
        ann_return_arith=mean * TRADING_DAYS,
        ann_vol=ann_vol,
        sharpe=sharpe,
        max_drawdown=max_drawdown(r),
        win_rate=float(np.mean(r > 0)),
        best_day=float(r.max()),
        worst_day=float(r.min()),
        skewness=_skewness(r),
        total_return=wealth - 1.0,
        wealth_multiple=wealth,
        correlation_vs_benchmark=corr,
    )


def sharpe_ratio(returns: np.ndarray) -> float | None:
    """Annualized Sharpe alone, for hot loops that need nothing else."""
    r = np.asarray(returns, dtype=float)
    if len(r) < 2:
        return None
    sd = r.std(ddof=1)
    if sd == 0.0:
        return None
    return float(r.mean() / sd * math.sqrt(TRADING_DAYS))


def sector_exposures(weights: dict[str, float], sector: dict[str, str]) -> dict[str, tuple[float, float, float]]:
    """Per-sector (long, short, net) exposure; reporting only, never enforced."""
    out: dict[str, list[float]] = {}
    for ticker, w in weights.items():
        name = sector.get(ticker, "unclassified")
        row = out.setdefault(name, [0.0, 0.0, 0.0])
        if w > 0:
            row[0] += w
        else:
            row[1] += w
        row[2] += w
    return {k: (v[0], v[1], v[2]) for k, v in sorted(out.items())}
