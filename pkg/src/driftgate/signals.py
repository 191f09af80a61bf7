"""Signal construction: value rank, short-horizon reversal, drift gate.

Two forms of every signal: a per-date op working in ticker dicts (the
reference implementation, easy to audit) and a vectorized matrix form
over the whole panel (what the engine and the trial battery run).  Tests
pin the two forms against each other.

Conventions, fixed across both forms:
- value: percentile rank of 1/close, (rank - 0.5) / n with average ranks
  on ties, so scores live in (0, 1) and all-equal prices give 0.5.
- reversal: negated trailing compounded `reversal_lookback`-day return
  ending AT the signal date, z-scored cross-sectionally (sample std).
- up-fraction: share of up days over the `drift_window` returns strictly
  BEFORE the signal date; the gate is up_fraction > up_threshold, strict.
- EDGE = (alpha * value + (1 - alpha) * reversal) * gate, missing if any
  ingredient is missing.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .data_model import PricePanel, ReturnPanel, aligned_returns, as_datetime64


@dataclass(frozen=True)
class SignalParams:
    alpha: float = 0.70
    reversal_lookback: int = 10
    drift_window: int = 63
    up_threshold: float = 0.60

    def __post_init__(self) -> None:
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")
        if self.reversal_lookback < 1:
            raise ValueError("reversal_lookback must be >= 1")
        if self.drift_window < 1:
            raise ValueError("drift_window must be >= 1")
        if not 0.0 < self.up_threshold < 1.0:
            raise ValueError(f"up_threshold must lie in (0, 1), got {self.up_threshold}")

    @property
    def warmup_days(self) -> int:
        """Panel dates required before the first scored date."""
        return max(self.drift_window + 1, self.reversal_lookback)


@dataclass(frozen=True)
class SignalFrame:
    """One cross-section: ticker -> signal value on a date."""

    date: np.datetime64
    values: dict[str, float]

    def __len__(self) -> int:
        return len(self.values)


# ---------------------------------------------------------------------------
# per-date reference ops
# ---------------------------------------------------------------------------


def _average_ranks(x: np.ndarray) -> np.ndarray:
    """1-based ranks, ties get the average of their positions."""
    order = np.argsort(x, kind="stable")
    ranks = np.empty(len(x))
    sorted_x = x[order]
    i = 0
    while i < len(x):
        j = i
        while j + 1 < len(x) and sorted_x[j + 1] == sorted_x[i]:
            j += 1
        ranks[order[i: j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def value_signal(panel: PricePanel, date: object) -> SignalFrame:
    """Percentile rank of 1/close across tickers present on `date`."""
    d = as_datetime64(date)
    t = panel.calendar.index_of(d)
    row = panel.close[t]
    live = np.isfinite(row)
    n = int(live.sum())
    values: dict[str, float] = {}
    if n > 0:
        ranks = _average_ranks(1.0 / row[live])
        scores = (ranks - 0.5) / n
        for ticker, score in zip(np.array(panel.tickers)[live], scores):
            values[str(ticker)] = float(score)
    return SignalFrame(date=d, values=values)


def reversal_signal(returns: ReturnPanel, date: object, lookback: int = 10) -> SignalFrame:
    """Z-scored negated trailing `lookback`-day return ending at `date`."""
    d = as_datetime64(date)
    t = int(np.searchsorted(returns.calendar.dates, d))
    if t == len(returns.calendar.dates) or returns.calendar.dates[t] != d:
        raise KeyError(f"date {d} not in return calendar")
    if t + 1 < lookback:
        return SignalFrame(date=d, values={})
    window = returns.returns[t + 1 - lookback: t + 1]
    complete = np.all(np.isfinite(window), axis=0)
    raw = -(np.prod(np.where(np.isfinite(window), 1.0 + window, 1.0), axis=0) - 1.0)
    values: dict[str, float] = {}
    n = int(complete.sum())
    if n >= 2:
        x = raw[complete]
        sd = float(np.std(x, ddof=1))
        if sd > 0.0:
            z = (x - x.mean()) / sd
            for ticker, score in zip(np.array(returns.tickers)[complete], z):
                values[str(ticker)] = float(score)
    return SignalFrame(date=d, values=values)


def base_signal(value: SignalFrame, reversal: SignalFrame, alpha: float = 0.70) -> SignalFrame:
    """alpha * value + (1 - alpha) * reversal on the common tickers."""
    if value.date != reversal.date:
        raise ValueError(f"frames disagree on date: {value.date} vs {reversal.date}")
    common = value.values.keys() & reversal.values.keys()
    return SignalFrame(
        date=value.date,
        values={t: alpha * value.values[t] + (1.0 - alpha) * reversal.values[t] for t in sorted(common)},
    )


def up_fraction(returns: ReturnPanel, date: object, window: int = 63) -> SignalFrame:
    """Fraction of up days over the `window` returns strictly before `date`."""
    d = as_datetime64(date)
    t = int(np.searchsorted(returns.calendar.dates, d))
    # The window ends the day before the signal date; `date` itself need not
    # be a return date (it may be the first panel date of a live range).
    if t < window:
        return SignalFrame(date=d, values={})
    block = returns.returns[t - window: t]
    complete = np.all(np.isfinite(block), axis=0)
    values: dict[str, float] = {}
    if complete.any():
        frac = (block > 0).sum(axis=0) / float(window)
        for ticker, f in zip(np.array(returns.tickers)[complete], frac[complete]):
            values[str(ticker)] = float(f)
    return SignalFrame(date=d, values=values)


def regime_mask(up_frac: SignalFrame, threshold: float = 0.60) -> SignalFrame:
    """1.0 where up-fraction strictly exceeds the threshold, else 0.0."""
    return SignalFrame(
        date=up_frac.date,
        values={t: (1.0 if f > threshold else 0.0) for t, f in up_frac.values.items()},
    )


def edge_signal(base: SignalFrame, mask: SignalFrame) -> SignalFrame:
    """BASE gated by the regime mask; missing propagates."""
    if base.date != mask.date:
        raise ValueError(f"frames disagree on date: {base.date} vs {mask.date}")
    common = base.values.keys() & mask.values.keys()
    return SignalFrame(
        date=base.date,
        values={t: base.values[t] * mask.values[t] for t in sorted(common)},
    )


# ---------------------------------------------------------------------------
# vectorized matrix forms (rows = panel dates, cols = tickers, NaN = missing)
# ---------------------------------------------------------------------------


def value_matrix(close: np.ndarray) -> np.ndarray:
    """Row-wise percentile ranks of 1/close. NaN where close missing."""
    n_dates, n_tickers = close.shape
    live = np.isfinite(close)
    counts = live.sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = np.where(live, 1.0 / close, np.inf)  # missing sort last
    order = np.argsort(inv, axis=1, kind="stable")
    sorted_inv = np.take_along_axis(inv, order, axis=1)
    positions = np.broadcast_to(np.arange(1, n_tickers + 1, dtype=float), inv.shape)
    # Average tied positions: group equal values within each row.
    same_as_prev = np.zeros_like(live)
    same_as_prev[:, 1:] = sorted_inv[:, 1:] == sorted_inv[:, :-1]
    group_start = np.where(same_as_prev, 0.0, positions)
    group_start = np.maximum.accumulate(group_start, axis=1)
    same_as_next = np.zeros_like(live)
    same_as_next[:, :-1] = same_as_prev[:, 1:]
    # Nearest group end at or to the right: backwards running minimum.
    group_end = np.where(same_as_next, np.inf, positions)
    group_end = np.flip(np.minimum.accumulate(np.flip(group_end, axis=1), axis=1), axis=1)
    avg_rank = 0.5 * (group_start + group_end)
    ranks = np.empty_like(inv)
    np.put_along_axis(ranks, order, avg_rank, axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        scores = (ranks - 0.5) / counts[:, None]
    return np.where(live, scores, np.nan)


def _zscore_rows(x: np.ndarray) -> np.ndarray:
    """Cross-sectional z-score per row with sample std; degenerate rows NaN."""
    live = np.isfinite(x)
    n = live.sum(axis=1)
    filled = np.where(live, x, 0.0)
    total = filled.sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        mean = total / n
        dev = np.where(live, x - mean[:, None], 0.0)
        var = (dev * dev).sum(axis=1) / (n - 1)
        sd = np.sqrt(var)
        z = dev / sd[:, None]
    bad = (n < 2) | ~(sd > 0)
    z[bad] = np.nan
    return np.where(live, z, np.nan)


def trailing_return_matrix(ret: np.ndarray, lookback: int) -> np.ndarray:
    """Compounded return over the `lookback` rows ending at each row.

    `ret` is the aligned return matrix (row 0 all NaN).  Rows without a
    complete window come out NaN: NaN anywhere in a window poisons it.
    """
    n_dates = ret.shape[0]
    out = np.full_like(ret, np.nan)
    if n_dates < lookback:
        return out
    windows = sliding_window_view(1.0 + ret, lookback, axis=0)
    out[lookback - 1:] = np.prod(windows, axis=-1) - 1.0
    return out


def reversal_matrix(ret: np.ndarray, lookback: int) -> np.ndarray:
    """Z-scored negated trailing return, complete windows only."""
    return _zscore_rows(-trailing_return_matrix(ret, lookback))


def up_fraction_matrix(ret: np.ndarray, window: int) -> np.ndarray:
    """Share of up days over the `window` rows strictly before each row."""
    n_dates = ret.shape[0]
    out = np.full_like(ret, np.nan)
    if n_dates < window + 1:
        return out
    up = np.where(np.isfinite(ret), (ret > 0).astype(float), np.nan)
    windows = sliding_window_view(up, window, axis=0)
    frac = windows.sum(axis=-1) / float(window)  # NaN poisons incomplete windows
    out[window:] = frac[:-1]
    return out


def base_matrix(value: np.ndarray, reversal: np.ndarray, alpha: float) -> np.ndarray:
    return alpha * value + (1.0 - alpha) * reversal


def mask_matrix(up_frac: np.ndarray, threshold: float) -> np.ndarray:
    out = np.where(up_frac > threshold, 1.0, 0.0)
    return np.where(np.isfinite(up_frac), out, np.nan)
