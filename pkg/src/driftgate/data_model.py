"""Price panels: ingestion, validation, returns, and synthetic markets.

A panel is a dense (dates x tickers) close matrix with NaN for missing
cells.  Tickers may list or delist (leading/trailing missing spans) but
interior gaps are rejected at load.  All downstream math consumes the
matrices directly; nothing here knows about signals or portfolios.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from datetime import date as _date

import numpy as np

from .errors import DataError

DAY = np.timedelta64(1, "D")


def as_datetime64(value: object) -> np.datetime64:
    """Normalize str / datetime.date / datetime64 to datetime64[D]."""
    if isinstance(value, np.datetime64):
        return value.astype("datetime64[D]")
    if isinstance(value, _date):
        return np.datetime64(value.isoformat(), "D")
    if isinstance(value, str):
        try:
            parsed = _date.fromisoformat(value.strip())
        except ValueError as exc:
            raise DataError(f"bad date {value!r}: {exc}") from None
        return np.datetime64(parsed.isoformat(), "D")
    raise DataError(f"cannot interpret {value!r} as a date")


@dataclass(frozen=True)
class TradingCalendar:
    """Strictly increasing array of trading dates (datetime64[D])."""

    dates: np.ndarray

    def __post_init__(self) -> None:
        dates = np.asarray(self.dates, dtype="datetime64[D]")
        if dates.ndim != 1 or len(dates) == 0:
            raise DataError("calendar must be a non-empty 1-d date array")
        if len(dates) > 1 and not np.all(dates[1:] > dates[:-1]):
            bad = int(np.argmin(dates[1:] > dates[:-1]))
            raise DataError(
                f"calendar dates not strictly increasing at {dates[bad + 1]}"
            )
        dates.flags.writeable = False
        object.__setattr__(self, "dates", dates)

    def __len__(self) -> int:
        return len(self.dates)

    def index_of(self, date: object) -> int:
        """Exact position of `date`; KeyError if absent."""
        d = as_datetime64(date)
        i = int(np.searchsorted(self.dates, d))
        if i == len(self.dates) or self.dates[i] != d:
            raise KeyError(f"date {d} not in calendar")
        return i

    def range_indices(self, start: object | None, stop: object | None) -> tuple[int, int]:
        """Half-open [start, stop) as (i0, i1) index bounds."""
        i0 = 0 if start is None else int(np.searchsorted(self.dates, as_datetime64(start), "left"))
        i1 = len(self.dates) if stop is None else int(np.searchsorted(self.dates, as_datetime64(stop), "left"))
        return i0, i1


def _check_interior_gaps(close: np.ndarray, dates: np.ndarray, tickers: tuple[str, ...]) -> None:
    present = np.isfinite(close)
    counts = present.sum(axis=0)
    n_dates = close.shape[0]
    first = present.argmax(axis=0)
    last = n_dates - 1 - present[::-1].argmax(axis=0)
    span = last - first + 1
    bad = (counts > 0) & (span != counts)
    if bad.any():
        j = int(np.flatnonzero(bad)[0])
        col = present[:, j]
        gap = int(np.flatnonzero(~col[first[j]: last[j] + 1])[0]) + first[j]
        raise DataError(
            f"ticker {tickers[j]!r} has an interior gap at {dates[gap]} "
            f"(listed {dates[first[j]]} to {dates[last[j]]})"
        )


@dataclass(frozen=True)
class PricePanel:
    """Dense close (and optional volume) matrices over a shared calendar."""

    calendar: TradingCalendar
    tickers: tuple[str, ...]
    close: np.ndarray
    volume: np.ndarray | None = None
    sector: dict[str, str] | None = None

    def __post_init__(self) -> None:
        tickers = tuple(self.tickers)
        if len(set(tickers)) != len(tickers):
            raise DataError("duplicate tickers in panel")
        if list(tickers) != sorted(tickers):
            raise DataError("tickers must be sorted")
        close = np.asarray(self.close, dtype=float)
        shape = (len(self.calendar), len(tickers))
        if close.shape != shape:
            raise DataError(f"close matrix shape {close.shape} != {shape}")
        present = np.isfinite(close)
        if not np.all(close[present] > 0):
            t, j = np.argwhere(present & ~(close > 0))[0]
            raise DataError(
                f"non-positive close for {tickers[j]!r} on {self.calendar.dates[t]}"
            )
        _check_interior_gaps(close, self.calendar.dates, tickers)
        close.flags.writeable = False
        object.__setattr__(self, "tickers", tickers)
        object.__setattr__(self, "close", close)
        if self.volume is not None:
            volume = np.asarray(self.volume, dtype=float)
            if volume.shape != shape:
                raise DataError(f"volume matrix shape {volume.shape} != {shape}")
            vpresent = np.isfinite(volume)
            if not np.all(volume[vpresent] >= 0):
                t, j = np.argwhere(vpresent & ~(volume >= 0))[0]
                raise DataError(
                    f"negative volume for {tickers[j]!r} on {self.calendar.dates[t]}"
                )
            volume.flags.writeable = False
            object.__setattr__(self, "volume", volume)

    @property
    def n_dates(self) -> int:
        return len(self.calendar)

    @property
    def n_tickers(self) -> int:
        return len(self.tickers)


def restrict(panel: PricePanel, start: object | None = None, stop: object | None = None) -> PricePanel:
    """Sub-panel over the half-open date range [start, stop)."""
    i0, i1 = panel.calendar.range_indices(start, stop)
    if i1 <= i0:
        raise DataError(f"empty panel range [{start}, {stop})")
    return PricePanel(
        calendar=TradingCalendar(panel.calendar.dates[i0:i1].copy()),
        tickers=panel.tickers,
        close=panel.close[i0:i1].copy(),
        volume=None if panel.volume is None else panel.volume[i0:i1].copy(),
        sector=panel.sector,
    )


@dataclass(frozen=True)
class ReturnPanel:
    """Simple daily returns aligned to the panel dates they realize on.

    Row 0 of `aligned` (the first panel date) is all-NaN: no prior close.
    `calendar` drops that first date, so returns[t] realizes on calendar
    dates[t].
    """

    calendar: TradingCalendar
    tickers: tuple[str, ...]
    returns: np.ndarray

    def __post_init__(self) -> None:
        r = np.asarray(self.returns, dtype=float)
        if r.shape != (len(self.calendar), len(self.tickers)):
            raise DataError("return matrix shape mismatch")
        r.flags.writeable = False
        object.__setattr__(self, "returns", r)


def compute_returns(panel: PricePanel) -> ReturnPanel:
    """close[t]/close[t-1] - 1 per ticker; NaN where either close missing."""
    if panel.n_dates < 2:
        raise DataError("need at least 2 dates to compute returns")
    with np.errstate(invalid="ignore"):
        r = panel.close[1:] / panel.close[:-1] - 1.0
    return ReturnPanel(
        calendar=TradingCalendar(panel.calendar.dates[1:].copy()),
        tickers=panel.tickers,
        returns=r,
    )


def aligned_returns(panel: PricePanel) -> np.ndarray:
    """(n_dates, n_tickers) return matrix with an all-NaN first row."""
    out = np.full((panel.n_dates, panel.n_tickers), np.nan)
    if panel.n_dates >= 2:
        with np.errstate(invalid="ignore"):
            out[1:] = panel.close[1:] / panel.close[:-1] - 1.0
    return out


# ---------------------------------------------------------------------------
# CSV ingestion
# ---------------------------------------------------------------------------

DEFAULT_SCHEMA = {
    "date": "date",
    "ticker": "ticker",
    "close": "close",
    "volume": "volume",
    "sector": "sector",
}


def load_panel(path: str, schema: dict[str, str] | None = None, delimiter: str = ",") -> PricePanel:
    """Read a long-format CSV (date, ticker, close[, volume][, sector]).

    `schema` maps the logical column names above to the file's header
    names.  Lines starting with '#' and blank lines are skipped, so files
    carrying a config-hash comment round-trip.  Errors name the line.
    """
    names = dict(DEFAULT_SCHEMA)
    if schema:
        unknown = set(schema) - set(DEFAULT_SCHEMA)
        if unknown:
            raise DataError(f"unknown schema keys: {sorted(unknown)}")
        names.update(schema)

    header: list[str] | None = None
    cols: dict[str, int] = {}
    cells: dict[tuple[str, str], tuple[float, float, int]] = {}
    sectors: dict[str, str] = {}
    try:
        handle = open(path, newline="")
    except OSError as exc:
        raise DataError(f"cannot open {path}: {exc}") from None
    with handle:
        for lineno, raw in enumerate(handle, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            row = next(csv.reader([line], delimiter=delimiter))
            if header is None:
                header = [h.strip() for h in row]
                for logical in ("date", "ticker", "close"):
                    if names[logical] not in header:
                        raise DataError(
                            f"{path}: required column {names[logical]!r} missing from header"
                        )
                cols = {
                    logical: header.index(names[logical])
                    for logical in names
                    if names[logical] in header
                }
                continue
            if len(row) != len(header):
                raise DataError(f"{path} line {lineno}: expected {len(header)} fields, got {len(row)}")
            try:
                day = _date.fromisoformat(row[cols["date"]].strip()).isoformat()
            except ValueError:
                raise DataError(f"{path} line {lineno}: bad date {row[cols['date']]!r}") from None
            ticker = row[cols["ticker"]].strip()
            if not ticker:
                raise DataError(f"{path} line {lineno}: empty ticker")
            try:
                close = float(row[cols["close"]])
            except ValueError:
                raise DataError(f"{path} line {lineno}: bad close {row[cols['close']]!r}") from None
            if not math.isfinite(close) or close <= 0:
                raise DataError(f"{path} line {lineno}: close must be a positive finite number")
            volume = math.nan
            if "volume" in cols:
                text = row[cols["volume"]].strip()
                if text:
                    try:
                        volume = float(text)
                    except ValueError:
                        raise DataError(f"{path} line {lineno}: bad volume {text!r}") from None
                    if not math.isfinite(volume) or volume < 0:
                        raise DataError(f"{path} line {lineno}: volume must be >= 0")
            if "sector" in cols:
                text = row[cols["sector"]].strip()
                if text:
                    if sectors.get(ticker, text) != text:
                        raise DataError(
                            f"{path} line {lineno}: ticker {ticker!r} has conflicting sectors "
                            f"{sectors[ticker]!r} and {text!r}"
                        )
                    sectors[ticker] = text
            key = (day, ticker)
            if key in cells:
                raise DataError(
                    f"{path} line {lineno}: duplicate (date, ticker) ({day}, {ticker}) "
                    f"first seen on line {cells[key][2]}"
                )
            cells[key] = (close, volume, lineno)

    if not cells:
        raise DataError(f"{path}: no data rows")
    days = sorted({d for d, _ in cells})
    tickers = tuple(sorted({t for _, t in cells}))
    date_ix = {d: i for i, d in enumerate(days)}
    tick_ix = {t: j for j, t in enumerate(tickers)}
    shape = (len(days), len(tickers))
    close = np.full(shape, np.nan)
    volume = np.full(shape, np.nan)
    have_volume = False
    for (d, t), (c, v, _) in cells.items():
        close[date_ix[d], tick_ix[t]] = c
        volume[date_ix[d], tick_ix[t]] = v
        have_volume = have_volume or math.isfinite(v)
    return PricePanel(
        calendar=TradingCalendar(np.array(days, dtype="datetime64[D]")),
        tickers=tickers,
        close=close,
        volume=volume if have_volume else None,
        sector=sectors or None,
    )


def save_panel(panel: PricePanel, path: str, delimiter: str = ",", header_lines: tuple[str, ...] = ()) -> None:
    """Write the long-format CSV that load_panel rebuilds value-identically."""
    with open(path, "w", newline="") as handle:
        for line in header_lines:
            handle.write(f"# {line}\n")
        writer = csv.writer(handle, delimiter=delimiter)
        columns = ["date", "ticker", "close"]
        if panel.volume is not None:
            columns.append("volume")
        if panel.sector:
            columns.append("sector")
        writer.writerow(columns)
        dates = panel.calendar.dates
        present = np.isfinite(panel.close)
        for t in range(panel.n_dates):
            day = str(dates[t])
            for j in np.flatnonzero(present[t]):
                ticker = panel.tickers[j]
                row = [day, ticker, repr(float(panel.close[t, j]))]
                if panel.volume is not None:
                    v = panel.volume[t, j]
                    row.append(repr(float(v)) if math.isfinite(v) else "")
                if panel.sector:
                    row.append(panel.sector.get(ticker, ""))
                writer.writerow(row)


# ---------------------------------------------------------------------------
# Synthetic market
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SyntheticMarketConfig:
    """Parameters of the seeded synthetic market generator.

    Defaults describe a benign market with a genuine cross-sectional
    reversal effect inside drift episodes: strong enough for validation
    runs to detect, calm enough that no risk trigger fires.
    """

    n_stocks: int = 40
    n_days: int = 2200
    seed: int = 0
    base_vol: float = 0.02
    drift_regime_fraction: float = 0.35
    drift_strength: float = 0.008
    reversal_strength: float = 0.08
    episode_length: float = 120.0
    reversal_lookback: int = 10
    start: str = "2010-01-04"

    def __post_init__(self) -> None:
        if self.n_stocks < 1 or self.n_days < 1:
            raise ValueError("n_stocks and n_days must be >= 1")
        if not 0.0 <= self.drift_regime_fraction <= 1.0:
            raise ValueError("drift_regime_fraction must lie in [0, 1]")
        if self.base_vol < 0 or self.drift_strength < 0 or self.reversal_strength < 0:
            raise ValueError("vol and strength parameters must be >= 0")
        if self.episode_length < 1:
            raise ValueError("episode_length must be >= 1")
        if self.reversal_lookback < 1:
            raise ValueError("reversal_lookback must be >= 1")


def _episode_mask(rng: np.random.Generator, n_days: int, n_stocks: int,
                  fraction: float, mean_length: float) -> np.ndarray:
    """Two-state renewal per stock; stationary start, geometric lengths."""
    mask = np.zeros((n_days, n_stocks), dtype=bool)
    if fraction <= 0.0:
        return mask
    if fraction >= 1.0:
        mask[:] = True
        return mask
    off_length = mean_length * (1.0 - fraction) / fraction
    p_on = min(1.0, 1.0 / mean_length)
    p_off = min(1.0, 1.0 / off_length)
    for j in range(n_stocks):
        in_drift = bool(rng.random() < fraction)
        t = 0
        while t < n_days:
            length = int(rng.geometric(p_on if in_drift else p_off))
            mask[t: t + length, j] = in_drift
            t += length
            in_drift = not in_drift
    return mask


def generate_synthetic(config: SyntheticMarketConfig) -> PricePanel:
    """Seeded synthetic panel with drift episodes and in-episode reversal.

    Daily return: base_vol * eps + drift_strength * M + M * reversal_strength
    * d, where M marks drift episodes and d is the negated trailing-10-day
    return demeaned across all stocks with a full window.  Returns clip at
    -0.99; prices compound multiplicatively.
    """
    rng = np.random.default_rng(config.seed)
    n_days, n_stocks = config.n_days, config.n_stocks
    lookback = config.reversal_lookback

    # Fixed draw order keeps output stable under parameter tweaks downstream.
    p0 = rng.lognormal(mean=math.log(40.0), sigma=0.6, size=n_stocks)
    mask = _episode_mask(rng, n_days, n_stocks, config.drift_regime_fraction, config.episode_length)
    shocks = rng.standard_normal((n_days, n_stocks))
    volume_base = rng.lognormal(mean=math.log(1e6), sigma=0.75, size=n_stocks)
    volume_noise = rng.lognormal(mean=-0.125, sigma=0.5, size=(n_days, n_stocks))

    returns = np.zeros((n_days, n_stocks))
    for t in range(1, n_days):
        r = config.base_vol * shocks[t] + config.drift_strength * mask[t]
        if config.reversal_strength > 0.0 and t > lookback:
            window = returns[t - lookback: t]
            trailing = np.prod(1.0 + window, axis=0) - 1.0
            d = -(trailing - trailing.mean())
            r = r + mask[t] * config.reversal_strength * d
        returns[t] = np.maximum(r, -0.99)

    close = p0 * np.cumprod(1.0 + returns, axis=0)
    volume = volume_base * volume_noise

    start = as_datetime64(config.start)
    dates = np.busday_offset(start, np.arange(n_days), roll="forward").astype("datetime64[D]")
    tickers = tuple(f"SYN{j:04d}" for j in range(n_stocks))
    return PricePanel(
        calendar=TradingCalendar(dates),
        tickers=tickers,
        close=close,
        volume=volume,
    )
