"""Shared builders for tests."""
from __future__ import annotations

import numpy as np
import pytest

from driftgate.data_model import PricePanel, TradingCalendar


def make_calendar(n_days: int, start: str = "2015-01-05") -> TradingCalendar:
    dates = np.busday_offset(np.datetime64(start, "D"), np.arange(n_days),
                             roll="forward").astype("datetime64[D]")
    return TradingCalendar(dates)


def make_panel(close: np.ndarray, tickers: tuple[str, ...] | None = None,
               volume: np.ndarray | None = None, start: str = "2015-01-05",
               sector: dict[str, str] | None = None) -> PricePanel:
    close = np.asarray(close, dtype=float)
    n_days, n_tickers = close.shape
    if tickers is None:
        tickers = tuple(f"T{j:03d}" for j in range(n_tickers))
    return PricePanel(calendar=make_calendar(n_days, start), tickers=tickers,
                      close=close, volume=volume, sector=sector)


def random_walk_panel(rng: np.random.Generator, n_days: int, n_tickers: int,
                      vol: float = 0.02, with_volume: bool = False) -> PricePanel:
    returns = vol * rng.standard_normal((n_days, n_tickers))
    returns[0] = 0.0
    close = 50.0 * np.exp(rng.standard_normal(n_tickers) * 0.3) * np.cumprod(1.0 + returns, axis=0)
    volume = None
    if with_volume:
        volume = rng.lognormal(mean=13.0, sigma=0.5, size=(n_days, n_tickers))
    return make_panel(close, volume=volume)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(7)
