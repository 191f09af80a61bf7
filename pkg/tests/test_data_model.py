"""Panels, calendars, CSV ingestion, synthetic market generator."""
from __future__ import annotations

import numpy as np
import pytest

from driftgate.data_model import (PricePanel, SyntheticMarketConfig, TradingCalendar,
                                  aligned_returns, as_datetime64, compute_returns,
                                  generate_synthetic, load_panel, restrict, save_panel)
from driftgate.errors import DataError
from tests.conftest import make_calendar, make_panel


def test_as_datetime64_accepts_common_forms():
    d = np.datetime64("2015-03-02")
    assert as_datetime64("2015-03-02") == d
    assert as_datetime64(d) == d
    assert as_datetime64(np.datetime64("2015-03-02T00:00")) == d
    with pytest.raises(DataError):
        as_datetime64("not-a-date")


def test_calendar_requires_strictly_increasing_dates():
    dates = np.array(["2015-01-05", "2015-01-05"], dtype="datetime64[D]")
    with pytest.raises(DataError):
        TradingCalendar(dates)
    dates = np.array(["2015-01-06", "2015-01-05"], dtype="datetime64[D]")
    with pytest.raises(DataError):
        TradingCalendar(dates)


def test_calendar_lookup():
    cal = make_calendar(5)
    assert cal.index_of(cal.dates[3]) == 3
    with pytest.raises(KeyError):
        cal.index_of("2014-01-01")
    i0, i1 = cal.range_indices(cal.dates[1], cal.dates[4])
    assert (i0, i1) == (1, 4)
    assert cal.range_indices(None, None) == (0, 5)


def test_panel_validation():
    with pytest.raises(DataError, match="sorted"):
        make_panel(np.ones((3, 2)), tickers=("B", "A"))
    with pytest.raises(DataError, match="duplicate"):
        make_panel(np.ones((3, 2)), tickers=("A", "A"))
    with pytest.raises(DataError, match="positive"):
        make_panel(np.array([[1.0], [0.0], [1.0]]))
    bad_vol = make_panel  # volume must be non-negative where present
    with pytest.raises(DataError):
        bad_vol(np.ones((2, 1)), volume=np.array([[1.0], [-2.0]]))


def test_interior_gap_rejected_leading_trailing_allowed():
    close = np.ones((6, 2)) * 50.0
    close[:2, 0] = np.nan  # late listing: fine
    close[5:, 1] = np.nan  # delisting: fine
    panel = make_panel(close)
    assert panel.n_dates == 6

    close2 = np.ones((6, 1)) * 50.0
    close2[3, 0] = np.nan  # interior hole: rejected
    with pytest.raises(DataError, match="interior"):
        make_panel(close2)


def test_panel_arrays_are_read_only():
    panel = make_panel(np.ones((3, 2)) * 10.0)
    with pytest.raises(ValueError):
        panel.close[0, 0] = 1.0


def test_restrict_half_open():
    panel = make_panel(np.cumsum(np.ones((10, 2)), axis=0) + 10.0)
    sub = restrict(panel, panel.calendar.dates[2], panel.calendar.dates[7])
    assert sub.n_dates == 5
    assert sub.calendar.dates[0] == panel.calendar.dates[2]
    assert np.array_equal(sub.close, panel.close[2:7])


def test_compute_returns_values_and_nan():
    close = np.array([[100.0, np.nan], [110.0, 50.0], [99.0, 55.0]])
    panel = make_panel(close)
    ret = compute_returns(panel)
    assert ret.returns[0, 0] == pytest.approx(0.10)
    assert np.isnan(ret.returns[0, 1])  # listing day has no prior close
    assert ret.returns[1, 1] == pytest.approx(0.10)
    aligned = aligned_returns(panel)
    assert np.all(np.isnan(aligned[0]))
    assert np.array_equal(aligned[1:], ret.returns, equal_nan=True)
    with pytest.raises(DataError):
        compute_returns(make_panel(np.ones((1, 2))))


# ---------------------------------------------------------------------------
# CSV round trip

def test_save_load_round_trip(tmp_path, rng):
    close = 50.0 * np.cumprod(1.0 + 0.02 * rng.standard_normal((30, 4)), axis=0)
    close[:5, 1] = np.nan
    volume = rng.lognormal(13.0, 0.4, size=(30, 4))
    volume[:5, 1] = np.nan
    panel = make_panel(close, volume=volume,
                       sector={"T000": "alpha", "T001": "beta", "T002": "alpha", "T003": "beta"})
    path = str(tmp_path / "panel.csv")
    save_panel(panel, path, header_lines=("config_sha256 deadbeef",))
    loaded = load_panel(path)
    assert loaded.tickers == panel.tickers
    assert np.array_equal(loaded.calendar.dates, panel.calendar.dates)
    assert np.array_equal(loaded.close, panel.close, equal_nan=True)
    assert np.array_equal(loaded.volume, panel.volume, equal_nan=True)
    assert loaded.sector == panel.sector
    with open(path) as fh:
        first = fh.readline()
    assert first.startswith("# ")


def test_load_rejects_bad_rows(tmp_path):
    base = "date,ticker,close,volume\n"

    def attempt(rows, match):
        path = str(tmp_path / "bad.csv")
        with open(path, "w") as fh:
            fh.write(base + rows)
        with pytest.raises(DataError, match=match):
            load_panel(path)

    attempt("2015-01-05,A,xyz,100\n", "close")
    attempt("notadate,A,10,100\n", "date")
    attempt("2015-01-05,A,10,-5\n", "volume")
    attempt("2015-01-05,A,10,100\n2015-01-05,A,11,100\n", "duplicate")
    attempt("2015-01-05,A,10\n", "fields")
    path = str(tmp_path / "empty.csv")
    with open(path, "w") as fh:
        fh.write("")
    with pytest.raises(DataError):
        load_panel(path)


def test_load_custom_schema(tmp_path):
    path = str(tmp_path / "alt.csv")
    with open(path, "w") as fh:
        fh.write("dt;sym;px\n2015-01-05;A;10.5\n2015-01-06;A;10.6\n")
    panel = load_panel(path, schema={"date": "dt", "ticker": "sym", "close": "px"},
                       delimiter=";")
    assert panel.tickers == ("A",)
    assert panel.volume is None
    assert panel.close[1, 0] == pytest.approx(10.6)


# ---------------------------------------------------------------------------
# synthetic market

def test_synthetic_is_deterministic():
    cfg = SyntheticMarketConfig(n_stocks=6, n_days=120, seed=42)
    a = generate_synthetic(cfg)
    b = generate_synthetic(cfg)
    assert np.array_equal(a.close, b.close)
    assert np.array_equal(a.volume, b.volume)
    c = generate_synthetic(SyntheticMarketConfig(n_stocks=6, n_days=120, seed=43))
    assert not np.array_equal(a.close, c.close)


def test_synthetic_shape_and_sanity():
    cfg = SyntheticMarketConfig(n_stocks=5, n_days=60, seed=1)
    panel = generate_synthetic(cfg)
    assert panel.n_dates == 60 and panel.n_tickers == 5
    assert panel.tickers[0] == "SYN0000"
    assert np.all(panel.close > 0)
    assert np.all(panel.volume > 0)
    days = panel.calendar.dates.astype("datetime64[D]").astype(int) % 7
    weekdays = np.is_busday(panel.calendar.dates)
    assert weekdays.all()
    assert panel.calendar.dates[0] == np.datetime64("2010-01-04")
    assert len(days) == 60


def test_synthetic_episode_fraction_near_target(rng):
    cfg = SyntheticMarketConfig(n_stocks=40, n_days=1500, seed=3,
                                drift_regime_fraction=0.35)
    panel = generate_synthetic(cfg)
    rets = aligned_returns(panel)[1:]
    # Drifting stock-days push the mean return up; crude check is that the
    # panel grows on average but not absurdly.
    assert 0.0 < np.nanmean(rets) < 0.01


def test_synthetic_zero_fraction_has_no_drift_days():
    cfg = SyntheticMarketConfig(n_stocks=10, n_days=400, seed=5,
                                drift_regime_fraction=0.0, drift_strength=0.05)
    panel = generate_synthetic(cfg)
    rets = aligned_returns(panel)[1:]
    assert abs(np.nanmean(rets)) < 0.002  # pure noise, mean near zero


def test_synthetic_config_validation():
    with pytest.raises(ValueError):
        SyntheticMarketConfig(n_stocks=0)
    with pytest.raises(ValueError):
        SyntheticMarketConfig(drift_regime_fraction=1.5)
    with pytest.raises(ValueError):
        SyntheticMarketConfig(base_vol=-0.1)
    with pytest.raises(ValueError):
        SyntheticMarketConfig(episode_length=0.0)
