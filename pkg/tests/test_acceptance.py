"""Acceptance battery: ten go/no-go checks, one printed verdict line each.

Run with `pytest tests/test_acceptance.py -s` to see the verdict lines.
The permutation battery (criterion 7) dominates the runtime; the whole
file takes roughly ten minutes on one core.  Everything is seeded, so
each criterion's outcome is reproducible bit for bit.
"""
from __future__ import annotations

import math
import time

import numpy as np
import pytest
import scipy.stats

from driftgate.cli import main
from driftgate.data_model import (SyntheticMarketConfig, aligned_returns,
                                  generate_synthetic, restrict)
from driftgate.engine import CostModel, build_signal_bundle, run_backtest
from driftgate.metrics import max_drawdown, perf_stats, sharpe_ratio
from driftgate.risk_controls import (KillSwitchConfig, KillSwitchState, TriggerType,
                                     compute_scale_factor, kill_switch_step)
from driftgate.robustness import (ImpactModel, TrialConfig, fit_impact_model,
                                  randomization_test, stress_run)
from driftgate.signals import SignalParams, mask_matrix, reversal_matrix, \
    up_fraction_matrix, value_matrix
from driftgate.validation import (attribution_decomposition, derive_anchors,
                                  make_windows, run_walk_forward)

from conftest import make_panel
from test_metrics import assert_matches_oracle, oracle_stats
from test_signals import (assert_same_matrix, brute_reversal, brute_up_fraction,
                          brute_value)

PARAMS = SignalParams()


def verdict(num: int, text: str) -> None:
    print(f"\ncriterion {num:2d} PASS  {text}")


def effect_setup(seed: int, **overrides):
    """A market with the conditional reversal effect plus 3 yearly windows."""
    cfg = SyntheticMarketConfig(n_stocks=40, n_days=1160, seed=seed, **overrides)
    panel = generate_synthetic(cfg)
    anchors = derive_anchors(panel.calendar, PARAMS.warmup_days, 1, 1, max_windows=3)
    windows = make_windows(panel.calendar, anchors, 1, 1)
    return panel, windows


# ---------------------------------------------------------------------------
# 1. metric oracle equivalence

def test_criterion_01_metric_oracle():
    started = time.perf_counter()
    rng = np.random.default_rng(2026)
    lengths = ([2, 2000]
               + list(rng.integers(2, 40, size=400))
               + list(rng.integers(40, 400, size=400))
               + list(rng.integers(400, 2001, size=198)))
    assert len(lengths) == 1000
    for i, n in enumerate(lengths):
        vol = rng.uniform(0.001, 0.03)
        returns = rng.normal(rng.uniform(-0.002, 0.002), vol, size=n)
        if i % 17 == 0:
            returns = np.zeros(n)  # degenerate: sharpe/skew undefined
        benchmark = rng.normal(0.0, 0.01, size=n) if i % 3 == 0 else None
        stats = perf_stats(returns, benchmark)
        assert_matches_oracle(stats, oracle_stats(returns, benchmark), tol=1e-10)
    elapsed = time.perf_counter() - started
    assert elapsed < 10.0, f"oracle sweep took {elapsed:.1f}s"
    verdict(1, f"1000 series (n=2..2000), every field within 1e-10, {elapsed:.1f}s")


# ---------------------------------------------------------------------------
# 2. signal correctness against brute-force loops

def test_criterion_02_signal_parity():
    started = time.perf_counter()
    panel = generate_synthetic(SyntheticMarketConfig(n_stocks=50, n_days=300, seed=7))
    close = panel.close
    ret = aligned_returns(panel)

    assert_same_matrix(value_matrix(close), brute_value(close), exact=True)
    uf = up_fraction_matrix(ret, 63)
    assert_same_matrix(uf, brute_up_fraction(close, 63), exact=True)
    brute_mask = np.where(np.isfinite(uf), (uf > 0.60).astype(float), np.nan)
    assert_same_matrix(mask_matrix(uf, 0.60), brute_mask, exact=True)
    assert_same_matrix(reversal_matrix(ret, 10), brute_reversal(close, 10), tol=1e-12)

    # regime boundary: up fraction landing exactly on the threshold gates OFF
    signs = np.array([1] * 38 + [-1] * 25)
    np.random.default_rng(3).shuffle(signs)
    # the last row's window covers exactly the 63 sign steps: 38/63 up
    steps = np.concatenate([np.full(6, 0.001), signs * 0.01, [0.001]])
    close_col = 100.0 * np.cumprod(1.0 + np.concatenate([[0.0], steps]))
    boundary = make_panel(close_col[:, None])
    buf = up_fraction_matrix(aligned_returns(boundary), 63)
    theta = 38.0 / 63.0
    assert buf[-1, 0] == theta
    assert mask_matrix(buf, theta)[-1, 0] == 0.0
    assert mask_matrix(buf, np.nextafter(theta, 0.0))[-1, 0] == 1.0

    elapsed = time.perf_counter() - started
    assert elapsed < 5.0, f"signal parity took {elapsed:.1f}s"
    verdict(2, f"50x300 panel matches brute force; threshold tie gates off, {elapsed:.1f}s")


# ---------------------------------------------------------------------------
# 3. weight invariants over a full backtest

def test_criterion_03_weight_invariants():
    panel, _ = effect_setup(0)
    result = run_backtest(panel, PARAMS, scale=1.0, kill_switch=None)
    weights = result.weights
    nonflat = np.abs(weights).sum(axis=1) > 0
    assert nonflat.sum() > 800, "expected most post-warmup days to trade"

    longs = np.clip(weights, 0.0, None).sum(axis=1)[nonflat]
    shorts = np.clip(weights, None, 0.0).sum(axis=1)[nonflat]
    gross = np.abs(weights).sum(axis=1)[nonflat]
    net = weights.sum(axis=1)[nonflat]
    worst = max(np.max(np.abs(longs - 0.5)), np.max(np.abs(shorts + 0.5)),
                np.max(np.abs(gross - 1.0)), np.max(np.abs(net)))
    assert worst <= 1e-10

    bundle = build_signal_bundle(panel, PARAMS)
    edge = bundle.base * bundle.mask
    assert np.all(weights[edge == 0.0] == 0.0)
    assert np.all(weights[np.isnan(edge)] == 0.0)
    verdict(3, f"{int(nonflat.sum())} traded days, |sum error| <= {worst:.2e}, "
               "zero-edge names carry zero weight")


# ---------------------------------------------------------------------------
# 4. no lookahead under truncation

def test_criterion_04_no_lookahead():
    panel, _ = effect_setup(3)
    full = run_backtest(panel, PARAMS, kill_switch=None)
    rng = np.random.default_rng(11)
    cuts = sorted(rng.integers(PARAMS.warmup_days + 30, panel.n_dates - 1, size=20))
    for cut in cuts:
        trunc = restrict(panel, None, panel.calendar.dates[cut])
        assert trunc.n_dates == cut
        res = run_backtest(trunc, PARAMS, kill_switch=None)
        np.testing.assert_array_equal(res.weights, full.weights[:cut])
        np.testing.assert_array_equal(res.daily_returns, full.daily_returns[:cut])
        np.testing.assert_array_equal(res.equity, full.equity[:cut])
    verdict(4, "20 random truncation points leave history bit-identical")


# ---------------------------------------------------------------------------
# 5. scale factor and kill-switch behavior

def drive_steps(returns, benchmark=None, config=None, target_vol=0.12):
    state = KillSwitchState()
    equity = np.cumprod(1.0 + np.asarray(returns))
    states = []
    for t in range(len(returns)):
        bench = None if benchmark is None else np.asarray(benchmark[: t + 1])
        state = kill_switch_step(state, equity[: t + 1], np.asarray(returns[: t + 1]),
                                 bench, config, target_vol,
                                 today=f"2015-03-{t + 2:02d}")
        states.append(state)
    return states


def assert_fires_and_latches(states, expected):
    fired = [s for s in states if not s.active]
    assert fired, f"{expected} never fired"
    assert fired[0].trigger_type is expected
    first = states.index(fired[0])
    assert all(states[t] is fired[0] for t in range(first, len(states))), "state reset"


def test_criterion_05_scale_and_kill_switch():
    # scale factor against an independent recomputation of min(vol leg, dd leg)
    rng = np.random.default_rng(5)
    for _ in range(100):
        r = rng.normal(rng.uniform(-0.001, 0.001), rng.uniform(0.002, 0.02),
                       size=int(rng.integers(10, 400)))
        got = compute_scale_factor(r).value
        vol = float(np.std(r, ddof=1)) * math.sqrt(252.0)
        want = 0.12 / vol
        mdd = max_drawdown(r)
        if mdd < 0.0:
            want = min(want, 0.15 / abs(mdd))
        assert got == pytest.approx(want, rel=1e-12)

    quiet = np.tile([0.003, -0.003], 50)       # vol binds, drawdown slack
    assert compute_scale_factor(quiet).value == pytest.approx(
        0.12 / (np.std(quiet, ddof=1) * math.sqrt(252.0)), rel=1e-12)
    slide = np.full(30, -0.02)                  # drawdown binds
    dd = max_drawdown(slide)
    assert compute_scale_factor(slide).value == pytest.approx(0.15 / abs(dd), rel=1e-12)
    a = 0.12 / math.sqrt(2.0 * 252.0)           # exact cap: vol lands on 12%
    assert compute_scale_factor(np.array([a, -a])).value == pytest.approx(1.0, rel=1e-12)

    # each trigger fires on its adversarial path and latches for good
    cfg = KillSwitchConfig(rolling_window=5, vol_window=4, corr_window=4)
    assert_fires_and_latches(drive_steps([0.0, -0.35, 0.5, 0.5, 0.5], config=cfg),
                             TriggerType.ABSOLUTE_DRAWDOWN)
    slow = KillSwitchConfig(rolling_window=5, vol_window=99, corr_window=99)
    assert_fires_and_latches(drive_steps([-0.022] * 8, config=slow),
                             TriggerType.ROLLING_LOSS)
    assert_fires_and_latches(drive_steps([0.0, 0.0, 0.09, -0.09, 0.0], config=cfg),
                             TriggerType.VOL_SPIKE)
    base = [0.01, -0.012, 0.011, -0.009, 0.012, -0.011]
    bench = [0.9 * r for r in base]
    assert_fires_and_latches(drive_steps(base, benchmark=bench, config=cfg),
                             TriggerType.CORRELATION_BREAK)

    # benign calibrated market: no window trips any trigger
    panel, windows = effect_setup(0)
    report = run_walk_forward(panel, windows, PARAMS)
    assert report.kill_log == []
    assert all(w.test.kill_log == [] for w in report.windows)
    verdict(5, f"scale formula exact (incl. cap s*=1), 4 triggers latch, "
               f"0 of {len(windows)} benign windows tripped")


# ---------------------------------------------------------------------------
# 6. conditional effect recovered by the gate

def test_criterion_06_gate_recovers_conditional_effect():
    started = time.perf_counter()
    wins = 0
    for seed in range(100):
        panel, windows = effect_setup(seed)
        report = attribution_decomposition(panel, windows, PARAMS)
        by = {r.name: r for r in report.runs}
        gated = by["combined_gated"].sharpe
        ungated = by["combined_ungated"].sharpe
        if gated is not None and ungated is not None and gated > ungated:
            wins += 1
    elapsed = time.perf_counter() - started
    assert wins >= 95, f"gated beat ungated in only {wins}/100 seeds"
    assert elapsed < 300.0

    # the attribution legs are the same computation as the plain runs
    panel, windows = effect_setup(0)
    report = attribution_decomposition(panel, windows, PARAMS)
    by = {r.name: r for r in report.runs}
    assert run_walk_forward(panel, windows, PARAMS).combined_sharpe == by["combined_gated"].sharpe
    assert run_walk_forward(panel, windows, PARAMS,
                            gated=False).combined_sharpe == by["combined_ungated"].sharpe
    verdict(6, f"gated > ungated OOS sharpe in {wins}/100 seeds, {elapsed:.0f}s")


# ---------------------------------------------------------------------------
# 7. permutation test: significance with the effect, uniform null without

def test_criterion_07_permutation_significance():
    started = time.perf_counter()
    perfect = 0
    for seed in range(100):
        panel, windows = effect_setup(seed)
        rt = randomization_test(panel, windows, PARAMS,
                                trial_config=TrialConfig(n_trials=1000, seed=seed))
        if rt.p_value == 1.0 / 1001.0:
            perfect += 1
    assert perfect >= 90, f"p=1/1001 in only {perfect}/100 seeds"

    # with no structure to find, p must be approximately uniform; costs are
    # zeroed so book persistence cannot separate the true run from trials
    free = CostModel(rate_per_unit=0.0)
    pvals = []
    for seed in range(100):
        panel, windows = effect_setup(seed, drift_strength=0.0, reversal_strength=0.0)
        rt = randomization_test(panel, windows, PARAMS, cost=free,
                                trial_config=TrialConfig(n_trials=99, seed=seed))
        pvals.append(rt.p_value)
    ks = scipy.stats.kstest(pvals, "uniform").statistic
    elapsed = time.perf_counter() - started
    assert ks < 0.15, f"null p-values not uniform, KS={ks:.3f}"
    assert elapsed < 900.0
    verdict(7, f"p=1/1001 in {perfect}/100 seeds; null KS={ks:.3f}, {elapsed:.0f}s")


# ---------------------------------------------------------------------------
# 8. cost and stress orderings

def test_criterion_08_cost_and_stress_monotonicity():
    base_cost = CostModel()
    for seed in range(10):
        panel, windows = effect_setup(seed)
        bundle = build_signal_bundle(panel, PARAMS)
        base = run_walk_forward(panel, windows, PARAMS, cost=base_cost, bundle=bundle)
        doubled = run_walk_forward(panel, windows, PARAMS, bundle=bundle,
                                   cost=CostModel(rate_per_unit=2 * base_cost.rate_per_unit))
        assert base.combined_turnover.sum() > 0
        assert doubled.combined_sharpe < base.combined_sharpe

        report = stress_run(panel, windows, PARAMS, cost=base_cost, seed=seed,
                            base_report=base, bundle=bundle)
        by = {s.name: s.stats.sharpe for s in report.scenarios}
        assert by["crisis"] <= by["slippage"] <= report.base_stats.sharpe
    verdict(8, "doubled costs strictly cut sharpe; crisis <= slippage <= base on 10 seeds")


# ---------------------------------------------------------------------------
# 9. impact model exactness and table calibration

TABLE_PARTICIPATION = (0.02, 0.04, 0.10, 0.20, 0.40, 0.80)
TABLE_IMPACT_BP = (3.0, 8.0, 15.0, 28.0, 52.0, 95.0)


def test_criterion_09_capacity_model():
    model = ImpactModel(c=50.0, gamma=0.5)
    rng = np.random.default_rng(9)
    p = np.concatenate([np.geomspace(1e-8, 0.249, 57), rng.uniform(1e-6, 0.25, 200)])
    assert np.array_equal(model.impact_bp(4.0 * p), 2.0 * model.impact_bp(p))
    assert model.impact_bp(0.04) == 2.0 * model.impact_bp(0.01)

    fitted = fit_impact_model(np.array(TABLE_PARTICIPATION), np.array(TABLE_IMPACT_BP))
    worst = 0.0
    for part, bp in zip(TABLE_PARTICIPATION, TABLE_IMPACT_BP):
        rel = abs(float(fitted.impact_bp(part)) - bp) / bp
        worst = max(worst, rel)
    assert worst <= 0.20, f"calibration misses a table point by {worst:.1%}"
    verdict(9, f"gamma=0.5 doubling exact; table fit within {worst:.1%} "
               f"(c={fitted.c:.1f}, gamma={fitted.gamma:.3f})")


# ---------------------------------------------------------------------------
# 10. end-to-end determinism through the command line

DETERMINISM_CONFIG = """
master_seed = 5
[data.synthetic]
n_stocks = 25
n_days = 900
[windows]
train_years = 1
test_years = 1
max_windows = 2
[robustness]
n_trials = 200
"""


def dir_bytes(path):
    out = {}
    for child in sorted(path.iterdir()):
        out[child.name] = child.read_bytes()
    return out


def test_criterion_10_end_to_end_determinism(tmp_path, capsys):
    config = tmp_path / "det.toml"
    config.write_text(DETERMINISM_CONFIG)
    outputs = {}
    for command in ("walkforward", "randomize"):
        for label, threads in (("a", 1), ("b", 1), ("c", 8)):
            out = tmp_path / f"{command}_{label}"
            rc = main(["-c", str(config), "--output-dir", str(out),
                       "--threads", str(threads), command])
            assert rc == 0
            outputs[(command, label)] = dir_bytes(out)
        assert outputs[(command, "a")] == outputs[(command, "b")], \
            f"{command}: repeat run differs"
        assert outputs[(command, "a")] == outputs[(command, "c")], \
            f"{command}: thread count changed the bytes"
    capsys.readouterr()
    names = sorted(outputs[("walkforward", "a")]) + sorted(outputs[("randomize", "a")])
    verdict(10, f"walkforward+randomize byte-identical across reruns and 1 vs 8 "
                f"threads ({len(names)} files)")
