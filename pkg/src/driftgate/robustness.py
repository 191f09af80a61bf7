"""Randomization battery, stress scenarios, and capacity modeling.

The battery destroys one structural ingredient at a time and re-runs the
full walk-forward per trial: regime permutation scrambles which names
the gate opens for on each date (preserving that date's open count and
missingness), signal shuffling permutes edge scores among that date's
active names, and the block-regime variant circularly shifts each
stock's gate series in time (preserving its activation frequency and
run-length structure).  p-values use the add-one permutation rule.

Trial i always draws from substream(seed, "trial", i): results do not
depend on thread count or completion order.
"""
from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import metrics
from .data_model import PricePanel
from .engine import CostModel, SignalBundle, build_signal_bundle
from .risk_controls import KillSwitchConfig
from .seeding import substream
from .signals import SignalParams
from .validation import WalkForwardReport, WindowSpec, run_walk_forward


class TrialMode(enum.Enum):
    RANDOM_REGIME = "random_regime"
    SHUFFLED_SIGNALS = "shuffled_signals"
    BLOCK_REGIME = "block_regime"


@dataclass(frozen=True)
class TrialConfig:
    n_trials: int = 1000
    seed: int = 0
    mode: TrialMode = TrialMode.RANDOM_REGIME

    def __post_init__(self) -> None:
        if self.n_trials < 1:
            raise ValueError("n_trials must be >= 1")


def _permute_rows(values: np.ndarray, eligible: np.ndarray,
                  rng: np.random.Generator) -> np.ndarray:
    """Permute each row's eligible entries among eligible slots.

    Ineligible slots keep their original values.  Vectorized across all
    rows: random sort keys send eligible slots into random order; the
    eligible values (in stable original order) land in those slots.
    """
    keys = rng.random(values.shape)
    keys[~eligible] = np.inf  # ineligible slots sort last
    dest = np.argsort(keys, axis=1, kind="stable")
    src = np.argsort(~eligible, axis=1, kind="stable")  # eligible slots first
    out = values.copy()
    np.put_along_axis(out, dest, np.take_along_axis(values, src, axis=1), axis=1)
    ineligible = ~eligible
    out[ineligible] = values[ineligible]
    return out


def random_regime_trial(bundle: SignalBundle, rng: np.random.Generator) -> np.ndarray:
    """Edge matrix with each date's gate values permuted among live names."""
    mask = bundle.mask
    permuted = _permute_rows(mask, np.isfinite(mask), rng)
    return bundle.base * permuted


def shuffled_signal_trial(bundle: SignalBundle, rng: np.random.Generator) -> np.ndarray:
    """Edge matrix with scores permuted among each date's active names."""
    edge = bundle.base * bundle.mask
    active = np.isfinite(edge) & (edge != 0.0)
    return _permute_rows(edge, active, rng)


def block_regime_trial(bundle: SignalBundle, rng: np.random.Generator) -> np.ndarray:
    """Edge matrix with each stock's gate series circularly shifted."""
    mask = bundle.mask
    n_dates, n_stocks = mask.shape
    shifts = rng.integers(0, n_dates, size=n_stocks)
    rows = (np.arange(n_dates)[:, None] - shifts[None, :]) % n_dates
    shifted = mask[rows, np.arange(n_stocks)[None, :]]
    return bundle.base * shifted


_TRIAL_FUNCS = {
    TrialMode.RANDOM_REGIME: random_regime_trial,
    TrialMode.SHUFFLED_SIGNALS: shuffled_signal_trial,
    TrialMode.BLOCK_REGIME: block_regime_trial,
}


def permutation_pvalue(true_stat: float, trial_stats: np.ndarray) -> float:
    """Add-one permutation p-value: (1 + #{trial >= true}) / (1 + n)."""
    trials = np.asarray(trial_stats, dtype=float)
    return float((1 + int(np.sum(trials >= true_stat))) / (1 + len(trials)))


@dataclass
class RandomizationReport:
    mode: TrialMode
    true_sharpe: float
    trial_sharpes: np.ndarray
    p_value: float

    @property
    def n_trials(self) -> int:
        return len(self.trial_sharpes)


def randomization_test(panel: PricePanel, windows: list[WindowSpec],
                       params: SignalParams | None = None, *,
                       cost: CostModel | None = None,
                       kill_switch: KillSwitchConfig | None = KillSwitchConfig(),
                       trial_config: TrialConfig | None = None,
                       threads: int = 1,
                       bundle: SignalBundle | None = None,
                       base_report: WalkForwardReport | None = None,
                       **wf_kwargs) -> RandomizationReport:
    """True combined Sharpe against `n_trials` destroyed-structure runs.

    Trial runs reuse one signal bundle and skip per-window statistics, so
    each costs a few milliseconds.  A degenerate trial (all-flat, Sharpe
    undefined) counts as minus infinity: it can never beat the true run.
    """
    params = params or SignalParams()
    cost = cost or CostModel()
    trial_config = trial_config or TrialConfig()
    if bundle is None:
        bundle = build_signal_bundle(panel, params)
    if base_report is None:
        base_report = run_walk_forward(panel, windows, params, cost=cost,
                                       kill_switch=kill_switch, bundle=bundle,
                                       collect_stats=False, **wf_kwargs)
    true_sharpe = base_report.combined_sharpe
    if true_sharpe is None:
        raise ValueError("true run has undefined Sharpe (zero-vol combined returns)")

    trial_func = _TRIAL_FUNCS[trial_config.mode]

    def one_trial(index: int) -> float:
        rng = substream(trial_config.seed, "trial", index)
        edge = trial_func(bundle, rng)
        report = run_walk_forward(panel, windows, params, cost=cost,
                                  kill_switch=kill_switch, bundle=bundle,
                                  edge_override=edge, collect_stats=False,
                                  **wf_kwargs)
        sharpe = report.combined_sharpe
        return -math.inf if sharpe is None else sharpe

    indices = range(trial_config.n_trials)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            sharpes = list(pool.map(one_trial, indices))
    else:
        sharpes = [one_trial(i) for i in indices]
    trial_sharpes = np.array(sharpes)
    return RandomizationReport(
        mode=trial_config.mode,
        true_sharpe=true_sharpe,
        trial_sharpes=trial_sharpes,
        p_value=permutation_pvalue(true_sharpe, trial_sharpes),
    )


# ---------------------------------------------------------------------------
# impact model and capacity curve
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ImpactModel:
    """Square-root-family market impact: impact_bp = c * participation^gamma."""

    c: float = 50.0
    gamma: float = 0.5

    def __post_init__(self) -> None:
        if self.c <= 0 or self.gamma <= 0:
            raise ValueError("impact parameters must be positive")

    def impact_bp(self, participation: float | np.ndarray) -> float | np.ndarray:
        # sqrt is correctly rounded where pow is not; with it, quadrupling
        # participation doubles the impact exactly, not just approximately
        if self.gamma == 0.5:
            return self.c * np.sqrt(participation)
        return self.c * np.power(participation, self.gamma)


def fit_impact_model(participations: np.ndarray, impacts_bp: np.ndarray) -> ImpactModel:
    """Least-squares fit of log(impact) on log(participation)."""
    x = np.log(np.asarray(participations, dtype=float))
    y = np.log(np.asarray(impacts_bp, dtype=float))
    if len(x) < 2:
        raise ValueError("need at least 2 calibration points")
    gamma, log_c = np.polyfit(x, y, 1)
    return ImpactModel(c=float(np.exp(log_c)), gamma=float(gamma))


VIABILITY_BANDS = ((8.0, "excellent"), (5.0, "good"), (1.0, "marginal"))


def viability_label(sharpe: float | None) -> str:
    if sharpe is None:
        return "unviable"
    for floor, label in VIABILITY_BANDS:
        if sharpe >= floor:
            return label
    return "unviable"


@dataclass(frozen=True)
class CapacityPoint:
    aum: float
    participation: float
    impact_bp: float
    net_sharpe: float | None
    net_ann_return: float
    viability: str


@dataclass
class CapacityReport:
    points: list[CapacityPoint]
    model: ImpactModel
    aggregate_adv: float
    mean_turnover: float


def traded_dollar_adv(report: WalkForwardReport, panel: PricePanel) -> float:
    """Sum over traded names of their median daily dollar volume across
    the combined test dates."""
    if panel.volume is None:
        raise ValueError(
            "panel has no volume data; supply an adv_override to size capacity"
        )
    traded = np.zeros(panel.n_tickers, dtype=bool)
    rows = []
    for w in report.windows:
        traded |= np.any(w.test.weights != 0.0, axis=0)
        i0, i1 = panel.calendar.range_indices(w.spec.test_start, w.spec.test_end)
        rows.append(np.arange(i0, i1))
    if not traded.any():
        raise ValueError("base run never traded; capacity curve undefined")
    row_idx = np.concatenate(rows)
    dollar = panel.close[row_idx][:, traded] * panel.volume[row_idx][:, traded]
    med = np.nanmedian(dollar, axis=0)
    return float(np.nansum(med))


def capacity_curve(report: WalkForwardReport, panel: PricePanel,
                   aum_levels: list[float], *,
                   cost: CostModel | None = None,
                   model: ImpactModel | None = None,
                   adv_override: float | None = None) -> CapacityReport:
    """Re-cost the combined out-of-sample run at increasing AUM.

    participation = AUM * mean daily turnover / aggregate dollar ADV;
    impact_bp = model(participation) is charged per unit of turnover on
    top of the base cost model.  Statistics come from the re-costed
    combined series; doubling impact coefficients doubles impact exactly.
    """
    cost = cost or CostModel()
    model = model or ImpactModel()
    if not aum_levels:
        raise ValueError("need at least one AUM level")
    if any(a <= 0 for a in aum_levels):
        raise ValueError("AUM levels must be positive")
    adv = adv_override if adv_override is not None else traded_dollar_adv(report, panel)
    if adv <= 0:
        raise ValueError("aggregate ADV must be positive")
    turnover = report.combined_turnover
    mean_turnover = float(turnover.mean())
    points = []
    for aum in sorted(aum_levels):
        participation = aum * mean_turnover / adv
        impact_bp = float(model.impact_bp(participation))
        net = report.combined_gross - (cost.per_unit + impact_bp * 1e-4) * turnover
        sharpe = metrics.sharpe_ratio(net)
        wealth = float(np.prod(1.0 + net))
        n = len(net)
        ann_return = wealth ** (metrics.TRADING_DAYS / n) - 1.0 if wealth > 0 else -1.0
        points.append(CapacityPoint(
            aum=float(aum), participation=float(participation), impact_bp=impact_bp,
            net_sharpe=sharpe, net_ann_return=ann_return,
            viability=viability_label(sharpe),
        ))
    return CapacityReport(points=points, model=model, aggregate_adv=adv,
                          mean_turnover=mean_turnover)


# ---------------------------------------------------------------------------
# stress scenarios
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CrisisConfig:
    depth_reduction: float = 0.60
    spread_multiplier: float = 2.0
    slippage_bp: float = 10.0
    vol_multiplier: float = 1.0
    participation: float = 0.10

    def __post_init__(self) -> None:
        if not 0.0 <= self.depth_reduction < 1.0:
            raise ValueError("depth_reduction must lie in [0, 1)")
        if self.spread_multiplier <= 0 or self.vol_multiplier <= 0:
            raise ValueError("multipliers must be positive")
        if self.slippage_bp < 0 or self.participation < 0:
            raise ValueError("slippage_bp and participation must be >= 0")


@dataclass(frozen=True)
class StressConfig:
    noise_bp_daily: float = 50.0
    cost_multiplier: float = 2.0
    slippage_bp: float = 10.0
    crisis: CrisisConfig = CrisisConfig()

    def __post_init__(self) -> None:
        if self.noise_bp_daily < 0 or self.slippage_bp < 0:
            raise ValueError("noise and slippage must be >= 0")
        if self.cost_multiplier <= 0:
            raise ValueError("cost_multiplier must be positive")


@dataclass(frozen=True)
class StressScenario:
    name: str
    description: str
    stats: metrics.PerfStats


@dataclass
class StressReport:
    base_stats: metrics.PerfStats
    scenarios: list[StressScenario]


def stress_run(panel: PricePanel, windows: list[WindowSpec],
               params: SignalParams | None = None, *,
               cost: CostModel | None = None,
               kill_switch: KillSwitchConfig | None = KillSwitchConfig(),
               stress: StressConfig | None = None,
               impact: ImpactModel | None = None,
               seed: int = 0,
               base_report: WalkForwardReport | None = None,
               **wf_kwargs) -> StressReport:
    """Four deteriorations of the base run, worst assumptions compounding
    in the crisis scenario.

    Noise perturbs the base combined returns in place (seeded); the cost
    scenarios re-run the whole walk-forward under the worse cost model;
    crisis combines wider spreads, slippage, and depth-inflated impact at
    the configured participation, then scales returns by vol_multiplier.
    """
    params = params or SignalParams()
    cost = cost or CostModel()
    stress = stress or StressConfig()
    impact = impact or ImpactModel()
    if base_report is None:
        base_report = run_walk_forward(panel, windows, params, cost=cost,
                                       kill_switch=kill_switch, **wf_kwargs)
    base = base_report.combined_returns
    base_stats = metrics.perf_stats(base, base_report.combined_benchmark)
    scenarios: list[StressScenario] = []

    rng = substream(seed, "stress", "noise")
    noisy = base + rng.normal(0.0, stress.noise_bp_daily * 1e-4, size=len(base))
    scenarios.append(StressScenario(
        name="noise",
        description=f"additive gaussian noise, {stress.noise_bp_daily:g}bp daily std",
        stats=metrics.perf_stats(noisy),
    ))

    def rerun(c: CostModel) -> np.ndarray:
        report = run_walk_forward(panel, windows, params, cost=c,
                                  kill_switch=kill_switch, collect_stats=False,
                                  **wf_kwargs)
        return report.combined_returns

    doubled = CostModel(rate_per_unit=cost.rate_per_unit * stress.cost_multiplier,
                        slippage_per_unit=cost.slippage_per_unit)
    scenarios.append(StressScenario(
        name="cost_multiple",
        description=f"cost rate x{stress.cost_multiplier:g}",
        stats=metrics.perf_stats(rerun(doubled)),
    ))

    slipped = CostModel(rate_per_unit=cost.rate_per_unit,
                        slippage_per_unit=cost.slippage_per_unit + stress.slippage_bp * 1e-4)
    scenarios.append(StressScenario(
        name="slippage",
        description=f"{stress.slippage_bp:g}bp slippage per trade",
        stats=metrics.perf_stats(rerun(slipped)),
    ))

    crisis = stress.crisis
    crisis_impact_bp = float(impact.impact_bp(crisis.participation)) / (1.0 - crisis.depth_reduction)
    crisis_cost = CostModel(
        rate_per_unit=cost.rate_per_unit * crisis.spread_multiplier,
        slippage_per_unit=cost.slippage_per_unit + (crisis.slippage_bp + crisis_impact_bp) * 1e-4,
    )
    crisis_returns = crisis.vol_multiplier * rerun(crisis_cost)
    scenarios.append(StressScenario(
        name="crisis",
        description=(f"spreads x{crisis.spread_multiplier:g}, {crisis.slippage_bp:g}bp slippage, "
                     f"impact/{1.0 - crisis.depth_reduction:g} at {crisis.participation:g} "
                     f"participation, vol x{crisis.vol_multiplier:g}"),
        stats=metrics.perf_stats(crisis_returns),
    ))

    return StressReport(base_stats=base_stats, scenarios=scenarios)
