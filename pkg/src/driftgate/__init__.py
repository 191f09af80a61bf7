"""Regime-gated cross-sectional reversal backtester.

Pipeline: price panel -> value/reversal blend -> per-stock drift gate ->
market-neutral weights -> risk-scaled walk-forward backtest with a
latching kill-switch -> permutation battery, stress scenarios, capacity
curve.  Deterministic end to end given a master seed.
"""
from .data_model import (PricePanel, ReturnPanel, SyntheticMarketConfig,
                         TradingCalendar, compute_returns, generate_synthetic,
                         load_panel, restrict, save_panel)
from .engine import (BacktestResult, CostModel, SignalBundle, benchmark_returns,
                     build_signal_bundle, run_backtest)
from .errors import ConfigError, DataError, DriftgateError, InvariantError
from .metrics import PerfStats, perf_stats, sharpe_ratio, wealth_curve
from .portfolio import WeightFrame, build_weight_matrix, build_weights
from .risk_controls import (KillSwitchConfig, KillSwitchState, KillTrigger,
                            ScaleFactor, TriggerType, compute_scale_factor,
                            kill_switch_step)
from .robustness import (CapacityReport, CrisisConfig, ImpactModel,
                         RandomizationReport, StressConfig, StressReport,
                         TrialConfig, TrialMode, capacity_curve, fit_impact_model,
                         permutation_pvalue, randomization_test, stress_run)
from .seeding import substream
from .signals import (SignalFrame, SignalParams, base_signal, edge_signal,
                      regime_mask, reversal_signal, up_fraction, value_signal)
from .validation import (AttributionReport, SweepReport, WalkForwardReport,
                         WindowSpec, attribution_decomposition, derive_anchors,
                         make_windows, parameter_sweep, run_walk_forward)

__version__ = "0.1.0"
