"""How much money can the strategy run before impact eats the edge?

Trading pushes prices: impact in basis points grows like the square root
of participation (your trading as a fraction of a name's dollar volume).
Re-costing the out-of-sample run at rising AUM maps sharpe against size.
The model can also be calibrated from measured (participation, impact)
pairs instead of assumed coefficients.
"""
import numpy as np

from driftgate.data_model import SyntheticMarketConfig, generate_synthetic
from driftgate.robustness import ImpactModel, capacity_curve, fit_impact_model
from driftgate.signals import SignalParams
from driftgate.validation import derive_anchors, make_windows, run_walk_forward

params = SignalParams()
panel = generate_synthetic(SyntheticMarketConfig(n_stocks=30, n_days=1160, seed=4))
anchors = derive_anchors(panel.calendar, params.warmup_days, 1, 1, max_windows=3)
windows = make_windows(panel.calendar, anchors, 1, 1)
report = run_walk_forward(panel, windows, params)

aum_levels = [1e7, 5e7, 1e8, 5e8, 1e9, 5e9, 1e10]
curve = capacity_curve(report, panel, aum_levels)

print(f"aggregate dollar ADV of traded names: ${curve.aggregate_adv:,.0f}")
print(f"mean daily turnover: {curve.mean_turnover:.3f}x of book\n")
print(f"{'AUM':>8s} {'particip':>9s} {'impact bp':>10s} {'sharpe':>7s}  viability")
for pt in curve.points:
    print(f"{pt.aum / 1e6:7,.0f}M {pt.participation:9.4f} {pt.impact_bp:10.2f} "
          f"{pt.net_sharpe:7.2f}  {pt.viability}")

# square-root law: 4x the participation costs exactly 2x the impact
model = ImpactModel(c=50.0, gamma=0.5)
print(f"\nimpact(0.04) = {model.impact_bp(0.04):.2f}bp "
      f"= 2 x impact(0.01) = {2 * model.impact_bp(0.01):.2f}bp (exact)")

# calibrate the coefficients from measured pairs instead of assuming them
measured_p = np.array([0.02, 0.04, 0.10, 0.20, 0.40, 0.80])
measured_bp = np.array([3.0, 8.0, 15.0, 28.0, 52.0, 95.0])
fitted = fit_impact_model(measured_p, measured_bp)
print(f"calibrated fit: impact_bp = {fitted.c:.1f} * p^{fitted.gamma:.3f}")
for p, bp in zip(measured_p, measured_bp):
    pred = float(fitted.impact_bp(p))
    print(f"  p={p:4.2f}  measured {bp:5.1f}bp  fitted {pred:5.1f}bp "
          f"({(pred - bp) / bp:+.0%})")
