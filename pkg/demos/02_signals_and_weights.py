"""From prices to a market-neutral weight book, one date at a time.

The blend scores cheap recent losers highest; the regime gate then keeps
only names whose trailing 63-day up-fraction clears 0.60, and the weight
builder z-scores the survivors into a +0.50 / -0.50 long-short book.
"""
import numpy as np

from driftgate.data_model import SyntheticMarketConfig, generate_synthetic
from driftgate.engine import build_signal_bundle
from driftgate.portfolio import build_weights
from driftgate.signals import SignalFrame, SignalParams

panel = generate_synthetic(SyntheticMarketConfig(n_stocks=10, n_days=400, seed=7))
params = SignalParams()  # alpha=0.70, reversal lookback 10, drift window 63
bundle = build_signal_bundle(panel, params)

t = 300
date = panel.calendar.dates[t]
print(f"cross-section on {date} (warmup is {params.warmup_days} days)\n")
print(f"{'ticker':8s} {'value':>7s} {'reversal':>9s} {'base':>7s} "
      f"{'upfrac':>7s} {'gate':>5s} {'edge':>7s} {'weight':>8s}")

edge_row = bundle.base[t] * bundle.mask[t]
edge = SignalFrame(date=date, values={tk: float(edge_row[j])
                                      for j, tk in enumerate(panel.tickers)})
book = build_weights(edge)
for j, ticker in enumerate(panel.tickers):
    gate = bundle.mask[t, j]
    print(f"{ticker:8s} {bundle.value[t, j]:7.3f} {bundle.reversal[t, j]:9.3f} "
          f"{bundle.base[t, j]:7.3f} {bundle.up_frac[t, j]:7.3f} {gate:5.0f} "
          f"{edge_row[j]:7.3f} {book.weights.get(ticker, 0.0):8.4f}")

print(f"\nlong sum {book.long_sum:+.6f}   short sum {book.short_sum:+.6f}   "
      f"net {book.net:+.2e}   gross {book.gross:.6f}")
print("gated-off names carry exactly zero weight; the book is market neutral")
