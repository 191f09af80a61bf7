"""Market-neutral weight construction from a cross-section of edge scores.

Active names (non-missing, non-zero edge) are z-scored with the sample
std; positive z goes long, negative z goes short, each side scaled
proportionally so longs sum to +0.50 and shorts to -0.50.  Degenerate
cross-sections (fewer than 2 actives, zero dispersion, or an empty side)
produce a flat book.  An optional per-name cap redistributes excess
pro-rata within the side.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvariantError
from .signals import SignalFrame

LONG_BUDGET = 0.50
SIDE_TOL = 1e-10


@dataclass(frozen=True)
class WeightFrame:
    """Target weights for one formation date.  Flat book = empty dict."""

    date: np.datetime64
    weights: dict[str, float] = field(default_factory=dict)

    @property
    def gross(self) -> float:
        return float(sum(abs(w) for w in self.weights.values()))

    @property
    def net(self) -> float:
        return float(sum(self.weights.values()))

    @property
    def long_sum(self) -> float:
        return float(sum(w for w in self.weights.values() if w > 0))

    @property
    def short_sum(self) -> float:
        return float(sum(w for w in self.weights.values() if w < 0))

    @property
    def is_flat(self) -> bool:
        return not self.weights


def _cap_side(weights: np.ndarray, cap: float) -> np.ndarray:
    """Redistribute any excess above `cap` pro-rata among uncapped names.

    `weights` are one side's magnitudes summing to the side budget.
    """
    target = weights.sum()
    if cap * len(weights) < target - SIDE_TOL:
        raise ValueError(
            f"cap {cap} infeasible: {len(weights)} names cannot absorb {target:.2f}"
        )
    out = weights.copy()
    capped = np.zeros(len(out), dtype=bool)
    for _ in range(len(out)):
        over = (out > cap + SIDE_TOL) & ~capped
        if not over.any():
            break
        excess = (out[over] - cap).sum()
        out[over] = cap
        capped |= over
        free = ~capped
        if not free.any():
            break
        out[free] += excess * out[free] / out[free].sum()
    return out


def build_weights(edge: SignalFrame, max_weight: float | None = None) -> WeightFrame:
    """Per-date reference implementation of the weighting scheme."""
    tickers = sorted(t for t, v in edge.values.items() if np.isfinite(v) and v != 0.0)
    if len(tickers) < 2:
        return WeightFrame(date=edge.date)
    x = np.array([edge.values[t] for t in tickers])
    sd = float(np.std(x, ddof=1))
    if sd == 0.0:
        return WeightFrame(date=edge.date)
    z = (x - x.mean()) / sd
    pos, neg = z > 0, z < 0
    if not pos.any() or not neg.any():
        return WeightFrame(date=edge.date)
    w = np.zeros(len(z))
    w[pos] = LONG_BUDGET * z[pos] / z[pos].sum()
    w[neg] = -LONG_BUDGET * (-z[neg]) / (-z[neg]).sum()
    if max_weight is not None:
        w[pos] = _cap_side(w[pos], max_weight)
        w[neg] = -_cap_side(-w[neg], max_weight)
    return WeightFrame(date=edge.date, weights={t: float(v) for t, v in zip(tickers, w) if v != 0.0})


def build_weight_matrix(edge: np.ndarray, max_weight: float | None = None,
                        check: bool = False) -> np.ndarray:
    """Vectorized build_weights over every row of an edge matrix.

    Rows are formation dates, columns tickers, NaN = missing.  Flat rows
    come out all-zero.  With `check`, side sums are asserted post-hoc.
    """
    active = np.isfinite(edge) & (edge != 0.0)
    n = active.sum(axis=1)
    filled = np.where(active, edge, 0.0)
    with np.errstate(invalid="ignore", divide="ignore"):
        mean = filled.sum(axis=1) / n
        dev = np.where(active, edge - mean[:, None], 0.0)
        var = (dev * dev).sum(axis=1) / (n - 1)
        sd = np.sqrt(var)
        z = dev / sd[:, None]
    z = np.where(active, z, 0.0)
    z[~(sd > 0)] = 0.0

    zpos = np.where(z > 0, z, 0.0)
    zneg = np.where(z < 0, -z, 0.0)
    pos_total = zpos.sum(axis=1)
    neg_total = zneg.sum(axis=1)
    flat = (n < 2) | ~(sd > 0) | (pos_total == 0.0) | (neg_total == 0.0)
    with np.errstate(invalid="ignore", divide="ignore"):
        weights = LONG_BUDGET * zpos / pos_total[:, None] - LONG_BUDGET * zneg / neg_total[:, None]
    weights[flat] = 0.0
    weights = np.where(np.isfinite(weights), weights, 0.0)

    if max_weight is not None:
        # Cap handling stays per-row; it only runs when a cap is configured.
        live_rows = np.flatnonzero(~flat)
        for t in live_rows:
            row = weights[t]
            pos, neg = row > 0, row < 0
            row[pos] = _cap_side(row[pos], max_weight)
            row[neg] = -_cap_side(-row[neg], max_weight)

    if check:
        live = ~flat
        pos_sum = np.where(weights > 0, weights, 0.0).sum(axis=1)
        neg_sum = np.where(weights < 0, weights, 0.0).sum(axis=1)
        if live.any():
            err = max(
                float(np.abs(pos_sum[live] - LONG_BUDGET).max()),
                float(np.abs(neg_sum[live] + LONG_BUDGET).max()),
            )
            if err > SIDE_TOL:
                raise InvariantError(f"side sums off by {err:.3e} (> {SIDE_TOL})")
    return weights
