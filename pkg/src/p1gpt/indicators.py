"""Technical indicator kernels.

Deterministic, date-aligned implementations of SMA, EMA, RSI (Wilder),
MACD, KDJ and rolling z-score. Every kernel returns an IndicatorSeries
whose values array has the same length as the input; warm-up (or
degenerate) positions are NaN.

Conventions:
- EMA seeds with the first observation.
- RSI uses Wilder smoothing; all-gain -> 100, all-loss -> 0, flat
  (no gains and no losses) -> NaN.
- KDJ seeds K and D at 50 and maps a degenerate high==low window to
  RSV 50.
- z-score uses the population standard deviation and is NaN where the
  window stdev is zero.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class ParameterError(ValueError):
    """Invalid indicator parameter (e.g. window=0, fast >= slow)."""


@dataclass
class IndicatorSeries:
    """Date-aligned indicator values; NaN marks warm-up/undefined points."""

    values: np.ndarray
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)

    def __len__(self) -> int:
        return len(self.values)

    def defined(self, i: int) -> bool:
        return not np.isnan(self.values[i])

    def last(self) -> float:
        """Most recent value (may be NaN)."""
        return float(self.values[-1]) if len(self.values) else float("nan")


def _as_array(closes) -> np.ndarray:
    return np.asarray(list(closes), dtype=float)


def sma(closes, window: int) -> IndicatorSeries:
    """Simple moving average; value[i] = mean(closes[i-window+1 .. i])."""
    if window < 1:
        raise ParameterError(f"sma window must be >= 1, got {window}")
    x = _as_array(closes)
    out = np.full(len(x), np.nan)
    for i in range(window - 1, len(x)):
        out[i] = np.mean(x[i - window + 1 : i + 1])
    return IndicatorSeries(out, {"window": window})


def ema(closes, span: int) -> IndicatorSeries:
    """Exponential moving average, alpha = 2/(span+1), seeded with closes[0]."""
    if span < 1:
        raise ParameterError(f"ema span must be >= 1, got {span}")
    x = _as_array(closes)
    out = np.empty(len(x))
    if len(x) == 0:
        return IndicatorSeries(out, {"span": span})
    alpha = 2.0 / (span + 1)
    out[0] = x[0]
    for i in range(1, len(x)):
        out[i] = alpha * x[i] + (1 - alpha) * out[i - 1]
    return IndicatorSeries(out, {"span": span})


def rsi(closes, period: int = 14) -> IndicatorSeries:
    """Relative Strength Index with Wilder smoothing.

    First average gain/loss are simple means over the first `period`
    moves; afterwards avg = (prev*(period-1) + current)/period. The
    first defined value sits at index `period`.
    """
    if period < 1:
        raise ParameterError(f"rsi period must be >= 1, got {period}")
    x = _as_array(closes)
    out = np.full(len(x), np.nan)
    if len(x) < period + 1:
        return IndicatorSeries(out, {"period": period})
    moves = np.diff(x)
    gains = np.where(moves > 0, moves, 0.0)
    losses = np.where(moves < 0, -moves, 0.0)
    avg_gain = float(np.mean(gains[:period]))
    avg_loss = float(np.mean(losses[:period]))
    out[period] = _rsi_value(avg_gain, avg_loss)
    for i in range(period + 1, len(x)):
        avg_gain = (avg_gain * (period - 1) + gains[i - 1]) / period
        avg_loss = (avg_loss * (period - 1) + losses[i - 1]) / period
        out[i] = _rsi_value(avg_gain, avg_loss)
    return IndicatorSeries(out, {"period": period})


def _rsi_value(avg_gain: float, avg_loss: float) -> float:
    # Both zero (flat input): 0/0 ratio, undefined.
    if avg_gain == 0.0 and avg_loss == 0.0:
        return float("nan")
    if avg_loss == 0.0:
        return 100.0
    if avg_gain == 0.0:
        return 0.0
    return 100.0 - 100.0 / (1.0 + avg_gain / avg_loss)


def macd(closes, fast: int = 12, slow: int = 26, signal: int = 9):
    """MACD line, signal line and histogram as an IndicatorSeries triple."""
    if fast >= slow:
        raise ParameterError(f"macd requires fast < slow, got {fast} >= {slow}")
    x = _as_array(closes)
    line = ema(x, fast).values - ema(x, slow).values
    sig = ema(line, signal).values if len(x) else np.empty(0)
    hist = line - sig
    params = {"fast": fast, "slow": slow, "signal": signal}
    return (
        IndicatorSeries(line, params),
        IndicatorSeries(sig, params),
        IndicatorSeries(hist, params),
    )


def kdj(bars, lookback: int = 9, k_smooth: int = 3, d_smooth: int = 3):
    """Stochastic KDJ over Bar objects (needs .high/.low/.close).

    RSV is the close's position in the trailing lookback high-low range
    (partial windows at the front); degenerate range -> 50. K and D are
    recursive means seeded at 50; J = 3K - 2D.
    """
    if lookback < 1:
        raise ParameterError(f"kdj lookback must be >= 1, got {lookback}")
    highs = np.array([b.high for b in bars], dtype=float)
    lows = np.array([b.low for b in bars], dtype=float)
    closes = np.array([b.close for b in bars], dtype=float)
    n = len(closes)
    k = np.empty(n)
    d = np.empty(n)
    prev_k, prev_d = 50.0, 50.0
    for i in range(n):
        lo = np.min(lows[max(0, i - lookback + 1) : i + 1])
        hi = np.max(highs[max(0, i - lookback + 1) : i + 1])
        rsv = 50.0 if hi == lo else 100.0 * (closes[i] - lo) / (hi - lo)
        prev_k = ((k_smooth - 1) * prev_k + rsv) / k_smooth
        prev_d = ((d_smooth - 1) * prev_d + prev_k) / d_smooth
        k[i] = prev_k
        d[i] = prev_d
    j = 3 * k - 2 * d
    params = {"lookback": lookback, "k_smooth": k_smooth, "d_smooth": d_smooth}
    return IndicatorSeries(k, params), IndicatorSeries(d, params), IndicatorSeries(j, params)


def rolling_zscore(closes, window: int = 20) -> IndicatorSeries:
    """(close - rolling mean) / rolling population stdev; NaN when stdev is 0."""
    if window < 2:
        raise ParameterError(f"zscore window must be >= 2, got {window}")
    x = _as_array(closes)
    out = np.full(len(x), np.nan)
    for i in range(window - 1, len(x)):
        w = x[i - window + 1 : i + 1]
        sd = np.std(w)
        if sd > 0:
            out[i] = (x[i] - np.mean(w)) / sd
    return IndicatorSeries(out, {"window": window})
